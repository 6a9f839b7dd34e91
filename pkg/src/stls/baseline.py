"""Unstructured baselines: SVD-truncation TLS and one-shot spectral log thresholding."""

from __future__ import annotations

import numpy as np

from .linalg import min_right_singular_vector, numerical_rank, svd
from .model import StlsError, StlsSolution, Unconstrained
from .prox import _log_threshold_core

_RANK_TOL = 1e-6
_BETA_TOL = 1e-8


class NongenericTlsError(StlsError):
    """The nullspace vector's last coordinate vanishes; no regression read-out."""

    category = "nongeneric-tls"


class UnsupportedStructureError(StlsError):
    """A baseline was asked to respect constraints it cannot handle."""

    category = "unsupported-structure"


def extract_beta(null_vec, tol=_BETA_TOL):
    """Regression coefficients from a nullspace vector of [X | b].

    With null_vec proportional to (beta, -1), returns -null_vec[:-1] / null_vec[-1].
    A (near-)zero last coordinate means the TLS problem has no regression form
    and is signalled as NongenericTlsError.
    """
    v = np.asarray(null_vec, dtype=float).ravel()
    if v.size < 2:
        raise ValueError("null_vec must have at least two entries")
    scale = np.linalg.norm(v)
    if scale == 0 or abs(v[-1]) <= tol * scale:
        raise NongenericTlsError("last nullspace coordinate is (near) zero")
    return -v[:-1] / v[-1]


def _try_beta(null_vec):
    try:
        return extract_beta(null_vec)
    except NongenericTlsError:
        return None


def plain_tls(a_bar, target_rank=None, structure=None):
    """Classical total least squares by SVD truncation.

    Keeps the top `target_rank` (default N - 1) singular triplets of a_bar and
    assigns everything else to the error estimate.  Constrained structures are
    rejected; use the ALM solvers for those.
    """
    if structure is not None and not isinstance(structure, Unconstrained):
        raise UnsupportedStructureError(
            "plain_tls handles unconstrained problems only; use alpha_search or reweighted_stls"
        )
    a_bar = np.asarray(a_bar, dtype=float)
    m, n = a_bar.shape
    r = n - 1 if target_rank is None else int(target_rank)
    if not 1 <= r <= min(m, n):
        raise ValueError(f"target_rank {r} outside [1, {min(m, n)}]")
    f = svd(a_bar)
    a_hat = (f.u[:, :r] * f.s[:r]) @ f.vt[:r]
    e_hat = a_bar - a_hat
    null_vec = min_right_singular_vector(a_hat)
    diag = {
        "rank": numerical_rank(f.s[:r], _RANK_TOL),
        "iterations": 0,
        "feas_residual": 0.0,
        "converged": True,
        "sigma_min": float(f.s[-1]),
    }
    return StlsSolution(a_hat, e_hat, null_vec, _try_beta(null_vec), 0.0, diag)


def logdet_tls(a_bar):
    """One-shot rank reduction by spectral log thresholding.

    Thresholds the spectrum with alpha = sigma_min**2 / 4, which zeroes the
    smallest singular value exactly (boundary case) while shrinking the
    retained ones by at most sigma_min**2 / (2 sigma_i); already rank-deficient
    input is returned unchanged.
    """
    a_bar = np.asarray(a_bar, dtype=float)
    f = svd(a_bar)
    s_min = float(f.s[-1])
    if s_min <= 0:
        alpha = 0.0
        x = f.s.copy()
        a_hat = a_bar.copy()
    else:
        alpha = 0.25 * s_min**2
        x = _log_threshold_core(f.s, alpha, 0.0)
        a_hat = (f.u * x) @ f.vt
    e_hat = a_bar - a_hat
    null_vec = min_right_singular_vector(a_hat)
    diag = {
        "rank": numerical_rank(x, _RANK_TOL),
        "zeroed": int(np.count_nonzero((f.s > 0) & (x == 0))),
        "iterations": 0,
        "feas_residual": 0.0,
        "converged": True,
    }
    return StlsSolution(a_hat, e_hat, null_vec, _try_beta(null_vec), alpha, diag)
