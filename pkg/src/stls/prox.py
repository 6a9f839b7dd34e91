"""Thresholding operators and the log-det reweighting machinery.

svt is the proximal map of the nuclear norm; log_threshold_* are the
closed-form minimizers of the scalar/spectral log penalty, which is what one
round of log-det majorization reduces to.  update_reweight produces the next
weight pair from the current low-rank iterate, and the err_bound_* helpers
evaluate the predicted error of the plain and reweighted relaxations from a
spectrum alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import inv_sqrt_psd, svd
from .model import DegenerateIterateError, _readonly


def svt(a, gamma):
    """Singular value thresholding: shrink every singular value by gamma, clamp at 0."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    f = svd(a)
    s = np.maximum(f.s - gamma, 0.0)
    return (f.u * s) @ f.vt


def _log_threshold_core(y, alpha, delta):
    # Local minimizer of 0.5*(x - y)**2 + alpha*log(delta + |x|) in the basin
    # on y's side of zero; the quadratic-formula roots below solve the
    # stationarity condition (x - y) + alpha*sign(x)/(delta + |x|) = 0.  With
    # delta = 0 the expressions reduce to the familiar 0.5*(y +- sqrt(y^2-4a)).
    # |y| <= 2*sqrt(alpha) has no such basin, so the output collapses to 0;
    # the boundary |y| = 2*sqrt(alpha) is mapped to 0 as well.
    thr = 2.0 * np.sqrt(alpha)
    dpos = np.clip((y - delta) ** 2 - 4.0 * (alpha - y * delta), 0.0, None)
    dneg = np.clip((y + delta) ** 2 - 4.0 * (alpha + y * delta), 0.0, None)
    pos = 0.5 * ((y - delta) + np.sqrt(dpos))
    neg = 0.5 * ((y + delta) - np.sqrt(dneg))
    return np.where(y > thr, pos, np.where(y < -thr, neg, 0.0))


def log_threshold_scalar(y, alpha, delta=0.0):
    """Closed-form log-penalty thresholding of a scalar.

    Returns the local minimizer of 0.5*(x - y)**2 + alpha*log(delta + |x|)
    lying on the same side of zero as y, or 0 when |y| <= 2*sqrt(alpha).
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return float(_log_threshold_core(np.asarray(y, dtype=float), alpha, delta))


def log_threshold_spectral(z, alpha, delta=0.0):
    """Apply log-penalty thresholding to every singular value of z."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    f = svd(z)
    x = _log_threshold_core(f.s, alpha, delta)
    return (f.u * x) @ f.vt


@dataclass(frozen=True)
class ReweightPair:
    """Row/column weight matrices (W1, W2); symmetric positive definite."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        for name in ("w1", "w2"):
            w = np.asarray(getattr(self, name), dtype=float)
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValueError(f"{name} must be square, got shape {w.shape}")
            scale = max(1.0, float(np.abs(w).max()))
            if float(np.abs(w - w.T).max()) > 1e-10 * scale:
                raise ValueError(f"{name} must be symmetric")
            try:
                np.linalg.cholesky(w)
            except np.linalg.LinAlgError as exc:
                raise ValueError(f"{name} must be positive definite") from exc
            object.__setattr__(self, name, _readonly(w))

    @classmethod
    def identity(cls, m, n):
        return cls(np.eye(m), np.eye(n))


def update_reweight(pair, a, delta):
    """Next weight pair from the current iterate.

    With B = W1 @ A @ W2 = U S V^T, the optimal auxiliary blocks are
    Y = W1^-1 U S U^T W1^-1 and Z = W2^-1 V S V^T W2^-1, and the new weights
    are (Y + d*I)^(-1/2), (Z + d*I)^(-1/2) with d = delta * max(S) so the
    regularizer tracks the iterate's scale.  A zero iterate is signalled.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    a = np.asarray(a, dtype=float)
    b = pair.w1 @ a @ pair.w2
    f = svd(b)
    top = float(f.s[0]) if f.s.size else 0.0
    if top <= 0:
        raise DegenerateIterateError("iterate is zero; reweighting is undefined")
    w1_inv = np.linalg.inv(pair.w1)
    w2_inv = np.linalg.inv(pair.w2)
    t1 = w1_inv @ f.u
    t2 = w2_inv @ f.vt.T
    y = (t1 * f.s) @ t1.T
    z = (t2 * f.s) @ t2.T
    d = delta * top
    return ReweightPair(inv_sqrt_psd(y, d), inv_sqrt_psd(z, d))


def _check_spectrum(sigma, positive=True):
    s = np.atleast_1d(np.asarray(sigma, dtype=float))
    if s.ndim != 1 or s.size == 0:
        raise ValueError("sigma must be a nonempty 1-D array")
    if positive and not np.all(s > 0):
        raise ValueError("sigma must be strictly positive")
    if not np.all(s >= 0):
        raise ValueError("sigma must be nonnegative")
    if np.any(np.diff(s) > 1e-12 * s[0]):
        raise ValueError("sigma must be sorted in descending order")
    return s


def err_bound_nn(sigma):
    """Predicted squared error of the plain nuclear-norm relaxation: N * sigma_N**2.

    A spectrum that is already rank deficient (sigma_N = 0) costs nothing.
    """
    s = _check_spectrum(sigma, positive=False)
    return float(s.size * s[-1] ** 2)


def err_bound_rwnn(sigma):
    """Predicted squared error of the reweighted relaxation.

    sigma_N**2 * (1 + 0.5 * sum_i (a_i - sqrt(a_i**2 - 1))**2) over the
    retained values, with a_i = sigma_i / sigma_N.  Each term is at most
    1/(2 a_i**2) relative to sigma_N**2, so well-separated spectra give a
    bound close to sigma_N**2 while the plain relaxation pays N * sigma_N**2.
    """
    s = _check_spectrum(sigma)
    a = s[:-1] / s[-1]
    terms = (a - np.sqrt(np.clip(a * a - 1.0, 0.0, None))) ** 2
    return float(s[-1] ** 2 * (1.0 + 0.5 * terms.sum()))
