"""Dense linear-algebra kernels: SVD helpers, Sylvester solves, structure projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .model import (
    FixedMask,
    GeneralLinear,
    StlsError,
    Toeplitz,
    Unconstrained,
    _readonly,
)

# Above this size the vectorized (Kronecker) solve becomes the bottleneck and
# the triangular substitution takes over.
_KRON_LIMIT = 64


class SylvesterSingularError(StlsError):
    """The linear operator X -> X + B1 X B2 is (numerically) singular."""

    category = "singular-sylvester"

    def __init__(self, message, smallest_pivot):
        self.smallest_pivot = float(smallest_pivot)
        super().__init__(message)


class StructureProjectionError(StlsError):
    """The structure's constraint system is degenerate (e.g. dependent constraints)."""

    category = "degenerate-structure"


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD a = (u * s) @ vt with s sorted descending."""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _readonly(self.u))
        object.__setattr__(self, "s", _readonly(self.s))
        object.__setattr__(self, "vt", _readonly(self.vt))

    @property
    def v(self):
        return self.vt.T

    def compose(self):
        return (self.u * self.s) @ self.vt


def svd(a):
    """Thin SVD of a real matrix.

    Rejects non-finite input up front: some LAPACK builds spin forever when
    handed an inf/nan entry, so this is a hang guard, not just input hygiene.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("svd input has non-finite entries")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return SvdFactors(u, s, vt)


def numerical_rank(s, rank_tol):
    """Count singular values strictly above rank_tol times the largest one."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.size == 0:
        return 0
    top = float(s.max())
    if top <= 0:
        return 0
    return int(np.count_nonzero(s > rank_tol * top))


def min_right_singular_vector(a):
    """Right singular vector of the smallest singular value.

    For a wide matrix the thin SVD has no rows of V beyond the row space, so
    the full decomposition is used there (the trailing rows span the exact
    nullspace).  The sign is fixed so the largest-magnitude entry is positive,
    which makes the result deterministic across runs and BLAS builds.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("input has non-finite entries")
    _, _, vt = np.linalg.svd(a, full_matrices=a.shape[0] < a.shape[1])
    v = vt[-1].copy()
    j = int(np.argmax(np.abs(v)))
    if v[j] < 0:
        v = -v
    return v


def solve_sylvester(b1, b2, c, method=None):
    """Solve X + B1 @ X @ B2 = C for X.

    Small systems (min(M, N) <= 64) go through the vectorized form
    (I + B2.T kron B1) vec(X) = vec(C); larger ones use complex Schur
    decompositions of B1 and B2 followed by column-wise triangular solves.
    `method` may force "kron" or "schur".  A (numerically) singular operator
    raises SylvesterSingularError carrying the smallest pivot seen.
    """
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    c = np.asarray(c, dtype=float)
    if c.ndim != 2:
        raise ValueError(f"c must be 2-D, got shape {c.shape}")
    m, n = c.shape
    if b1.shape != (m, m):
        raise ValueError(f"b1 shape {b1.shape} incompatible with c shape {c.shape}")
    if b2.shape != (n, n):
        raise ValueError(f"b2 shape {b2.shape} incompatible with c shape {c.shape}")
    if method is None:
        method = "kron" if min(m, n) <= _KRON_LIMIT else "schur"
    if method == "kron":
        return _sylvester_kron(b1, b2, c)
    if method == "schur":
        return _sylvester_schur(b1, b2, c)
    raise ValueError(f"unknown method {method!r}")


def _check_pivots(lam1, lam2):
    # The operator's eigenvalues are 1 + lam1_i * lam2_j; any of them near
    # zero means the system is singular.
    prod = np.multiply.outer(lam1, lam2)
    pivots = np.abs(1.0 + prod)
    smallest = float(pivots.min()) if pivots.size else 1.0
    scale = max(1.0, float(np.abs(prod).max())) if prod.size else 1.0
    if smallest <= 1e-12 * scale:
        raise SylvesterSingularError(
            f"Sylvester operator is singular (smallest pivot {smallest:.3e})", smallest
        )


def _sylvester_kron(b1, b2, c):
    m, n = c.shape
    _check_pivots(np.linalg.eigvals(b1), np.linalg.eigvals(b2))
    k = np.eye(m * n) + np.kron(b2.T, b1)
    try:
        x = np.linalg.solve(k, c.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SylvesterSingularError(f"Sylvester solve failed: {exc}", 0.0) from exc
    return x.reshape(m, n, order="F")


def _sylvester_schur(b1, b2, c):
    m, n = c.shape
    t1, q1 = sla.schur(b1, output="complex")
    t2, q2 = sla.schur(b2, output="complex")
    _check_pivots(np.diag(t1), np.diag(t2))
    g = q1.conj().T @ c @ q2
    y = np.zeros((m, n), dtype=complex)
    eye = np.eye(m)
    for j in range(n):
        rhs = g[:, j] - t1 @ (y[:, :j] @ t2[:j, j])
        y[:, j] = sla.solve_triangular(eye + t2[j, j] * t1, rhs, lower=False)
    return (q1 @ y @ q2.conj().T).real


def inv_sqrt_psd(y, delta):
    """Inverse square root (Y + delta*I)**(-1/2) of a symmetric PSD matrix.

    Computed from the symmetric eigendecomposition with eigenvalues clamped
    at zero; `delta` must be positive so the result is always well defined.
    Asymmetry or negative eigenvalues beyond a 1e-10 relative tolerance are
    rejected rather than silently symmetrized away.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise ValueError(f"y must be square, got shape {y.shape}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    scale = max(1.0, float(np.abs(y).max())) if y.size else 1.0
    if y.size and float(np.abs(y - y.T).max()) > 1e-10 * scale:
        raise ValueError("y is not symmetric within tolerance")
    w, p = np.linalg.eigh(0.5 * (y + y.T))
    if w.size and w[0] < -1e-10 * max(1.0, float(w[-1])):
        raise ValueError(f"y has a negative eigenvalue ({w[0]:.3e}); not PSD")
    w = np.clip(w, 0.0, None)
    q = (p / np.sqrt(w + delta)) @ p.T
    return 0.5 * (q + q.T)


class StructureProjector:
    """Frobenius-orthogonal projection onto {E : structure constraints hold}.

    Construction does all per-structure precomputation (diagonal index maps
    for Toeplitz, the factorized constraint Gram matrix for GeneralLinear),
    so one instance can be applied every solver iteration at low cost.
    """

    def __init__(self, structure, shape):
        m, n = shape
        self.shape = (int(m), int(n))
        self.structure = structure
        if isinstance(structure, Unconstrained):
            self._apply = lambda e: e
        elif isinstance(structure, FixedMask):
            if structure.indices.size and (
                structure.rows.min() < 0
                or structure.rows.max() >= m
                or structure.cols.min() < 0
                or structure.cols.max() >= n
            ):
                raise StructureProjectionError("FixedMask indices out of range")
            self._rows = structure.rows
            self._cols = structure.cols
            self._values = structure.values
            self._apply = self._apply_mask
        elif isinstance(structure, Toeplitz):
            cols = np.arange(n)[None, :]
            rows = np.arange(m)[:, None]
            self._offsets = cols - rows + (m - 1)
            self._flat = self._offsets.ravel()
            self._nbins = m + n - 1
            self._counts = np.bincount(self._flat, minlength=self._nbins)
            self._apply = self._apply_toeplitz
        elif isinstance(structure, GeneralLinear):
            mats = structure.mats
            if mats.shape[1:] != self.shape:
                raise StructureProjectionError(
                    f"constraint shape {mats.shape[1:]} does not match {self.shape}"
                )
            gram = np.tensordot(mats, mats, axes=([1, 2], [1, 2]))
            w = np.linalg.eigvalsh(gram)
            if w[-1] <= 0 or w[0] <= 1e-12 * w[-1]:
                raise StructureProjectionError(
                    f"constraint Gram matrix is rank deficient (eigenvalues {w[0]:.3e}..{w[-1]:.3e})"
                )
            self._mats = mats
            self._rhs = structure.rhs
            self._cho = sla.cho_factor(gram)
            self._apply = self._apply_general
        else:
            raise StructureProjectionError(f"unknown error structure {type(structure).__name__}")

    def _apply_mask(self, e):
        out = e.copy()
        out[self._rows, self._cols] = self._values
        return out

    def _apply_toeplitz(self, e):
        sums = np.bincount(self._flat, weights=e.ravel(), minlength=self._nbins)
        return (sums / self._counts)[self._offsets]

    def _apply_general(self, e):
        resid = np.tensordot(self._mats, e, axes=([1, 2], [0, 1])) - self._rhs
        coef = sla.cho_solve(self._cho, resid)
        return e - np.tensordot(coef, self._mats, axes=(0, 0))

    def __call__(self, e):
        e = np.asarray(e, dtype=float)
        if e.shape != self.shape:
            raise ValueError(f"matrix shape {e.shape} does not match projector shape {self.shape}")
        return self._apply(e)


def project_structure(e, structure):
    """One-shot projection of `e` onto the constraint set of `structure`."""
    e = np.asarray(e, dtype=float)
    return StructureProjector(structure, e.shape)(e)
