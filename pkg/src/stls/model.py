"""Problem containers, solver configuration, and shared error types.

The solvers in this package estimate a low-rank matrix A and a structured
error matrix E from noisy data Abar, with Abar = A + E, linear constraints
on E, and element-wise error weights.  Everything downstream (baselines,
ALM solvers, the heterogeneity application, the experiment harness) speaks
in terms of the types defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _readonly(a, dtype=float):
    """Copy `a` into a read-only ndarray so frozen records stay frozen."""
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


class StlsError(Exception):
    """Base class for solver failures; `category` is machine-readable."""

    category = "error"


class ProblemValidationError(StlsError):
    """Raised by validate_problem; carries every violation found."""

    category = "invalid-problem"

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(self.violations))


class DegenerateBaselineError(StlsError):
    """Data matrix is exactly rank deficient where full rank is required."""

    category = "degenerate-baseline"


class DegenerateIterateError(StlsError):
    """An iterate collapsed to zero, so reweighting is undefined."""

    category = "degenerate-iterate"


class ErrorStructure:
    """Marker base for linear constraints L(E) = b on the error matrix."""

    __slots__ = ()


@dataclass(frozen=True)
class Unconstrained(ErrorStructure):
    """Every entry of E is free."""


@dataclass(frozen=True)
class Toeplitz(ErrorStructure):
    """E must be constant along each diagonal."""


@dataclass(frozen=True)
class FixedMask(ErrorStructure):
    """Entries (indices[i, 0], indices[i, 1]) of E are pinned to values[i].

    `indices` is a (k, 2) integer array of (row, col) pairs; `values` may be
    a scalar (broadcast to all pinned entries, default 0) or a length-k array.
    """

    indices: np.ndarray
    values: np.ndarray = 0.0

    def __post_init__(self):
        idx = np.array(self.indices, dtype=int).reshape(-1, 2)
        val = np.broadcast_to(np.asarray(self.values, dtype=float), (idx.shape[0],)).copy()
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_bool(cls, mask, values=0.0):
        """Pin every entry where `mask` is truthy."""
        return cls(np.argwhere(np.asarray(mask, dtype=bool)), values)

    @property
    def rows(self):
        return self.indices[:, 0]

    @property
    def cols(self):
        return self.indices[:, 1]


@dataclass(frozen=True)
class GeneralLinear(ErrorStructure):
    """General linear constraints <mats[i], E> = rhs[i] (Frobenius inner product)."""

    mats: np.ndarray
    rhs: np.ndarray = 0.0

    def __post_init__(self):
        mats = np.array(self.mats, dtype=float)
        if mats.ndim == 2:
            mats = mats[None]
        rhs = np.broadcast_to(np.asarray(self.rhs, dtype=float), (mats.shape[0],)).copy()
        mats.setflags(write=False)
        rhs.setflags(write=False)
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "rhs", rhs)


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs shared by every iterative solver.

    mu_growth / mu_init       geometric penalty schedule mu_k = mu_init * mu_growth**k
    delta                     reweighting regularizer, relative to the top singular value
    max_reweights             number of weight updates (0 recovers the plain relaxation)
    alm_max_iters             iteration cap per augmented-Lagrangian run
    feas_tol                  relative feasibility tolerance declaring convergence
    rank_tol                  numerical-rank threshold, relative to the top singular value
    alpha_bracket_factor      geometric expansion factor when bracketing the penalty weight
    alpha_bisect_iters        bisection steps once the penalty weight is bracketed
    """

    mu_growth: float = 1.05
    mu_init: float = 1.0
    delta: float = 1e-4
    max_reweights: int = 3
    alm_max_iters: int = 500
    feas_tol: float = 1e-8
    rank_tol: float = 1e-6
    alpha_bracket_factor: float = 10.0
    alpha_bisect_iters: int = 30

    def __post_init__(self):
        bad = []
        if not self.mu_growth > 1.0:
            bad.append("mu_growth must be > 1")
        if not self.mu_init > 0:
            bad.append("mu_init must be > 0")
        if not self.delta > 0:
            bad.append("delta must be > 0")
        if self.max_reweights < 0:
            bad.append("max_reweights must be >= 0")
        if self.alm_max_iters < 1:
            bad.append("alm_max_iters must be >= 1")
        if not self.feas_tol > 0:
            bad.append("feas_tol must be > 0")
        if not self.rank_tol > 0:
            bad.append("rank_tol must be > 0")
        if not self.alpha_bracket_factor > 1.0:
            bad.append("alpha_bracket_factor must be > 1")
        if self.alpha_bisect_iters < 0:
            bad.append("alpha_bisect_iters must be >= 0")
        if bad:
            raise ValueError("; ".join(bad))


@dataclass(frozen=True)
class StlsProblem:
    """One structured-TLS instance.

    a_bar        observed M x N data matrix
    structure    linear constraints on the error matrix (default Unconstrained)
    weights      element-wise nonnegative error weights (default all ones)
    target_rank  rank the estimate A must not exceed (default N - 1)
    """

    a_bar: np.ndarray
    structure: ErrorStructure = field(default_factory=Unconstrained)
    weights: np.ndarray | None = None
    target_rank: int | None = None

    def __post_init__(self):
        a = np.asarray(self.a_bar, dtype=float)
        if a.ndim != 2:
            raise ProblemValidationError([f"a_bar must be 2-D, got shape {a.shape}"])
        object.__setattr__(self, "a_bar", _readonly(a))
        w = np.ones_like(a) if self.weights is None else np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", _readonly(w))
        r = a.shape[1] - 1 if self.target_rank is None else int(self.target_rank)
        object.__setattr__(self, "target_rank", r)


@dataclass(frozen=True)
class StlsSolution:
    """Solver output: estimates, the nullspace direction, and diagnostics.

    beta is the regression read-out of null_vec when the last coordinate is
    usable, else None.  alpha is the error-penalty weight the solution was
    computed at (0 for the plain SVD baseline).  diagnostics is a flat dict
    with at least rank / iterations / feas_residual / converged.
    """

    a_hat: np.ndarray
    e_hat: np.ndarray
    null_vec: np.ndarray
    beta: np.ndarray | None
    alpha: float
    diagnostics: dict

    def __post_init__(self):
        object.__setattr__(self, "a_hat", _readonly(self.a_hat))
        object.__setattr__(self, "e_hat", _readonly(self.e_hat))
        object.__setattr__(self, "null_vec", _readonly(self.null_vec))
        if self.beta is not None:
            object.__setattr__(self, "beta", _readonly(self.beta))
        object.__setattr__(self, "alpha", float(self.alpha))


def validate_problem(problem):
    """Return `problem` unchanged if well formed, else raise with every violation."""
    v = []
    a = problem.a_bar
    m, n = a.shape
    if a.size == 0:
        v.append("a_bar is empty")
    elif not np.all(np.isfinite(a)):
        v.append("a_bar has non-finite entries")
    if m < n or n < 2:
        v.append(f"m >= n >= 2 required; a_bar is {m}x{n}")
    w = problem.weights
    if w.shape != a.shape:
        v.append(f"weights shape {w.shape} does not match data shape {a.shape}")
    elif not np.all(np.isfinite(w)) or np.any(w < 0):
        v.append("weights must be finite and nonnegative")
    r = problem.target_rank
    if a.size and n >= 2 and not 1 <= r <= n - 1:
        v.append(f"target_rank {r} outside [1, {n - 1}]")
    st = problem.structure
    if isinstance(st, FixedMask):
        if st.indices.size and (
            st.rows.min() < 0 or st.rows.max() >= m or st.cols.min() < 0 or st.cols.max() >= n
        ):
            v.append("FixedMask indices out of range")
        if not np.all(np.isfinite(st.values)):
            v.append("FixedMask values must be finite")
    elif isinstance(st, GeneralLinear):
        if st.mats.shape[1:] != (m, n):
            v.append(f"GeneralLinear constraint shape {st.mats.shape[1:]} does not match data shape {(m, n)}")
        if not (np.all(np.isfinite(st.mats)) and np.all(np.isfinite(st.rhs))):
            v.append("GeneralLinear constraints must be finite")
    elif not isinstance(st, (Unconstrained, Toeplitz)):
        v.append(f"unknown error structure {type(st).__name__}")
    if v:
        raise ProblemValidationError(v)
    return problem


def relative_error(a_bar, a_hat):
    """Frobenius error of the estimate, scaled by the smallest singular value of a_bar.

    The scaling makes 1.0 the score of exact total least squares, so values
    near 1 mean near-optimal error placement.  Raises DegenerateBaselineError
    when a_bar is exactly rank deficient (the scale would vanish).
    """
    a_bar = np.asarray(a_bar, dtype=float)
    s = np.linalg.svd(a_bar, compute_uv=False)
    # Rank-deficient inputs come back with sigma_min at rounding level, not
    # exactly zero; gate on the same eps scale numpy uses for matrix_rank.
    floor = np.finfo(float).eps * max(a_bar.shape) * (s[0] if s.size else 0.0)
    if not np.isfinite(s[-1]) or s[-1] <= floor:
        raise DegenerateBaselineError("smallest singular value of a_bar is zero")
    return float(np.linalg.norm(a_bar - np.asarray(a_hat, dtype=float)) / s[-1])
