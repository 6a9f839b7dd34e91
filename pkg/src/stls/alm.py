"""Augmented-Lagrangian solvers for rank reduction under structured errors.

The convex core minimizes  ||A||_* + alpha * ||W o E||_F^2  subject to
Abar = A + E and the structure constraints on E, by inexact ALM: one sweep of
coordinate updates per multiplier update with a geometrically growing penalty.
alm_weighted_nn_stls solves the same problem with the nuclear norm replaced by
||W1 A W2||_*, which is what each round of log-det reweighting requires.

alpha_search finds the largest error-penalty weight alpha whose solution still
meets the target rank (rank is nondecreasing in alpha), and reweighted_stls
alternates alpha_search with weight updates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .baseline import _try_beta
from .linalg import StructureProjector, min_right_singular_vector, numerical_rank
from .model import (
    DegenerateBaselineError,
    SolverConfig,
    StlsError,
    StlsSolution,
    relative_error,
    validate_problem,
)
from .prox import ReweightPair, svt, update_reweight

_CONSEC_CONVERGED = 3  # iterations the residuals must stay below tolerance
_CONSEC_DIVERGED = 50  # iterations the residual may stay 10x above its start
_MAX_EXPAND = 25  # bracket expansions per direction in alpha_search


class RankInfeasibleError(StlsError):
    """No tested penalty weight produced a solution at or below the target rank."""

    category = "rank-infeasible"


class DivergenceError(StlsError):
    """The ALM iteration produced non-finite values or a stuck, inflated residual."""

    category = "divergence"


@dataclass
class AlmState:
    """Working state of one ALM run; also the warm-start carrier.

    d and lambda2 belong to the weighted formulation and stay None in the
    plain one.  mu only ever grows within a run.
    """

    a: np.ndarray
    e: np.ndarray
    d: np.ndarray | None
    lambda1: np.ndarray
    lambda2: np.ndarray | None
    mu: float
    iteration: int


@dataclass(frozen=True)
class AlmReport:
    """Per-run record: residual histories, penalty trace, and the outcome."""

    feas_history: tuple
    coupling_history: tuple
    mu_history: tuple
    iterations: int
    converged: bool
    rank: int


class _StopRule:
    """Convergence / divergence bookkeeping shared by both ALM loops."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.ok = 0
        self.bad = 0
        self.first = None
        self.converged = False

    def update(self, res):
        if not np.isfinite(res):
            raise DivergenceError("non-finite residual in ALM iteration")
        if self.first is None:
            # Residuals are relative to ||Abar||, so a cold start begins at
            # exactly 1; flooring the baseline there keeps warm starts (which
            # begin nearly feasible) from turning an ordinary approach to the
            # new fixed point into a false blow-up alarm.
            self.first = max(res, 1.0)
        self.ok = self.ok + 1 if res <= self.cfg.feas_tol else 0
        if self.ok >= _CONSEC_CONVERGED:
            self.converged = True
        self.bad = self.bad + 1 if res > 10.0 * self.first else 0
        if self.bad >= _CONSEC_DIVERGED:
            raise DivergenceError(
                f"residual stayed 10x above its initial value for {_CONSEC_DIVERGED} iterations"
            )
        return self.converged


def _alm_nn(a_bar, weights, proj, alpha, cfg, init=None):
    m, n = a_bar.shape
    scale = np.linalg.norm(a_bar) or 1.0
    if init is None:
        a = np.zeros((m, n))
        e = np.zeros((m, n))
    else:
        # Warm starts seed the primal variables only.  Multipliers scale like
        # alpha * E, so reusing them against a freshly restarted penalty makes
        # the lam/mu terms dwarf the data and stalls the early iterations.
        a = init.a.copy()
        e = init.e.copy()
    lam = np.zeros((m, n))
    mu = cfg.mu_init
    wpen = 2.0 * alpha * weights**2
    rule = _StopRule(cfg)
    feas_h = []
    mu_h = []
    it = 0
    for it in range(1, cfg.alm_max_iters + 1):
        try:
            a = svt(a_bar - e + lam / mu, 1.0 / mu)
        except ValueError as exc:
            # Finite-but-huge iterates can overflow to inf in the shrinkage
            # input before the residual check sees them.
            raise DivergenceError(f"iterate overflowed: {exc}") from exc
        e = proj((lam + mu * (a_bar - a)) / (wpen + mu))
        r = a_bar - a - e
        lam = lam + mu * r
        res = np.linalg.norm(r) / scale
        feas_h.append(res)
        mu_h.append(mu)
        if rule.update(res):
            break
        mu *= cfg.mu_growth
    rank = numerical_rank(np.linalg.svd(a, compute_uv=False), cfg.rank_tol)
    state = AlmState(a, e, None, lam, None, mu, it)
    report = AlmReport(tuple(feas_h), (), tuple(mu_h), it, rule.converged, rank)
    return state, report


def _alm_weighted(a_bar, weights, proj, rw, alpha, cfg, init=None):
    m, n = a_bar.shape
    w1, w2 = rw.w1, rw.w2
    # The A-update solves A + W1^2 A W2^2 = C.  W1, W2 are fixed for the whole
    # run, so diagonalize once and each solve is two basis changes plus an
    # element-wise division (identical to the general Sylvester solve).
    s1, p1 = np.linalg.eigh(w1)
    s2, p2 = np.linalg.eigh(w2)
    denom = 1.0 + np.multiply.outer(s1**2, s2**2)
    scale = np.linalg.norm(a_bar) or 1.0
    if init is None:
        a = np.zeros((m, n))
        e = np.zeros((m, n))
        d = np.zeros((m, n))
    else:
        # Primal-only warm start, as in _alm_nn.
        a = init.a.copy()
        e = init.e.copy()
        d = init.d.copy() if init.d is not None else w1 @ a @ w2
    lam1 = np.zeros((m, n))
    lam2 = np.zeros((m, n))
    mu = cfg.mu_init
    wpen = 2.0 * alpha * weights**2
    rule = _StopRule(cfg)
    feas_h = []
    coup_h = []
    mu_h = []
    it = 0
    for it in range(1, cfg.alm_max_iters + 1):
        try:
            d = svt(w1 @ a @ w2 - lam2 / mu, 1.0 / mu)
        except ValueError as exc:
            # Same overflow guard as the plain loop.
            raise DivergenceError(f"iterate overflowed: {exc}") from exc
        e = proj((lam1 + mu * (a_bar - a)) / (wpen + mu))
        c = (lam1 + w1 @ lam2 @ w2) / mu + (a_bar - e) + w1 @ d @ w2
        a = p1 @ ((p1.T @ c @ p2) / denom) @ p2.T
        r1 = a_bar - a - e
        r2 = d - w1 @ a @ w2
        lam1 = lam1 + mu * r1
        lam2 = lam2 + mu * r2
        res1 = np.linalg.norm(r1) / scale
        res2 = np.linalg.norm(r2) / scale
        feas_h.append(res1)
        coup_h.append(res2)
        mu_h.append(mu)
        if rule.update(max(res1, res2)):
            break
        mu *= cfg.mu_growth
    rank = numerical_rank(np.linalg.svd(a, compute_uv=False), cfg.rank_tol)
    state = AlmState(a, e, d, lam1, lam2, mu, it)
    report = AlmReport(tuple(feas_h), tuple(coup_h), tuple(mu_h), it, rule.converged, rank)
    return state, report


def _to_solution(state, report, alpha, extra=None):
    null_vec = min_right_singular_vector(state.a)
    diag = {
        "alpha": float(alpha),
        "iterations": report.iterations,
        "feas_residual": report.feas_history[-1] if report.feas_history else 0.0,
        "rank": report.rank,
        "converged": report.converged,
    }
    if report.coupling_history:
        diag["coupling_residual"] = report.coupling_history[-1]
    if extra:
        diag.update(extra)
    return StlsSolution(state.a, state.e, null_vec, _try_beta(null_vec), alpha, diag)


def alm_nn_stls(problem, alpha, config=None, init=None):
    """Solve min ||A||_* + alpha ||W o E||_F^2 s.t. Abar = A + E, E structured.

    Inexact ALM: per iteration a singular-value shrinkage step on A, a
    closed-form weighted step on E followed by the structure projection, a
    multiplier update, and geometric penalty growth.  `init` warm-starts the
    primal variables from a previous AlmState; multipliers and the penalty
    schedule restart every run.
    """
    cfg = config if config is not None else SolverConfig()
    p = validate_problem(problem)
    proj = StructureProjector(p.structure, p.a_bar.shape)
    state, report = _alm_nn(p.a_bar, p.weights, proj, float(alpha), cfg, init)
    return _to_solution(state, report, float(alpha)), report


def alm_weighted_nn_stls(problem, rw, alpha, config=None, init=None):
    """Solve min ||W1 A W2||_* + alpha ||W o E||_F^2 under the same constraints.

    The extra splitting variable D = W1 A W2 gets the shrinkage step; A then
    solves the Sylvester system A + W1^2 A W2^2 = C.
    """
    cfg = config if config is not None else SolverConfig()
    p = validate_problem(problem)
    proj = StructureProjector(p.structure, p.a_bar.shape)
    state, report = _alm_weighted(p.a_bar, p.weights, proj, rw, float(alpha), cfg, init)
    return _to_solution(state, report, float(alpha)), report


def _zero_data_solution(p):
    zeros = np.zeros_like(p.a_bar)
    report = AlmReport((), (), (), 0, True, 0)
    state = AlmState(zeros, zeros.copy(), None, zeros.copy(), None, 1.0, 0)
    return 1.0, _to_solution(state, report, 1.0), report


def _alpha_search_full(problem, rw, cfg):
    p = validate_problem(problem)
    s = np.linalg.svd(p.a_bar, compute_uv=False)
    s_top = float(s[0]) if s.size else 0.0
    if s_top <= 0:
        return _zero_data_solution(p)
    # Start at the weight that exactly removes the smallest singular value in
    # the unconstrained case; floor the scale when a_bar is already deficient.
    alpha0 = 1.0 / (2.0 * max(float(s[-1]), cfg.rank_tol * s_top))
    proj = StructureProjector(p.structure, p.a_bar.shape)
    warm = {"state": None}

    def probe(alpha):
        try:
            if rw is None:
                state, report = _alm_nn(p.a_bar, p.weights, proj, alpha, cfg, warm["state"])
            else:
                state, report = _alm_weighted(
                    p.a_bar, p.weights, proj, rw, alpha, cfg, warm["state"]
                )
        except DivergenceError:
            # A blown-up run proves nothing converges at this alpha from this
            # start; treat the point as infeasible and keep the last good
            # warm state for the next probe.
            return None, None
        warm["state"] = state
        return state, report

    def feasible(report):
        # Only a converged run is evidence: an iterate cut off at
        # alm_max_iters can sit at a low rank purely because it has not yet
        # traveled to its (higher-rank) fixed point.
        return report is not None and report.converged and report.rank <= p.target_rank

    best = None  # (alpha, state, report) with the largest feasible alpha
    lo = hi = None
    state, report = probe(alpha0)
    if feasible(report):
        best = (alpha0, state, report)
        lo = alpha0
        cur = alpha0
        for _ in range(_MAX_EXPAND):
            cur *= cfg.alpha_bracket_factor
            state, report = probe(cur)
            if feasible(report):
                best = (cur, state, report)
                lo = cur
            else:
                hi = cur
                break
    else:
        hi = alpha0
        cur = alpha0
        for _ in range(_MAX_EXPAND):
            cur /= cfg.alpha_bracket_factor
            state, report = probe(cur)
            if feasible(report):
                best = (cur, state, report)
                lo = cur
                break
            hi = cur
    if best is None:
        raise RankInfeasibleError(
            f"no penalty weight gave numerical rank <= {p.target_rank} "
            f"(tried down to alpha = {hi:.3e})"
        )
    if hi is not None:
        # Bisect on log(alpha): rank is nondecreasing in alpha, and alpha is a
        # positive scale parameter, so the geometric midpoint is the natural
        # cut.  Alpha is a smooth hyperparameter away from the rank
        # transition, so stop once the bracket is resolved to 0.1% — probes
        # below that resolution change the solution less than the solver
        # tolerance does.
        for _ in range(cfg.alpha_bisect_iters):
            mid = float(np.sqrt(lo * hi))
            state, report = probe(mid)
            if feasible(report):
                lo = mid
                if mid > best[0]:
                    best = (mid, state, report)
            else:
                hi = mid
            if hi - lo <= 1e-3 * hi:
                break
    alpha, state, report = best
    return alpha, _to_solution(state, report, alpha), report


def alpha_search(problem, rw=None, config=None):
    """Largest penalty weight alpha whose solution meets the target rank.

    Brackets alpha geometrically from 1/(2 sigma_min(Abar)) and bisects,
    warm-starting each solve from the previous one; only runs that converge
    count as feasible.  `rw=None` uses the plain nuclear norm; a ReweightPair
    switches to the weighted solver.  Returns (alpha, solution); if even the
    smallest bracketed alpha misses the target rank, raises
    RankInfeasibleError.
    """
    cfg = config if config is not None else SolverConfig()
    alpha, sol, _ = _alpha_search_full(problem, rw, cfg)
    return alpha, sol


def reweighted_stls(problem, config=None):
    """Rank-targeted structured TLS with log-det reweighting.

    Round 0 solves the plain nuclear-norm relaxation at the largest feasible
    alpha; each later round reweights by the current iterate and re-runs the
    search.  Returns the final round's solution, with per-round alpha, rank,
    and relative error recorded under diagnostics["rounds"].

    A round-0 failure is fatal (there is no solution at all), but a
    rank-infeasible refinement round just ends the refinement: the sharpened
    weights can push the solver's residual floor above feas_tol so that no
    penalty produces a run that counts, and the last completed round is a
    valid solution — discarding it for a failed polish would help nobody.
    Early stops are recorded under diagnostics["stopped_early"].
    """
    cfg = config if config is not None else SolverConfig()
    p = validate_problem(problem)
    m, n = p.a_bar.shape
    rw = None
    rounds = []
    alpha, sol, report = None, None, None
    stopped = None
    for k in range(cfg.max_reweights + 1):
        try:
            alpha, sol, report = _alpha_search_full(p, rw, cfg)
        except RankInfeasibleError as exc:
            if k == 0:
                raise
            stopped = {"round": k, "reason": str(exc)}
            break
        entry = {
            "round": k,
            "alpha": alpha,
            "rank": sol.diagnostics["rank"],
            "iterations": sol.diagnostics["iterations"],
        }
        try:
            entry["relative_error"] = relative_error(p.a_bar, sol.a_hat)
        except DegenerateBaselineError:
            entry["relative_error"] = None
        rounds.append(entry)
        if k == cfg.max_reweights:
            break
        prev = rw if rw is not None else ReweightPair.identity(m, n)
        rw = update_reweight(prev, sol.a_hat, cfg.delta)
    extra = {"rounds": rounds}
    if stopped is not None:
        extra["stopped_early"] = stopped
    sol = replace(sol, diagnostics={**sol.diagnostics, **extra})
    return sol, report
