"""Repeatable benchmark experiments over randomized problem instances.

Each experiment sweeps one variable (matrix size, outlier magnitude, or noise
level), runs seeded independent trials, and emits flat TrialRecords.  Trial
seeds are a pure hash of (master seed, experiment, sweep value, trial index),
so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import hashlib
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .alm import reweighted_stls
from .baseline import logdet_tls
from .heterogeneity import NonIdentifiableWarning, solve_noiseless, solve_noisy, synthesize
from .linalg import min_right_singular_vector
from .model import FixedMask, SolverConfig, StlsError, StlsProblem, Toeplitz, relative_error

log = logging.getLogger(__name__)

EXPERIMENTS = ("fig1a", "fig1b", "fig2a", "fig2b", "fig3", "hetero")

_DEFAULT_SIZES = {
    "fig1a": (10, 20, 30),
    "fig1b": (10, 20, 30),
    "fig2a": (10, 20),
    "fig2b": (10, 20),
    "fig3": (1, 5, 10, 20),
    "hetero": (0.005, 0.01, 0.02, 0.05),
}

# Outlier-experiment geometry: a square matrix with free error blocks on the
# diagonal, a small base noise on free entries, sparse outliers on top of it,
# and a tiny weight on the (known) outlier positions.
_FIG3_SIZE = 20
_FIG3_BLOCK = 5
_FIG3_OUTLIER_FRAC = 0.05
_FIG3_BASE_NOISE = 0.02
_FIG3_OUTLIER_WEIGHT = 0.01

_HETERO_DIMS = (14, 2, 6)

RECORD_HEADER = "experiment,n,trial,method,metric,value,wall_time"


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment request.

    `sizes` defaults to a per-experiment sweep; `config` left as None means
    each experiment uses its own solver defaults (notably, hetero trials keep
    the masked-system tolerances of solve_noisy instead of the generic ones).
    """

    name: str
    sizes: tuple = None
    trials: int = 20
    seed: int = 0
    config: SolverConfig | None = None
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.name!r}; choose from {EXPERIMENTS}")
        sizes = _DEFAULT_SIZES[self.name] if self.sizes is None else tuple(self.sizes)
        if not sizes:
            raise ValueError("sizes must be nonempty")
        object.__setattr__(self, "sizes", sizes)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class TrialRecord:
    """One measurement: experiment, sweep value, trial, method, metric, value, seconds."""

    experiment: str
    n: float
    trial: int
    method: str
    metric: str
    value: float
    wall_time: float


def trial_seed(master_seed, experiment, n, trial):
    """Deterministic per-trial seed, independent of execution order."""
    key = f"{master_seed}|{experiment}|{format(float(n), '.12g')}|{trial}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def _nn_and_rw(problem, cfg):
    # Round 0 of the reweighted run *is* the plain nuclear-norm solution, so
    # one call yields both numbers.
    sol, _ = reweighted_stls(problem, cfg)
    rounds = sol.diagnostics["rounds"]
    return [
        ("NN", "relative_error", rounds[0]["relative_error"]),
        ("RW-NN", "relative_error", relative_error(problem.a_bar, sol.a_hat)),
    ]


def _trial_fig1a(n, rng, cfg):
    a_bar = rng.standard_normal((int(n), int(n)))
    return _nn_and_rw(StlsProblem(a_bar), cfg)


def _trial_fig1b(n, rng, cfg):
    a_bar = rng.standard_normal((int(n), int(n)))
    sol = logdet_tls(a_bar)
    return [("LOGDET", "relative_error", relative_error(a_bar, sol.a_hat))]


def _trial_fig2a(n, rng, cfg):
    n = int(n)
    a_bar = rng.standard_normal((n, n))
    fixed = rng.random((n, n)) < 0.5
    return _nn_and_rw(StlsProblem(a_bar, FixedMask.from_bool(fixed)), cfg)


def _trial_fig2b(n, rng, cfg):
    n = int(n)
    c = rng.standard_normal(2 * n - 1)
    a_bar = sla.toeplitz(c[:n], np.r_[c[0], c[n:]])
    return _nn_and_rw(StlsProblem(a_bar, Toeplitz()), cfg)


def make_outlier_problem(magnitude, rng):
    """Planted low-rank matrix, block-diagonal free errors, sparse heavy outliers.

    Returns (problem, true nullspace vector).  Outlier positions are known and
    carry weight 0.01, mimicking measurements flagged as unreliable.
    """
    size, block = _FIG3_SIZE, _FIG3_BLOCK
    g = rng.standard_normal((size, size))
    u, s, vt = np.linalg.svd(g)
    s[-1] = 0.0
    a0 = (u * s) @ vt
    v_true = min_right_singular_vector(a0)
    free = np.zeros((size, size), dtype=bool)
    for b0 in range(0, size, block):
        free[b0 : b0 + block, b0 : b0 + block] = True
    free_idx = np.argwhere(free)
    scale = np.linalg.norm(a0) / size
    e = np.zeros((size, size))
    e[free] = _FIG3_BASE_NOISE * scale * rng.standard_normal(len(free_idx))
    n_out = max(1, round(_FIG3_OUTLIER_FRAC * len(free_idx)))
    pick = free_idx[rng.choice(len(free_idx), size=n_out, replace=False)]
    signs = rng.choice([-1.0, 1.0], size=n_out)
    e[pick[:, 0], pick[:, 1]] += magnitude * scale * signs
    weights = np.ones((size, size))
    weights[pick[:, 0], pick[:, 1]] = _FIG3_OUTLIER_WEIGHT
    problem = StlsProblem(a0 + e, FixedMask.from_bool(~free), weights, target_rank=size - 1)
    return problem, v_true


def _trial_fig3(magnitude, rng, cfg):
    problem, v_true = make_outlier_problem(float(magnitude), rng)
    sol, _ = reweighted_stls(problem, cfg)
    return [
        ("RW-NN", "cosine", float(abs(v_true @ sol.null_vec))),
        ("SVD", "cosine", float(abs(v_true @ min_right_singular_vector(problem.a_bar)))),
    ]


def _trial_hetero(noise, seed, cfg):
    m, k, n = _HETERO_DIMS
    inst = synthesize(m, k, n, noise_level=float(noise), seed=seed)
    noisy = solve_noisy(inst, config=cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonIdentifiableWarning)
        plain = solve_noiseless(inst)
    return [
        ("RW-NN", "cosine", noisy.diagnostics["cosine"]),
        ("SVD", "cosine", plain.diagnostics["cosine"]),
    ]


_TRIALS = {
    "fig1a": _trial_fig1a,
    "fig1b": _trial_fig1b,
    "fig2a": _trial_fig2a,
    "fig2b": _trial_fig2b,
    "fig3": _trial_fig3,
}


def run_experiment(spec):
    """Run every (sweep value, trial) cell of `spec` and return the TrialRecords.

    Failed trials are logged and skipped; remaining trials are unaffected.
    With workers > 1 the trials run on a thread pool (the heavy lifting is in
    LAPACK, which releases the GIL); records come back in deterministic order.
    """
    tasks = [(n, t) for n in spec.sizes for t in range(spec.trials)]

    def one(task):
        n, t = task
        seed = trial_seed(spec.seed, spec.name, n, t)
        start = time.perf_counter()
        try:
            if spec.name == "hetero":
                pairs = _trial_hetero(n, seed, spec.config)
            else:
                cfg = spec.config if spec.config is not None else SolverConfig()
                pairs = _TRIALS[spec.name](n, np.random.default_rng(seed), cfg)
        except StlsError as exc:
            log.warning("%s n=%s trial=%d failed: %s", spec.name, n, t, exc)
            pairs = []
        wall = time.perf_counter() - start
        return [
            TrialRecord(spec.name, float(n), t, method, metric, float(value), wall)
            for method, metric, value in pairs
        ]

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(one, tasks))
    else:
        chunks = [one(task) for task in tasks]
    return [rec for chunk in chunks for rec in chunk]


def write_records(path, records):
    """Write TrialRecords as CSV (17 significant digits on the value column)."""
    with open(path, "w") as fh:
        fh.write(RECORD_HEADER + "\n")
        for r in records:
            fh.write(
                f"{r.experiment},{format(r.n, '.12g')},{r.trial},{r.method},"
                f"{r.metric},{r.value:.17g},{r.wall_time:.6f}\n"
            )


def summarize(records):
    """Per (sweep value, method) mean/min/90th-percentile of the recorded metric."""
    groups = {}
    for r in records:
        groups.setdefault((r.n, r.method, r.metric), []).append(r.value)
    out = []
    for (n, method, metric), vals in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        arr = np.asarray(vals)
        out.append(
            {
                "n": n,
                "method": method,
                "metric": metric,
                "trials": len(vals),
                "mean": float(arr.mean()),
                "min": float(arr.min()),
                "median": float(np.median(arr)),
                "q90": float(np.quantile(arr, 0.9)),
            }
        )
    return out
