import numpy as np
import pytest

from stls import (
    NongenericTlsError,
    UnsupportedStructureError,
    err_bound_rwnn,
    extract_beta,
    logdet_tls,
    plain_tls,
    relative_error,
)
from stls.model import FixedMask, Toeplitz


def random_rank_deficient(rng, m, n, rank):
    u = rng.standard_normal((m, rank))
    v = rng.standard_normal((rank, n))
    return u @ v


# ------------------------------------------------------------------ plain_tls


def test_plain_tls_diagonal():
    sol = plain_tls(np.diag([2.0, 1.0]), target_rank=1)
    assert np.allclose(sol.a_hat, np.diag([2.0, 0.0]), atol=1e-12)
    assert np.linalg.norm(sol.e_hat) == pytest.approx(1.0, abs=1e-12)
    assert sol.diagnostics["rank"] == 1
    assert sol.diagnostics["converged"] is True


def test_plain_tls_consistent_system_recovers_beta():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((30, 4))
    beta = np.array([1.5, -2.0, 0.25, 3.0])
    a_bar = np.column_stack([x, x @ beta])
    sol = plain_tls(a_bar)
    assert np.linalg.norm(sol.e_hat) < 1e-10
    assert sol.beta == pytest.approx(beta, abs=1e-8)


def test_plain_tls_error_norm_is_sigma_min():
    rng = np.random.default_rng(1)
    a_bar = rng.standard_normal((20, 5))
    sol = plain_tls(a_bar)
    s = np.linalg.svd(a_bar, compute_uv=False)
    assert np.linalg.norm(sol.e_hat) == pytest.approx(s[-1], rel=1e-12)
    assert relative_error(a_bar, sol.a_hat) == pytest.approx(1.0, abs=1e-12)


def test_plain_tls_is_eckart_young_optimal():
    # no sampled rank-(N-1) candidate may beat the truncated SVD
    rng = np.random.default_rng(2)
    a_bar = rng.standard_normal((12, 6))
    best = np.linalg.norm(plain_tls(a_bar).e_hat)
    for _ in range(50):
        cand = random_rank_deficient(rng, 12, 6, 5)
        assert np.linalg.norm(a_bar - cand) >= best - 1e-9


def test_plain_tls_nullspace_annihilates():
    rng = np.random.default_rng(3)
    a_bar = rng.standard_normal((15, 6))
    sol = plain_tls(a_bar)
    assert np.linalg.norm(sol.a_hat @ sol.null_vec) < 1e-10
    assert np.linalg.norm(sol.null_vec) == pytest.approx(1.0, rel=1e-12)


def test_plain_tls_rejects_constraints():
    with pytest.raises(UnsupportedStructureError):
        plain_tls(np.eye(3), structure=FixedMask([[0, 0]]))
    with pytest.raises(UnsupportedStructureError):
        plain_tls(np.eye(3), structure=Toeplitz())


def test_plain_tls_target_rank_out_of_range():
    with pytest.raises(ValueError):
        plain_tls(np.eye(3), target_rank=0)
    with pytest.raises(ValueError):
        plain_tls(np.eye(3), target_rank=4)


# --------------------------------------------------------------- extract_beta


def test_extract_beta_two_vector():
    assert extract_beta(np.array([3.0, -4.0])) == pytest.approx([0.75])


def test_extract_beta_zero_last_coordinate():
    with pytest.raises(NongenericTlsError):
        extract_beta(np.array([1.0, 0.0]))
    with pytest.raises(NongenericTlsError):
        extract_beta(np.zeros(3))


def test_extract_beta_round_trip():
    rng = np.random.default_rng(4)
    beta = rng.standard_normal(7)
    v = np.append(beta, -1.0)
    v /= np.linalg.norm(v)
    assert extract_beta(v) == pytest.approx(beta, abs=1e-10)


def test_extract_beta_scalar_input_rejected():
    with pytest.raises(ValueError):
        extract_beta(np.array([1.0]))


# ----------------------------------------------------------------- logdet_tls


def test_logdet_tls_diag_example():
    sol = logdet_tls(np.diag([3.0, 1.0]))
    x = 0.5 * (3.0 + np.sqrt(9.0 - 1.0))
    assert np.allclose(sol.a_hat, np.diag([x, 0.0]), atol=1e-12)
    assert np.linalg.norm(sol.e_hat) == pytest.approx(np.hypot(3.0 - x, 1.0), rel=1e-12)
    assert sol.alpha == pytest.approx(0.25)
    assert sol.diagnostics["rank"] == 1
    assert sol.diagnostics["zeroed"] == 1


def test_logdet_tls_drops_exactly_one_value_generically():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a_bar = rng.standard_normal((9, 6))
        sol = logdet_tls(a_bar)
        assert sol.diagnostics["rank"] == 5
        assert sol.diagnostics["zeroed"] == 1


def test_logdet_tls_equal_spectrum_zeroes_everything():
    # every singular value sits on the kill boundary -> zero estimate
    sol = logdet_tls(2.0 * np.eye(4))
    assert np.allclose(sol.a_hat, 0.0, atol=1e-12)
    assert sol.diagnostics["rank"] == 0
    assert sol.diagnostics["zeroed"] == 4


def test_logdet_tls_rank_deficient_input_unchanged():
    a_bar = np.diag([2.0, 1.0, 0.0])
    sol = logdet_tls(a_bar)
    assert np.array_equal(sol.a_hat, a_bar)
    assert sol.alpha == 0.0
    assert sol.diagnostics["zeroed"] == 0


def test_logdet_tls_error_close_to_optimal():
    # relative error stays within a few percent of the TLS optimum on
    # well-conditioned random input
    rng = np.random.default_rng(6)
    scores = [relative_error(a, logdet_tls(a).a_hat)
              for a in (rng.standard_normal((30, 30)) for _ in range(10))]
    assert all(s >= 1.0 - 1e-12 for s in scores)
    assert np.mean(scores) <= 1.05


def test_logdet_tls_error_within_predicted_bound():
    rng = np.random.default_rng(7)
    for _ in range(10):
        a_bar = rng.standard_normal((15, 8))
        s = np.linalg.svd(a_bar, compute_uv=False)
        err2 = np.linalg.norm(logdet_tls(a_bar).e_hat) ** 2
        assert err2 <= err_bound_rwnn(s) * (1 + 1e-6)
