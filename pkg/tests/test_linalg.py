import numpy as np
import pytest

from stls import (
    FixedMask,
    GeneralLinear,
    SylvesterSingularError,
    Toeplitz,
    Unconstrained,
    inv_sqrt_psd,
    min_right_singular_vector,
    numerical_rank,
    project_structure,
    solve_sylvester,
    svd,
)
from stls.linalg import StructureProjector


def kron_solve(b1, b2, c):
    """Brute-force oracle for X + B1 X B2 = C via vectorization."""
    m, n = c.shape
    sys = np.eye(m * n) + np.kron(b2.T, b1)
    return np.linalg.solve(sys, c.reshape(-1, order="F")).reshape((m, n), order="F")


# ---------------------------------------------------------------- svd facade


def test_svd_identity():
    f = svd(np.eye(3))
    assert np.allclose(f.s, 1.0)


def test_svd_reconstructs():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((8, 5))
    f = svd(a)
    assert np.linalg.norm(a - f.compose()) <= 1e-10 * np.linalg.norm(a)
    assert np.linalg.norm(f.u.T @ f.u - np.eye(5)) <= 1e-10
    assert np.linalg.norm(f.v.T @ f.v - np.eye(5)) <= 1e-10
    assert np.all(np.diff(f.s) <= 0)


def test_svd_rejects_nonfinite():
    a = np.ones((3, 3))
    a[0, 0] = np.inf
    with pytest.raises(ValueError):
        svd(a)


def test_singular_values_unitarily_invariant():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 4))
    p, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert np.allclose(svd(p @ a @ q).s, svd(a).s, atol=1e-10)


# ------------------------------------------------------------ numerical rank


@pytest.mark.parametrize(
    "s,tol,expected",
    [
        ((3.0, 1.0, 1e-12), 1e-6, 2),
        ((0.0, 0.0), 1e-6, 0),
        ((1.0, 2e-6, 1e-6), 1e-6, 2),  # boundary value excluded (strict >)
        ((5.0,), 1e-6, 1),
    ],
)
def test_numerical_rank_cases(s, tol, expected):
    assert numerical_rank(np.array(s), tol) == expected


# --------------------------------------------------- smallest right direction


def test_min_right_singular_vector_diag():
    v = min_right_singular_vector(np.diag([2.0, 1.0]))
    assert np.allclose(v, [0.0, 1.0])


def test_min_right_singular_vector_minimizes():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((10, 4))
    v = min_right_singular_vector(a)
    s_min = np.linalg.svd(a, compute_uv=False)[-1]
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(a @ v) == pytest.approx(s_min, abs=1e-10)


def test_min_right_singular_vector_exact_nullspace():
    rng = np.random.default_rng(4)
    v_true = rng.standard_normal(5)
    v_true /= np.linalg.norm(v_true)
    basis = np.linalg.qr(rng.standard_normal((5, 5)))[0]
    cols = [b - (b @ v_true) * v_true for b in basis.T[:4]]
    a = rng.standard_normal((9, 4)) @ np.array(cols)  # rows orthogonal to v_true
    v = min_right_singular_vector(a)
    assert abs(v @ v_true) == pytest.approx(1.0, abs=1e-10)


def test_min_right_singular_vector_wide_matrix():
    # Thin SVD has no null direction for a wide matrix; the full factorization
    # must kick in.  The 1x2 row [1, -2] has nullspace along (2, 1).
    v = min_right_singular_vector(np.array([[1.0, -2.0]]))
    assert np.allclose(v, np.array([2.0, 1.0]) / np.sqrt(5.0))


def test_sign_convention_largest_entry_positive():
    rng = np.random.default_rng(11)
    for _ in range(5):
        v = min_right_singular_vector(rng.standard_normal((7, 3)))
        assert v[np.argmax(np.abs(v))] > 0


# ------------------------------------------------------------ sylvester solve


def test_sylvester_b1_zero_gives_c():
    rng = np.random.default_rng(1)
    c = rng.standard_normal((4, 3))
    x = solve_sylvester(np.zeros((4, 4)), rng.standard_normal((3, 3)), c)
    assert np.allclose(x, c, atol=1e-12)


def test_sylvester_scalar_identity():
    c = np.random.default_rng(2).standard_normal((3, 3))
    x = solve_sylvester(2.0 * np.eye(3), 3.0 * np.eye(3), c)
    assert np.allclose(x, c / 7.0, atol=1e-10)


@pytest.mark.parametrize("method", ["kron", "schur"])
def test_sylvester_matches_kron_oracle(method):
    rng = np.random.default_rng(7)
    for _ in range(5):
        b1 = rng.standard_normal((4, 4))
        b2 = rng.standard_normal((3, 3))
        c = rng.standard_normal((4, 3))
        x = solve_sylvester(b1, b2, c, method=method)
        ref = kron_solve(b1, b2, c)
        assert np.linalg.norm(x - ref) <= 1e-8 * max(1.0, np.linalg.norm(ref))
        assert np.linalg.norm(x + b1 @ x @ b2 - c) <= 1e-10 * np.linalg.norm(c)


def test_sylvester_psd_coefficients_large():
    # The solver's main client passes B1 = W1^2, B2 = W2^2 with W PD, where
    # I + kron is always well conditioned; exercise the schur path at a size
    # above the kron crossover.
    rng = np.random.default_rng(8)
    q1 = rng.standard_normal((70, 70))
    q2 = rng.standard_normal((70, 70))
    b1 = q1 @ q1.T / 70 + 0.1 * np.eye(70)
    b2 = q2 @ q2.T / 70 + 0.1 * np.eye(70)
    c = rng.standard_normal((70, 70))
    x = solve_sylvester(b1, b2, c)
    assert np.linalg.norm(x + b1 @ x @ b2 - c) <= 1e-10 * np.linalg.norm(c)


def test_sylvester_singular_system_raises():
    b1 = -np.eye(2)
    b2 = np.eye(2)
    with pytest.raises(SylvesterSingularError) as ei:
        solve_sylvester(b1, b2, np.ones((2, 2)))
    assert ei.value.smallest_pivot <= 1e-12


# ------------------------------------------------------------- inverse sqrt


def test_inv_sqrt_psd_zero_matrix():
    q = inv_sqrt_psd(np.zeros((3, 3)), 1.0)
    assert np.allclose(q, np.eye(3), atol=1e-12)


def test_inv_sqrt_psd_diag():
    q = inv_sqrt_psd(np.diag([3.0, 0.0]), 1.0)
    assert np.allclose(q, np.diag([0.5, 1.0]), atol=1e-12)


def test_inv_sqrt_psd_defining_identity():
    rng = np.random.default_rng(9)
    g = rng.standard_normal((6, 6))
    y = g @ g.T
    q = inv_sqrt_psd(y, 0.37)
    assert np.linalg.norm(q @ (y + 0.37 * np.eye(6)) @ q - np.eye(6)) <= 1e-8
    assert np.allclose(q, q.T, atol=1e-12)


def test_inv_sqrt_psd_rejects_asymmetric():
    y = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        inv_sqrt_psd(y, 0.1)


# -------------------------------------------------------- structure projection


def test_project_unconstrained_is_identity():
    e = np.random.default_rng(0).standard_normal((4, 4))
    assert np.array_equal(project_structure(e, Unconstrained()), e)


def test_project_toeplitz_frozen_example():
    out = project_structure(np.array([[1.0, 2.0], [3.0, 5.0]]), Toeplitz())
    assert np.allclose(out, [[3.0, 2.0], [3.0, 3.0]])


def test_project_toeplitz_has_constant_diagonals():
    rng = np.random.default_rng(6)
    e = rng.standard_normal((6, 5))
    out = project_structure(e, Toeplitz())
    for off in range(-5, 5):
        d = np.diagonal(out, offset=off)
        assert np.ptp(d) <= 1e-14 if d.size else True


def test_project_fixed_mask_resets_values():
    e = np.ones((3, 3))
    st = FixedMask(np.array([[0, 0], [2, 2]]), values=np.array([5.0, -1.0]))
    out = project_structure(e, st)
    assert out[0, 0] == 5.0
    assert out[2, 2] == -1.0
    out[0, 0] = 0.0  # the rest untouched
    out[2, 2] = 0.0
    assert np.allclose(out, np.where(np.eye(3, dtype=bool) & False, 0, [[0, 1, 1], [1, 1, 1], [1, 1, 0]]))


def test_project_general_linear_single_constraint():
    rng = np.random.default_rng(10)
    e = rng.standard_normal((4, 3))
    l = rng.standard_normal((4, 3))
    b = 1.5
    out = project_structure(e, GeneralLinear(l, b))
    expected = e - ((np.sum(l * e) - b) / np.sum(l * l)) * l
    assert np.allclose(out, expected, atol=1e-10)
    assert np.sum(l * out) == pytest.approx(b, abs=1e-10)


@pytest.mark.parametrize(
    "structure",
    [
        Unconstrained(),
        Toeplitz(),
        FixedMask(np.array([[0, 1], [3, 2]])),
        GeneralLinear(np.ones((5, 4)), 2.0),
    ],
)
def test_projection_idempotent(structure):
    e = np.random.default_rng(12).standard_normal((5, 4))
    once = project_structure(e, structure)
    twice = project_structure(once, structure)
    assert np.linalg.norm(twice - once) <= 1e-12


def test_projection_fixed_point_when_already_structured():
    rng = np.random.default_rng(13)
    c = rng.standard_normal(8)
    e = np.array([[c[i - j + 3] for j in range(4)] for i in range(5)])
    assert np.linalg.norm(project_structure(e, Toeplitz()) - e) <= 1e-12


def test_projector_reuse_matches_free_function():
    st = FixedMask(np.array([[1, 1]]), values=4.0)
    proj = StructureProjector(st, (3, 3))
    e = np.random.default_rng(14).standard_normal((3, 3))
    assert np.array_equal(proj(e), project_structure(e, st))


def test_general_linear_degenerate_constraints_raise():
    l = np.ones((3, 3))
    st = GeneralLinear(np.stack([l, l]), np.array([1.0, 2.0]))  # inconsistent duplicates
    with pytest.raises(Exception):
        StructureProjector(st, (3, 3))
