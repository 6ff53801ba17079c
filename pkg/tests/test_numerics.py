import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SX, SZ, crandn
from picheck.numerics import (NumericsError, as_cmatrix, eig, expm, kron, ode_propagate,
                              proportionality_fit, random_hermitian, random_unitary)


def taylor_expm(a, terms=40):
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


def test_as_cmatrix_rejects_bad_input():
    with pytest.raises(NumericsError):
        as_cmatrix([[1.0, np.nan]])
    with pytest.raises(NumericsError):
        as_cmatrix(np.zeros((0, 3)))
    assert as_cmatrix([1, 2]).shape == (1, 2)


def test_kron_identity_and_pauli():
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    k = kron(SX, SZ)
    assert np.array_equal(k[:2, 2:], SZ) and np.array_equal(k[2:, :2], SZ)
    assert not k[:2, :2].any() and not k[2:, 2:].any()


def test_kron_matches_double_loop(rng):
    a, b = crandn(rng, 3, 3), crandn(rng, 2, 2)
    ref = np.zeros((6, 6), dtype=complex)
    for i in range(3):
        for j in range(3):
            ref[2 * i:2 * i + 2, 2 * j:2 * j + 2] = a[i, j] * b
    assert np.array_equal(kron(a, b), ref)


def test_kron_mixed_product(rng):
    a, b, c, d = (crandn(rng, 3, 3), crandn(rng, 2, 2), crandn(rng, 3, 3), crandn(rng, 2, 2))
    assert np.abs(kron(a, b) @ kron(c, d) - kron(a @ c, b @ d)).max() < 1e-12
    e = crandn(rng, 2, 2)
    # products of three floats can round differently, so compare to the last ulp or so
    assert np.abs(kron(kron(a, b), e) - kron(a, kron(b, e))).max() < 1e-14


def test_expm_simple_cases():
    assert np.array_equal(expm(np.zeros((3, 3)), 1), np.eye(3))
    th = 0.37
    assert np.abs(expm(SZ, -1j * th) - np.diag([np.exp(-1j * th), np.exp(1j * th)])).max() < 1e-15


def test_expm_against_taylor(rng):
    a = crandn(rng, 6, 6)
    a *= 2 / np.linalg.norm(a)
    ref = taylor_expm(a)
    assert np.linalg.norm(expm(a, 1) - ref) / np.linalg.norm(ref) < 1e-11


def test_expm_group_and_unitarity(rng):
    a = crandn(rng, 5, 5)
    assert np.abs(expm(a, 0.3) @ expm(a, 0.5) - expm(a, 0.8)).max() < 1e-10
    h = random_hermitian(5, rng)
    w = expm(h, -1.7j)
    assert np.linalg.norm(w.conj().T @ w - np.eye(5)) <= 1e-10


def test_expm_rejects_non_square():
    with pytest.raises(NumericsError):
        expm(np.zeros((2, 3)))


def test_eig_cases(rng):
    vals, _ = eig(np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(np.sort(vals.real), [1, 2, 3])
    vals, _ = eig(SX)
    assert np.allclose(np.sort(vals.real), [-1, 1])
    a = crandn(rng, 8, 8)
    vals, vecs = eig(a)
    for k in range(8):
        assert np.linalg.norm(a @ vecs[:, k] - vals[k] * vecs[:, k]) <= 1e-9 * np.linalg.norm(a)


def test_proportionality_fit_cases(rng):
    t = crandn(rng, 3, 3)
    f = proportionality_fit(t, t)
    assert abs(f.constant - 1) < 1e-14 and f.residual < 1e-13
    f = proportionality_fit(np.zeros((3, 3)), t)
    assert f.trivially_zero and f.constant == 0
    c = 2.5 * np.exp(1j * np.pi / 3)
    x = c * t
    f = proportionality_fit(x, t)
    assert abs(f.constant - c) < 1e-12 and f.residual <= 1e-12 * np.linalg.norm(x)
    with pytest.raises(NumericsError):
        proportionality_fit(t, np.zeros((3, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.complex_numbers(min_magnitude=0.1, max_magnitude=10))
def test_fit_relative_residual_scale_invariant(seed, s):
    rng = np.random.default_rng(seed)
    x, t = crandn(rng, 3, 3), crandn(rng, 3, 3)
    a = proportionality_fit(x, t)
    b = proportionality_fit(s * x, s * t)
    assert abs(a.residual / np.linalg.norm(x) - b.residual / np.linalg.norm(s * x)) < 1e-12


def test_ode_propagate_against_expm(rng):
    g = crandn(rng, 4, 4)
    g *= 2 / np.linalg.norm(g)
    x = ode_propagate(lambda t: g, np.eye(4), 1.0, 1000)
    assert np.abs(x - expm(g, 1.0)).max() < 1e-8
    x0 = crandn(rng, 4, 2)
    assert np.array_equal(ode_propagate(lambda t: np.zeros((4, 4)), x0, 1.0, 10), x0)


def test_ode_fourth_order_convergence(rng):
    g = crandn(rng, 4, 4)
    g *= 2 / np.linalg.norm(g)
    ref = expm(g, 1.0)
    e1 = np.linalg.norm(ode_propagate(lambda t: g, np.eye(4), 1.0, 20) - ref)
    e2 = np.linalg.norm(ode_propagate(lambda t: g, np.eye(4), 1.0, 40) - ref)
    assert e1 / e2 >= 8


def test_ode_time_dependent_scalar():
    # dx/dt = cos(t) x  ->  x = exp(sin t)
    x = ode_propagate(lambda t: np.array([[np.cos(t)]]), np.eye(1), 2.0, 400)
    assert abs(x[0, 0] - np.exp(np.sin(2.0))) < 1e-9


def test_ode_non_finite_raises():
    with pytest.raises(NumericsError):
        ode_propagate(lambda t: np.array([[1e300]]), np.eye(1), 1.0, 2)


def test_random_unitary_is_unitary(rng):
    u = random_unitary(5, rng)
    assert np.linalg.norm(u.conj().T @ u - np.eye(5)) < 1e-12
