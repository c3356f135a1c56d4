import numpy as np
import pytest

from alh.errors import ZeroOfA
from alh.lattice import LatticeState, Window, pair_state, random_state, zero_state
from alh.scattering import (
    REFERENCE_ONLY,
    a_coefficient,
    a_hat_coefficient,
    edge_diagnostics,
    fd_grad_log,
    grad_log_a,
    grad_log_ahat,
    identity_residuals,
    jost,
    recursion_residual,
    resolvent_series,
    resolvent_tail_bound,
    scattering_data,
    squared_eigen,
    transfer_matrices,
)

Z_POINTS = [2.0, 1.7 + 0.3j, 3j, 1.5 + 0.5j, -2.5]


def test_transfer_determinant(seeded):
    E = transfer_matrices(seeded, 1.3 - 0.4j)
    np.testing.assert_allclose(np.linalg.det(E), seeded.weights, atol=1e-15)


def test_zero_potential_jost():
    s = zero_state(16)
    js = jost(s, 1.7 + 0.3j)
    np.testing.assert_allclose(js.m, np.tile([1, 0], (17, 1)), atol=1e-15)
    np.testing.assert_allclose(js.n, np.tile([0, 1], (17, 1)), atol=1e-15)


def test_zero_potential_scattering_data():
    sd = scattering_data(zero_state(16), 2.0)
    assert (sd.a, sd.a_hat, sd.b, sd.b_hat, sd.C0) == (1, 1, 0, 0, 1)


def test_pair_state_jost_by_hand():
    s = pair_state(32)
    js = jost(s, 2.0)
    assert js.m[s.window.index(2), 0] == pytest.approx(1.005, abs=1e-15)


@pytest.mark.parametrize("z", Z_POINTS)
def test_pair_state_a_closed_form(z):
    s = pair_state(32)
    expected = 1 + 0.02 * z**-2
    assert abs(scattering_data(s, z).a - expected) <= 1e-12
    assert abs(a_coefficient(s, z) - expected) <= 1e-12


def test_single_site_a_is_one():
    w = Window(-4, 4)
    q = np.zeros(9, complex)
    r = np.zeros(9, complex)
    q[4], r[4] = 0.3 - 0.1j, 0.5j
    s = LatticeState(w, q, r)
    for z in Z_POINTS:
        sd = scattering_data(s, z)
        assert abs(sd.a - 1) < 1e-14
        assert abs(sd.C0 - (1 - q[4] * r[4])) < 1e-15


def test_recursion_residual(seeded):
    js = jost(seeded, 1.5 + 0.5j)
    assert recursion_residual(js, seeded) < 1e-13


@pytest.mark.parametrize("z", [2.0, 1.7 + 0.3j, 3j, np.exp(0.7j)])
def test_determinant_and_a_constancy(seeded, z):
    sd = scattering_data(seeded, z)
    assert sd.det_defect <= 1e-9
    assert sd.a_variation <= 1e-10
    assert sd.a_hat_variation <= 1e-10
    assert sd.C0 == pytest.approx(np.prod(seeded.weights), rel=1e-14)
    assert abs(a_hat_coefficient(seeded, z) - sd.a_hat) < 1e-12 * abs(sd.a_hat)


def test_b_constant_beyond_support(seeded):
    sd = scattering_data(seeded, np.exp(0.3j))
    e = edge_diagnostics(seeded, sd)
    assert abs(e["b_at_kmax"] - sd.b) < 1e-12 * max(1, abs(sd.b))
    assert abs(e["b_hat_at_kmax"] - sd.b_hat) < 1e-12 * max(1, abs(sd.b_hat))
    assert abs(e["a_left"] - sd.a) < 1e-12


def test_zero_potential_squared_eigen():
    z = 1.7 + 0.3j
    W = squared_eigen(zero_state(16), z)
    for arr in (W.alpha, W.beta, W.gamma):
        assert np.abs(arr).max() == 0
    np.testing.assert_allclose(W.delta, z, atol=1e-15)


def test_zero_of_a_is_reported():
    # a(z) = 1 + c z^-2 vanishes at z^2 = -c
    s = pair_state(32, 0.5, 0.5)
    with pytest.raises(ZeroOfA):
        squared_eigen(s, 0.5j)


def test_pair_state_gradient_by_hand():
    s = pair_state(32)
    g = grad_log_a(s, 2.0)
    assert g.ordering == "qr"
    assert g.c1[s.window.index(1)] == pytest.approx(0.025 / 1.005, abs=1e-14)


def test_zero_potential_gradient():
    assert grad_log_a(zero_state(16), 2.0).norm() == 0


@pytest.mark.parametrize("z", [2.0, 1.7 + 0.3j])
@pytest.mark.parametrize("seed", [42, 7])
def test_gradient_matches_finite_differences(seed, z):
    s = random_state(32, seed=seed)
    for hatted, zz, grad in ((False, z, grad_log_a), (True, 1 / z, grad_log_ahat)):
        g = grad(s, zz)
        fd = fd_grad_log(s, zz, hatted)
        assert (g - fd).norm() <= 1e-6 * g.norm()


def test_resolvent_trivial_cases(seeded):
    assert resolvent_series(zero_state(16), 2.0).norm() == 0
    r0 = resolvent_series(seeded, 2.0, M=0)
    np.testing.assert_array_equal(r0.vector(), seeded.rq().vector())
    with pytest.raises(ValueError):
        resolvent_series(seeded, 2.0, which="R")


@pytest.mark.parametrize("z", [2.0, 1.7 + 0.3j, 3j])
def test_resolvent_identities(seeded, z):
    sl = seeded.window.interior(2)
    w = seeded.weights
    for which, zz, grad in (("L", z, grad_log_a), ("Linv", 1 / z, grad_log_ahat)):
        series = resolvent_series(seeded, zz, 30, which)
        g = grad(seeded, zz)
        assert np.abs(series.c1 - w * g.c1)[sl].max() <= 1e-8
        assert np.abs(series.c2 - w * g.c2)[sl].max() <= 1e-8
        assert resolvent_tail_bound(seeded, zz, 30, which) < 1e-8


@pytest.mark.parametrize("z", [2.0, 1.7 + 0.3j])
@pytest.mark.parametrize("seed", [42, 7])
def test_squared_eigen_identities(seed, z):
    res = identity_residuals(random_state(32, seed=seed), z)
    for name, val in res.items():
        if name not in REFERENCE_ONLY:
            assert val <= 1e-9, name
