import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from halfjump import scalefn
from halfjump.kernel_core import stable_constant
from halfjump.resurrection import (ModelError, ReturnKernel, aux_g, aux_h, aux_xi, detect_divergence,
                                   envelope_constant, envelope_row, fit_boundary_growth, mass_identity,
                                   normalization_a, q_comparator, q_kernel, return_density,
                                   xi_comparator)

ONE = scalefn.constant(1.0)
RATIO_CAP = 50.0


def test_return_density_plug_in():
    kern = ReturnKernel(1, 1.3, ONE)
    assert return_density(kern, -1.0, [1.0]) == pytest.approx(2 ** (-1 - 1.3), rel=1e-14)


@pytest.mark.parametrize("alpha", [0.8, 1.5])
def test_return_mass_independent_of_depth(alpha):
    kern = ReturnKernel(1, alpha, scalefn.power_log(0.3, 1.0))
    masses = [integrate.quad(lambda y: float(return_density(kern, -zd, [y])), 0, np.inf,
                             epsabs=0, epsrel=1e-11, limit=400)[0] for zd in (1.0, 3.0)]
    assert masses[0] == pytest.approx(masses[1], rel=1e-8)
    assert normalization_a(kern) == pytest.approx(masses[0], rel=1e-7)


def test_trace_case_is_poisson_kernel_shape(rng):
    a = 1.2
    kern = ReturnKernel(2, a, scalefn.power_log(a / 2))
    z = np.c_[rng.uniform(-3, 3, 50), -np.exp(rng.uniform(-3, 3, 50))]
    y = np.c_[rng.uniform(-3, 3, 50), np.exp(rng.uniform(-3, 3, 50))]
    shape = (-z[:, 1]) ** (a / 2) * y[:, 1] ** (-a / 2) * np.linalg.norm(z - y, axis=1) ** -2
    np.testing.assert_allclose(return_density(kern, z, y), shape, rtol=1e-13)


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("psi", [ONE, scalefn.power_log(0.75), scalefn.power_log(-0.3)])
def test_normalization_routes_agree(d, psi):
    kern = ReturnKernel(d, 1.5, psi, tol=1e-9)
    assert normalization_a(kern, "polar") == pytest.approx(normalization_a(kern, "cartesian"), rel=1e-6)


def test_normalization_closed_form():
    for a in (0.6, 1.5):
        assert normalization_a(ReturnKernel(1, a, ONE)) == pytest.approx(1 / a, rel=1e-9)


def test_normalization_near_admissible_edge_is_finite():
    kern = ReturnKernel(2, 1.5, scalefn.power_log(0.9), tol=1e-8)
    a = normalization_a(kern)
    assert np.isfinite(a) and a > 0
    assert not detect_divergence(scalefn.power_log(0.9), 1.5)


def test_divergent_psi_rejected():
    with pytest.raises(ModelError):
        ReturnKernel(1, 1.5, scalefn.power_log(1.0))
    with pytest.raises(ModelError):
        ReturnKernel(1, 0.7, scalefn.power_log(0.7))
    raw = scalefn.ScalingFunction(scalefn.POWERLOG, 1.0, 0.0, lower_index=1.0, upper_index=1.0)
    assert detect_divergence(raw, 1.5)


def pairs(rng, d, n):
    x = np.c_[rng.uniform(-3, 3, (n, d - 1)), np.exp(rng.uniform(-3, 3, n))]
    y = np.c_[rng.uniform(-3, 3, (n, d - 1)), np.exp(rng.uniform(-3, 3, n))]
    return x, y


@pytest.mark.parametrize("d", [1, 2])
def test_symmetry_and_scaling(rng, d):
    kern = ReturnKernel(d, 0.8, scalefn.power_log(-0.3), tol=1e-8)
    x, y = pairs(rng, d, 40)
    q = q_kernel(kern, x, y)
    assert np.max(np.abs(q_kernel(kern, y, x) / q - 1)) <= 3e-8
    for lam in (0.5, 2.0, 10.0):
        assert np.max(np.abs(lam ** (d + 0.8) * q_kernel(kern, lam * x, lam * y) / q - 1)) <= 3e-8


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.one_of(st.just(0.0), st.floats(1e-6, 50)))
def test_symmetry_property(xd, yd, lat):
    if lat == 0 and xd == yd:
        return
    kern = ReturnKernel(2, 1.5, ONE, tol=1e-8)
    x, y = np.array([0.0, xd]), np.array([lat, yd])
    assert q_kernel(kern, x, y) == pytest.approx(q_kernel(kern, y, x), rel=3e-8)


@pytest.mark.parametrize("psi", [ONE, scalefn.power_log(0.5), scalefn.power_log(-0.3)])
def test_mass_identity(psi):
    kern = ReturnKernel(1, 1.5, psi)
    total, jump_out = mass_identity(kern, 0.7)
    assert total == pytest.approx(jump_out, rel=1e-5)
    assert jump_out == pytest.approx(stable_constant(1, 1.5) * 0.7 ** -1.5 / 1.5)


@pytest.mark.parametrize("d", [1, 2])
def test_deep_interior_pair(d):
    # unit separation far from the boundary: q scales like the depth power with a fixed constant
    kern = ReturnKernel(d, 1.5, ONE)
    vals = []
    for depth in (10.0, 100.0, 1000.0):
        x = np.r_[np.zeros(d - 1), depth]
        y = x + (np.r_[1.0] if d == 1 else np.array([1.0, 0.0]))
        vals.append(q_kernel(kern, x, y) / q_comparator(kern, x, y))
        assert q_comparator(kern, x, y) == pytest.approx(depth ** (-d - 1.5))
    assert max(vals) / min(vals) < 1.5


def test_trace_case_envelope(rng):
    a = 1.5
    kern = ReturnKernel(2, a, scalefn.power_log(a / 2))
    x, y = pairs(rng, 2, 200)
    dist = np.linalg.norm(x - y, axis=1)
    far = np.minimum(x[:, 1], y[:, 1]) <= dist
    ref = dist[far] ** -2 * x[far, 1] ** (-a / 2) * y[far, 1] ** (-a / 2)
    assert envelope_constant(q_kernel(kern, x[far], y[far]) / ref) < RATIO_CAP


def test_constant_psi_log_envelope(rng):
    a = 1.5
    kern = ReturnKernel(2, a, ONE)
    x, y = pairs(rng, 2, 200)
    dist = np.linalg.norm(x - y, axis=1)
    low = np.minimum(x[:, 1], y[:, 1])
    far = low <= dist
    ref = dist[far] ** (-2 - a) * np.log(math.e + dist[far] / low[far])
    assert envelope_constant(q_kernel(kern, x[far], y[far]) / ref) < RATIO_CAP


@pytest.mark.parametrize("psi, row", [
    (scalefn.power_log(0.3), (0.3, 0.0)),
    (ONE, (0.0, 1.0)),
    (scalefn.power_log(0.0, -0.5), (0.0, 0.5)),
    (scalefn.power_log(0.0, -2.0), (0.0, 0.0)),
    (scalefn.power_log(-0.3), (0.0, 0.0)),
])
def test_boundary_growth_rows(psi, row):
    exponent, log_power, expected = fit_boundary_growth(ReturnKernel(1, 1.2, psi, tol=1e-9))
    assert expected == row
    assert abs(exponent - row[0]) <= 0.05
    assert abs(log_power - row[1]) <= 0.3


def test_log_log_row_has_no_power_form():
    with pytest.raises(ValueError):
        envelope_row(scalefn.power_log(0.0, -1.0))


def test_auxiliary_regimes():
    a_ = 1.2
    psi = scalefn.power_log(0.3, 1.0)
    kern = ReturnKernel(2, a_, psi)
    A, B = (v.ravel() for v in np.meshgrid(np.geomspace(1e-3, 1.0, 5), np.geomspace(1e-3, 1e3, 5)))
    assert envelope_constant(aux_h(kern, A, B) / (A ** (2 + a_) * psi(B / A ** 2))) < 50
    A2, B2 = (v.ravel() for v in np.meshgrid(np.geomspace(1.0, 1e3, 4), np.geomspace(1e-3, 1e3, 5)))
    assert envelope_constant(aux_h(kern, A2, B2) / psi(B2)) < 50
    A3, B3 = (v.ravel() for v in np.meshgrid(np.geomspace(1e-3, 1e3, 6), np.geomspace(1e-3, 1e3, 5)))
    assert np.max(aux_g(kern, A3, B3) / psi(B3)) < 50
    xd = np.geomspace(1e-5, 0.25, 5)
    xi = aux_xi(kern, xd, xd + 1.0)
    assert envelope_constant(xi / xi_comparator(kern, xd, xd + 1.0)) < 50
    np.testing.assert_allclose(aux_xi(kern, xd, xd + 1.0, route="via_h"), xi, rtol=1e-6)
