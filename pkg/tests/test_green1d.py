import math
from functools import lru_cache

import numpy as np
from scipy import integrate
import pytest

from halfjump import scalefn
from halfjump.characteristic_constant import big_c
from halfjump.green1d import (
    assemble, assemble_interval, boundary_decay_check, envelope, envelope_ratios,
    exit_alive, graded_mesh, green_potential, interval_green_exact, killed_before_exit,
)
from halfjump.kernel_core import KernelSpec, UnitB
from halfjump.resurrection import ResurrectionB, ReturnKernel


def _resurrection(alpha):
    return ResurrectionB(ReturnKernel(1, alpha, scalefn.constant(1.0)))


@lru_cache(maxsize=None)
def _kappa_for(alpha, p):
    return big_c(KernelSpec(1, alpha, _resurrection(alpha), 1.0), p, tol=1e-10)


@lru_cache(maxsize=None)
def system(alpha, p_target, n=256, R=1.0):
    kappa = 0.0 if p_target is None else _kappa_for(alpha, p_target)
    return assemble(KernelSpec(1, alpha, _resurrection(alpha), kappa), R, n)


CASES = [(1.5, None), (1.5, 0.7), (1.0, 0.4)]


def test_graded_mesh_endpoints_and_grading():
    m = graded_mesh(0.0, 1.0, 64, 2.0, both=True)
    assert m[0] == 0.0 and m[-1] == 1.0
    assert np.all(np.diff(m) > 0)
    np.testing.assert_allclose(m, 1.0 - m[::-1], atol=1e-15)
    assert m[1] < 1e-3


@pytest.mark.parametrize("alpha", [1.0, 1.5])
def test_interval_calibration_against_closed_form(alpha):
    s = assemble_interval(alpha, 128)
    x = s.nodes
    for a, b in [(0.0, 0.3), (-0.5, 0.5), (0.2, 0.6), (-0.8, -0.1), (0.7, 0.75)]:
        i, j = np.argmin(abs(x - a)), np.argmin(abs(x - b))
        exact = interval_green_exact(alpha, x[i], x[j])
        assert abs(s.G_matrix[i, j] / exact - 1.0) < 0.05


def test_interval_closed_form_symmetric_and_positive():
    x = np.linspace(-0.9, 0.9, 7)
    X, Y = np.meshgrid(x, x + 0.013)
    g = interval_green_exact(1.3, X, Y)
    assert np.all(g > 0)
    np.testing.assert_allclose(g, interval_green_exact(1.3, Y, X), rtol=1e-12)


@pytest.mark.parametrize("case", CASES)
def test_generator_sign_pattern_and_weighted_symmetry(case):
    s = system(*case)
    A, w = s.A_matrix, s.weights
    off = A - np.diag(np.diag(A))
    assert np.all(off <= 1e-12 * np.abs(np.diag(A)).max())
    assert np.all(A @ np.ones(A.shape[0]) > 0)
    WA = w[:, None] * A
    assert np.max(np.abs(WA - WA.T)) <= 1e-10 * np.abs(WA).max()


@pytest.mark.parametrize("case", CASES)
def test_green_matrix_positive_symmetric(case):
    G = system(*case).G_matrix
    assert np.all(G > 0)
    np.testing.assert_allclose(G, G.T, rtol=1e-10, atol=0)


@pytest.mark.parametrize("case", CASES)
def test_mesh_refinement_changes_green_little(case):
    coarse, fine = system(*case, n=128), system(*case, n=256)
    for a, b in [(0.1, 0.3), (0.2, 0.5), (0.3, 0.35), (0.5, 0.8), (0.05, 0.6)]:
        gi = coarse.G_matrix[np.argmin(abs(coarse.nodes - a)), np.argmin(abs(coarse.nodes - b))]
        xa, xb = coarse.nodes[np.argmin(abs(coarse.nodes - a))], coarse.nodes[np.argmin(abs(coarse.nodes - b))]
        i, j = np.argmin(abs(fine.nodes - xa)), np.argmin(abs(fine.nodes - xb))
        assert abs(fine.nodes[i] - xa) < 1e-12 and abs(fine.nodes[j] - xb) < 1e-12
        assert abs(fine.G_matrix[i, j] / gi - 1.0) < 0.02


@pytest.mark.parametrize("case", CASES)
def test_larger_domain_has_larger_green(case):
    small, big = system(*case, n=128, R=1.0), system(*case, n=128, R=2.0)
    xs = small.nodes
    for a, b in [(0.1, 0.3), (0.4, 0.6), (0.2, 0.8)]:
        i, j = np.argmin(abs(xs - a)), np.argmin(abs(xs - b))
        gb = _bilinear(big, xs[i], xs[j])
        assert gb > small.G_matrix[i, j]


def _bilinear(s, a, b):
    x = s.nodes
    row = np.array([np.interp(b, x, s.G_matrix[k]) for k in range(x.size)])
    return float(np.interp(a, x, row))


@pytest.mark.parametrize("case", CASES)
def test_boundary_decay_exponent(case):
    s = system(*case)
    res = boundary_decay_check(s, x_range=(1e-4, 1e-2))
    assert res["positive"]
    assert abs(res["slope"] - s.p) <= 0.1


@pytest.mark.parametrize("case", CASES)
def test_envelope_two_sided(case):
    s = system(*case)
    _, _, G, ratio = envelope_ratios(s)
    assert np.all(G > 0)
    assert math.sqrt(ratio.max() / ratio.min()) <= 50.0


def test_envelope_formula_cases():
    assert envelope(1.5, 0.5, 0.25, 1.25) == pytest.approx(0.25 ** 0.5 * 1.25 ** 0.5)
    assert envelope(1.0, 0.5, 2.0, 3.0) == pytest.approx(math.log(math.e + 3.0))
    assert envelope(1.2, 0.7, 1.0, 1.0 + 1e-8) == pytest.approx((1.0 + 1e-8) ** 0.2)


@pytest.mark.parametrize("case", [c for c in CASES if c[1] is not None])
def test_killed_and_exit_probabilities(case):
    coarse, fine = system(*case, n=128), system(*case)
    kill = killed_before_exit(fine)
    total_c = killed_before_exit(coarse) + exit_alive(coarse)
    total_f = kill + exit_alive(fine)
    assert np.all(kill >= 0) and np.all(total_f <= 1.0 + 1e-9)
    mid_c = total_c[(coarse.nodes > 0.05) & (coarse.nodes < 0.95)]
    mid_f = total_f[(fine.nodes > 0.05) & (fine.nodes < 0.95)]
    # Galerkin error near the endpoints shrinks under refinement
    assert mid_f.min() > mid_c.min() and mid_f.min() > 0.85


@pytest.mark.parametrize("case", CASES)
@pytest.mark.parametrize("gamma", [0.0, 0.5])
def test_potential_boundary_behaviour_and_domain_scaling(case, gamma):
    s1, s2 = system(*case), system(*case, R=2.0)
    x = s1.nodes
    sel = (x >= 1e-4) & (x <= 1e-2)
    P1, P2 = green_potential(s1, gamma), green_potential(s2, gamma)
    flat = P1[sel] / x[sel] ** s1.p
    assert flat.max() / flat.min() - 1.0 <= 0.15
    at_x = np.exp(np.interp(np.log(x[sel]), np.log(s2.nodes), np.log(P2)))
    expected = 2.0 ** (s1.alpha + gamma - s1.p)
    assert np.max(np.abs(at_x / P1[sel] / expected - 1.0)) <= 0.15


def test_green_potential_matches_row_integration():
    s = system(1.5, 0.7)
    nodes = np.r_[0.0, s.nodes, s.R]
    # trapezoid over the nodal Green function, away from the diagonal singularity
    i = np.argmin(abs(s.nodes - 0.5))
    g = np.r_[0.0, s.G_matrix[i], 0.0]
    trap = integrate.trapezoid(g, nodes)
    assert green_potential(s, 0.0)[i] == pytest.approx(trap, rel=0.05)


def test_rejections():
    with pytest.raises(ValueError):
        assemble(KernelSpec(1, 1.5, UnitB(), 0.5), 1.0, 32)
    with pytest.raises(ValueError):
        assemble(KernelSpec(2, 1.5, UnitB(), 0.5), 1.0, 64)
