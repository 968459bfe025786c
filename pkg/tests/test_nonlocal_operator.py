import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import Polynomial
from scipy.integrate import dblquad, quad

from halfjump import scalefn
from halfjump.characteristic_constant import big_c
from halfjump.kernel_core import KernelSpec, ProductB, UnitB
from halfjump.nonlocal_operator import (PVSchedule, apply_pv_generator, check_near_boundary_bound,
                                        check_far_field_bound, check_truncated_power,
                                        near_boundary_integral, power, smooth_bump, truncated_power,
                                        truncated_tail, two_estimates_lhs)

PHI = scalefn.power_log(0.2)
MODELS = [UnitB(), ProductB(PHI)]


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("b", MODELS)
def test_generator_on_power_equals_constant(d, b):
    spec = KernelSpec(d, 1.5, b, kappa=1.0)
    p = spec.p
    x = np.r_[np.zeros(d - 1), 1.0]
    res = apply_pv_generator(spec, power(p), x)
    assert res.generator == pytest.approx(big_c(spec, p), rel=1e-2)
    assert res.generator == pytest.approx(1.0, rel=1e-6)
    assert abs(res.value) < 1e-6
    assert res.converged and res.contraction < 1


@pytest.mark.parametrize("q", [0.2, 0.8, 1.1])
def test_generator_scales_with_depth(q):
    spec = KernelSpec(1, 1.4, ProductB(PHI), kappa=1.0)
    vals = [apply_pv_generator(spec, power(q), [xd]).generator / xd ** (q - 1.4) for xd in (0.25, 1.0, 4.0)]
    np.testing.assert_allclose(vals, big_c(spec, q), rtol=1e-6)


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.6])
def test_bump_against_exact_polynomial_route(alpha):
    spec = KernelSpec(1, alpha, UnitB(), kappa=1.0)
    c, rad, x = 1.0, 0.6, 1.2
    f = smooth_bump([c], rad)
    g = lambda y: float(f(np.array([y])))
    fx = g(x)
    # inside the support the bump is a polynomial, so the paired second difference is one too
    bump = (1 - Polynomial([-c, 1]) ** 2 / rad ** 2) ** 3
    Q = bump(Polynomial([x, 1]))
    S = (Q + Q(Polynomial([0, -1])) - 2 * Q(0)).coef[2:]
    near = c + rad - x  # both x + h and x - h stay in the support for h < near
    exact_near = sum(a_k * near ** (k + 2 - alpha) / (k + 2 - alpha) for k, a_k in enumerate(S))
    kw = dict(epsabs=0, epsrel=1e-12, limit=200)
    mid = quad(lambda h: (g(x + h) + g(x - h) - 2 * fx) * h ** (-1 - alpha), near, x,
               points=[x - (c - rad)], **kw)[0]
    outside = quad(lambda h: (g(x + h) - fx) * h ** (-1 - alpha), x, np.inf, **kw)[0]
    res = apply_pv_generator(spec, f, [x])
    assert res.generator == pytest.approx(exact_near + mid + outside, rel=1e-7)
    assert res.value == pytest.approx(res.generator - x ** -alpha * fx)


def test_bump_away_from_point_is_plain_integral():
    spec = KernelSpec(2, 1.3, UnitB(), kappa=1.0)
    f = smooth_bump([0.0, 3.0], 0.5)
    x = np.array([0.4, 1.0])
    ref = dblquad(lambda y1, y2: float(f(np.array([y1, y2]))) * ((y1 - x[0]) ** 2 + (y2 - x[1]) ** 2) ** -1.65,
                  2.5, 3.5, -0.5, 0.5, epsabs=0, epsrel=1e-10)[0]
    assert apply_pv_generator(spec, f, x).generator == pytest.approx(ref, rel=1e-6)


def test_cutoff_sequence_contracts():
    spec = KernelSpec(2, 1.7, ProductB(PHI), kappa=1.0)
    res = apply_pv_generator(spec, power(0.9), [0.3, 2.0], schedule=PVSchedule(count=8))
    assert len(res.eps) == 8 and np.all(np.diff(res.eps) < 0)
    assert res.contraction == pytest.approx(0.5 ** (2 - 1.7), abs=0.05)


@given(st.floats(0.05, 20.0))
def test_harmonic_residual_small(xd):
    spec = KernelSpec(1, 1.5, ProductB(PHI), kappa=2.0)
    res = apply_pv_generator(spec, power(spec.p), [xd], tol=1e-8)
    assert abs(res.value) * xd ** (1.5 - spec.p) <= 0.02 * 2.0 + 1e-6


# ---------------------------------------------------------------- integral bounds

def test_two_estimates_against_polar_quadrature():
    a, R, yd = 1.2, 1.0, 0.25
    spec = KernelSpec(2, a, ProductB(scalefn.constant(1.0)), kappa=1.0)
    f = lambda rho, th: rho ** (-2 - a) * rho
    kw = dict(epsabs=0, epsrel=1e-10)
    # z_d = rho sin(th) > R/2
    first = dblquad(lambda rho, th: f(rho, th), 0, math.pi, lambda th: R / 2 / math.sin(th), np.inf, **kw)[0]
    # 0 < z_d < R and |z_1| > R/2: two mirror halves in th < pi/2
    def second_half(th):
        lo = R / 2 / math.cos(th)
        hi = R / math.sin(th) if th > 1e-15 else np.inf
        if hi <= lo:
            return 0.0
        return quad(lambda rho: f(rho, th), lo, hi, epsabs=0, epsrel=1e-11)[0]
    second = 2 * quad(second_half, 0, math.pi / 2, points=[math.atan(2.0)], epsabs=0, epsrel=1e-10, limit=200)[0]
    assert two_estimates_lhs(spec, scalefn.constant(1.0), 0.0, R, yd) == pytest.approx(first + second, rel=1e-7)
    res = check_far_field_bound(spec, scalefn.constant(1.0), 1.0, R, yd)
    assert 0 < res["ratio"] < 50


@pytest.mark.parametrize("d", [1, 2])
def test_two_estimates_joint_scaling(d):
    phi = scalefn.power_log(0.3, 1.0)
    spec = KernelSpec(d, 1.2, ProductB(phi), kappa=1.0)
    r1 = check_far_field_bound(spec, phi, 1.0, 4.0, 0.1, 0.2)["ratio"]
    r2 = check_far_field_bound(spec, phi, 2.0, 8.0, 0.2, 0.2)["ratio"]
    assert r1 == pytest.approx(r2, rel=1e-7)


@pytest.mark.parametrize("d", [1, 2])
def test_two_estimates_slope_in_R(d):
    phi = scalefn.power_log(0.3)
    spec = KernelSpec(d, 1.2, ProductB(phi), kappa=1.0)
    Rs = np.array([2.0, 4.0, 8.0, 16.0])
    lhs = [two_estimates_lhs(spec, phi, 0.2, R, 0.25) for R in Rs]
    slope = np.polyfit(np.log(Rs), np.log(lhs), 1)[0]
    assert slope == pytest.approx(0.2 - 1.2 + 0.3, abs=0.1)


def test_near_boundary_against_scipy():
    a, k, xd, R = 1.2, 0.5, 0.01, 1.0
    phi = scalefn.power_log(0.3, 1.0)
    spec = KernelSpec(1, a, ProductB(phi), kappa=1.0)
    f = lambda y: float(phi((y - xd) ** 2 / (xd * y))) * abs(y - xd) ** (k - 1 - a)
    kw = dict(epsabs=0, epsrel=1e-11, limit=400)
    ref = quad(f, 0, xd / 2, **kw)[0] + quad(f, 1.5 * xd, R, points=[0.1, 0.5], **kw)[0]
    assert near_boundary_integral(spec, phi, k, xd, R) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("d", [1, 2])
def test_near_boundary_regimes(d):
    phi = scalefn.power_log(0.3)
    a = 1.2
    spec = KernelSpec(d, a, ProductB(phi), kappa=1.0)
    xs = np.array([1e-2, 1e-3, 1e-4])
    low = [check_near_boundary_bound(spec, phi, 0.5, x_, 1.0) for x_ in xs]
    assert {v["regime"] for v in low} == {"lower"}
    assert np.polyfit(np.log(xs), np.log([v["value"] for v in low]), 1)[0] == pytest.approx(0.5 - a, abs=0.1)
    Rs = np.array([1.0, 2.0, 4.0])
    up = [check_near_boundary_bound(spec, phi, 1.5, 1e-3, R) for R in Rs]
    assert {v["regime"] for v in up} == {"upper"}
    assert np.polyfit(np.log(Rs), np.log([v["value"] for v in up]), 1)[0] == pytest.approx(1.5 + 0.3 - a, abs=0.1)
    ratios = [v["ratio"] for v in low + up]
    assert max(ratios) / min(ratios) < 50


def test_near_boundary_log_case():
    phi = scalefn.power_log(0.3)
    spec = KernelSpec(1, 1.2, ProductB(phi), kappa=1.0)
    k, xd = 0.9, 1e-3
    Rs = 2.0 ** np.arange(4)
    y = np.array([near_boundary_integral(spec, phi, k, xd, R) for R in Rs]) / xd ** (k - 1.2)
    lr = np.log(Rs / xd)
    slope, icpt = np.polyfit(lr, y, 1)
    assert slope > 0
    assert np.max(np.abs(np.polyval([slope, icpt], lr) / y - 1)) < 0.05


# ---------------------------------------------------------------- truncated power

def test_truncated_tail_against_scipy():
    spec = KernelSpec(1, 1.5, UnitB(), kappa=0.5)
    p, R, z = spec.p, 1.0, 0.2
    ref = quad(lambda y: y ** p * (y - z) ** -2.5, R, np.inf, epsabs=0, epsrel=1e-12)[0]
    assert truncated_tail(spec, p, R, [z]) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("b", MODELS)
def test_truncated_power_two_routes(d, b):
    spec = KernelSpec(d, 1.5, b, kappa=0.8)
    z = np.r_[np.full(d - 1, 0.1), 0.2]
    direct = check_truncated_power(spec, getattr(b, "phi", scalefn.constant(1.0)), 1.0, z)
    pv = apply_pv_generator(spec, truncated_power(spec.p, 1.0), z)
    assert direct["value"] < 0
    assert pv.value == pytest.approx(direct["value"], rel=1e-6)


def test_truncated_power_bound_ratio():
    spec = KernelSpec(2, 1.5, ProductB(PHI), kappa=0.8)
    ratios = []
    for zd in (1e-3, 1e-2, 0.1, 0.4):
        for z1 in (0.0, 0.3):
            res = check_truncated_power(spec, PHI, 1.0, [z1, zd])
            assert res["value"] < 0
            ratios.append(res["ratio"])
    assert max(ratios) / min(ratios) < 50
