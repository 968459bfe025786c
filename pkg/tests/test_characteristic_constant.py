import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.special import gamma as G, rgamma

from halfjump import scalefn
from halfjump.characteristic_constant import admissible_range, big_c, probe_supremum, solve_p
from halfjump.kernel_core import KernelSpec, ProductB, ProductPowerB, UnitB


def unit_closed_form(a, q):
    """Beta-function continuation of the one-dimensional integral with B = 1 (a != 1)."""
    return G(-a) * (G(q + 1) * rgamma(q + 1 - a) - rgamma(1 - a) + G(a - q) * rgamma(-q))


def direct_quad(a, q, b_of_s):
    """Independent scipy route: s-integral split at the flat-extension kink, log variable near s = 1."""
    def part(ls):
        return np.expm1(q * ls) * np.expm1((a - q - 1) * ls)
    kw = dict(epsabs=0, epsrel=1e-11, limit=500)
    kink = 2 - np.sqrt(3)
    left = sum(quad(lambda s: -part(np.log(s)) * (1 - s) ** (-1 - a) * b_of_s(s), a_, b_, **kw)[0]
               for a_, b_ in ((0, 1e-3), (1e-3, kink), (kink, 0.5)))
    # s = 1 - exp(-w) up to w = W, then the leading t^(2-a) term
    W = 100.0
    right = quad(lambda w: -part(np.log1p(-np.exp(-w))) * np.exp(a * w) * b_of_s(-np.expm1(-w)),
                 np.log(2), W, points=[1, 3, 10, 30], **kw)[0]
    tail = -q * (a - q - 1) * b_of_s(1.0) * np.exp(-(2 - a) * W) / (2 - a)
    return left + right + tail


MODELS = [UnitB(), ProductB(scalefn.power_log(0.2)), ProductPowerB(-0.2)]


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.5])
@pytest.mark.parametrize("b", MODELS[:2])
def test_zero_identities_through_quadrature(d, alpha, b):
    spec = KernelSpec(d, alpha, b, kappa=1.0)
    assert abs(big_c(spec, 0.0, shortcut=False)) <= 1e-8
    assert abs(big_c(spec, alpha - 1.0, shortcut=False)) <= 1e-8


@pytest.mark.parametrize("alpha", [0.6, 1.5, 1.9])
@pytest.mark.parametrize("q", [-0.7, -0.2, 0.3, 0.55])
def test_unit_model_closed_form(alpha, q):
    spec = KernelSpec(1, alpha, UnitB(), kappa=1.0)
    if not admissible_range(spec)[0] < q < admissible_range(spec)[1]:
        pytest.skip("outside admissible range")
    assert big_c(spec, q) == pytest.approx(unit_closed_form(alpha, q), rel=1e-9, abs=1e-12)


def test_positive_value_two_routes():
    spec = KernelSpec(1, 1.5, UnitB(), kappa=1.0)
    v = big_c(spec, 1.0)
    assert v > 0
    assert v == pytest.approx(direct_quad(1.5, 1.0, lambda s: 1.0), rel=1e-6)
    assert v == pytest.approx(unit_closed_form(1.5, 1.0), rel=1e-9)


@pytest.mark.parametrize("alpha, q", [(1.0, 0.3), (1.0, -0.5), (1.3, 0.7), (0.7, 0.4)])
def test_product_model_against_scipy(alpha, q):
    phi = scalefn.power_log(0.2, 1.0)
    spec = KernelSpec(1, alpha, ProductB(phi), kappa=1.0)
    ref = direct_quad(alpha, q, lambda s: float(phi((1 - s) ** 2 / s)))
    assert big_c(spec, q) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("b", MODELS)
@pytest.mark.parametrize("alpha", [0.6, 1.5])
def test_sign_table(b, alpha):
    spec = KernelSpec(1, alpha, b, kappa=1.0)
    lo, hi = admissible_range(spec)
    b2 = spec.beta2
    pos = np.r_[np.linspace(b2 - 1, min(alpha - 1, 0), 6)[1:-1], np.linspace(max(alpha - 1, 0), hi, 6)[1:-1]]
    neg = np.linspace(min(alpha - 1, 0), max(alpha - 1, 0), 6)[1:-1]
    assert all(big_c(spec, q) > 0 for q in pos)
    assert all(big_c(spec, q) < 0 for q in neg)


def test_decay_exponent_special_values():
    assert solve_p(KernelSpec(1, 1.5, UnitB()), 0.0).p == pytest.approx(0.5, abs=1e-12)
    assert solve_p(KernelSpec(1, 0.8, UnitB(), kappa=1.0), 0.0).p == 0.0
    assert KernelSpec(2, 1.5, ProductB(scalefn.power_log(0.2)), kappa=0.0).p == pytest.approx(0.5)


@pytest.mark.parametrize("d", [1, 2])
def test_round_trip(d):
    spec = KernelSpec(d, 1.2, ProductB(scalefn.power_log(0.1)), kappa=1.0)
    for target in (0.3, 0.5, 0.9):
        assert solve_p(spec, big_c(spec, target)).p == pytest.approx(target, abs=1e-6)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_strictly_increasing(u, v):
    spec = KernelSpec(1, 1.3, ProductB(scalefn.power_log(0.2)), kappa=1.0)
    lo, hi = 0.3, 1.3 - 0.2
    q1, q2 = sorted((lo + (hi - lo) * 0.999 * u, lo + (hi - lo) * 0.999 * v))
    if q2 - q1 < 1e-6:
        return
    assert big_c(spec, q1) < big_c(spec, q2)


def test_power_model_blows_up_at_endpoint():
    spec = KernelSpec(1, 1.2, ProductB(scalefn.power_log(0.3)), kappa=1.0)
    hi = admissible_range(spec)[1]
    vals = [big_c(spec, hi - 0.1 * 2.0 ** -k) for k in range(0, 12, 2)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] > 30 * vals[0]
    assert probe_supremum(spec, depth=8) < probe_supremum(spec, depth=16)
    assert big_c(spec, hi - 1e-4, full_output=True).ill_conditioned


def test_admissible_range_enforced():
    spec = KernelSpec(1, 1.2, ProductB(scalefn.power_log(0.3)), kappa=1.0)
    with pytest.raises(ValueError):
        big_c(spec, 0.9)
    with pytest.raises(ValueError):
        solve_p(spec, -1.0)
