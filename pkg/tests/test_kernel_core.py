import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma as G

from halfjump import scalefn
from halfjump.kernel_core import (BoxRegion, KernelSpec, ProductB, ProductPowerB, UnitB, b_factor,
                                  check_axioms, envelope_argument, j_kernel, jump_kernel, killing,
                                  make_b_model, stable_constant, unit_box)
from halfjump.resurrection import ResurrectionB, ReturnKernel


def random_pairs(rng, d, n=200):
    x = np.c_[rng.uniform(-2, 2, (n, d - 1)), np.exp(rng.uniform(-4, 3, n))]
    y = np.c_[rng.uniform(-2, 2, (n, d - 1)), np.exp(rng.uniform(-4, 3, n))]
    return x, y


def test_stable_constant_closed_form():
    assert stable_constant(1, 1.0) == pytest.approx(1 / math.pi, rel=1e-14)
    for d, a in [(1, 0.5), (2, 1.5), (3, 1.2)]:
        direct = a * 2 ** (a - 1) * G((d + a) / 2) / (math.pi ** (d / 2) * G(1 - a / 2))
        assert stable_constant(d, a) == pytest.approx(direct, rel=1e-12)


def test_jump_kernel_values():
    spec = KernelSpec(1, 1.0, UnitB(), kappa=1.0)
    assert j_kernel(spec, [1.0], [3.0]) == pytest.approx(1 / (4 * math.pi), rel=1e-14)
    x, y = np.array([[0.3, 1.0]]), np.array([[-0.4, 2.5]])
    spec2 = KernelSpec(2, 1.3, ProductB(scalefn.power_log(0.2)), kappa=1.0)
    np.testing.assert_allclose(3.0 ** (2 + 1.3) * jump_kernel(spec2, 3 * x, 3 * y), jump_kernel(spec2, x, y),
                               rtol=1e-14)


def test_product_flat_region():
    spec = KernelSpec(2, 1.0, ProductB(scalefn.power_log(0.25)), kappa=1.0)
    assert envelope_argument(np.array([0.0, 1.0]), np.array([0.0, 3.0])) == pytest.approx(4 / 3)
    assert b_factor(spec, [0.0, 1.0], [0.0, 3.0]) == pytest.approx(2 ** 0.25, rel=1e-14)


def test_unit_model_is_one(rng):
    spec = KernelSpec(2, 1.5, UnitB())
    x, y = random_pairs(rng, 2)
    np.testing.assert_array_equal(b_factor(spec, x, y), 1.0)


def test_killing_values():
    assert killing(KernelSpec(1, 1.5, UnitB(), 0.0), [[2.0]]) == 0.0
    spec = KernelSpec(1, 1.5, UnitB(), 1.0)
    assert killing(spec, [4.0]) == pytest.approx(0.125)
    assert killing(spec, [12.0]) == pytest.approx(3.0 ** -1.5 * killing(spec, [4.0]))


def test_standing_assumption_rejected():
    with pytest.raises(ValueError):
        KernelSpec(1, 0.9, UnitB(), kappa=0.0)
    with pytest.raises(ValueError):
        KernelSpec(1, 2.0, UnitB(), kappa=1.0)
    with pytest.raises(ValueError):
        j_kernel(KernelSpec(1, 1.5, UnitB()), [1.0], [-1.0])
    with pytest.raises(ZeroDivisionError):
        jump_kernel(KernelSpec(1, 1.5, UnitB()), [1.0], [1.0])


def test_product_axioms_exact(rng):
    spec = KernelSpec(2, 1.2, ProductB(scalefn.power_log(0.3, 1.0)), kappa=1.0)
    x, y = random_pairs(rng, 2)
    res = check_axioms(spec, x, y)
    assert res["A1_symmetry"] <= 1e-15
    assert res["A4_scaling"] <= 1e-14
    assert res["A4_translation"] <= 1e-14
    assert res["A3_envelope_constant"] == pytest.approx(1.0)


def test_product_power_matches_power_envelope(rng):
    spec = KernelSpec(2, 1.2, ProductPowerB(-0.3), kappa=1.0)
    x, y = random_pairs(rng, 2, 2000)
    b = b_factor(spec, x, y)
    ratio = b / scalefn.power_log(0.3)(envelope_argument(x, y))
    assert math.sqrt(ratio.max() / ratio.min()) <= 2.0
    res = check_axioms(spec, x, y)
    assert res["A1_symmetry"] <= 1e-15 and res["A4_scaling"] <= 1e-14


@given(st.floats(0.05, 20), st.floats(0.05, 20), st.floats(-5, 5), st.floats(0.1, 50))
def test_closed_form_homogeneity(xd, yd, lat, lam):
    for b in (UnitB(), ProductB(scalefn.power_log(0.3, 1.0)), ProductPowerB(0.4)):
        spec = KernelSpec(2, 1.4, b, kappa=1.0)
        x, y = np.array([0.0, xd]), np.array([lat, yd])
        if lat == 0 and xd == yd:
            continue
        j1 = jump_kernel(spec, lam * x, lam * y) * lam ** (2 + 1.4)
        assert j1 == pytest.approx(jump_kernel(spec, x, y), rel=1e-12)
        assert jump_kernel(spec, x, y) == pytest.approx(j_kernel(spec, x, y) * b_factor(spec, x, y), rel=1e-15)


def test_resurrection_model_symmetry_and_log_envelope(rng):
    kern = ReturnKernel(1, 1.5, scalefn.constant(1.0))
    spec = KernelSpec(1, 1.5, ResurrectionB(kern))
    x = np.exp(rng.uniform(-6, 6, 200))[:, None]
    y = np.exp(rng.uniform(-6, 6, 200))[:, None]
    res = check_axioms(spec, x, y)
    assert res["A1_symmetry"] <= 1e-9
    assert res["A4_scaling"] <= 1e-6
    # B - 1 against log(e + |x-y| / (x_d ^ y_d)) where the boundary is closer than the other point
    dist, low = np.abs(x - y)[:, 0], np.minimum(x, y)[:, 0]
    far = low <= dist
    assert far.sum() > 50
    ratio = (b_factor(spec, x, y)[far] - 1.0) / np.log(math.e + dist[far] / low[far])
    assert math.sqrt(ratio.max() / ratio.min()) < 10.0
    assert res["A3_envelope_constant"] < 10.0


def test_resurrection_model_two_dim_symmetry(rng):
    kern = ReturnKernel(2, 1.5, scalefn.power_log(0.75), tol=1e-8)
    spec = KernelSpec(2, 1.5, ResurrectionB(kern))
    x, y = random_pairs(rng, 2, 200)
    b1, b2 = b_factor(spec, x, y), b_factor(spec, y, x)
    assert np.max(np.abs(b1 - b2) / b1) <= 1e-7
    assert np.all(b1 >= 1.0)


def test_boxes():
    r = unit_box(2.0, d=2)
    pts = np.array([[0.9, 0.5], [1.1, 0.5], [0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(r.contains(pts), [True, False, False, False])
    np.testing.assert_array_equal(r.scaled(3.0).contains(3 * pts), r.contains(pts))
    s = r.translated([5.0])
    np.testing.assert_array_equal(s.contains(pts + [5.0, 0.0]), r.contains(pts))
    assert BoxRegion((), 1.0, 2.0).contains(np.array([[1.5]]))[0]


def test_model_factory():
    assert isinstance(make_b_model("unit", {}), UnitB)
    b = make_b_model("product", ProductB(scalefn.power_log(0.2)).params())
    assert b.phi(10.0) == pytest.approx(10.0 ** 0.2)
    assert make_b_model("productpower", {"beta": "0.5"}).beta == 0.5
    with pytest.raises(ValueError):
        make_b_model("nope", {})
