"""The characteristic constant C(alpha, q, B) and the decay exponent it defines.

``C(alpha, q, B)`` is the value at ``e_d`` of the (unnormalized) generator
applied to ``x_d**q``.  It is computed as a one-dimensional singular
integral in ``s`` over ``(0, 1)`` (times a lateral radial integral when
``d >= 2``).  Both endpoints carry power singularities; each half of the
s-range is mapped to a logarithmic variable where the integrand decays
exponentially, and differences such as ``s**q - 1`` are formed with
``expm1``/``log1p`` so nothing cancels catastrophically near ``s = 1``.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .quadrature import integrate_batch

ENDPOINT_FLAG = 1e-3
LN2 = math.log(2.0)


def sphere_area(n):
    """Surface area of the unit sphere in R^(n+1) (|S^n|); |S^0| = 2."""
    return 2.0 * math.pi ** ((n + 1) / 2) / math.exp(gammaln((n + 1) / 2))


def admissible_range(spec):
    """Open interval of exponents for which the constant is finite."""
    b2 = spec.beta2
    return -1.0 + b2, spec.alpha - b2


def _points(spec, s, t, rho):
    """x = ((1-s) rho e_1, 1), y = (0, s) with 1 - s passed separately as t."""
    n = s.size
    x = np.zeros((n, spec.d))
    y = np.zeros((n, spec.d))
    x[:, -1] = 1.0
    y[:, -1] = s
    if spec.d > 1:
        x[:, 0] = t * rho
    return x, y


def _integrand_zero_end(spec, q, v, rho):
    """Integrand times ds/dv for s = exp(-v); safe down to s ~ 1e-300."""
    a = spec.alpha
    s = np.exp(-v)
    t = -np.expm1(-v)
    first = np.expm1(-q * v)
    # (1 - s^(a-q-1)) * s, kept finite when a - q - 1 < 0
    second = s - np.exp(-(a - q) * v)
    x, y = _points(spec, s, t, rho)
    return first * second * t ** (-1.0 - a) * spec.b_model(x, y)


def _integrand_one_end(spec, q, w, rho):
    """Integrand times ds/dw for 1 - s = exp(-w); the two small factors are divided by t first."""
    a = spec.alpha
    t = np.exp(-w)
    ls = np.log1p(-t)
    first = np.expm1(q * ls) / t
    second = -np.expm1((a - q - 1.0) * ls) / t
    x, y = _points(spec, 1.0 - t, t, rho)
    return first * second * t ** (2.0 - a) * spec.b_model(x, y)


LOG_CUT = 690.0
ZERO_CUT = 500.0


def _s_integral(spec, q, rho, tol):
    """For each lateral radius rho, the s-integral (one batched solve).

    Both halves run in logarithmic variables up to ``LOG_CUT``; the piece
    beyond the cut near ``s = 1`` is added from its leading-order form.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    n = rho.size
    a = spec.alpha
    brk = np.array([LN2, LN2 + 1.0, LN2 + 4.0, 16.0, 48.0, 160.0, LOG_CUT])
    breaks = np.tile(brk, (n, 1))
    # the s -> 0 end stops earlier so blow-up factors of 1/s stay finite
    breaks0 = np.tile(np.r_[brk[:-1], ZERO_CUT], (n, 1))
    v0, e0 = integrate_batch(lambda v, pid: _integrand_zero_end(spec, q, v, rho[pid]),
                             breaks0, rtol=tol, atol=tol * 1e-3)
    v1, e1 = integrate_batch(lambda w, pid: _integrand_one_end(spec, q, w, rho[pid]),
                             breaks, rtol=tol, atol=tol * 1e-3)
    # past the zero-end cut the integrand decays like exp(-rate v); extrapolate
    f_cut = _integrand_zero_end(spec, q, np.full(n, ZERO_CUT), rho)
    f_before = _integrand_zero_end(spec, q, np.full(n, ZERO_CUT - 1.0), rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.log(np.abs(f_before / f_cut))
    zero_tail = np.where((rate > 0) & (f_cut != 0), f_cut / rate, 0.0)
    v0 = v0 + zero_tail
    e0 = e0 + 1e-3 * np.abs(zero_tail)
    t_cut = np.exp(-LOG_CUT)
    x, y = _points(spec, np.full(n, 1.0 - t_cut), np.full(n, t_cut), rho)
    tail = -q * (a - q - 1.0) * spec.b_model(x, y) * t_cut ** (2.0 - a) / (2.0 - a)
    return v0 + v1 + tail, e0 + e1


@dataclass
class CharConstant:
    value: float
    error: float
    ill_conditioned: bool


def big_c(spec, q, tol=1e-11, full_output=False, shortcut=True):
    """C(alpha, q, B) for the boundary model of ``spec``.

    Raises ``ValueError`` outside the admissible exponent range.  With
    ``full_output`` a ``CharConstant`` carrying the quadrature error and an
    endpoint-conditioning flag is returned.  With ``shortcut=False`` the two
    exponents where the integrand vanishes identically go through the
    quadrature as well.
    """
    lo, hi = admissible_range(spec)
    if not lo < q < hi:
        raise ValueError(f"exponent {q} outside the admissible range ({lo:g}, {hi:g})")
    if shortcut and (q == 0.0 or q == spec.alpha - 1.0):
        # one factor of the integrand vanishes identically
        value, error = 0.0, 0.0
    elif spec.d == 1:
        v, e = _s_integral(spec, q, [0.0], tol)
        value, error = float(v[0]), float(e[0])
    else:
        value, error = _lateral(spec, q, tol)
    res = CharConstant(value, error, hi - q < ENDPOINT_FLAG)
    return res if full_output else res.value


def _lateral(spec, q, tol):
    """Radial integral over R^(d-1) of the s-integral weighted by (rho^2+1)^(-(d+a)/2)."""
    d, a = spec.d, spec.alpha
    area = sphere_area(d - 2)

    def outer(rho, pid):
        inner, _ = _s_integral(spec, q, rho, tol * 0.1)
        return area * rho ** (d - 2) * inner * (rho * rho + 1.0) ** (-0.5 * (d + a))

    # blow-up factors grow like rho^(2 beta2), keeping the tail decay above 1
    decay = 1.0 + a - 2.0 * spec.beta2
    v, e = integrate_batch(outer, [[0.0, 1.0, 4.0, 16.0, np.inf]], rtol=tol, atol=tol * 1e-3,
                           tail_power=decay, tail_scale=16.0)
    return float(v[0]), float(e[0])


@dataclass
class SolveResult:
    kappa: float
    p: float
    residual: float
    iterations: int


def probe_supremum(spec, tol=1e-10, depth=12):
    """Largest constant value found on a geometric approach to the right endpoint."""
    lo, hi = admissible_range(spec)
    left = max(spec.alpha - 1.0, 0.0)
    best = -np.inf
    for k in range(1, depth + 1):
        q = hi - (hi - left) * 2.0 ** (-k)
        best = max(best, big_c(spec, q, tol))
    return best


def solve_p(spec, kappa, tol=1e-11, xtol=1e-12):
    """Root ``p`` of ``C(alpha, p, B) = kappa`` on ``[(alpha-1)_+, alpha - beta2)``."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    left = max(spec.alpha - 1.0, 0.0)
    _, hi = admissible_range(spec)
    if kappa == 0.0:
        return SolveResult(0.0, left, 0.0, 0)
    f = lambda q: big_c(spec, q, tol) - kappa
    right = None
    for k in range(1, 40):
        q = hi - (hi - left) * 2.0 ** (-k)
        if q <= left:
            continue
        if f(q) > 0:
            right = q
            break
    if right is None:
        raise ValueError(
            f"kappa={kappa} exceeds the attainable supremum (probed {probe_supremum(spec, tol):.6g})")
    p, info = brentq(f, left, right, xtol=xtol, rtol=4 * np.finfo(float).eps,
                     maxiter=100, full_output=True)
    return SolveResult(float(kappa), float(p), float(abs(f(p))), int(info.iterations))
