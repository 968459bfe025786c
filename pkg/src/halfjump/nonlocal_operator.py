"""Principal-value evaluation of the generator on test functions, and the
integral bounds used to control it near the boundary.

The generator is taken with the kernel ``|x-y|**(-d-alpha) * B(x, y)``,
i.e. without the stable constant, so that it maps ``y_d**p`` to
``C(alpha, p, B) * x_d**(p - alpha)`` with the characteristic constant as
computed in :mod:`halfjump.characteristic_constant`.  The process generator
is this operator times the stable constant.

Numerically the integral is split at ``|y - x| = x_d/2``.  Outside, the
integrand is absolutely integrable and is integrated over depth (log
variable) and lateral position.  Inside, points ``x + r w`` and ``x - r w``
are paired, which is the symmetric principal-value limit itself; the paired
integrand is ``O(r**(1-alpha))`` and is integrated in ``log r``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .kernel_core import as_points, envelope_argument
from .quadrature import integrate_batch, integrate_exp_tails

SMALL_R = 1e-4
FAN = np.array([1.0, 4.0, 16.0, 64.0, 256.0, 1024.0])


@dataclass
class TestFunction:
    """``power`` (y_d**p), ``truncated`` (y_d**p on the box D(R, R)) or ``bump``.

    The bump is ``(1 - |y - center|**2 / radius**2)**3`` inside the ball, a C^2
    profile with compact support.
    """
    __test__ = False
    kind: str
    p: float = 0.0
    R: float = math.inf
    center: tuple = ()
    radius: float = 1.0

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "bump":
            c = np.asarray(self.center, dtype=float)
            s = 1.0 - np.sum((y - c) ** 2, axis=-1) / self.radius ** 2
            return np.where(s > 0, s, 0.0) ** 3
        val = np.maximum(y[..., -1], 0.0) ** self.p
        if self.kind == "truncated":
            inside = y[..., -1] < self.R
            if y.shape[-1] > 1:
                inside &= np.sqrt(np.sum(y[..., :-1] ** 2, axis=-1)) < self.R
            val = np.where(inside, val, 0.0)
        return val

    def depth_hints(self):
        if self.kind == "truncated":
            return [self.R]
        if self.kind == "bump":
            c = self.center[-1]
            return [max(c - self.radius, 1e-300), c, c + self.radius]
        return []

    def lateral_hints(self):
        if self.kind == "truncated":
            return [-self.R, self.R]
        if self.kind == "bump" and len(self.center) > 1:
            c = self.center[0]
            return [c - self.radius, c, c + self.radius]
        return []

    def growth(self):
        """Power growth at infinity (for tail windows)."""
        return self.p if self.kind == "power" else 0.0


def power(p):
    return TestFunction("power", p=p)


def truncated_power(p, R):
    return TestFunction("truncated", p=p, R=R)


def smooth_bump(center, radius):
    return TestFunction("bump", center=tuple(center), radius=radius)


@dataclass
class PVSchedule:
    """Geometric cut-offs ``r0 * ratio**k`` used for convergence diagnostics."""
    ratio: float = 0.5
    count: int = 8
    richardson: bool = True


@dataclass
class PVResult:
    value: float
    generator: float
    outer: float
    inner: float
    eps: np.ndarray = field(repr=False)
    partial: np.ndarray = field(repr=False)
    contraction: float = np.nan
    extrapolated: float = np.nan
    converged: bool = True


class PVFailure(RuntimeError):
    pass


def _window(rate, tol):
    return math.log(1e3 / tol) / max(rate, 0.05)


def _kernel(spec, x, y):
    r2 = np.sum((x - y) ** 2, axis=-1)
    return r2 ** (-0.5 * (spec.d + spec.alpha)) * spec.b_model(x, y)


def _line_pieces(centre, gap, width, hints):
    """Breakpoints for R minus (centre-gap, centre+gap): two pieces per problem."""
    n = centre.size
    fan = np.concatenate([-FAN[::-1], FAN])
    pts = [centre[:, None] + width[:, None] * fan]
    if hints:
        pts.append(np.tile(np.asarray(hints, float), (n, 1)))
    pts = np.concatenate(pts, axis=1)
    lo_edge = (centre - gap)[:, None]
    hi_edge = (centre + gap)[:, None]
    left = np.sort(np.minimum(pts, lo_edge), axis=1)
    right = np.sort(np.maximum(pts, hi_edge), axis=1)
    col = np.full((n, 1), np.inf)
    return (np.concatenate([-col, left, lo_edge], axis=1),
            np.concatenate([hi_edge, right, col], axis=1))


def _outer(spec, f, x, r0, tol):
    """Integral of (f(y) - f(x)) K(x, y) over the half-space minus B(x, r0)."""
    d, a = spec.d, spec.alpha
    xd = x[-1]
    fx = float(f(x))
    b2 = spec.beta2
    lo_rate = 1.0 - b2
    hi_rate = a - f.growth() - b2 + (0.0 if d == 1 else 0.0)
    lx = math.log(xd)
    marks = [lx - _window(lo_rate, tol), lx - 3.0, math.log(xd - r0), lx,
             math.log(xd + r0), lx + 3.0, lx + _window(hi_rate, tol)]
    marks += [math.log(h) for h in f.depth_hints() if h > 0]
    marks = sorted(marks)

    if d == 1:
        def g(w, pid):
            y = np.exp(w)
            yy = y[:, None]
            out = (f(yy) - fx) * _kernel(spec, np.full_like(yy, xd), yy) * y
            return np.where(np.abs(y - xd) < r0, 0.0, out)
        v, e = integrate_exp_tails(g, [marks], rtol=tol, atol=0.0)
        return float(v[0])

    lat0 = x[0]

    def lateral(yd):
        gap = np.sqrt(np.maximum(r0 ** 2 - (yd - xd) ** 2, 0.0))
        width = np.abs(yd - xd) + 0.5 * np.minimum(yd, xd)
        left, right = _line_pieces(np.full(yd.size, lat0), gap, width, f.lateral_hints())
        breaks = np.concatenate([left, right])
        ydd = np.r_[yd, yd]

        def h(y1, pid):
            pts = np.stack([y1, ydd[pid]], axis=1)
            return (f(pts) - fx) * _kernel(spec, x[None, :], pts)

        v, _ = integrate_batch(h, breaks, rtol=tol * 0.1, atol=0.0,
                               tail_power=1.0 + a - 2 * b2, tail_scale=np.r_[width, width])
        return v[:yd.size] + v[yd.size:]

    def g(w, pid):
        y = np.exp(w)
        return lateral(y) * y

    v, _ = integrate_exp_tails(g, [marks], rtol=tol, atol=0.0)
    return float(v[0])


def _inner_integrand(spec, f, x, r):
    """Paired integrand over the ball, integrated over directions, at radii r."""
    d, a = spec.d, spec.alpha
    fx = float(f(x))
    if d == 1:
        up = x[None, :] + r[:, None]
        dn = x[None, :] - r[:, None]
        pair = (f(up) - fx) * spec.b_model(x[None, :], up) + (f(dn) - fx) * spec.b_model(x[None, :], dn)
        return pair * r ** (-1.0 - a)
    # d = 2: half circle of directions, fixed Gauss-Legendre in the angle
    nodes, weights = np.polynomial.legendre.leggauss(48)
    phi = 0.5 * math.pi * (nodes + 1.0)
    wts = 0.5 * math.pi * weights
    om = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    up = x[None, None, :] + r[:, None, None] * om[None, :, :]
    dn = x[None, None, :] - r[:, None, None] * om[None, :, :]
    pair = (f(up) - fx) * spec.b_model(x[None, None, :], up) \
        + (f(dn) - fx) * spec.b_model(x[None, None, :], dn)
    return (pair @ wts) * r ** (-1.0 - a)


def _inner(spec, f, x, r0, eps, tol):
    """Inner-ball integral from each cut-off in ``eps`` (0 means the full limit)."""
    a = spec.alpha
    eps = np.asarray(eps, dtype=float)

    def g(w, pid):
        r = np.exp(w)
        return _inner_integrand(spec, f, x, r) * r

    top = math.log(r0)
    # below r_c the paired integrand is quadratic in r up to O(r^3); taking it
    # exactly quadratic there avoids the rounding in f(x+r) + f(x-r) - 2 f(x)
    low = top + math.log(SMALL_R)
    val, _ = integrate_batch(g, [[low, low + 2.0, top - 4.0, top - 1.0, top]], rtol=tol, atol=0.0)
    below = float(g(np.array([low]), np.zeros(1, int))[0]) / (2.0 - a)
    full = np.array([val[0] + below])
    cut = eps > 0
    partial = np.full(eps.shape, float(full[0]))
    if np.any(cut):
        lo = np.log(eps[cut])
        breaks = np.stack([lo, 0.5 * (lo + top), np.full(lo.shape, top)], axis=1)
        vals, _ = integrate_batch(g, breaks, rtol=tol, atol=0.0)
        partial[cut] = vals
    return float(full[0]), partial


def apply_pv_generator(spec, f, x, schedule=None, tol=1e-9):
    """Generator (reduced kernel) applied to ``f`` at ``x``, with diagnostics.

    ``value`` includes the killing term ``-kappa x_d**-alpha f(x)``;
    ``generator`` is the jump part alone.  The diagnostics record partial
    integrals with the inner ball cut at ``eps_k``; their increments must
    contract geometrically, otherwise ``PVFailure`` is raised.
    """
    if spec.d > 2:
        raise NotImplementedError("principal-value evaluation is implemented for d = 1, 2")
    schedule = schedule or PVSchedule()
    x = np.asarray(as_points(x, spec.d), dtype=float).reshape(spec.d)
    xd = x[-1]
    r0 = 0.5 * xd
    outer = _outer(spec, f, x, r0, tol)
    eps = r0 * schedule.ratio ** np.arange(1, schedule.count + 1)
    inner, partial = _inner(spec, f, x, r0, eps, tol)
    seq = outer + partial
    diffs = np.abs(np.diff(seq))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = diffs[1:] / diffs[:-1]
    finite = ratios[np.isfinite(ratios)]
    # an exactly constant sequence (f flat near x) counts as fully contracted
    contraction = float(finite.max()) if finite.size else (0.0 if ratios.size else np.nan)
    expected = schedule.ratio ** (2.0 - spec.alpha)
    extrap = np.nan
    if schedule.richardson and seq.size >= 2:
        extrap = float(seq[-1] + (seq[-1] - seq[-2]) * expected / (1.0 - expected))
    gen = outer + inner
    converged = bool(np.all(diffs < 1e-12 * max(1.0, abs(gen))) or contraction < 1.0)
    if not converged:
        raise PVFailure(f"cut-off sequence does not contract (ratio {contraction:.3g})")
    value = gen - spec.kappa * xd ** (-spec.alpha) * float(f(x))
    return PVResult(value, gen, outer, inner, eps, seq, contraction, extrap, converged)


# ------------------------------------------------------------ integral bounds

def two_estimates_lhs(spec, phi, q, R, yd, tol=1e-9):
    """Sum of the far-depth and far-lateral integrals of phi(|z|^2/(y_d z_d)) z_d^q |z|^(-d-a)."""
    d, a = spec.d, spec.alpha
    b2 = max(phi.upper_index, 0.0)

    def depth_only(w, pid):
        z = np.exp(w)
        return phi(z / yd) * z ** (q - a)

    lo = math.log(R / 2.0)
    if d == 1:
        v, _ = integrate_exp_tails(depth_only, [[lo, lo + 2.0, lo + _window(a - q - b2, tol)]], rtol=tol)
        return float(v[0])

    def lateral_far(zd, start):
        zd = np.atleast_1d(zd)
        st = np.broadcast_to(start, zd.shape).astype(float)

        def h(z1, pid):
            z2 = z1 * z1 + zd[pid] ** 2
            return 2.0 * phi(z2 / (yd * zd[pid])) * zd[pid] ** q * z2 ** (-0.5 * (d + a))
        breaks = np.stack([st, st + zd, st + 4 * zd + R, np.full(zd.shape, np.inf)], axis=1)
        v, _ = integrate_batch(h, breaks, rtol=tol * 0.1, atol=0.0,
                               tail_power=d + a - 2 * b2, tail_scale=zd + R)
        return v

    def first(w, pid):
        z = np.exp(w)
        return lateral_far(z, 0.0) * z

    v1, _ = integrate_exp_tails(first, [[lo, lo + 2.0, lo + _window(a - q - b2, tol)]], rtol=tol)

    def second(w, pid):
        z = np.exp(w)
        return lateral_far(z, R / 2.0) * z

    top = math.log(R)
    v2, _ = integrate_batch(second, [[top - _window(1.0 + q, tol), top - 4.0, top - 1.0, top]],
                            rtol=tol, atol=0.0)
    return float(v1[0] + v2[0])


def check_far_field_bound(spec, phi, r, R, yd, q=0.0, tol=1e-9):
    """Left side, bound ``phi(r/y_d) R^(q-a+b2) r^(-b2)`` (unit constant), and their ratio."""
    if not 0 < r <= R:
        raise ValueError("need 0 < r <= R")
    if not 0 < yd < r / 2:
        raise ValueError("y must lie in U(r)")
    b2 = phi.upper_index
    lhs = two_estimates_lhs(spec, phi, q, R, yd, tol)
    bound = float(phi(r / yd)) * R ** (q - spec.alpha + b2) * r ** (-b2)
    return {"lhs": lhs, "bound": bound, "ratio": lhs / bound}


def near_boundary_integral(spec, phi, k, xd, R, tol=1e-9):
    """Integral of phi(|x-y|^2/(x_d y_d)) |x-y|^(k-d-a) over D(R, R) minus B(x, x_d/2)."""
    d, a = spec.d, spec.alpha
    x = np.zeros(d)
    x[-1] = xd
    r0 = 0.5 * xd

    def kern(y):
        r2 = np.sum((y - x) ** 2, axis=-1)
        return phi(r2 / (xd * y[..., -1])) * r2 ** (0.5 * (k - d - a))

    b2 = max(phi.upper_index, 0.0)
    lx = math.log(xd)
    top = math.log(R)
    marks = [lx - _window(1.0 - b2, tol), lx - 3.0, math.log(xd - r0), lx, math.log(xd + r0)]
    marks += [m for m in (lx + 3.0, lx + 8.0) if m < top] + [top]
    marks = sorted(marks)

    if d == 1:
        def g(w, pid):
            y = np.exp(w)
            out = kern(y[:, None]) * y
            return np.where(np.abs(y - xd) < r0, 0.0, out)
        v, _ = integrate_batch(g, [marks], rtol=tol, atol=0.0)
        # the piece below the window is an exponential tail in the log variable
        return float(v[0])

    def lateral(yd):
        gap = np.sqrt(np.maximum(r0 ** 2 - (yd - xd) ** 2, 0.0))
        width = np.abs(yd - xd) + 0.5 * np.minimum(yd, xd)
        fan = np.concatenate([[0.0], FAN])
        pts = np.minimum(gap[:, None] + width[:, None] * fan, R)
        breaks = np.concatenate([np.maximum(pts, gap[:, None]), np.full((yd.size, 1), R)], axis=1)
        breaks.sort(axis=1)

        def h(y1, pid):
            pts_ = np.stack([y1, yd[pid]], axis=1)
            return 2.0 * kern(pts_)
        v, _ = integrate_batch(h, breaks, rtol=tol * 0.1, atol=0.0)
        return v

    def g(w, pid):
        y = np.exp(w)
        return lateral(y) * y

    v, _ = integrate_batch(g, [marks], rtol=tol, atol=0.0)
    return float(v[0])


def near_boundary_bound(spec, phi, k, xd, R):
    """Three-regime bound with unit constant; returns (bound, regime name)."""
    a = spec.alpha
    b1, b2 = phi.lower_index, phi.upper_index
    ph = float(phi(R / xd))
    if k + b1 >= a:
        log_term = math.log(R / xd) if k + b1 == a else 0.0
        return R ** (k - a) * ph * (1.0 + log_term), "upper"
    if k + b2 <= a:
        log_term = math.log(R / xd) if k + b2 == a else 0.0
        return xd ** (k - a) * (1.0 + log_term), "lower"
    first = R ** (-b1) * ph * xd ** (k - a + b1)
    second = R ** (k + b2 - a) * xd ** (-b2)
    return min(first, second), "middle"


def check_near_boundary_bound(spec, phi, k, xd, R, tol=1e-9):
    if not 0 < xd <= R / 2:
        raise ValueError("need 0 < x_d <= R/2")
    val = near_boundary_integral(spec, phi, k, xd, R, tol)
    bound, regime = near_boundary_bound(spec, phi, k, xd, R)
    return {"value": val, "regime": regime, "bound": bound, "ratio": val / bound}


def truncated_tail(spec, p, R, z, tol=1e-9):
    """Integral of y_d^p K(z, y) over the complement of D(R, R) (lateral box centred at 0)."""
    d, a = spec.d, spec.alpha
    z = np.asarray(as_points(z, d), float).reshape(d)
    b2 = spec.beta2
    top = math.log(R)

    if d == 1:
        def g(w, pid):
            y = np.exp(w)
            return y ** p * _kernel(spec, np.full((y.size, 1), z[0]), y[:, None]) * y
        v, _ = integrate_exp_tails(g, [[top, top + 1.0, top + 3.0, top + _window(a - p - b2, tol)]],
                                   rtol=tol, atol=0.0)
        return float(v[0])

    def lateral(yd, below):
        n = yd.size
        if below:
            # |y1| > R on both sides
            width = np.full(n, R)
            lo = np.stack([np.full(n, -np.inf), -R - 4 * width, -R - width, np.full(n, -R)], axis=1)
            hi = np.stack([np.full(n, R), R + width, R + 4 * width, np.full(n, np.inf)], axis=1)
        else:
            width = yd + R
            lo = np.stack([np.full(n, -np.inf), z[0] - width, z[0] - 0.1 * width, np.full(n, z[0])], axis=1)
            hi = np.stack([np.full(n, z[0]), z[0] + 0.1 * width, z[0] + width, np.full(n, np.inf)], axis=1)
        breaks = np.concatenate([lo, hi])
        ydd = np.r_[yd, yd]

        def h(y1, pid):
            pts = np.stack([y1, ydd[pid]], axis=1)
            return ydd[pid] ** p * _kernel(spec, z[None, :], pts)

        v, _ = integrate_batch(h, breaks, rtol=tol * 0.1, atol=0.0,
                               tail_power=2.0 + a - 2 * b2, tail_scale=np.r_[width, width])
        return v[:n] + v[n:]

    def above(w, pid):
        y = np.exp(w)
        return lateral(y, False) * y

    def below(w, pid):
        y = np.exp(w)
        return lateral(y, True) * y

    v1, _ = integrate_exp_tails(above, [[top, top + 1.0, top + 3.0, top + _window(a - p - b2, tol)]],
                                rtol=tol, atol=0.0)
    lz = math.log(z[-1])
    v2, _ = integrate_exp_tails(below, [[min(lz, top) - _window(1.0 + p - b2, tol), min(lz, top) - 1, top]],
                                rtol=tol, atol=0.0)
    return float(v1[0] + v2[0])


def check_truncated_power(spec, phi, R, z, tol=1e-9, p=None):
    """Generator of ``y_d^p 1_{D(R,R)}`` at ``z`` in ``U(R)`` with ``p = p(kappa)``.

    Since the generator (with killing) annihilates ``y_d^p`` itself, the value is
    minus the tail integral outside the box.  Returns the value, the envelope
    bound ``R^(p-a) phi(R/z_d)`` (unit constant) and their ratio.
    """
    p = spec.p if p is None else p
    z = np.asarray(as_points(z, spec.d), float).reshape(spec.d)
    val = -truncated_tail(spec, p, R, z, tol)
    bound = R ** (p - spec.alpha) * float(phi(R / z[-1]))
    return {"p": p, "value": val, "bound": bound, "ratio": -val / bound}
