"""Half-space geometry, the stable kernel, boundary factors and the killing term.

Points are numpy arrays whose last axis holds the ``d`` coordinates; the
last coordinate is the distance to the boundary.  In one dimension a plain
array of positive numbers is also accepted.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import scalefn


def stable_constant(d, alpha):
    """Normalizing constant of the isotropic stable jump density."""
    log_num = alpha * math.log(2.0) - 0.5 * d * math.log(math.pi) + gammaln(0.5 * (d + alpha))
    # |Gamma(-alpha/2)| = Gamma(1 - alpha/2) / (alpha/2)
    log_den = gammaln(1.0 - 0.5 * alpha) - math.log(0.5 * alpha)
    return math.exp(log_num - log_den)


def as_points(x, d):
    """Coerce to shape (..., d), rejecting points outside the open half-space."""
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ValueError(f"expected points with {d} coordinates, got shape {x.shape}")
    if np.any(x[..., -1] <= 0):
        raise ValueError("points must lie in the open upper half-space")
    return x


def distance(x, y):
    return np.sqrt(np.sum((x - y) ** 2, axis=-1))


def envelope_argument(x, y):
    """``|x-y|**2 / (x_d y_d)``, the scale-free quantity all boundary factors use."""
    return np.sum((x - y) ** 2, axis=-1) / (x[..., -1] * y[..., -1])


@dataclass(frozen=True)
class BoxRegion:
    """``{|x~ - center| < half_width, 0 < x_d < height}``; an interval in 1-d."""
    center: tuple = ()
    half_width: float = 1.0
    height: float = 1.0

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x[..., -1] > 0) & (x[..., -1] < self.height)
        if x.shape[-1] > 1:
            c = np.asarray(self.center if self.center else np.zeros(x.shape[-1] - 1))
            lateral = np.sqrt(np.sum((x[..., :-1] - c) ** 2, axis=-1))
            inside &= lateral < self.half_width
        return inside

    def scaled(self, lam):
        return BoxRegion(tuple(lam * c for c in self.center), lam * self.half_width, lam * self.height)

    def translated(self, shift):
        c = np.asarray(self.center if self.center else np.zeros(len(shift)), dtype=float)
        return BoxRegion(tuple(c + np.asarray(shift, dtype=float)), self.half_width, self.height)


def box(a, b, center=()):
    return BoxRegion(tuple(center), float(a), float(b))


def unit_box(r, d=1):
    """``U(r)``: the box of half-width and height ``r/2``."""
    return BoxRegion(tuple([0.0] * (d - 1)), 0.5 * r, 0.5 * r)


# ---------------------------------------------------------------- B models

class UnitB:
    """B = 1 (the censored stable kernel)."""
    name = "unit"
    lower_index = 0.0
    upper_index = 0.0

    def __call__(self, x, y):
        return np.ones(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]))

    def envelope(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def params(self):
        return {}


class ProductB:
    """B(x, y) = phi(|x-y|^2 / (x_d y_d))."""
    name = "product"

    def __init__(self, phi):
        self.phi = phi
        self.lower_index = phi.lower_index
        self.upper_index = phi.upper_index

    def __call__(self, x, y):
        return self.phi(envelope_argument(x, y))

    def envelope(self, t):
        return self.phi(t)

    def params(self):
        return {f"phi_{k}": v for k, v in scalefn.to_config(self.phi).items()}


class ProductPowerB:
    """Two-factor power boundary term; blows up for beta < 0, decays for beta > 0."""
    name = "productpower"

    def __init__(self, beta):
        self.beta = float(beta)
        self.lower_index = self.upper_index = -self.beta

    def __call__(self, x, y):
        dist = distance(x, y)
        lo = np.minimum(x[..., -1], y[..., -1])
        hi = np.maximum(x[..., -1], y[..., -1])
        with np.errstate(divide="ignore"):
            f1 = np.minimum(lo / dist, 1.0)
            f2 = np.minimum(hi / dist, 1.0)
        return (f1 * f2) ** self.beta

    def envelope(self, t):
        return np.maximum(np.asarray(t, dtype=float), scalefn.FLAT) ** (-self.beta)

    def params(self):
        return {"beta": repr(self.beta)}


@dataclass
class KernelSpec:
    """Dimension, stability index, boundary factor and killing constant.

    The decay exponent ``p`` is derived from ``kappa`` and never stored.
    """
    d: int
    alpha: float
    b_model: object = field(default_factory=UnitB)
    kappa: float = 0.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("dimension must be a positive integer")
        self.d = int(self.d)
        if not 0.0 < self.alpha < 2.0:
            raise ValueError("alpha must lie in (0, 2)")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.kappa == 0 and self.alpha <= 1:
            raise ValueError("kappa = 0 requires alpha > 1")
        self._p = None

    @property
    def stable_constant(self):
        return stable_constant(self.d, self.alpha)

    @property
    def beta2(self):
        """Declared upper index of the boundary blow-up (at least 0)."""
        return max(float(self.b_model.upper_index), 0.0)

    @property
    def p(self):
        if self._p is None:
            from .characteristic_constant import solve_p
            self._p = solve_p(self, self.kappa).p
        return self._p


def j_kernel(spec, x, y):
    x, y = as_points(x, spec.d), as_points(y, spec.d)
    dist = distance(x, y)
    if np.any(dist == 0):
        raise ZeroDivisionError("the stable kernel is singular on the diagonal")
    return spec.stable_constant * dist ** (-spec.d - spec.alpha)


def b_factor(spec, x, y):
    x, y = as_points(x, spec.d), as_points(y, spec.d)
    if np.any(distance(x, y) == 0):
        raise ZeroDivisionError("the boundary factor is only defined off the diagonal")
    return spec.b_model(x, y)


def jump_kernel(spec, x, y):
    """J = j * B."""
    return j_kernel(spec, x, y) * b_factor(spec, x, y)


def killing(spec, x):
    """``kappa * x_d**-alpha`` in the normalization of the characteristic constant."""
    x = as_points(x, spec.d)
    return spec.kappa * x[..., -1] ** (-spec.alpha)


def check_axioms(spec, x, y, theta=1.0, interior=0.5, scales=(0.5, 2.0, 10.0),
                 shifts=None):
    """Empirical residuals for symmetry, Hoelder regularity, the blow-up envelope and scaling.

    ``x`` and ``y`` are arrays of sample pairs.  The envelope constant is
    fitted as ``sqrt(max/min)`` of ``B / envelope``; the Hoelder quotient is
    taken over pairs with ``min(x_d, y_d) >= interior * |x - y|``.
    """
    x, y = as_points(x, spec.d), as_points(y, spec.d)
    B = spec.b_model
    bxy = B(x, y)
    sym = np.abs(B(y, x) - bxy) / bxy

    scale_res = []
    for lam in scales:
        scale_res.append(np.abs(B(lam * x, lam * y) - bxy) / bxy)
    trans_res = np.zeros(1)
    if spec.d > 1:
        if shifts is None:
            shifts = [np.r_[np.full(spec.d - 1, 3.7), 0.0], np.r_[np.full(spec.d - 1, -0.25), 0.0]]
        trans_res = np.concatenate([np.abs(B(x + s, y + s) - bxy) / bxy for s in shifts])

    ratio = bxy / B.envelope(envelope_argument(x, y))
    c_env = float(np.sqrt(ratio.max() / ratio.min()))

    dist = distance(x, y)
    near = np.minimum(x[..., -1], y[..., -1]) >= interior * dist
    holder = np.nan
    if np.any(near):
        xs, ys = x[near], y[near]
        # B(x, x) read off as the limit along a short segment toward x
        bxx = B(xs, xs + 1e-9 * (ys - xs))
        rel = dist[near] / np.minimum(xs[..., -1], ys[..., -1])
        holder = float(np.max(np.abs(bxx - B(xs, ys)) / rel ** theta))

    return {
        "A1_symmetry": float(sym.max()),
        "A2_holder": holder,
        "A3_envelope_constant": c_env,
        "A4_scaling": float(np.max(scale_res)),
        "A4_translation": float(trans_res.max()),
    }


def make_b_model(name, params):
    """Build one of the closed-form boundary factors from flat parameters."""
    name = name.strip().lower()
    if name == "unit":
        return UnitB()
    if name == "product":
        block = {k[4:]: v for k, v in params.items() if k.startswith("phi_")}
        return ProductB(scalefn.from_config(block))
    if name == "productpower":
        return ProductPowerB(float(params["beta"]))
    raise ValueError(f"unknown closed-form boundary model {name!r}")
