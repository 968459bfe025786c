"""Weak-scaling functions used for the boundary blow-up and for the return kernel.

A scaling function is positive on ``[0, inf)``, constant on ``[0, 2]`` and
satisfies two-sided power bounds on its ratios above 2::

    c1 * (R/r)**lower <= f(R)/f(r) <= c2 * (R/r)**upper,   2 <= r < R.
"""
import math
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .quadrature import integrate_batch

FLAT = 2.0

POWERLOG, CONSTANT, TABULATED = "powerlog", "constant", "tabulated"


@dataclass(frozen=True)
class ScalingFunction:
    """``t**gamma * log(t)**delta`` (powerlog), a constant, or a log-log table.

    Values below ``t = 2`` are frozen at the value at 2.  ``lower_index`` and
    ``upper_index`` are the declared weak-scaling indices; ``c1``/``c2`` the
    declared constants.
    """
    kind: str = POWERLOG
    gamma: float = 0.0
    delta: float = 0.0
    constant: float = 1.0
    table: tuple = ()
    lower_index: float = 0.0
    upper_index: float = 0.0
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if self.kind not in (POWERLOG, CONSTANT, TABULATED):
            raise ValueError(f"unknown scaling-function kind {self.kind!r}")
        if self.lower_index > self.upper_index:
            raise ValueError("lower_index must not exceed upper_index")
        if self.kind == CONSTANT and not self.constant > 0:
            raise ValueError("constant scaling function must be positive")
        if self.kind == TABULATED:
            t, v = self._table_arrays()
            if t.size < 2 or np.any(np.diff(t) <= 0) or np.any(v <= 0):
                raise ValueError("table needs increasing abscissae and positive values")

    def _table_arrays(self):
        arr = np.asarray(self.table, dtype=float)
        return arr[:, 0], arr[:, 1]

    def __call__(self, t):
        t = np.maximum(np.asarray(t, dtype=float), FLAT)
        if self.kind == CONSTANT:
            return np.full_like(t, self.constant)
        if self.kind == TABULATED:
            tt, vv = self._table_arrays()
            lt, lv = np.log(tt), np.log(vv)
            x = np.log(t)
            # linear in log-log inside the table, power-law continuation outside
            slope_lo = (lv[1] - lv[0]) / (lt[1] - lt[0])
            slope_hi = (lv[-1] - lv[-2]) / (lt[-1] - lt[-2])
            y = np.interp(x, lt, lv)
            y = np.where(x < lt[0], lv[0] + slope_lo * (x - lt[0]), y)
            y = np.where(x > lt[-1], lv[-1] + slope_hi * (x - lt[-1]), y)
            return np.exp(y)
        out = t ** self.gamma
        if self.delta != 0.0:
            out = out * np.log(t) ** self.delta
        return out

    def eval(self, t):
        """Scalar or array evaluation with the flat extension below 2."""
        v = self(t)
        return float(v) if np.ndim(v) == 0 else v

    def label(self):
        if self.kind == CONSTANT:
            return f"const{self.constant:g}"
        if self.kind == TABULATED:
            return "table"
        if self.delta == 0:
            return f"t^{self.gamma:g}"
        return f"t^{self.gamma:g}log^{self.delta:g}"


def power_log(gamma, delta=0.0, margin=0.05):
    """Convenience constructor with indices that hold for the log factor.

    A positive log power raises the upper index by ``margin``; a negative one
    lowers the lower index.  Scale constants are fitted on a dyadic grid.
    """
    lower = gamma - (margin if delta < 0 else 0.0)
    upper = gamma + (margin if delta > 0 else 0.0)
    f = ScalingFunction(POWERLOG, gamma, delta, lower_index=lower, upper_index=upper)
    c1, c2 = fit_scale_constants(f, dyadic_grid(24))
    return replace(f, c1=c1, c2=c2)


def constant(value=1.0):
    return ScalingFunction(CONSTANT, constant=value)


def tabulated(t, v, lower_index, upper_index):
    f = ScalingFunction(TABULATED, table=tuple(zip(map(float, t), map(float, v))),
                        lower_index=lower_index, upper_index=upper_index)
    c1, c2 = fit_scale_constants(f, dyadic_grid(24))
    return replace(f, c1=c1, c2=c2)


def dyadic_grid(depth, start=1):
    """All pairs ``(2**i, 2**j)`` with ``start <= i < j <= depth``."""
    return [(2.0 ** i, 2.0 ** j) for i in range(start, depth) for j in range(i + 1, depth + 1)]


def _ratios(f, grid):
    r = np.array([g[0] for g in grid], dtype=float)
    R = np.array([g[1] for g in grid], dtype=float)
    if np.any(r < FLAT) or np.any(R <= r):
        raise ValueError("grid pairs must satisfy 2 <= r < R")
    return r, R, f(R) / f(r)


def fit_scale_constants(f, grid):
    """Smallest c2 and largest c1 compatible with the declared indices on ``grid``."""
    r, R, ratio = _ratios(f, grid)
    c1 = float(np.min(ratio / (R / r) ** f.lower_index))
    c2 = float(np.max(ratio / (R / r) ** f.upper_index))
    return min(c1, 1.0), max(c2, 1.0)


def check_weak_scaling(f, grid, rtol=1e-12):
    """Test both scaling inequalities with the declared constants on ``grid``.

    ``worst_lower`` is the minimum of ``ratio / (c1 (R/r)**lower)`` (must be >= 1),
    ``worst_upper`` the maximum of ``ratio / (c2 (R/r)**upper)`` (must be <= 1).
    """
    r, R, ratio = _ratios(f, grid)
    lower = ratio / (f.c1 * (R / r) ** f.lower_index)
    upper = ratio / (f.c2 * (R / r) ** f.upper_index)
    worst_lower, worst_upper = float(lower.min()), float(upper.max())
    return {
        "worst_lower": worst_lower,
        "worst_upper": worst_upper,
        "pass": worst_lower >= 1 - rtol and worst_upper <= 1 + rtol,
    }


def matuszewska_upper(f, depth=16):
    """Grid estimate of the upper Matuszewska index.

    Uses dyadic pairs between ``2**depth`` and ``2**(2*depth)``.  This is an
    estimate: it approaches the index from above as ``depth`` grows.
    """
    if depth < 4:
        raise ValueError("depth must be at least 4")
    k = np.arange(depth, 2 * depth + 1, dtype=float)
    lv = np.log(f(2.0 ** k))
    best = -np.inf
    for i in range(len(k) - 1):
        slopes = (lv[i + 1:] - lv[i]) / ((k[i + 1:] - k[i]) * math.log(2.0))
        best = max(best, float(slopes.max()))
    return best


def _psi1_above_two(f, u, tol):
    """``int_2^u f(v)/v dv`` for each entry of ``u`` (u > 2), in log variables."""
    u = np.asarray(u, dtype=float)
    top = np.log(u)
    lo = math.log(FLAT)
    n = u.size
    # a few interior breaks keep the log variable span per segment modest
    fr = np.linspace(0, 1, 5)
    breaks = lo + (top[:, None] - lo) * fr[None, :]

    def g(s, pid):
        return f(np.exp(s))

    vals, errs = integrate_batch(g, breaks, rtol=tol, atol=0.0)
    return vals, errs


def psi1(f, u, tol=1e-10):
    """``int_1^u f(v)/v dv`` (f flat on [1, 2]), frozen at ``u = 2`` below 2.

    Accepts scalars or arrays.  Raises ``QuadratureError`` with the achieved
    error if the tolerance cannot be met.
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    base = float(f(FLAT)) * math.log(FLAT)
    out = np.full(u_arr.shape, base)
    above = u_arr > FLAT
    if np.any(above):
        vals, _ = _psi1_above_two(f, u_arr[above], tol)
        out[above] += vals
    return float(out[0]) if np.ndim(u) == 0 else out


@dataclass
class Psi1Cache:
    """Memoized ``psi1`` keyed by argument; safe for concurrent readers."""
    base: ScalingFunction
    tol: float = 1e-10
    _memo: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __call__(self, u):
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty(u_arr.shape)
        missing = []
        for i, v in enumerate(u_arr.flat):
            hit = self._memo.get(float(v))
            if hit is None:
                missing.append(i)
            else:
                out.flat[i] = hit
        if missing:
            keys = u_arr.flat[missing]
            vals = psi1(self.base, np.asarray(keys), self.tol)
            with self._lock:
                for k, v in zip(keys, np.atleast_1d(vals)):
                    self._memo[float(k)] = float(v)
            for i, v in zip(missing, np.atleast_1d(vals)):
                out.flat[i] = v
        return float(out[0]) if np.ndim(u) == 0 else out


def to_config(f):
    """Flat key/value block describing ``f``."""
    out = {
        "kind": f.kind,
        "gamma": repr(float(f.gamma)),
        "delta": repr(float(f.delta)),
        "lower_index": repr(float(f.lower_index)),
        "upper_index": repr(float(f.upper_index)),
        "c1": repr(float(f.c1)),
        "c2": repr(float(f.c2)),
    }
    if f.kind == CONSTANT:
        out["constant"] = repr(float(f.constant))
    if f.kind == TABULATED:
        out["table"] = ";".join(f"{a!r}:{b!r}" for a, b in f.table)
    return out


def from_config(block):
    """Inverse of ``to_config``; missing indices/constants fall back to defaults."""
    kind = block.get("kind", POWERLOG).strip().lower()
    gamma = float(block.get("gamma", 0.0))
    delta = float(block.get("delta", 0.0))
    if kind == CONSTANT:
        f = constant(float(block.get("constant", 1.0)))
    elif kind == TABULATED:
        pairs = [tuple(map(float, item.split(":"))) for item in block["table"].split(";")]
        t, v = zip(*pairs)
        f = tabulated(t, v, float(block["lower_index"]), float(block["upper_index"]))
    else:
        f = power_log(gamma, delta)
    keys = ("lower_index", "upper_index", "c1", "c2")
    override = {k: float(block[k]) for k in keys if k in block}
    return replace(f, **override) if override else f
