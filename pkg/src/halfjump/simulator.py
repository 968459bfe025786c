"""Walk-on-spheres simulation of the resurrected stable process in the half-space.

Between resurrections the path is an isotropic stable process in R^d.  From
the current point ``x`` it is moved to its exit position from a ball
``B(x, rho)`` contained in both the half-space and the region being exited,
using the exact exit law from the centre of a ball.  A landing in the lower
half-space is sent back by the return kernel (boundary factor
``ResurrectionB``) or kills the path (``UnitB``, which is then the stable
process killed on leaving the half-space).

Paths are advanced in vectorized blocks; each block has its own Philox
stream derived from ``(seed, block index)`` so results do not depend on
how blocks are scheduled.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import binomtest

from .kernel_core import BoxRegion, KernelSpec, UnitB
from .resurrection import ResurrectionB

ACTIVE, EXITED, ABSORBED, KILLED, BUDGET = 0, 1, 2, 3, 4
OUTCOME_NAMES = {EXITED: "exited_alive", ABSORBED: "boundary_absorbed",
                 KILLED: "killed", BUDGET: "step_budget_exhausted"}
KILLING_MODES = ("none", "expected_time")
BLOCK = 8192


class ProposalMismatch(RuntimeError):
    pass


def make_rng(seed, block=0):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


@dataclass
class SimConfig:
    """``eps_abs`` is the absorption depth as a fraction of the region height."""
    spec: KernelSpec
    eps_abs: float = 1e-6
    max_steps: int = 20000
    seed: int = 0
    killing: str = "none"

    def __post_init__(self):
        if not 0.0 < self.eps_abs <= 0.1:
            raise ValueError("eps_abs must lie in (0, 0.1]")
        if self.killing not in KILLING_MODES:
            raise ValueError(f"killing must be one of {KILLING_MODES}")
        if self.killing == "none" and self.spec.kappa != 0:
            raise ValueError("killing mode 'none' requires kappa = 0")
        if not isinstance(self.spec.b_model, (UnitB, ResurrectionB)):
            raise ValueError("the simulator supports the unit and resurrection boundary factors")


@dataclass(frozen=True)
class BallRegion:
    center: tuple
    radius: float

    def contains(self, x):
        c = np.asarray(self.center, float)
        return np.sum((np.asarray(x) - c) ** 2, axis=-1) < self.radius ** 2

    @property
    def height(self):
        return self.center[-1] + self.radius


def room(region, x):
    """Distance from ``x`` to the complement of ``region`` (0 outside)."""
    x = np.asarray(x, float)
    if isinstance(region, BallRegion):
        c = np.asarray(region.center, float)
        out = region.radius - np.sqrt(np.sum((x - c) ** 2, axis=-1))
    else:
        out = region.height - x[..., -1]
        if x.shape[-1] > 1:
            c = np.asarray(region.center if region.center else np.zeros(x.shape[-1] - 1))
            lateral = np.sqrt(np.sum((x[..., :-1] - c) ** 2, axis=-1))
            out = np.minimum(out, region.half_width - lateral)
        out = np.minimum(out, x[..., -1])
    return np.maximum(out, 0.0)


def mean_exit_time(d, alpha, radius):
    """Expected exit time from a ball of given radius, started at the centre."""
    logv = (alpha * math.log(radius) + gammaln(0.5 * d) - alpha * math.log(2.0)
            - gammaln(1.0 + 0.5 * alpha) - gammaln(0.5 * (d + alpha)))
    return math.exp(logv)


def _directions(rng, n, d):
    if d == 1:
        return rng.choice([-1.0, 1.0], size=(n, 1))
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def ball_exit_sample(x, radius, alpha, rng):
    """Exit positions from ``B(x, radius)`` of the stable process started at ``x``.

    The exit radius is ``radius / sqrt(v)`` with ``v ~ Beta(alpha/2, 1 - alpha/2)``
    and the direction is uniform.
    """
    x = np.atleast_2d(np.asarray(x, float))
    n, d = x.shape
    radius = np.broadcast_to(np.asarray(radius, float), (n,))
    v = rng.beta(0.5 * alpha, 1.0 - 0.5 * alpha, size=n)
    r = radius / np.sqrt(v)
    return x + r[:, None] * _directions(rng, n, d)


def exit_radius_tail(alpha, t):
    """``P(|exit - x| > t * radius)`` for the ball exit law."""
    from scipy.special import betainc
    return betainc(0.5 * alpha, 1.0 - 0.5 * alpha, 1.0 / np.asarray(t, float) ** 2)


def _return_from_unit_depth(kern, n, rng, g):
    """Exact draws from the return density with ``psi = t^g`` seen from ``-e_d``."""
    a, d = kern.alpha, kern.d
    s = 1.0 / rng.beta(a - g, 1.0 - g, size=n)
    if d == 1:
        c = np.ones(n)
        lateral = np.zeros((n, 0))
    else:
        c = np.sqrt(rng.beta(0.5 * (a - 2 * g + 1.0), 0.5 * (d - 1), size=n))
        lateral = _directions(rng, n, d - 1) * np.sqrt(1.0 - c * c)[:, None]
    rho = s / c
    y = np.concatenate([rho[:, None] * lateral, (s - 1.0)[:, None]], axis=1)
    # psi argument |y - z|^2 / (y_d |z_d|) at z = -e_d
    t = rho * rho / (s - 1.0)
    return y, t


def sample_return(kern, z, rng, accept_floor=1e-3):
    """Re-entry points for lower half-space points ``z`` under the return kernel.

    Pure powers ``psi = t^g`` (including constants) are sampled exactly; other
    scaling functions by rejection from the ``t^gamma2`` shape, whose ratio to
    ``psi`` is bounded on ``t >= 4`` by the weak-scaling constant.
    """
    z = np.atleast_2d(np.asarray(z, float))
    n, d = z.shape
    if np.any(z[:, -1] >= 0):
        raise ValueError("return points are drawn from the lower half-space")
    psi = kern.psi
    exact = psi.kind == "constant" or (psi.kind == "powerlog" and psi.delta == 0.0)
    g = 0.0 if psi.kind == "constant" else (psi.gamma if exact else psi.upper_index)
    out = np.empty((n, d))
    todo = np.arange(n)
    tried = accepted = 0
    while todo.size:
        y, t = _return_from_unit_depth(kern, todo.size, rng, g)
        if exact:
            keep = np.ones(todo.size, bool)
        else:
            bound = psi.c2 * float(psi(4.0)) * (t / 4.0) ** g
            keep = rng.random(todo.size) * bound < psi(t)
        tried += todo.size
        accepted += int(keep.sum())
        if tried > 1000 and accepted < accept_floor * tried:
            raise ProposalMismatch(f"acceptance rate {accepted / tried:.2e} below {accept_floor}")
        idx = todo[keep]
        depth = -z[idx, -1]
        out[idx] = y[keep] * depth[:, None]
        out[idx, :-1] += z[idx, :-1]
        todo = todo[~keep]
    return out


@dataclass
class Paths:
    """Terminal data for a batch of paths."""
    outcome: np.ndarray
    position: np.ndarray
    steps: np.ndarray
    resurrections: np.ndarray
    elapsed: np.ndarray

    def fraction(self, code):
        return float(np.mean(self.outcome == code))


def _run_block(config, starts, region, rng):
    spec = config.spec
    d, a = spec.d, spec.alpha
    n = starts.shape[0]
    pos = starts.copy()
    outcome = np.zeros(n, dtype=np.int8)
    steps = np.zeros(n, dtype=np.int64)
    res = np.zeros(n, dtype=np.int64)
    elapsed = np.zeros(n)
    floor = config.eps_abs * region.height
    kern = spec.b_model.kern if isinstance(spec.b_model, ResurrectionB) else None
    kill_rate = spec.stable_constant * spec.kappa
    tau_unit = mean_exit_time(d, a, 1.0)
    active = np.arange(n)
    for _ in range(config.max_steps):
        if active.size == 0:
            break
        x = pos[active]
        shallow = x[:, -1] < floor
        if np.any(shallow):
            outcome[active[shallow]] = ABSORBED
            active, x = active[~shallow], x[~shallow]
        if active.size == 0:
            break
        rho = np.minimum(0.5 * x[:, -1], room(region, x))
        tau = tau_unit * rho ** a
        elapsed[active] += tau
        steps[active] += 1
        if config.killing == "expected_time" and kill_rate > 0:
            dead = rng.random(active.size) > np.exp(-kill_rate * x[:, -1] ** (-a) * tau)
            outcome[active[dead]] = KILLED
            active, x, rho = active[~dead], x[~dead], rho[~dead]
        y = ball_exit_sample(x, rho, a, rng)
        below = y[:, -1] < 0
        if np.any(below):
            if kern is None:
                outcome[active[below]] = KILLED
            else:
                y[below] = sample_return(kern, y[below], rng)
                res[active[below]] += 1
        pos[active] = y
        alive = outcome[active] == ACTIVE
        left = alive & ~region.contains(y)
        outcome[active[left]] = EXITED
        active = active[alive & ~left]
    outcome[active] = BUDGET
    return Paths(outcome, pos, steps, res, elapsed)


def thread_count():
    """Worker threads for path blocks, from ``HALFJUMP_THREADS`` (default 1)."""
    return max(1, int(os.environ.get("HALFJUMP_THREADS", "1")))


def run_until_exit(config, starts, region, block=BLOCK):
    """Run paths from ``starts`` (one row per path) until they leave ``region``."""
    starts = np.atleast_2d(np.asarray(starts, float))
    if not np.all(region.contains(starts)):
        raise ValueError("all starting points must lie in the region")
    chunks = [(b, starts[lo:lo + block]) for b, lo in enumerate(range(0, starts.shape[0], block))]

    def work(item):
        b, chunk = item
        return _run_block(config, chunk, region, make_rng(config.seed, b))

    workers = thread_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return Paths(*(np.concatenate([getattr(p, f) for p in parts])
                   for f in ("outcome", "position", "steps", "resurrections", "elapsed")))


def wilson_interval(successes, n, level=0.95):
    ci = binomtest(int(successes), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def _estimate(hits, n):
    k = int(np.sum(hits))
    est = k / n
    lo, hi = wilson_interval(k, n)
    return {"estimate": est, "ci_low": lo, "ci_high": hi, "se": math.sqrt(max(est * (1 - est), 1e-300) / n),
            "hits": k, "n": int(n)}


def exit_probability(config, x, r, n_paths, target="inside"):
    """Estimate of ``P_x(Y at the exit time of U(r) lies in D(r, r))`` with a Wilson interval.

    ``target="outside"`` estimates instead the probability of exiting alive
    outside ``D(r, r)``.
    """
    d = config.spec.d
    x = np.asarray(x, float).reshape(d)
    region = BoxRegion(tuple([0.0] * (d - 1)), 0.5 * r, 0.5 * r)
    paths = run_until_exit(config, np.tile(x, (n_paths, 1)), region)
    big = BoxRegion(tuple([0.0] * (d - 1)), r, r)
    exited = paths.outcome == EXITED
    inside = exited & big.contains(paths.position)
    hits = inside if target == "inside" else exited & ~inside
    out = _estimate(hits, n_paths)
    out["absorbed"] = paths.fraction(ABSORBED)
    out["budget"] = paths.fraction(BUDGET)
    return out


def far_exit_probability(config, x, r, radius, n_paths):
    """``P_x(|Y at the exit time of U(r)| > radius)`` for surviving paths."""
    d = config.spec.d
    x = np.asarray(x, float).reshape(d)
    region = BoxRegion(tuple([0.0] * (d - 1)), 0.5 * r, 0.5 * r)
    paths = run_until_exit(config, np.tile(x, (n_paths, 1)), region)
    exited = paths.outcome == EXITED
    far = exited & (np.linalg.norm(paths.position, axis=1) > radius)
    return _estimate(far, n_paths)


def exit_into_target(config, probes, region, target, n_paths):
    """For each probe, the fraction of paths exiting ``region`` alive into ``target``."""
    probes = np.atleast_2d(np.asarray(probes, float))
    m = probes.shape[0]
    starts = np.repeat(probes, n_paths, axis=0)
    paths = run_until_exit(config, starts, region)
    hit = (paths.outcome == EXITED) & target(paths.position)
    hit = hit.reshape(m, n_paths)
    return hit.mean(axis=1), np.sqrt(np.maximum(hit.mean(axis=1) * (1 - hit.mean(axis=1)), 0) / n_paths)


def harmonic_ratio_suite(config, scenario, r=1.0, n_paths=20000):
    """Estimate ``f(x) = P_x(exit into a target window)`` at probe points and report the ratio constant.

    * ``harnack``: region ``D(2r, 3r)``, ``f`` = exit above depth ``3r``, probes in ``B(x0, r/2)``
      with ``x0 = (0, 2r)``; reports ``sup/inf``.
    * ``carleson``: region ``D(r, r)``, exit above depth ``r``; probes in ``D(r/2, r/2)``
      near the boundary; reports ``max f(probe) / f(x0)`` with ``x0 = (0, r/2)``.
    * ``bhp``: same region and target; reports ``max/min`` of ``f(x)/x_d^p`` over ``D(r/2, r/2)``.
    """
    spec = config.spec
    d = spec.d
    lat = [0.0] * (d - 1)

    def pt(l, h):
        return np.r_[np.full(d - 1, l), h]

    if scenario == "harnack":
        region = BoxRegion(tuple(lat), 2.0 * r, 3.0 * r)
        top = 3.0 * r
        x0 = pt(0.0, 2.0 * r)
        offs = [pt(0.0, 0.0), pt(0.0, 0.45 * r), pt(0.0, -0.45 * r)]
        if d > 1:
            offs += [pt(0.45 * r, 0.0), pt(-0.45 * r, 0.0)]
        probes = np.array([x0 + o for o in offs])
    else:
        region = BoxRegion(tuple(lat), r, r)
        top = r
        depths = r * np.array([1 / 64, 1 / 16, 1 / 4, 1 / 2 - 1e-9])
        lats = [0.0] if d == 1 else [0.0, 0.25 * r]
        probes = np.array([pt(l, h) for l in lats for h in depths])
        if scenario == "carleson":
            probes = np.vstack([pt(0.0, 0.5 * r), probes])
    f, se = exit_into_target(config, probes, region, lambda y: y[:, -1] >= top, n_paths)
    report = {"scenario": scenario, "r": r, "n_paths": n_paths, "probes": probes, "f": f, "se": se}
    if scenario == "harnack":
        report["constant"] = float(f.max() / f.min())
    elif scenario == "carleson":
        report["constant"] = float(f[1:].max() / f[0])
    elif scenario == "bhp":
        ratio = f / probes[:, -1] ** spec.p
        report["ratio"] = ratio
        report["constant"] = float(ratio.max() / ratio.min())
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return report


def ball_time_proxy(config, center, radius, n_paths):
    """Mean of the summed per-ball expected times until leaving ``B(center, radius)``."""
    region = BallRegion(tuple(center), radius)
    paths = run_until_exit(config, np.tile(np.asarray(center, float), (n_paths, 1)), region)
    return float(paths.elapsed.mean()), float(paths.elapsed.std() / math.sqrt(n_paths))
