"""Green function of the one-dimensional process killed on leaving ``(0, R)``.

The Dirichlet form of the killed process,

    E(u, u) = 1/2 int_D int_D (u(x) - u(y))^2 J(x, y) dx dy + int_D u(x)^2 k(x) dx,

with ``k`` the killing density (jumps leaving ``D`` inside the state space
plus the boundary killing term), is discretized with continuous piecewise
linear elements on a mesh graded toward the endpoints.  The discrete Green
function at the nodes is the inverse of the stiffness matrix.

Element pairs that share a point carry an integrable singularity and are
integrated with Duffy-type splits and Gauss-Jacobi rules in the distance to
the singular point; endpoint killing terms use Gauss-Jacobi weights as well.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln, roots_jacobi, roots_legendre

from .kernel_core import UnitB, stable_constant
from .quadrature import integrate_batch


class AssemblyError(RuntimeError):
    pass


def _gl01(n):
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _gj01(n, power):
    """Nodes/weights on (0, 1) for the weight t**power."""
    x, w = roots_jacobi(n, 0.0, power)
    return 0.5 * (x + 1.0), w * 0.5 ** (1.0 + power)


def graded_mesh(a, b, n, grading=2.0, both=False):
    """Nodes on [a, b] clustering like ``(i/n)**grading`` toward ``a`` (and ``b`` if ``both``)."""
    if both:
        half = n // 2
        left = graded_mesh(0.0, 1.0, half, grading)
        t = np.concatenate([left, 2.0 - left[::-1][1:]]) / 2.0
    else:
        t = (np.arange(n + 1) / n) ** grading
    return a + (b - a) * t


@dataclass
class GreenSystem:
    """Assembled and solved system on the nodes of a graded mesh.

    ``stiffness`` is the Galerkin matrix on interior nodes, ``weights`` the
    lumped nodal masses, ``A_matrix`` the weight-scaled generator
    ``diag(1/w) K`` and ``G_matrix`` the nodal Green function ``K^{-1}``.
    """
    nodes: np.ndarray
    weights: np.ndarray
    stiffness: np.ndarray
    A_matrix: np.ndarray
    G_matrix: np.ndarray
    alpha: float
    R: float
    kappa: float = 0.0
    p: float = float("nan")
    killing_load: np.ndarray = field(default=None, repr=False)
    exit_load: np.ndarray = field(default=None, repr=False)

    @property
    def x(self):
        return self.nodes


def _hat(nodes, m, x):
    """Value at ``x`` of the hat function of global node ``m``."""
    xm = nodes[m]
    left = nodes[np.maximum(m - 1, 0)]
    right = nodes[np.minimum(m + 1, nodes.size - 1)]
    up = np.where(xm > left, (x - left) / np.where(xm > left, xm - left, 1.0), 0.0)
    down = np.where(right > xm, (right - x) / np.where(right > xm, right - xm, 1.0), 0.0)
    out = np.where((x >= left) & (x <= xm), up, 0.0)
    out = np.where((x > xm) & (x <= right), down, out)
    return np.clip(out, 0.0, 1.0)


def _pair_rules(nodes, k, l, order, alpha):
    """Quadrature points (x, y, w) for element pairs ``k < l`` or ``k == l``.

    Returns arrays shaped (n_pairs, n_points).
    """
    xk0, hk = nodes[k], nodes[k + 1] - nodes[k]
    xl0, hl = nodes[l], nodes[l + 1] - nodes[l]
    same = k == l
    adj = l == k + 1
    far = ~(same | adj)
    n_pair = k.size
    g, gw = _gl01(order)
    # Jacobi in the distance to the singular set: the integrand behaves like dist**(1-alpha)
    jz, jw = _gj01(order, 1.0 - alpha)
    jr, jrw = _gj01(order, 2.0 - alpha)
    npt = 2 * order * order
    X = np.zeros((n_pair, npt))
    Y = np.zeros((n_pair, npt))
    W = np.zeros((n_pair, npt))
    Sfac = np.zeros((n_pair, npt))  # the singular power pulled out of the weight

    if np.any(far):
        s, t = np.meshgrid(g, g, indexing="ij")
        ws = np.outer(gw, gw).ravel()
        idx = np.where(far)[0]
        # split the first element in two halves to double resolution on near pairs
        for half, off in ((0, 0.0), (1, 0.5)):
            sl = slice(half * order * order, (half + 1) * order * order)
            X[idx, sl] = xk0[idx, None] + hk[idx, None] * (off + 0.5 * s.ravel()[None, :])
            Y[idx, sl] = xl0[idx, None] + hl[idx, None] * t.ravel()[None, :]
            W[idx, sl] = 0.5 * hk[idx, None] * hl[idx, None] * ws[None, :]
        Sfac[idx] = 1.0

    if np.any(same):
        idx = np.where(same)[0]
        # square (s, t) in (0,1)^2, triangles s > t and s < t, z = |s - t|
        z, u = np.meshgrid(jz, g, indexing="ij")
        wz = np.outer(jw, gw).ravel()
        z, u = z.ravel(), u.ravel()
        lo = u * (1.0 - z)  # t in (0, 1 - z)
        hi = lo + z
        jac = (1.0 - z) * wz
        h = hk[idx, None]
        for tri, (a_, b_) in enumerate(((hi, lo), (lo, hi))):
            sl = slice(tri * order * order, (tri + 1) * order * order)
            X[idx, sl] = xk0[idx, None] + h * a_[None, :]
            Y[idx, sl] = xk0[idx, None] + h * b_[None, :]
            W[idx, sl] = h * h * jac[None, :]
            # the rule's weight already carries z**(1-alpha)
            Sfac[idx, sl] = z[None, :] ** (alpha - 1.0)
    if np.any(adj):
        idx = np.where(adj)[0]
        # corner at the shared node; x = b - s hk, y = b + t hl, Duffy on both triangles
        r, eta = np.meshgrid(jr, g, indexing="ij")
        wr = np.outer(jrw, gw).ravel()
        r, eta = r.ravel(), eta.ravel()
        b = nodes[l[idx]][:, None]
        for tri in range(2):
            sl = slice(tri * order * order, (tri + 1) * order * order)
            s_, t_ = (r, r * eta) if tri == 0 else (r * eta, r)
            X[idx, sl] = b - hk[idx, None] * s_[None, :]
            Y[idx, sl] = b + hl[idx, None] * t_[None, :]
            W[idx, sl] = hk[idx, None] * hl[idx, None] * wr[None, :]
            # Jacobian r, and the rule's weight carries r**(2-alpha)
            Sfac[idx, sl] = r[None, :] ** (alpha - 1.0)
    return X, Y, W * Sfac


def _assemble_pairs(nodes, jump, alpha, order, chunk=4000):
    n_el = nodes.size - 1
    kk, ll = np.triu_indices(n_el)
    N = nodes.size
    K = np.zeros((N, N))
    for start in range(0, kk.size, chunk):
        k = kk[start:start + chunk]
        l = ll[start:start + chunk]
        X, Y, W = _pair_rules(nodes, k, l, order, alpha)
        J = jump(X, Y)
        mult = np.where(k == l, 0.5, 1.0)[:, None]  # 1/2 in the form, pairs k<l counted twice
        WJ = W * J * mult
        local = np.stack([k, k + 1, l, l + 1], axis=1)
        D = np.stack([_hat(nodes, local[:, a][:, None], X) - _hat(nodes, local[:, a][:, None], Y)
                      for a in range(4)], axis=1)
        # a node shared by both elements must be counted once
        D[:, 2] *= (l > k + 1)[:, None]
        D[:, 3] *= (l != k)[:, None]
        M = np.einsum("paq,pbq,pq->pab", D, D, WJ)
        rows = np.repeat(local[:, :, None], 4, axis=2)
        cols = np.repeat(local[:, None, :], 4, axis=1)
        np.add.at(K, (rows.ravel(), cols.ravel()), M.ravel())
    return K


def _assemble_killing(nodes, left_coef, right_coef, alpha, order=12):
    """Add int phi_i phi_j (left_coef(x) (x-a)^-alpha + right_coef(x) (b-x)^-alpha) dx.

    On the two end elements only the interior hat is kept (the boundary rows
    are dropped later); it vanishes linearly at the endpoint, so its square
    goes into the Gauss-Jacobi weight.
    """
    N = nodes.size
    n_el = N - 1
    a, b = nodes[0], nodes[-1]
    M = np.zeros((N, N))
    g, gw = _gl01(order)
    jg, jw = _gj01(order, 2.0 - alpha)
    for e in range(n_el):
        x0, h = nodes[e], nodes[e + 1] - nodes[e]
        x = x0 + h * g
        dens = np.zeros_like(x)
        if e > 0:
            dens += left_coef(x) * (x - a) ** (-alpha)
        if e < n_el - 1:
            dens += right_coef(x) * (b - x) ** (-alpha)
        vals = np.stack([(nodes[e + 1] - x) / h, (x - x0) / h])
        M[e:e + 2, e:e + 2] += (vals * (gw * h * dens)) @ vals.T
        if e == 0:
            xs = x0 + h * jg
            M[1, 1] += h ** (1.0 - alpha) * np.sum(jw * left_coef(xs))
        if e == n_el - 1:
            xs = b - h * jg
            M[e, e] += h ** (1.0 - alpha) * np.sum(jw * right_coef(xs))
    return M


def _exterior_coefficient(jump_b, alpha, A, R, x, tol=1e-10):
    """``(R-x)^alpha * int_R^inf A (y-x)^(-1-alpha) B(x, y) dy`` (smooth in x).

    With ``y = x + (R-x) w^(-1/alpha)`` the integral becomes
    ``A/alpha * int_0^1 B(x, x + (R-x) w^(-1/alpha)) dw``.
    """
    if isinstance(jump_b, UnitB):
        return np.full_like(np.asarray(x, float), A / alpha)
    x = np.atleast_1d(np.asarray(x, float))

    def f(w, pid):
        xx = x[pid]
        y = xx + (R - xx) * w ** (-1.0 / alpha)
        return jump_b(xx[:, None], y[:, None])

    breaks = np.tile([0.0, 1e-8, 1e-4, 1e-2, 0.1, 1.0], (x.size, 1))
    v, _ = integrate_batch(f, breaks, rtol=tol, atol=0.0)
    return A / alpha * v


def _solve(K_int):
    try:
        c = cho_factor(K_int, lower=True)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError("stiffness matrix is not positive definite; "
                            "kappa = 0 with alpha <= 1 has no Green function") from exc
    return cho_solve(c, np.eye(K_int.shape[0]))


def _finish(nodes, K, alpha, R, kappa, p, killing_load=None, exit_load=None):
    K_int = K[1:-1, 1:-1]
    K_int = 0.5 * (K_int + K_int.T)
    h = np.diff(nodes)
    w = 0.5 * (h[:-1] + h[1:])
    G = _solve(K_int)
    A = K_int / w[:, None]
    return GreenSystem(nodes[1:-1], w, K_int, A, G, alpha, R, kappa, p, killing_load, exit_load)


def assemble(spec, R=1.0, n_cells=256, grading=2.0, order=8, p=None):
    """Assemble and solve the killed system on ``(0, R)`` for a one-dimensional ``spec``.

    The boundary factor must be a function of the two depths; the killing
    density at depth ``x`` is ``A(1, alpha) kappa x^-alpha``.
    """
    if spec.d != 1:
        raise ValueError("the Green solver is one-dimensional")
    if n_cells < 64:
        raise ValueError("need at least 64 cells")
    alpha = spec.alpha
    A = stable_constant(1, alpha)
    nodes = graded_mesh(0.0, R, n_cells, grading, both=True) if grading > 0 else np.linspace(0, R, n_cells + 1)
    B = spec.b_model

    def jump(X, Y):
        return A * np.abs(X - Y) ** (-1.0 - alpha) * B(X[..., None], Y[..., None])

    K = _assemble_pairs(nodes, jump, alpha, order)
    left = lambda x: np.full_like(x, A * spec.kappa)
    right = lambda x: _exterior_coefficient(B, alpha, A, R, x)
    K += _assemble_killing(nodes, left, right, alpha)
    if p is None:
        p = spec.p
    load = _killing_load(nodes, lambda x: A * spec.kappa * x ** (-alpha), -alpha)
    exit_rate = _killing_load(R - nodes[::-1], lambda u: right(R - u) * u ** (-alpha), -alpha)[::-1]
    return _finish(nodes, K, alpha, R, spec.kappa, p, load, exit_rate)


def _killing_load(nodes, rate, power=0.0, order=12):
    """``int phi_i(x) rate(x) dx`` for interior nodes.

    ``rate(x) x^-power`` must be smooth on the first element, which is
    integrated with the weight ``x^(1+power)`` (hat times singular factor).
    """
    N = nodes.size
    out = np.zeros(N)
    g, gw = _gl01(order)
    jg, jw = _gj01(order, 1.0 + power)
    for e in range(N - 1):
        x0, h = nodes[e], nodes[e + 1] - nodes[e]
        if e == 0:
            x = x0 + h * jg
            out[1] += h ** (1.0 + power) * np.sum(jw * rate(x) * x ** (-power))
            continue
        x = x0 + h * g
        w = gw * h * rate(x)
        out[e] += np.sum(w * (nodes[e + 1] - x) / h)
        out[e + 1] += np.sum(w * (x - x0) / h)
    return out[1:-1]


def assemble_interval(alpha, n_cells=256, grading=2.0, order=8):
    """Isotropic stable process killed on leaving ``(-1, 1)`` (calibration case)."""
    A = stable_constant(1, alpha)
    nodes = graded_mesh(-1.0, 1.0, n_cells, grading, both=True)

    def jump(X, Y):
        return A * np.abs(X - Y) ** (-1.0 - alpha)

    K = _assemble_pairs(nodes, jump, alpha, order)
    coef = lambda x: np.full_like(x, A / alpha)
    K += _assemble_killing(nodes, coef, coef, alpha)
    return _finish(nodes, K, alpha, 2.0, 0.0, float("nan"))


def interval_green_exact(alpha, x, y):
    """Closed-form Green function of the stable process killed on leaving ``(-1, 1)``.

    ``G = c |x-y|^(alpha-1) int_0^r0 s^(alpha/2-1) (s+1)^(-1/2) ds`` with
    ``r0 = (1-x^2)(1-y^2)/|x-y|^2`` and ``c = Gamma(1/2) / (2^alpha pi^(1/2) Gamma(alpha/2)^2)``.
    The integral is an incomplete beta function after ``s = u/(1-u)``.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    a = alpha
    logc = gammaln(0.5) - a * math.log(2.0) - 0.5 * math.log(math.pi) - 2.0 * gammaln(0.5 * a)
    r0 = (1 - x * x) * (1 - y * y) / (x - y) ** 2
    return math.exp(logc) * np.abs(x - y) ** (a - 1.0) * _ball_integral(a, r0)


def _ball_integral(a, r0):
    r0 = np.asarray(r0, float)
    flat = np.atleast_1d(r0).ravel()

    def f(w, pid):
        s = np.exp(w)
        return s ** (0.5 * a) * (1.0 + s) ** (-0.5)

    lo = -80.0 / (0.5 * a)
    breaks = np.stack([np.full(flat.size, lo), np.minimum(np.log(flat), 0.0) - 5.0,
                       np.log(flat)], axis=1)
    breaks.sort(axis=1)
    v, _ = integrate_batch(f, breaks, rtol=1e-12, atol=0.0)
    return v.reshape(r0.shape)


def green(system, i, j):
    """Nodal Green function ``G(x_i, x_j)``."""
    return system.G_matrix[i, j]


def envelope(alpha, p, x, y):
    """Two-sided d = 1 Green envelope for ``alpha >= 1``."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    dist = np.abs(x - y)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    with np.errstate(divide="ignore"):
        boundary = np.minimum(lo / dist, 1.0) ** p
    if alpha == 1.0:
        return boundary * np.log(math.e + hi / dist)
    return boundary * np.maximum(hi, dist) ** (alpha - 1.0)


def green_potential(system, gamma):
    """``int_D G(x, y) y^gamma dy`` at the nodes, through the Galerkin load vector."""
    nodes = np.r_[0.0, system.nodes, system.R]
    load = _killing_load(nodes, lambda y: y ** gamma, gamma)
    return system.G_matrix @ load


def killed_before_exit(system):
    """Probability of being killed (rather than jumping out) before leaving ``D``."""
    return system.G_matrix @ system.killing_load


def exit_alive(system):
    """Probability of jumping out of ``D`` alive.

    Added to :func:`killed_before_exit` this tends to 1 when the process cannot
    reach the boundary point continuously.
    """
    return system.G_matrix @ system.exit_load


def boundary_decay_check(system, y_index=None, x_range=(1e-3, 1e-1)):
    """Log-log slope of ``x -> G(x, y)`` near 0 for a fixed interior ``y``."""
    x = system.nodes
    if y_index is None:
        y_index = int(np.searchsorted(x, 0.25 * system.R))
    lo, hi = x_range[0] * system.R, x_range[1] * system.R
    sel = (x >= lo) & (x <= hi)
    g = system.G_matrix[sel, y_index]
    slope = float(np.polyfit(np.log(x[sel]), np.log(g), 1)[0])
    return {"y": float(x[y_index]), "slope": slope, "p": system.p,
            "n_points": int(sel.sum()), "positive": bool(np.all(g > 0))}


def envelope_ratios(system, max_fraction=0.5, exclude_diagonal=True):
    """``G / envelope`` over node pairs in ``(0, max_fraction R)^2``."""
    x = system.nodes
    sel = np.where(x < max_fraction * system.R)[0]
    X, Y = np.meshgrid(x[sel], x[sel], indexing="ij")
    G = system.G_matrix[np.ix_(sel, sel)]
    mask = ~np.eye(sel.size, dtype=bool) if exclude_diagonal else np.ones_like(G, bool)
    ratio = G[mask] / envelope(system.alpha, system.p, X[mask], Y[mask])
    return X[mask], Y[mask], G[mask], ratio
