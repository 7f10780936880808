"""Asymptotic solutions of w'' + (1 - F(z)) w = 0 from the singular Volterra equation

    w(z) = w_sin(z) + int_z^inf sin(t - z) F(t) w(t) dt,

integrated along the horizontal path t = z + r (plus side) or t = z - r
(minus side).  Iterates are computed on whole horizontal rays at once: with
w = exp(i k z) y and the ray coordinate s (t = i Im z + sigma s), every iterate
is two right-to-left cumulative integrals over Chebyshev-Lobatto panels.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.integrate import quad
from scipy.optimize import brentq

PANEL_NODES = 16
MAX_PANEL = 2.0


class HypothesisViolation(ValueError):
    """The perturbation is not integrable along the horizontal path."""


class VolterraError(ArithmeticError):
    pass


def _lobatto_matrix(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on [-1, 1] and the matrix W with (W g)_i = int_{x_i}^{1} g."""
    x = -np.cos(np.pi * np.arange(m) / (m - 1))
    V = cheb.chebvander(x, m - 1)
    W = np.empty((m, m))
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        P = cheb.chebint(np.linalg.solve(V, e))
        W[:, k] = cheb.chebval(1.0, P) - cheb.chebval(x, P)
    return x, W


_NODES, _WMAT = _lobatto_matrix(PANEL_NODES)


@dataclass(frozen=True)
class PerturbationField:
    """F on D+(delta, R) = {|z| > R, |arg z| < pi - delta} or its mirror D-."""

    F: Callable
    side: str = "plus"
    delta0: float = 0.5
    R0: float = 1.0
    delta: float = 0.6
    R: float | None = None

    def __post_init__(self):
        if self.side not in ("plus", "minus"):
            raise ValueError("side must be 'plus' or 'minus'")
        if not 0 < self.delta0 < math.pi:
            raise ValueError("delta0 must lie in (0, pi)")
        if not self.delta > self.delta0:
            raise ValueError("delta must exceed delta0")
        floor = self.R0 / math.sin(self.delta0)
        if self.R is None:
            object.__setattr__(self, "R", floor)
        elif self.R < floor * (1 - 1e-12):
            raise ValueError(f"R must be at least R0/sin(delta0) = {floor:g}")

    @property
    def sigma(self) -> int:
        return 1 if self.side == "plus" else -1

    def __call__(self, t):
        t = np.asarray(t, dtype=complex)
        out = np.asarray(self.F(t), dtype=complex)
        if out.shape != t.shape:
            out = np.broadcast_to(out, t.shape).astype(complex)
        return out

    def in_domain(self, z, trimmed: bool = True):
        z = np.asarray(z, dtype=complex)
        d = self.delta if trimmed else self.delta0
        R = self.R if trimmed else self.R0
        w = z if self.side == "plus" else -z
        return (np.abs(z) > R) & (np.abs(np.angle(w)) < math.pi - d)


def zero_field(side: str = "plus", **kw) -> PerturbationField:
    return PerturbationField(lambda t: np.zeros_like(t), side=side, **kw)


def inverse_square_field(beta: float, side: str = "plus", **kw) -> PerturbationField:
    """F(z) = -beta/z**2, the perturbation produced by Q = z."""
    return PerturbationField(lambda t: -beta / t ** 2, side=side, **kw)


def tail_integral(pf: PerturbationField, z: complex, rtol: float = 1e-8) -> float:
    """int_0^inf |F(z + sigma r)| dr."""
    z = complex(z)
    sg = pf.sigma

    L = max(1.0, abs(z))  # scale so the decay length is O(1)

    def g(r):
        return abs(complex(pf(z + sg * r)))

    val, err, info = _quad_full(lambda u: L * g(L * u), 0.0, math.inf, rtol)
    if not math.isfinite(val) or err > max(10 * rtol * abs(val), 1e-13):
        raise HypothesisViolation(f"tail integral of |F| from {z} did not converge (hypothesis violated)")
    # a 1/r tail fools the infinite-interval transform; probe the decay directly
    far = [g(r) * r for r in (1e6, 1e8)]
    if far[1] > 1e-3 and far[1] >= 0.5 * far[0]:
        raise HypothesisViolation(f"|F| does not decay faster than 1/r along the path from {z} (hypothesis violated)")
    return val


def _quad_full(g, a, b, rtol):
    val, err, info = quad(g, a, b, epsrel=rtol, epsabs=0.0, limit=500, full_output=1)[:3]
    return val, err, info


def _cquad(g, a, b, rtol=1e-13):
    re = quad(lambda r: complex(g(r)).real, a, b, epsrel=rtol, epsabs=1e-17, limit=500)[0]
    im = quad(lambda r: complex(g(r)).imag, a, b, epsrel=rtol, epsabs=1e-17, limit=500)[0]
    return complex(re, im)


@dataclass
class RaySolution:
    """y = w exp(-i kappa z) and dy/dz at requested points of one horizontal line."""

    kappa: int
    z: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    tail: np.ndarray  # int_z^inf |F| along the path, per point
    iterations: int
    increment_bound: float
    converged: bool


def _decay_constant(pf: PerturbationField, im: float, s_far: float) -> float:
    sg = pf.sigma
    probes = s_far * np.array([1.0, 2.0, 4.0])
    t = 1j * im + sg * probes
    return float(np.max(np.abs(pf(t)) * np.abs(t) ** 2))


def _panels(s_points: np.ndarray, im: float, sigma: int, S: float) -> np.ndarray:
    """Panel edges in s covering [min s_points, S], with every point an edge."""
    marks = np.unique(np.concatenate([s_points, [S]]))
    edges = [marks[0]]
    for b in marks[1:]:
        a = edges[-1]
        while b - a > 1e-14:
            mod = abs(complex(sigma * a, im))
            step = min(MAX_PANEL, max(0.25 * mod, 0.05))
            nxt = b if b - a <= step * 1.0001 else a + step
            edges.append(nxt)
            a = nxt
    return np.asarray(edges)


def solve_ray(pf: PerturbationField, kappa: int, z, n_max: int = 20, tol: float = 1e-10,
              S_max: float | None = None) -> RaySolution:
    """Successive approximation for the solution asymptotic to exp(i kappa z).

    All points ``z`` must share one imaginary part.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    im = float(z[0].imag)
    if np.any(np.abs(z.imag - im) > 1e-12 * max(1.0, abs(im))):
        raise ValueError("solve_ray needs points on one horizontal line")
    sg = pf.sigma
    eps = kappa * sg
    s_req = sg * z.real
    s_lo = float(s_req.min())
    s_hi = float(s_req.max())
    if S_max is None:
        A = _decay_constant(pf, im, max(abs(s_hi), 10.0) + 10.0)
        S_max = float(np.clip((A * A / 1e-12) ** (1 / 3), 50.0, 2e4))
    S = max(S_max, s_hi + 20.0)
    edges = _panels(s_req, im, sg, S)
    a, b = edges[:-1], edges[1:]
    h = 0.5 * (b - a)
    s_nodes = 0.5 * (a + b)[:, None] + h[:, None] * _NODES[None, :]
    t_nodes = 1j * im + sg * s_nodes
    F = pf(t_nodes)
    osc = np.exp(2j * eps * s_nodes)
    back = np.exp(-2j * eps * s_nodes)

    # tails beyond S
    tS = 1j * im + sg * S
    J1 = 1j * eps * cmath.exp(2j * eps * S) * _cquad(lambda r: complex(pf(tS + 1j * kappa * r)) * math.exp(-2 * r), 0, math.inf)
    J0a = _cquad(lambda s: complex(pf(1j * im + sg * s)), S, math.inf)
    J0b = S * _cquad(lambda s: complex(pf(1j * im + sg * s)) / s, S, math.inf)

    def cumulative(g):
        local = h[:, None] * (g @ _WMAT.T)
        total = local[:, 0]
        after = np.concatenate([np.cumsum(total[::-1])[::-1][1:], [0.0]])
        return local + after[:, None]

    absF_tail = np.abs(cumulative(np.abs(F).astype(complex)).real)
    absF_tail += abs(_cquad(lambda s: abs(complex(pf(1j * im + sg * s))), S, math.inf).real)

    # index of each requested point: left endpoint of the panel starting there, or the last node
    idx = np.searchsorted(a, s_req)
    at_left = (idx < len(a)) & (np.abs(a[np.minimum(idx, len(a) - 1)] - s_req) <= 1e-12 * (1 + np.abs(s_req)))
    p_idx = np.where(at_left, idx, np.searchsorted(b, s_req))
    n_idx = np.where(at_left, 0, PANEL_NODES - 1)
    if np.any(np.abs(s_nodes[p_idx, n_idx] - s_req) > 1e-9 * (1 + np.abs(s_req))):
        raise VolterraError("requested point not on the panel mesh")
    tail_left = float(absF_tail[0, 0])

    y = np.ones_like(F)
    iterations = 0
    inc_bound = math.expm1(tail_left)
    converged = tail_left == 0.0
    C1 = np.zeros_like(F)
    while not converged and iterations < n_max:
        yS = y[-1, -1]
        C1 = cumulative(osc * F * y) + J1 * yS
        C0 = cumulative(F * y) + J0a + (yS - 1.0) * J0b
        y = 1.0 + eps / 2j * (back * C1 - C0)
        iterations += 1
        inc_bound = tail_left ** iterations / math.factorial(iterations)
        converged = inc_bound < tol
    dy_ds = -back * C1
    return RaySolution(kappa=kappa, z=z, y=y[p_idx, n_idx], dy=sg * dy_ds[p_idx, n_idx],
                       tail=absF_tail[p_idx, n_idx], iterations=iterations,
                       increment_bound=inc_bound, converged=converged)


def _by_line(z: np.ndarray):
    keys = np.round(z.imag, 12)
    for im in np.unique(keys):
        yield np.nonzero(keys == im)[0]


@dataclass
class VolterraSolution:
    base: str  # "exp+" (e^{iz}), "exp-" (e^{-iz}) or "sin" (sin(z - z0))
    iterations: int
    z: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    bound: np.ndarray  # certified |w - w_sin|
    alpha: float  # largest tail integral over the samples
    increment_bound: float
    converged: bool
    z0: complex | None = None


def _exp_solution(pf, kappa, z, n_max, tol):
    y = np.empty(len(z), dtype=complex)
    dy = np.empty(len(z), dtype=complex)
    tail = np.empty(len(z))
    iters, inc, conv = 0, 0.0, True
    for sel in _by_line(z):
        rs = solve_ray(pf, kappa, z[sel], n_max=n_max, tol=tol)
        y[sel], dy[sel], tail[sel] = rs.y, rs.dy, rs.tail
        iters = max(iters, rs.iterations)
        inc = max(inc, rs.increment_bound)
        conv = conv and rs.converged
    e = np.exp(1j * kappa * z)
    return e * y, e * (1j * kappa * y + dy), tail, iters, inc, conv


def successive_approximation(pf: PerturbationField, base: str, z, n_max: int = 20,
                             tol: float = 1e-10, z0: complex = 0j) -> VolterraSolution:
    """Solve the Volterra equation with w_sin = e^{iz}, e^{-iz} or sin(z - z0)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if base in ("exp+", "exp-"):
        kappa = 1 if base == "exp+" else -1
        w, dw, tail, iters, inc, conv = _exp_solution(pf, kappa, z, n_max, tol)
        M = np.abs(np.exp(1j * kappa * z))
        inc = inc * float(M.max())
    elif base == "sin":
        z0 = complex(z0)
        c1 = cmath.exp(-1j * z0) / 2j
        c2 = -cmath.exp(1j * z0) / 2j
        wp, dwp, tail, i1, inc1, cv1 = _exp_solution(pf, 1, z, n_max, tol)
        wm, dwm, _, i2, inc2, cv2 = _exp_solution(pf, -1, z, n_max, tol)
        w, dw = c1 * wp + c2 * wm, c1 * dwp + c2 * dwm
        M = np.cosh(z.imag - z0.imag)
        iters, conv = max(i1, i2), cv1 and cv2
        inc = max(inc1, inc2) * float(M.max())
    else:
        raise ValueError(f"unknown base {base!r}")
    return VolterraSolution(base=base, iterations=iters, z=z, w=w, dw=dw,
                            bound=M * np.expm1(tail), alpha=float(tail.max()),
                            increment_bound=inc, converged=conv,
                            z0=z0 if base == "sin" else None)


@dataclass
class AsymptoticPair:
    z: np.ndarray
    E_plus: np.ndarray
    E_minus: np.ndarray
    dE_plus: np.ndarray
    dE_minus: np.ndarray
    v_bounds: np.ndarray  # exp(tail) - 1, shared by v1 and v2
    zero_free: np.ndarray
    converged: bool


def asymptotic_pair(pf: PerturbationField, grid, n_max: int = 20, tol: float = 1e-12) -> AsymptoticPair:
    grid = np.atleast_1d(np.asarray(grid, dtype=complex))
    wp, dwp, tail, _, _, c1 = _exp_solution(pf, 1, grid, n_max, tol)
    wm, dwm, _, _, _, c2 = _exp_solution(pf, -1, grid, n_max, tol)
    vb = np.expm1(tail)
    return AsymptoticPair(z=grid, E_plus=wp, E_minus=wm, dE_plus=dwp, dE_minus=dwm,
                          v_bounds=vb, zero_free=vb < 1, converged=c1 and c2)


def oscillatory_decompose(c1: complex, c2: complex) -> tuple[complex, complex]:
    """(b, z0) with c1 e^{iz} + c2 e^{-iz} = b sin(z - z0), Re z0 in (-pi/2, pi/2]."""
    c1, c2 = complex(c1), complex(c2)
    if c1 == 0 or c2 == 0:
        raise ValueError("nonoscillatory combination")
    z0 = 0.5j * cmath.log(-c1 / c2)
    m = math.ceil((z0.real - math.pi / 2) / math.pi)
    z0 -= m * math.pi
    b = 2j * c1 * cmath.exp(1j * z0)
    return b, z0


def gronwall_envelope(K: Callable[[float], float], g: Callable[[float], float], t: float,
                      T_inf: float = math.inf, rtol: float = 1e-10) -> float:
    """g(t) + int_t^T K(s) exp(int_t^s K) g(s) ds by nested adaptive quadrature."""
    total, err = quad(K, t, T_inf, epsrel=rtol, limit=500)[:2]
    if not math.isfinite(total) or err > max(1e-6 * abs(total), 1e-10):
        raise HypothesisViolation("K is not integrable on (t, T)")

    def outer(s):
        inner = quad(K, t, s, epsrel=rtol, limit=500)[0]
        return K(s) * math.exp(inner) * g(s)

    return g(t) + quad(outer, t, T_inf, epsrel=rtol, limit=500)[0]


def half_plane_edge(pf: PerturbationField, gamma: float, y_samples=(0.0,), x_hi: float = 1e4) -> float:
    """Smallest x with exp(tail) < 1 + sin(gamma)/cosh(gamma) on the sampled lines."""
    level = math.log1p(math.sin(gamma) / math.cosh(gamma))

    def excess(x):
        return max(tail_integral(pf, complex(x, y)) for y in y_samples) - level

    x_lo = pf.R
    if excess(x_lo) < 0:
        return x_lo
    if excess(x_hi) >= 0:
        raise VolterraError("tail never drops below the oscillation level")
    return brentq(excess, x_lo, x_hi, xtol=1e-12)
