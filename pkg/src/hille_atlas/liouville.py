"""Sectorial Liouville map zeta = L_j(z) = int_{z0}^{z} Q(xi)^{1/2} d xi.

Powers of z use the cut anchored at ``psi_j - pi`` (argument window
``(psi_j - pi, psi_j + pi]``); powers of ``1 + l(z)`` are principal.  On that
branch ``A(z)**2 = Q(z) = B(z)**4`` throughout the sector domain G_j(R).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import binom

from .branches import arg_on_branch, log_on_branch, power_on_branch
from .equation import NormalizedEquation, e_n

QUAD_RTOL = 1e-10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


class LiouvilleError(ArithmeticError):
    """Domain violations and numerical non-convergence of the map."""


@dataclass(frozen=True)
class LiouvilleEvaluation:
    z: complex
    zeta: complex
    K: complex
    method: str
    est_error: float


@dataclass(frozen=True)
class SeriesExpansion:
    alpha: np.ndarray  # binomial coefficients of (1 + l)**(1/2)
    c: np.ndarray  # (1 + l(z))**(1/2) = sum_k c[k] z**-k
    order: int
    log_index: int | None  # k with c[k] multiplying log z (even n only)
    tail_radius: float  # geometric tail: 2*(tail_radius/r)**(order+1)/(1 - tail_radius/r)

    def tail_bound(self, r: float) -> float:
        if self.tail_radius == 0.0:
            return 0.0
        ratio = self.tail_radius / r
        if ratio >= 1:
            return math.inf
        return 2.0 * ratio ** (self.order + 1) / (1.0 - ratio)


def sqrt_series(a: tuple[complex, ...], n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Binomial rearrangement of (1 + l)^(1/2) into powers of 1/z.

    Returns ``(alpha, c)`` with ``c[k]`` the coefficient of ``z**-k``.
    """
    ell = np.zeros(order + 1, dtype=complex)  # l as a polynomial in x = 1/z
    for s in range(2, n + 1):
        if s <= order:
            ell[s] = a[n - s]
    kmax = order // 2 if n >= 2 else 0
    alpha = np.array([binom(0.5, k) for k in range(kmax + 1)], dtype=float)
    c = np.zeros(order + 1, dtype=complex)
    c[0] = 1.0
    power = np.zeros(order + 1, dtype=complex)
    power[0] = 1.0
    for k in range(1, kmax + 1):
        power = np.convolve(power, ell)[: order + 1]
        c += alpha[k] * power
    return alpha, c


class LiouvilleContext:
    """The map for sector j of the normalized equation, with R at least R_min."""

    def __init__(self, Q: NormalizedEquation, j: int, R: float | None = None,
                 delta: float = 0.1, R_tilde: float | None = None):
        n = Q.n
        if not 0 <= j <= n + 1:
            raise ValueError(f"sector index {j} outside 0..{n + 1}")
        self.Q = Q
        self.n = n
        self.j = j
        self.R = Q.R_min * 10.0 if R is None else max(Q.R_min, float(R))
        self.psi = 2 * math.pi * j / (n + 2)
        self.half_width = 2 * math.pi / (n + 2)
        self.phi = self.psi - math.pi  # cut for powers of z
        self.z0 = 2 * self.R * complex(math.cos(self.psi), math.sin(self.psi))
        self.delta = delta
        self._R_tilde = None if R_tilde is None else float(R_tilde)

    @property
    def R_tilde(self) -> float:
        """Inner radius of the image domain: |L_j| at 3R on the ray psi_j by default."""
        if self._R_tilde is None:
            w = 3 * self.R * complex(math.cos(self.psi), math.sin(self.psi))
            self._R_tilde = float(abs(self.forward_many([w])[0][0]))
        return self._R_tilde

    # -- elementary pieces -------------------------------------------------
    def zpow(self, z, num: int, den: int):
        return power_on_branch(z, num, den, self.phi)

    def A(self, z):
        z = np.asarray(z, dtype=complex)
        return self.zpow(z, self.n, 2) * np.sqrt(1.0 + self.Q.ell(z))

    def B(self, z):
        z = np.asarray(z, dtype=complex)
        return self.zpow(z, self.n, 4) * np.sqrt(np.sqrt(1.0 + self.Q.ell(z)))

    def u(self, z):
        """Leading term (2/(n+2)) z^{(n+2)/2} on the anchored branch."""
        return 2.0 / (self.n + 2) * self.zpow(z, self.n + 2, 2)

    def arg(self, z):
        return arg_on_branch(z, self.phi)

    def in_G(self, z, closed: bool = False):
        z = np.asarray(z, dtype=complex)
        nz = np.where(z == 0, 1.0, z)
        off = np.abs(np.asarray(arg_on_branch(nz, self.phi)) - self.psi)
        if closed:
            return (np.abs(z) >= self.R) & (off <= self.half_width)
        return (np.abs(z) > self.R) & (off < self.half_width)

    def in_G_tilde(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        nz = np.where(zeta == 0, 1.0, zeta)
        a = np.asarray(arg_on_branch(nz, math.pi * self.j - math.pi))
        return (np.abs(zeta) > self.R_tilde) & (np.abs(a - math.pi * self.j) <= math.pi - self.delta)

    # -- forward map by quadrature ----------------------------------------
    def _path(self, z: complex) -> list[complex]:
        if z == self.z0:
            return [self.z0]
        r = abs(z)
        corner = r * complex(math.cos(self.psi), math.sin(self.psi))
        verts = [self.z0, corner, z]
        floor = 1.02 * self.Q.R_min
        if _segment_min_modulus(corner, z) <= floor:
            span = abs(float(self.arg(z)) - self.psi)
            s = max(r, 2.0 * floor / max(math.cos(span / 2), 1e-3))
            verts = [self.z0, s * complex(math.cos(self.psi), math.sin(self.psi)),
                     s / r * z, z]
        return verts

    def forward_many(self, zs, check: bool = True, rtol: float = QUAD_RTOL):
        """zeta = L_j(z) for an array of points by one vectorized adaptive G-K pass.

        Returns ``(zeta, est_error)`` arrays.
        """
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        if check and not np.all(self.in_G(zs) | (zs == self.z0)):
            bad = zs[~(self.in_G(zs) | (zs == self.z0))][0]
            raise LiouvilleError(f"z = {bad} is outside G_{self.j}(R={self.R:g})")
        paths = [self._path(z) for z in zs]
        nseg = max(len(p) for p in paths) - 1
        if nseg == 0:
            return np.zeros(len(zs), dtype=complex), np.zeros(len(zs))
        starts = np.zeros((nseg, len(zs)), dtype=complex)
        ends = np.zeros((nseg, len(zs)), dtype=complex)
        for k, p in enumerate(paths):
            p = p + [p[-1]] * (nseg + 1 - len(p))
            starts[:, k] = p[:-1]
            ends[:, k] = p[1:]
        scale = np.abs(self.u(zs)) + np.abs(self.u(self.z0)) + 1.0
        steps = ends - starts

        def integrand(t):
            pts = starts + t * steps
            vals = np.where(steps != 0, self.A(np.where(steps != 0, pts, 1.0)), 0.0)
            return (vals * steps).sum(axis=0) / scale

        res, err = quad_vec(integrand, 0.0, 1.0, epsabs=0.1 * rtol, epsrel=0.0,
                            norm="max", limit=2000)
        if not err <= rtol:
            raise LiouvilleError(f"quadrature reached only {err:.3e} (target {rtol:.1e})")
        return res * scale, err * scale

    def forward(self, z: complex) -> LiouvilleEvaluation:
        z = complex(z)
        zeta, err = self.forward_many([z])
        zeta, err = complex(zeta[0]), float(err[0])
        uz = complex(self.u(z))
        return LiouvilleEvaluation(z=z, zeta=zeta, K=zeta / uz - 1.0,
                                   method="quadrature", est_error=err)

    # -- series form ---------------------------------------------------------
    @cached_property
    def _default_series(self) -> SeriesExpansion:
        return self.expansion(self.n + 6)

    def expansion(self, order: int, tol: float = 1e-14) -> SeriesExpansion:
        """Series coefficients, raising the order until the tail at |z0| is below tol."""
        n = self.n
        tail_radius = self.Q.R_min if (n >= 2 and self.Q.M0 > 0) else 0.0
        order = max(order, 2)
        if tail_radius > 0:
            r0 = abs(self.z0)
            ratio = tail_radius / r0
            while 2 * ratio ** (order + 1) / (1 - ratio) * (n + 2) > tol and order < 400:
                order += 1
        alpha, c = sqrt_series(self.Q.a, n, order)
        log_index = n // 2 + 1 if n % 2 == 0 else None
        return SeriesExpansion(alpha=alpha, c=c, order=order, log_index=log_index,
                               tail_radius=tail_radius)

    def _correction(self, z, ser: SeriesExpansion):
        """Antiderivative of A minus its leading term u(z)."""
        z = np.asarray(z, dtype=complex)
        n = self.n
        out = np.zeros_like(z)
        for k in range(2, ser.order + 1):
            ck = ser.c[k]
            if ck == 0:
                continue
            if ser.log_index == k:
                out = out + ck * log_on_branch(z, self.phi)
            else:
                num = n + 2 - 2 * k  # exponent (n + 2 - 2k)/2
                out = out + ck * self.zpow(z, num, 2) * (2.0 / num)
        return out

    def series(self, z: complex, order: int | None = None) -> LiouvilleEvaluation:
        zeta, K, tail = self.series_many([z], order)
        return LiouvilleEvaluation(z=complex(z), zeta=complex(zeta[0]), K=complex(K[0]),
                                   method="series", est_error=float(tail[0]))

    def series_many(self, zs, order: int | None = None, tol: float = 1e-8):
        """Series evaluation; returns ``(zeta, K, relative_tail_bound)``."""
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        if np.any(np.abs(zs) <= self.R):
            raise LiouvilleError(f"series needs |z| > R = {self.R:g}")
        ser = self._default_series if order is None else self.expansion(order)
        phi0 = complex(self.u(self.z0)) + complex(self._correction(self.z0, ser))
        uz = self.u(zs)
        K = (self._correction(zs, ser) - phi0) / uz
        tail = np.array([ser.tail_bound(abs(z)) for z in zs]) * (self.n + 2)
        tail = tail + ser.tail_bound(abs(self.z0)) * (self.n + 2) * abs(phi0) / np.abs(uz)
        if np.any(tail > tol):
            raise LiouvilleError(f"series tail bound {tail.max():.2e} above {tol:.1e}")
        return uz * (1.0 + K), K, tail

    # -- inverse -------------------------------------------------------------
    def _increment(self, za, zb):
        """int_{za}^{zb} A by 16-point Gauss-Legendre on each short segment."""
        mid = 0.5 * (za + zb)
        half = 0.5 * (zb - za)
        pts = mid[None, :] + half[None, :] * _GL_X[:, None]
        return half * (_GL_W[:, None] * self.A(pts)).sum(axis=0)

    def seed(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        n = self.n
        az = np.asarray(arg_on_branch(np.where(zeta == 0, 1.0, zeta), math.pi * self.j - math.pi))
        mod = (np.abs(zeta) * (n + 2) / 2) ** (2.0 / (n + 2))
        return mod * np.exp(2j * az / (n + 2))

    def inverse_many(self, zetas, rtol: float = 1e-12, max_iter: int = 50, check: bool = True):
        zetas = np.atleast_1d(np.asarray(zetas, dtype=complex))
        if check and not np.all(self.in_G_tilde(zetas)):
            bad = zetas[~self.in_G_tilde(zetas)][0]
            raise LiouvilleError(f"zeta = {bad} is outside the image domain G~_{self.j}")
        z = self.seed(zetas)
        if not np.all(self.in_G(z)):
            raise LiouvilleError("inverse not found in sector (seed outside G_j)")
        L, _ = self.forward_many(z)
        for _ in range(max_iter):
            res = zetas - L
            if np.all(np.abs(res) <= rtol * np.abs(zetas)):
                break
            dz = res / self.A(z)
            cap = 0.3 * np.abs(z)
            dz = np.where(np.abs(dz) > cap, dz * cap / np.maximum(np.abs(dz), 1e-300), dz)
            for _ in range(30):
                trial = z + dz
                ok = self.in_G(trial)
                if np.all(ok):
                    break
                dz = np.where(ok, dz, 0.5 * dz)
            else:
                raise LiouvilleError("inverse not found in sector (Newton left G_j)")
            L = L + self._increment(z, trial)
            z = trial
        else:
            raise LiouvilleError("inverse not found in sector (Newton did not converge)")
        return z

    def inverse(self, zeta: complex) -> complex:
        z = complex(self.inverse_many([zeta])[0])
        check = self.forward(z)
        if abs(check.zeta - zeta) > 1e-10 * abs(zeta):
            raise LiouvilleError("inverse not found in sector (residual check failed)")
        return z

    # -- perturbation --------------------------------------------------------
    def perturbation_T(self, z):
        """T = (Q''/Q**2 - (5/4) Q'**2/Q**3)/4 at z."""
        return perturbation_T(self.Q, z)

    # -- geometry ------------------------------------------------------------
    def estimate_C0(self, radii=None) -> float:
        """2 x max of |arg(1 + K)|/e_n(|z|) sampled on the bounding rays psi_{j+-1}."""
        if radii is None:
            radii = self.R * np.logspace(np.log10(1.5), 3, 40)
        samples = []
        for side in (-1, 1):
            ang = self.psi + side * self.half_width * (1 - 1e-9)
            zs = np.asarray(radii) * np.exp(1j * ang)
            _, K, _ = self.series_many(zs, tol=1e-6)
            samples.append(np.abs(np.angle(1 + K)) / e_n(np.abs(zs), self.n))
        return 2.0 * float(np.max(np.concatenate(samples)))

    def preimage_horizontal(self, v0: float, u_samples) -> PreimageCurve:
        u = np.asarray(u_samples, dtype=float)
        zetas = (-1) ** self.j * u + 1j * v0
        z = self.inverse_many(zetas)
        offsets = np.abs(np.asarray(self.arg(z)) - self.psi)
        C0 = self.estimate_C0()
        C = math.pi * abs(v0) + 2 * math.pi / (self.n + 2) * C0
        bound = C * e_n(np.abs(z), self.n)
        return PreimageCurve(z=z, zeta=zetas, offsets=offsets, C=C, C0=C0,
                             satisfied=bool(np.all(offsets < bound)))

    def univalence_probe(self, trials: int, seed: int = 0, r_max_factor: float = 100.0) -> UnivalenceReport:
        if trials < 1:
            raise ValueError("trials must be >= 1")
        rng = np.random.default_rng(seed)
        pts = []
        while len(pts) < 2 * trials:
            r = self.R * np.exp(rng.uniform(0, math.log(r_max_factor), 2 * trials))
            a = self.psi + rng.uniform(-1, 1, 2 * trials) * self.half_width
            cand = r * np.exp(1j * a)
            pts.extend(cand[self.in_G(cand)])
        pts = np.asarray(pts[: 2 * trials])
        z1, z2 = pts[:trials], pts[trials:]
        keep = z1 != z2
        z1, z2 = z1[keep], z2[keep]
        L, _ = self.forward_many(np.concatenate([z1, z2]))
        L1, L2 = L[: len(z1)], L[len(z1):]
        du = np.abs(self.u(z1) - self.u(z2))
        ratio = np.abs(L1 - L2) / du
        k = int(np.argmin(ratio))
        return UnivalenceReport(trials=len(z1), min_ratio=float(ratio[k]),
                                witness=(complex(z1[k]), complex(z2[k])),
                                passed=bool(ratio[k] >= 0.5))


def perturbation_T(Q: NormalizedEquation, z):
    z = np.asarray(z, dtype=complex)
    q, dq, d2q = Q.Q(z), Q.dQ(z), Q.d2Q(z)
    if np.any(q == 0):
        raise LiouvilleError("T has a pole where Q(z) = 0")
    out = 0.25 * (d2q / q ** 2 - 1.25 * dq ** 2 / q ** 3)
    return complex(out) if out.ndim == 0 else out


@dataclass
class PreimageCurve:
    z: np.ndarray
    zeta: np.ndarray
    offsets: np.ndarray
    C: float
    C0: float
    satisfied: bool


@dataclass
class UnivalenceReport:
    trials: int
    min_ratio: float
    witness: tuple[complex, complex]
    passed: bool
    notes: dict = field(default_factory=dict)


def _segment_min_modulus(a: complex, b: complex) -> float:
    d = b - a
    if d == 0:
        return abs(a)
    t = -((a.conjugate() * d).real) / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(a + t * d)
