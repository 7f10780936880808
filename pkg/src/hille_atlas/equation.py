"""The equation f'' + P(z) f = 0, its derived constants and its normal form.

Coefficient lists are always ordered by increasing power: ``coeffs[k]`` is the
coefficient of ``z**k``.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial


class EquationError(ValueError):
    """Invalid polynomial input or a point outside a guaranteed domain."""


def principal_arg(w: complex) -> float:
    """Argument in (-pi, pi]; -0.0 imaginary parts do not flip the sign."""
    a = math.atan2(w.imag, w.real)
    return math.pi if a == -math.pi else a


@dataclass(frozen=True)
class EquationSpec:
    coeffs: tuple[complex, ...]

    @property
    def n(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return self.coeffs[-1]

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, np.asarray(self.coeffs))

    def to_json(self) -> list[list[float]]:
        return [[c.real, c.imag] for c in self.coeffs]


def validate(coeffs) -> EquationSpec:
    """Build an :class:`EquationSpec`, trimming trailing zero coefficients.

    Accepts numbers or ``[re, im]`` pairs.
    """
    cs = []
    for c in coeffs:
        if isinstance(c, (list, tuple)):
            if len(c) != 2:
                raise EquationError(f"coefficient {c!r} is not a [re, im] pair")
            c = complex(float(c[0]), float(c[1]))
        cs.append(complex(c))
    while cs and cs[-1] == 0:
        cs.pop()
    if len(cs) < 2:
        raise EquationError("degree must be >= 1")
    if not all(cmath.isfinite(c) for c in cs):
        raise EquationError("coefficients must be finite")
    return EquationSpec(tuple(cs))


def parse_poly(text: str) -> EquationSpec:
    """Parse the JSON ``[[re, im], ...]`` polynomial format."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EquationError(f"polynomial is not valid JSON: {exc}") from None
    if not isinstance(data, list):
        raise EquationError("polynomial must be a JSON array")
    return validate(data)


@dataclass(frozen=True)
class DerivedConstants:
    n: int
    c: complex
    q: float
    d: complex
    mu: complex
    theta: tuple[float, ...]
    psi: tuple[float, ...]
    M0: float
    R_min: float
    sqrt_abs_pn: float

    @property
    def default_R(self) -> float:
        return 10.0 * self.R_min

    def runtime_R(self, R: float | None = None) -> float:
        return self.default_R if R is None else max(self.R_min, float(R))


@dataclass(frozen=True)
class NormalizedEquation:
    """Q(z) = z**n + a[n-2] z**(n-2) + ... + a[0], with the map g(z) = f(mu z - c)."""

    a: tuple[complex, ...]
    n: int
    mu: complex = 1.0
    c: complex = 0.0

    @cached_property
    def coeffs(self) -> np.ndarray:
        """Full coefficient array of Q, increasing powers."""
        out = np.zeros(self.n + 1, dtype=complex)
        out[: len(self.a)] = self.a
        out[self.n] = 1.0
        return out

    @cached_property
    def M0(self) -> float:
        return max((abs(x) for x in self.a), default=0.0)

    @cached_property
    def R_min(self) -> float:
        return max(1.0, math.sqrt((self.n - 1) * self.M0))

    def Q(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    def dQ(self, z):
        return np.polynomial.polynomial.polyval(
            z, np.polynomial.polynomial.polyder(self.coeffs))

    def d2Q(self, z):
        return np.polynomial.polynomial.polyval(
            z, np.polynomial.polynomial.polyder(self.coeffs, 2))

    def ell(self, z):
        """l(z) = a[n-2]/z**2 + ... + a[0]/z**n, unchecked."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for k, ak in enumerate(self.a):
            if ak != 0:
                out = out + ak * z ** (k - self.n)
        return out

    @classmethod
    def from_Q(cls, q_coeffs) -> NormalizedEquation:
        q = [complex(x) for x in q_coeffs]
        n = len(q) - 1
        if n < 1 or q[-1] != 1 or (n >= 2 and q[n - 1] != 0) or (n == 1 and q[0] != 0):
            raise EquationError("Q must be monic with vanishing z**(n-1) term")
        return cls(a=tuple(q[: max(n - 1, 0)]), n=n)


def derive_constants(spec: EquationSpec) -> DerivedConstants:
    n = spec.n
    pn = spec.leading
    arg_pn = principal_arg(pn)
    c = spec.coeffs[n - 1] / (n * pn)
    q = (n + 2) / 2
    sqrt_pn = math.sqrt(abs(pn)) * cmath.exp(0.5j * arg_pn)
    # arg(mu) = -arg(p_n)/(n+2) so that the ray psi_j of Q maps onto theta_j of P
    mu = abs(pn) ** (-1.0 / (n + 2)) * cmath.exp(-1j * arg_pn / (n + 2))
    theta = tuple((2 * math.pi * j - arg_pn) / (n + 2) for j in range(n + 2))
    psi = tuple(2 * math.pi * j / (n + 2) for j in range(n + 2))
    norm = normalize(spec)
    return DerivedConstants(
        n=n, c=c, q=q, d=sqrt_pn / q, mu=mu, theta=theta, psi=psi,
        M0=norm.M0, R_min=norm.R_min, sqrt_abs_pn=math.sqrt(abs(pn)),
    )


def normalize(spec: EquationSpec) -> NormalizedEquation:
    """Coefficients of Q(z) = mu**2 P(mu z - c)."""
    n = spec.n
    pn = spec.leading
    arg_pn = principal_arg(pn)
    c = spec.coeffs[n - 1] / (n * pn)
    mu = abs(pn) ** (-1.0 / (n + 2)) * cmath.exp(-1j * arg_pn / (n + 2))
    composed = Polynomial(np.asarray(spec.coeffs))(Polynomial([-c, mu]))
    qc = mu ** 2 * np.asarray(composed.coef, dtype=complex)
    qc = np.concatenate([qc, np.zeros(n + 1 - len(qc), dtype=complex)])[: n + 1]
    # the top two coefficients are 1 and 0 by construction; pin them exactly
    a = tuple(complex(x) for x in qc[: max(n - 1, 0)])
    return NormalizedEquation(a=a, n=n, mu=mu, c=c)


def denormalize(norm: NormalizedEquation) -> np.ndarray:
    """Coefficients of P(w) = Q((w + c)/mu) / mu**2."""
    inner = Polynomial([norm.c / norm.mu, 1.0 / norm.mu])
    out = Polynomial(norm.coeffs)(inner).coef / norm.mu ** 2
    return np.asarray(out, dtype=complex)


def e_n(r, n: int):
    """Zero-approach rate: r**-2 (n > 2), r**-2 log r (n = 2), r**-1.5 (n = 1)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise EquationError("e_n requires r > 0")
    if n > 2:
        out = r_arr ** -2.0
    elif n == 2:
        out = r_arr ** -2.0 * np.log(r_arr)
    elif n == 1:
        out = r_arr ** -1.5
    else:
        raise EquationError("degree must be >= 1")
    return float(out) if np.ndim(out) == 0 else out


def ell_eval(norm: NormalizedEquation, z: complex) -> complex:
    """l(z) on its guaranteed domain |z| > R_min, where |l(z)| < 1."""
    if norm.n == 1:
        return 0j
    if abs(z) <= norm.R_min:
        raise EquationError(f"|z| = {abs(z):g} is outside guaranteed domain |z| > {norm.R_min:g}")
    val = complex(norm.ell(z))
    if not abs(val) < 1:
        raise EquationError(f"|l(z)| = {abs(val):g} is not < 1")
    return val


def wrap_angle(a):
    """Reduce angles into (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    # subtracting whole turns keeps tiny angles exact
    out = a - 2 * np.pi * np.round(a / (2 * np.pi))
    out = np.where(out <= -np.pi, out + 2 * np.pi, out)
    return float(out) if np.ndim(out) == 0 else out


def translate_frame(z, dc: DerivedConstants, j: int):
    """Coordinates of z relative to the critical translate j: (z + c) e^{-i theta_j}."""
    return (np.asarray(z, dtype=complex) + dc.c) * np.exp(-1j * dc.theta[j])


def lambda_membership(z: complex, j: int, dc: DerivedConstants, C: float, R: float) -> bool:
    """Whether z lies in the translated domain Lambda_{j,c}."""
    w = complex(z) + dc.c
    r = abs(w)
    if r <= R:
        return False
    offset = abs(wrap_angle(principal_arg(w) - dc.theta[j]))
    return bool(offset < C * e_n(r, dc.n))


def distance_to_translate(z, dc: DerivedConstants, j: int):
    """Euclidean distance from z to the ray arg(z + c) = theta_j."""
    w = translate_frame(z, dc, j)
    return np.where(w.real >= 0, np.abs(w.imag), np.abs(w))


def nearest_translate(z: complex, dc: DerivedConstants) -> int:
    w = complex(z) + dc.c
    if w == 0:
        return 0
    a = principal_arg(w)
    offs = [abs(wrap_angle(a - t)) for t in dc.theta]
    return int(np.argmin(offs))
