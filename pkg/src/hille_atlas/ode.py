"""Taylor-series integration of f'' + P(z) f = 0 along complex paths.

At each point the polynomial is re-centred exactly and the solution's Taylor
coefficients follow from the recurrence

    (k + 2)(k + 1) a[k+2] = -sum_m P_m(z0) a[k-m].

States carry a logarithmic scale so that blow-up along a path never overflows:
the true value is ``f * exp(log_scale)``.  The marching kernel optionally
accumulates the change of arg f, which is how the zero locator evaluates
winding numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .equation import EquationSpec

DEFAULT_ORDER = 30
DEFAULT_TOL = 1e-16
RESCALE_HIGH = 1e100
RESCALE_LOW = 1e-100
MAX_STEPS = 5_000_000

OK, OVERFLOW, NEAR_ZERO, TOO_MANY_STEPS = 0, 1, 2, 3


class OdeError(ArithmeticError):
    pass


class OdeOverflow(OdeError):
    def __init__(self, msg, last_state=None):
        super().__init__(msg)
        self.last_state = last_state


# -- numba kernels ------------------------------------------------------------

@njit(cache=True, nogil=True)
def _shift(p, z0, q):
    """Taylor coefficients of the polynomial p about z0 (repeated synthetic division)."""
    n = p.shape[0] - 1
    for k in range(n + 1):
        q[k] = p[k]
    for i in range(n):
        for k in range(n - 1, i - 1, -1):
            q[k] += z0 * q[k + 1]


@njit(cache=True, nogil=True)
def _coeffs(q, f, fp, order, a):
    n = q.shape[0] - 1
    a[0] = f
    a[1] = fp
    for k in range(order - 1):
        s = 0j
        mmax = k if k < n else n
        for m in range(mmax + 1):
            s += q[m] * a[k - m]
        a[k + 2] = -s / ((k + 2.0) * (k + 1.0))


@njit(cache=True, nogil=True)
def _evalf(a, order, w):
    f = a[order]
    fp = order * a[order]
    for k in range(order - 1, -1, -1):
        f = f * w + a[k]
    for k in range(order - 1, 0, -1):
        fp = fp * w + k * a[k]
    return f, fp


@njit(cache=True, nogil=True)
def _hmax(a, order, tol, window):
    """Largest step whose trailing Taylor terms stay below tol relative to |f| + |f'|."""
    scale = abs(a[0]) + abs(a[1])
    if scale == 0.0:
        return np.inf
    h = np.inf
    for k in range(order - window + 1, order + 1):
        ak = abs(a[k])
        if ak > 0.0:
            hk = (tol * scale / ak) ** (1.0 / k)
            if hk < h:
                h = hk
    return h


@njit(cache=True, nogil=True)
def _phase_in_step(a, order, hc, f0, fp0, mmax, arc, z, cen, rad, t0, dt):
    """Change of arg f over one step, sub-sampled so each piece turns by < pi/2.

    On arcs (arc=True) the samples lie on cen + rad e^{i(t0 + dt x)}, not on the chord.
    Returns (dphase, min |f/f'|, ok).
    """
    mind = np.inf
    if f0 == 0:
        return 0.0, 0.0, False
    if fp0 != 0:
        mind = abs(f0 / fp0)
    est = abs(fp0 / f0) * abs(hc)
    m = int(est / (np.pi / 4)) + 1
    while m <= mmax:
        ok = True
        total = 0.0
        fprev = f0
        md = mind
        for i in range(1, m + 1):
            if arc and i < m:
                w = cen + rad * np.exp(1j * (t0 + dt * (i / m))) - z
            else:
                w = hc * (i / m)
            fi, fpi = _evalf(a, order, w)
            if fi == 0:
                ok = False
                break
            ratio = fi / fprev
            d = math.atan2(ratio.imag, ratio.real)
            rate = abs(fpi / fi) * abs(hc) / m
            if abs(d) > np.pi / 2 or rate > np.pi / 2:
                ok = False
                break
            total += d
            fprev = fi
            if fpi != 0:
                r = abs(fi / fpi)
                if r < md:
                    md = r
        if ok:
            return total, md, True
        m *= 2
    return 0.0, mind, False


@njit(cache=True, nogil=True)
def _march(p, mode, za, zb, cen, rad, a0, a1, f, fp, logs, order, tol, hcap, track,
           samp, out_f, out_fp, out_logs, max_steps):
    """March along a segment (mode 0: za -> zb) or an arc (mode 1: cen + rad e^{it}, a0 -> a1).

    Arc steps are taken between points on the arc; phase samples stay on the arc.
    ``samp`` holds sorted fractions of the path at which states are recorded.
    Returns (f, fp, logs, phase, min_dist, nsteps, status, n_recorded, last_param).
    """
    n = p.shape[0] - 1
    q = np.empty(n + 1, dtype=np.complex128)
    a = np.empty(order + 1, dtype=np.complex128)
    window = n + 2 if n + 2 < order - 1 else order - 1
    if window < 3:
        window = 3
    if mode == 0:
        L = abs(zb - za)
        dirn = (zb - za) / L if L > 0 else 1.0 + 0j
        scale_h = 1.0
    else:
        L = abs(a1 - a0)
        dirn = 1.0 + 0j
        scale_h = rad
    sgn = 1.0 if a1 >= a0 else -1.0
    s = 0.0
    phase = 0.0
    mind = np.inf
    nsteps = 0
    js = 0
    ns = samp.shape[0]
    while True:
        while js < ns and samp[js] * L <= s * (1 + 1e-15):
            out_f[js] = f
            out_fp[js] = fp
            out_logs[js] = logs
            js += 1
        if s >= L:
            break
        if mode == 0:
            z = za + dirn * s
        else:
            z = cen + rad * np.exp(1j * (a0 + sgn * s))
        _shift(p, z, q)
        _coeffs(q, f, fp, order, a)
        hm = _hmax(a, order, tol, window)
        if hm > hcap:
            hm = hcap
        ds = hm / scale_h
        if ds >= L - s or L - s - ds < 1e-13 * L:
            ds = L - s
        if mode == 0:
            hc = dirn * ds
        else:
            hc = cen + rad * np.exp(1j * (a0 + sgn * (s + ds))) - z
        while js < ns and samp[js] * L < s + ds:
            t = samp[js] * L - s
            if mode == 0:
                w = dirn * t
            else:
                w = cen + rad * np.exp(1j * (a0 + sgn * (s + t))) - z
            fs, fps = _evalf(a, order, w)
            out_f[js] = fs
            out_fp[js] = fps
            out_logs[js] = logs
            js += 1
        if track:
            dph, md, ok = _phase_in_step(a, order, hc, f, fp, 1 << 14, mode == 1, z, cen, rad,
                                         a0 + sgn * s, sgn * ds)
            if not ok:
                return f, fp, logs, phase, md, nsteps, NEAR_ZERO, js, s
            phase += dph
            if md < mind:
                mind = md
        fn, fpn = _evalf(a, order, hc)
        if not (np.isfinite(fn.real) and np.isfinite(fn.imag)
                and np.isfinite(fpn.real) and np.isfinite(fpn.imag)):
            return f, fp, logs, phase, mind, nsteps, OVERFLOW, js, s
        f = fn
        fp = fpn
        s += ds
        nsteps += 1
        sc = abs(f) + abs(fp)
        if sc > RESCALE_HIGH or (0.0 < sc < RESCALE_LOW):
            f /= sc
            fp /= sc
            logs += math.log(sc)
        if nsteps >= max_steps:
            return f, fp, logs, phase, mind, nsteps, TOO_MANY_STEPS, js, s
    return f, fp, logs, phase, mind, nsteps, OK, js, s


# -- python layer ---------------------------------------------------------------

def poly_array(P) -> np.ndarray:
    if isinstance(P, EquationSpec):
        return np.asarray(P.coeffs, dtype=np.complex128)
    return np.ascontiguousarray(np.asarray(P, dtype=np.complex128))


@dataclass(frozen=True)
class OdeState:
    """(f, f') at z; the true values are ``f*exp(log_scale)`` and ``fp*exp(log_scale)``."""

    z: complex
    f: complex
    fp: complex
    log_scale: float = 0.0

    def __post_init__(self):
        for v in (self.z, self.f, self.fp):
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise OdeError("non-finite state")

    @property
    def true_f(self) -> complex:
        return self.f * math.exp(self.log_scale)

    @property
    def true_fp(self) -> complex:
        return self.fp * math.exp(self.log_scale)

    @property
    def log_abs_f(self) -> float:
        return math.log(abs(self.f)) + self.log_scale if self.f != 0 else -math.inf

    @property
    def log_abs_fp(self) -> float:
        return math.log(abs(self.fp)) + self.log_scale if self.fp != 0 else -math.inf

    def normalized(self) -> OdeState:
        sc = abs(self.f) + abs(self.fp)
        if sc == 0:
            return self
        return OdeState(self.z, self.f / sc, self.fp / sc, self.log_scale + math.log(sc))

    def scaled(self, c: complex) -> OdeState:
        return OdeState(self.z, self.f * c, self.fp * c, self.log_scale)


def wronskian(s1: OdeState, s2: OdeState, rtol: float = 1e-12) -> complex:
    """f1 f2' - f1' f2 (true scale)."""
    if abs(s1.z - s2.z) > rtol * max(1.0, abs(s1.z)):
        raise ValueError("wronskian needs states at the same point")
    w = s1.f * s2.fp - s1.fp * s2.f
    return w * math.exp(s1.log_scale + s2.log_scale)


def taylor_step(P, state: OdeState, h: complex, order: int | None = None,
                tol: float = DEFAULT_TOL, max_order: int = 80) -> OdeState:
    """One Taylor step of size h; the order grows until the trailing terms are below tol."""
    p = poly_array(P)
    n = len(p) - 1
    q = np.empty(n + 1, dtype=np.complex128)
    _shift(p, complex(state.z), q)
    k = DEFAULT_ORDER if order is None else order
    scale = abs(state.f) + abs(state.fp)
    while True:
        a = np.empty(k + 1, dtype=np.complex128)
        _coeffs(q, complex(state.f), complex(state.fp), k, a)
        tail = max(abs(a[j]) * abs(h) ** j for j in range(max(2, k - n - 1), k + 1))
        if order is not None or tail <= tol * max(scale, 1e-300) or scale == 0:
            break
        if k >= max_order:
            raise OdeError(f"step |h| = {abs(h):g} exceeds the Taylor bound at order {k}")
        k += 10
    f, fp = _evalf(a, k, complex(h))
    if not (np.isfinite(f) and np.isfinite(fp)):
        raise OdeOverflow("non-finite Taylor sum", last_state=state)
    return OdeState(state.z + h, complex(f), complex(fp), state.log_scale)


@dataclass
class Trace:
    """Result of marching one segment or arc."""

    end: OdeState
    phase: float
    min_dist: float  # smallest |f/f'| seen (distance-to-zero proxy)
    steps: int
    status: int
    samples: list[OdeState] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OK


def _run(p, mode, za, zb, cen, rad, a0, a1, state, order, tol, hcap, track, fracs):
    fracs = np.ascontiguousarray(np.asarray(fracs, dtype=np.float64))
    out_f = np.zeros(len(fracs), dtype=np.complex128)
    out_fp = np.zeros(len(fracs), dtype=np.complex128)
    out_l = np.zeros(len(fracs), dtype=np.float64)
    st = state.normalized()
    f, fp, logs, phase, mind, steps, status, js, s_end = _march(
        p, mode, complex(za), complex(zb), complex(cen), float(rad), float(a0), float(a1),
        complex(st.f), complex(st.fp), float(st.log_scale), int(order), float(tol), float(hcap),
        bool(track), fracs, out_f, out_fp, out_l, MAX_STEPS)
    if mode == 0:
        L = abs(zb - za)
        zend = za + (zb - za) * (s_end / L if L > 0 else 0.0)
        zs = za + (zb - za) * fracs
    else:
        sg = 1.0 if a1 >= a0 else -1.0
        zend = cen + rad * np.exp(1j * (a0 + sg * s_end))
        zs = cen + rad * np.exp(1j * (a0 + (a1 - a0) * fracs))
    if status == OK:
        zend = zb if mode == 0 else cen + rad * np.exp(1j * a1)
    samples = [OdeState(complex(zs[i]), complex(out_f[i]), complex(out_fp[i]), float(out_l[i]))
               for i in range(js)]
    end = OdeState(complex(zend), complex(f), complex(fp), float(logs))
    return Trace(end=end, phase=float(phase), min_dist=float(mind), steps=int(steps),
                 status=int(status), samples=samples)


def march_segment(P, state: OdeState, z_end: complex, track_phase: bool = False, fracs=(),
                  order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL, hcap: float = np.inf) -> Trace:
    p = poly_array(P)
    return _run(p, 0, state.z, complex(z_end), 0j, 0.0, 0.0, 0.0, state, order, tol, hcap,
                track_phase, fracs)


def march_arc(P, state: OdeState, center: complex, a_start: float, a_end: float,
              track_phase: bool = False, fracs=(), order: int = DEFAULT_ORDER,
              tol: float = DEFAULT_TOL, hcap: float = np.inf) -> Trace:
    """March along center + r e^{it} from a_start to a_end with r = |state.z - center|."""
    p = poly_array(P)
    rad = abs(state.z - center)
    return _run(p, 1, 0j, 0j, complex(center), rad, a_start, a_end, state, order, tol, hcap,
                track_phase, fracs)


@dataclass
class PathSolution:
    polyline: list[complex]
    samples: list[OdeState]
    steps: int
    truncated: bool
    final: OdeState
    max_step: float = 0.0


def integrate_path(P, init: OdeState, polyline, samples_per_unit: float = 0.0,
                   order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL) -> PathSolution:
    """Chain Taylor steps along a polyline starting at init.z."""
    verts = [complex(v) for v in polyline]
    if not verts or abs(verts[0] - init.z) > 1e-12 * max(1.0, abs(init.z)):
        raise ValueError("init.z must equal the first vertex")
    p = poly_array(P)
    state = init
    samples = [init]
    steps = 0
    for za, zb in zip(verts[:-1], verts[1:]):
        L = abs(zb - za)
        k = int(math.ceil(L * samples_per_unit)) if samples_per_unit > 0 else 1
        fracs = np.linspace(0, 1, k + 1)[1:]
        tr = _run(p, 0, za, zb, 0j, 0.0, 0.0, 0.0, OdeState(za, state.f, state.fp, state.log_scale),
                  order, tol, np.inf, False, fracs)
        steps += tr.steps
        samples.extend(tr.samples)
        if not tr.ok:
            return PathSolution(verts, samples, steps, True, tr.end)
        state = tr.end
    return PathSolution(verts, samples, steps, False, state)


@dataclass
class RayProfile:
    theta: float
    r: np.ndarray
    log_f: np.ndarray
    log_fp: np.ndarray
    trivial: bool = False
    truncated: bool = False


def ray_profile(P, theta: float, r_max: float, init: OdeState, r_min: float = 1e-3,
                n_samples: int = 200, center: complex = 0j, order: int = DEFAULT_ORDER) -> RayProfile:
    """log|f| and log|f'| at radii in [r_min, r_max] along center + r e^{i theta}.

    ``init`` may sit at the centre or at center + r_min e^{i theta}.
    """
    if not r_max > r_min > 0:
        raise ValueError("need r_max > r_min > 0")
    u = complex(math.cos(theta), math.sin(theta))
    r = np.linspace(r_min, r_max, n_samples)
    if init.f == 0 and init.fp == 0:
        return RayProfile(theta, r, np.full(n_samples, -np.inf), np.full(n_samples, -np.inf), trivial=True)
    start = center + r_min * u
    state = init
    if abs(init.z - start) > 1e-12 * max(1.0, abs(start)):
        state = march_segment(P, init, start, order=order).end
    tr = march_segment(P, state, center + r_max * u, fracs=(r - r_min) / (r_max - r_min), order=order)
    lf = np.array([s.log_abs_f for s in tr.samples] + [np.nan] * (n_samples - len(tr.samples)))
    lfp = np.array([s.log_abs_fp for s in tr.samples] + [np.nan] * (n_samples - len(tr.samples)))
    return RayProfile(theta, r, lf, lfp, truncated=not tr.ok)
