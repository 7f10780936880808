"""Zero location by the argument principle, counting functions and ray classification.

Values of a solution are only trusted when they were reached along a path on
which |f| does not shrink by much.  A :class:`Solution` therefore routes every
evaluation:

* route A: radially outward from the centre -c (blow-up sectors and critical
  rays);
* route B: for a solution that decays in a sector k, from an anchor far out on
  the bisector of that sector along the arc at the anchor radius and then
  radially inward.

Box edges are marched from whichever end has the smaller |f|, and each edge's
end value is reconciled with the routed value at that corner.  The total
change of arg f around the box is then an integer multiple of 2 pi up to
round-off.
"""
from __future__ import annotations

import bisect
import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULTS
from .equation import (DerivedConstants, EquationSpec, derive_constants, distance_to_translate,
                       e_n, lambda_membership, nearest_translate, wrap_angle)
from .ode import NEAR_ZERO, OK, OdeError, OdeState, march_arc, march_segment, poly_array
from .volterra import PerturbationField, half_plane_edge, successive_approximation, tail_integral

TWO_PI = 2 * math.pi
JUNCTION_RTOL = DEFAULTS.junction_rtol
JITTER_FRACTION = DEFAULTS.jitter_fraction
JITTER_RETRIES = DEFAULTS.jitter_retries


class ZeroLocationError(ArithmeticError):
    pass


class BoundaryTooClose(ZeroLocationError):
    """A zero lies on or very near a contour."""


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("HILLE_ATLAS_THREADS", "1")))
    except ValueError:
        return 1


# -- geometry -------------------------------------------------------------------

@dataclass(frozen=True)
class PolarBox:
    """{center + r e^{ia}: r1 <= r <= r2, a1 <= a <= a2}."""

    center: complex
    r1: float
    r2: float
    a1: float
    a2: float

    @property
    def size(self) -> float:
        return max(self.r2 - self.r1, self.r2 * (self.a2 - self.a1))

    @property
    def mid(self) -> complex:
        return self.center + 0.5 * (self.r1 + self.r2) * cmath.exp(0.5j * (self.a1 + self.a2))

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        w = z - self.center
        r = abs(w)
        if r < self.r1 - slack or r > self.r2 + slack:
            return False
        if r == 0:
            return self.r1 == 0
        off = wrap_angle(cmath.phase(w) - 0.5 * (self.a1 + self.a2))
        return abs(off) <= 0.5 * (self.a2 - self.a1) + slack / max(r, 1e-300)


@dataclass(frozen=True)
class Rect:
    x1: float
    x2: float
    y1: float
    y2: float

    @property
    def size(self) -> float:
        return max(self.x2 - self.x1, self.y2 - self.y1)

    @property
    def mid(self) -> complex:
        return complex(0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return (self.x1 - slack <= z.real <= self.x2 + slack
                and self.y1 - slack <= z.imag <= self.y2 + slack)

    def shifted(self, d: complex) -> Rect:
        return Rect(self.x1 + d.real, self.x2 + d.real, self.y1 + d.imag, self.y2 + d.imag)


# -- routed solutions --------------------------------------------------------------

class Solution:
    """A solution of f'' + P f = 0 given by data at one point, with stable evaluation routes."""

    def __init__(self, P: EquationSpec, anchor: OdeState, decay_sector: int | None = None,
                 order: int = 30):
        self.P = P
        self.p = poly_array(P)
        self.dc: DerivedConstants = derive_constants(P)
        self.center = -self.dc.c
        self.anchor = anchor
        self.order = order
        self.decay_sector = decay_sector
        n2 = self.dc.n + 2
        self.half_sector = math.pi / n2
        if decay_sector is not None:
            lo = self.dc.theta[(decay_sector - 1) % n2]
            if decay_sector == 0:
                lo -= TWO_PI
            self.bisector = lo + self.half_sector
            self.r_far = abs(anchor.z - self.center)
        self._center_state: OdeState | None = None
        self._rays: dict[float, tuple[list[float], list[OdeState]]] = {}
        self._arc: dict[int, tuple[list[float], list[OdeState]]] = {}

    def fork(self) -> Solution:
        """Same solution with private caches (for use from another thread)."""
        s = Solution(self.P, self.anchor, self.decay_sector, self.order)
        s._center_state = self.center_state
        return s

    # routing
    def in_decay(self, a: float) -> bool:
        if self.decay_sector is None:
            return False
        return abs(wrap_angle(a - self.bisector)) < self.half_sector - 1e-12

    def _seg(self, st: OdeState, z: complex) -> OdeState:
        tr = march_segment(self.p, st, z, order=self.order)
        if not tr.ok:
            raise OdeError(f"integration failed between {st.z} and {z} (status {tr.status})")
        return tr.end.normalized()

    @property
    def center_state(self) -> OdeState:
        if self._center_state is None:
            self._center_state = self._seg(self.anchor, self.center)
        return self._center_state

    def _arc_state(self, a: float) -> OdeState:
        t = wrap_angle(a - self.bisector)
        side = 1 if t >= 0 else -1
        ts, sts = self._arc.setdefault(side, ([0.0], [self.anchor.normalized()]))
        i = bisect.bisect_right(ts, abs(t)) - 1
        t0, st0 = ts[i], sts[i]
        if t0 == abs(t):
            return st0
        tr = march_arc(self.p, st0, self.center, self.bisector + side * t0,
                       self.bisector + side * abs(t), order=self.order)
        if not tr.ok:
            raise OdeError(f"arc integration failed (status {tr.status})")
        st = tr.end.normalized()
        ts.insert(i + 1, abs(t))
        sts.insert(i + 1, st)
        return st

    def state_polar(self, r: float, a: float) -> OdeState:
        if r == 0:
            return self.center_state
        key = round(a % TWO_PI, 12)
        u = cmath.exp(1j * a)
        if self.in_decay(a):
            if r > self.r_far * (1 + 1e-12):
                raise ValueError(f"radius {r:g} beyond the anchor radius {self.r_far:g}")
            if key not in self._rays:
                self._rays[key] = ([self.r_far], [self._arc_state(a)])
            rs, sts = self._rays[key]
            i = bisect.bisect_left(rs, r)
            if rs[i] == r:
                return sts[i]
            st = self._seg(sts[i], self.center + r * u)
        else:
            if key not in self._rays:
                self._rays[key] = ([0.0], [self.center_state])
            rs, sts = self._rays[key]
            i = bisect.bisect_right(rs, r) - 1
            if rs[i] == r:
                return sts[i]
            st = self._seg(sts[i], self.center + r * u)
            i += 1
        rs.insert(i, r)
        sts.insert(i, st)
        return st

    def state_at(self, z: complex) -> OdeState:
        w = complex(z) - self.center
        if w == 0:
            return self.center_state
        st = self.state_polar(abs(w), cmath.phase(w))
        return OdeState(complex(z), st.f, st.fp, st.log_scale)

    def log_abs_profile(self, a: float, radii) -> np.ndarray:
        order = sorted(range(len(radii)), key=lambda i: radii[i], reverse=self.in_decay(a))
        out = np.empty(len(radii))
        for i in order:
            out[i] = self.state_polar(float(radii[i]), a).log_abs_f
        return out


def subdominant_solution(P: EquationSpec, decay_sector: int, r_far: float, order: int = 30) -> Solution:
    """The solution decaying in sector (theta_{k-1}, theta_k), from WKB data far out on its bisector."""
    dc = derive_constants(P)
    n2 = dc.n + 2
    lo = dc.theta[(decay_sector - 1) % n2] - (TWO_PI if decay_sector == 0 else 0.0)
    beta = lo + math.pi / n2
    u = cmath.exp(1j * beta)
    z = -dc.c + r_far * u
    Pz = complex(P(z))
    dP = complex(np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(np.asarray(P.coeffs))))
    root = cmath.sqrt(Pz)
    # choose the WKB exponent that decays outward along the bisector
    cands = [1j * s * root - dP / (4 * Pz) for s in (1, -1)]
    ratio = min(cands, key=lambda c: (u * c).real)
    return Solution(P, OdeState(z, 1 + 0j, ratio), decay_sector=decay_sector, order=order)


def random_solution(P: EquationSpec, rng: np.random.Generator, order: int = 30) -> Solution:
    """Generic solution: standard complex normal data at -c."""
    dc = derive_constants(P)
    f, fp = rng.normal(size=2) + 1j * rng.normal(size=2)
    return Solution(P, OdeState(-dc.c, complex(f), complex(fp)), order=order)


def default_decay_sector(dc: DerivedConstants) -> int:
    """The sector containing the direction opposite theta_0."""
    n2 = dc.n + 2
    target = dc.theta[0] + math.pi
    for k in range(n2):
        lo = dc.theta[(k - 1) % n2] - (TWO_PI if k == 0 else 0.0)
        off = wrap_angle(target - lo)
        if 0 <= off % TWO_PI < TWO_PI / n2:
            return k
    return n2 // 2


# -- winding numbers -----------------------------------------------------------------

@dataclass
class _Piece:
    kind: str  # "seg" or "arc"
    za: complex
    zb: complex
    aa: float = 0.0
    ab: float = 0.0


def _box_pieces(box, crit_angles) -> list[_Piece]:
    if isinstance(box, Rect):
        c = [complex(box.x1, box.y1), complex(box.x2, box.y1), complex(box.x2, box.y2), complex(box.x1, box.y2)]
        return [_Piece("seg", c[i], c[(i + 1) % 4]) for i in range(4)]
    c0 = box.center
    pol = lambda r, a: c0 + r * cmath.exp(1j * a)  # noqa: E731
    pieces = [_Piece("seg", pol(box.r1, box.a1), pol(box.r2, box.a1))]
    pieces += _arc_pieces(c0, box.r2, box.a1, box.a2, crit_angles)
    pieces.append(_Piece("seg", pol(box.r2, box.a2), pol(box.r1, box.a2)))
    if box.r1 > 0:
        pieces += _arc_pieces(c0, box.r1, box.a2, box.a1, crit_angles)
    return pieces


def _arc_pieces(c0, r, a_from, a_to, crit_angles) -> list[_Piece]:
    lo, hi = min(a_from, a_to), max(a_from, a_to)
    cuts = [lo]
    for t in crit_angles:
        for shift in (-TWO_PI, 0.0, TWO_PI):
            s = t + shift
            if lo + 1e-12 < s < hi - 1e-12:
                cuts.append(s)
    cuts = sorted(cuts) + [hi]
    if a_from > a_to:
        cuts = cuts[::-1]
    return [_Piece("arc", c0 + r * cmath.exp(1j * x), c0 + r * cmath.exp(1j * y), x, y)
            for x, y in zip(cuts[:-1], cuts[1:])]


def _march_piece(sol: Solution, pc: _Piece, start: OdeState, forward: bool):
    if pc.kind == "seg":
        target = pc.zb if forward else pc.za
        return march_segment(sol.p, start, target, track_phase=True, order=sol.order)
    a0, a1 = (pc.aa, pc.ab) if forward else (pc.ab, pc.aa)
    return march_arc(sol.p, start, sol.center, a0, a1, track_phase=True, order=sol.order)


def _split(pc: _Piece, center: complex) -> tuple[_Piece, _Piece]:
    if pc.kind == "seg":
        m = 0.5 * (pc.za + pc.zb)
        return _Piece("seg", pc.za, m), _Piece("seg", m, pc.zb)
    am = 0.5 * (pc.aa + pc.ab)
    zm = center + abs(pc.za - center) * cmath.exp(1j * am)
    return _Piece("arc", pc.za, zm, pc.aa, am), _Piece("arc", zm, pc.zb, am, pc.ab)


def _rel_diff(a: OdeState, b: OdeState) -> tuple[float, float]:
    """Relative difference of f and the angle between the two values."""
    scale = math.exp(b.log_scale - a.log_scale)
    fb = b.f * scale
    if a.f == 0 or fb == 0:
        return math.inf, 0.0
    return abs(fb - a.f) / abs(a.f), cmath.phase(a.f / fb)


def _piece_phase(sol: Solution, pc: _Piece, min_dist: float, depth: int = 0) -> float:
    """Change of arg f from pc.za to pc.zb."""
    sa, sb = sol.state_at(pc.za), sol.state_at(pc.zb)
    forward = sa.log_abs_f <= sb.log_abs_f
    start, goal = (sa, sb) if forward else (sb, sa)
    tr = _march_piece(sol, pc, start, forward)
    if tr.status == NEAR_ZERO or tr.min_dist < min_dist:
        raise BoundaryTooClose(f"contour passes within {tr.min_dist:.2e} of a zero")
    if tr.status != OK:
        raise ZeroLocationError(f"edge integration failed (status {tr.status})")
    rel, corr = _rel_diff(goal, tr.end)
    if rel > JUNCTION_RTOL:
        if depth >= 8:
            raise ZeroLocationError(f"edge values inconsistent (relative mismatch {rel:.2e})")
        p1, p2 = _split(pc, sol.center)
        return _piece_phase(sol, p1, min_dist, depth + 1) + _piece_phase(sol, p2, min_dist, depth + 1)
    inc = tr.phase + corr
    return inc if forward else -inc


def _crit_angles(sol: Solution) -> list[float]:
    return list(sol.dc.theta)


def winding_number(sol: Solution, box, min_dist_fraction: float = 1e-6) -> int:
    """Number of zeros inside ``box`` (PolarBox about sol.center, or Rect)."""
    if isinstance(box, PolarBox) and abs(box.center - sol.center) > 1e-12 * max(1.0, abs(sol.center)):
        raise ValueError("polar boxes must be centred at -c")
    min_dist = min_dist_fraction * box.size
    total = sum(_piece_phase(sol, pc, min_dist) for pc in _box_pieces(box, _crit_angles(sol)))
    k = total / TWO_PI
    if abs(k - round(k)) > 0.05:
        raise ZeroLocationError(f"winding sum {k:.4f} is not an integer")
    return int(round(k))


def _jittered(box, attempt: int):
    if attempt == 0:
        return box
    d = JITTER_FRACTION * box.size * attempt
    if isinstance(box, Rect):
        return box.shifted(complex(d, 0.7 * d))
    return PolarBox(box.center, max(0.0, box.r1 - d) if box.r1 > 0 else 0.0, box.r2 + d,
                    box.a1 - d / max(box.r2, 1.0), box.a2 + d / max(box.r2, 1.0))


def robust_winding(sol: Solution, box) -> tuple[int, object]:
    """Winding number, jittering the box away from boundary zeros (up to 5 retries)."""
    last = None
    for attempt in range(JITTER_RETRIES + 1):
        b = _jittered(box, attempt)
        try:
            return winding_number(sol, b), b
        except BoundaryTooClose as exc:
            last = exc
    raise ZeroLocationError(f"boundary too close to zero after {JITTER_RETRIES} jitters: {last}")


# -- zero location ---------------------------------------------------------------------

@dataclass
class ZeroRecord:
    location: complex
    winding: int
    box: object
    nearest_j: int
    dist_to_translate: float
    in_lambda: bool
    refined: bool = True
    residual: float = 0.0

    @property
    def r(self) -> float:
        return abs(self.location)


@dataclass
class LambdaParams:
    C: float = DEFAULTS.lambda_C
    R: float | None = None  # default |mu| R_min

    def radius(self, dc: DerivedConstants) -> float:
        return abs(dc.mu) * dc.R_min if self.R is None else self.R


def newton_refine(sol: Solution, z: complex, max_iter: int = 60) -> tuple[complex, OdeState, bool]:
    st = sol.state_at(z)
    for _ in range(max_iter):
        if st.fp == 0:
            return z, st, False
        dz = -st.f / st.fp
        if abs(dz) <= 1e-14 * max(1.0, abs(z)):
            return z, st, True
        tr = march_segment(sol.p, st, z + dz, order=sol.order)
        if not tr.ok:
            return z, st, False
        z, st = z + dz, tr.end.normalized()
    return z, st, abs(st.f / st.fp) <= 1e-12 * max(1.0, abs(z)) if st.fp != 0 else False


def _record(sol: Solution, z: complex, st: OdeState, box, lam: LambdaParams, refined: bool,
            winding: int = 1) -> ZeroRecord:
    dc = sol.dc
    j = nearest_translate(z, dc)
    res = abs(st.f) / max(abs(st.fp) * box.size, 1e-300) if st.fp != 0 else math.inf
    return ZeroRecord(location=complex(z), winding=winding, box=box, nearest_j=j,
                      dist_to_translate=float(distance_to_translate(z, dc, j)),
                      in_lambda=lambda_membership(z, j, dc, lam.C, lam.radius(dc)),
                      refined=refined, residual=float(res))


def _children(box):
    if isinstance(box, Rect):
        xm, ym = 0.5 * (box.x1 + box.x2), 0.5 * (box.y1 + box.y2)
        if box.x2 - box.x1 >= box.y2 - box.y1:
            return [Rect(box.x1, xm, box.y1, box.y2), Rect(xm, box.x2, box.y1, box.y2)]
        return [Rect(box.x1, box.x2, box.y1, ym), Rect(box.x1, box.x2, ym, box.y2)]
    rm = 0.5 * (box.r1 + box.r2)
    if box.r2 - box.r1 >= rm * (box.a2 - box.a1):
        return [PolarBox(box.center, box.r1, rm, box.a1, box.a2),
                PolarBox(box.center, rm, box.r2, box.a1, box.a2)]
    am = 0.5 * (box.a1 + box.a2)
    return [PolarBox(box.center, box.r1, box.r2, box.a1, am),
            PolarBox(box.center, box.r1, box.r2, am, box.a2)]


def _children_jittered(box, attempt: int):
    kids = _children(box)
    if attempt == 0:
        return kids
    t = 0.5 + JITTER_FRACTION * attempt * (1 if attempt % 2 else -1) * 10
    if isinstance(box, Rect):
        if box.x2 - box.x1 >= box.y2 - box.y1:
            xm = box.x1 + t * (box.x2 - box.x1)
            return [Rect(box.x1, xm, box.y1, box.y2), Rect(xm, box.x2, box.y1, box.y2)]
        ym = box.y1 + t * (box.y2 - box.y1)
        return [Rect(box.x1, box.x2, box.y1, ym), Rect(box.x1, box.x2, ym, box.y2)]
    if kids[0].a1 == box.a1 and kids[0].a2 == box.a2:
        rm = box.r1 + t * (box.r2 - box.r1)
        return [PolarBox(box.center, box.r1, rm, box.a1, box.a2), PolarBox(box.center, rm, box.r2, box.a1, box.a2)]
    am = box.a1 + t * (box.a2 - box.a1)
    return [PolarBox(box.center, box.r1, box.r2, box.a1, am), PolarBox(box.center, box.r1, box.r2, am, box.a2)]


def locate_zeros(sol: Solution, region, max_depth: int = 40, lam: LambdaParams | None = None) -> list[ZeroRecord]:
    """All zeros in ``region`` by recursive subdivision and Newton refinement."""
    lam = lam or LambdaParams()
    count, region = robust_winding(sol, region)
    records: list[ZeroRecord] = []
    stack = [(region, count, 0)]
    while stack:
        box, k, depth = stack.pop()
        if k == 0:
            continue
        if k < 0:
            raise ZeroLocationError(f"negative winding {k} (poles are impossible)")
        if k == 1:
            z, st, ok = newton_refine(sol, box.mid)
            if ok and box.contains(z, slack=1e-9 * box.size):
                records.append(_record(sol, z, st, box, lam, True))
                continue
        if depth >= max_depth:
            # unresolved cluster: one flagged record carrying the box's winding
            z = box.mid
            records.append(_record(sol, z, sol.state_at(z), box, lam, False, winding=k))
            continue
        for attempt in range(JITTER_RETRIES + 1):
            kids = _children_jittered(box, attempt)
            try:
                counts = [winding_number(sol, c) for c in kids]
                break
            except BoundaryTooClose:
                continue
        else:
            raise ZeroLocationError("could not split box away from boundary zeros")
        if sum(counts) != k:
            raise ZeroLocationError(f"child windings {counts} do not add up to {k}")
        stack.extend((c, ck, depth + 1) for c, ck in zip(kids, counts))
    return _dedupe(records)


def _dedupe(records: list[ZeroRecord]) -> list[ZeroRecord]:
    out: list[ZeroRecord] = []
    for rec in sorted(records, key=lambda r: (round(r.location.real, 9), round(r.location.imag, 9))):
        if out and abs(out[-1].location - rec.location) <= 1e-9 * max(1.0, abs(rec.location)) and rec.refined:
            continue
        out.append(rec)
    return out


def wedge(sol: Solution, j: int, r_max: float, r_min: float = 0.0) -> PolarBox:
    half = sol.half_sector
    return PolarBox(sol.center, r_min, r_max, sol.dc.theta[j] - half, sol.dc.theta[j] + half)


def zero_atlas(sol: Solution, r_max: float, lam: LambdaParams | None = None,
               max_depth: int = 40, threads: int | None = None) -> list[ZeroRecord]:
    """Zeros with |z + c| <= r_max, wedge by wedge around each critical translate."""
    n2 = sol.dc.n + 2
    threads = worker_count() if threads is None else threads
    sol.center_state  # computed once, shared by the forks

    def task(j):
        return locate_zeros(sol.fork(), wedge(sol, j, r_max), max_depth=max_depth, lam=lam)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(task, range(n2)))
    else:
        parts = [task(j) for j in range(n2)]
    merged = [rec for part in parts for rec in part]
    return sorted(_dedupe(merged), key=lambda r: (abs(r.location), cmath.phase(r.location)))


# -- counting ---------------------------------------------------------------------------

@dataclass
class CountingReport:
    j: int
    radii: list[float]
    n_of_r: list[int]
    N_of_r: list[float]
    predicted_n: list[float]
    predicted_N: list[float]
    C: float
    R: float
    empirical_C: float
    N_convention: str = "N(r) = sum over counted zeros of log(r/|z|), exact for the step function n(t)"

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("j", "radii", "n_of_r", "N_of_r", "predicted_n",
                                              "predicted_N", "C", "R", "empirical_C", "N_convention")}


def predicted_counts(dc: DerivedConstants, r: float) -> tuple[float, float]:
    base = dc.sqrt_abs_pn * r ** dc.q / math.pi
    return base / dc.q, base / dc.q ** 2


def counting_function(zeros: list[ZeroRecord], dc: DerivedConstants, j: int, radii,
                      lam: LambdaParams | None = None) -> CountingReport:
    lam = lam or LambdaParams()
    R = lam.radius(dc)
    # an unresolved record stands for `winding` zeros
    mods = sorted(abs(z.location) for z in zeros for _ in range(z.winding)
                  if nearest_translate(z.location, dc) == j
                  and lambda_membership(z.location, j, dc, lam.C, R))
    n_list, N_list, pn, pN = [], [], [], []
    for r in radii:
        inside = [m for m in mods if m <= r]
        n_list.append(len(inside))
        N_list.append(float(sum(math.log(r / m) for m in inside if m > 0)))
        a, b = predicted_counts(dc, r)
        pn.append(a)
        pN.append(b)
    return CountingReport(j=j, radii=[float(r) for r in radii], n_of_r=n_list, N_of_r=N_list,
                          predicted_n=pn, predicted_N=pN, C=lam.C, R=R,
                          empirical_C=empirical_lambda_C([z for z in zeros if z.nearest_j == j], dc, R))


def empirical_lambda_C(zeros: list[ZeroRecord], dc: DerivedConstants, R: float) -> float:
    """Smallest C for which every zero with |z + c| > R lies in its Lambda_{j,c}."""
    worst = 0.0
    for z in zeros:
        w = z.location + dc.c
        r = abs(w)
        if r <= R:
            continue
        off = abs(wrap_angle(cmath.phase(w) - dc.theta[z.nearest_j]))
        worst = max(worst, off / e_n(r, dc.n))
    return worst


# -- ray classification -------------------------------------------------------------------

@dataclass
class RayData:
    angle: float
    proxy_min: float
    proxy_max: float
    noise: float
    tag: str


@dataclass
class RayClassification:
    sector_tags: list[str]  # sector j = (theta_{j-1}, theta_j)
    ray_tags: list[str]  # critical ray theta_j
    rays: list[list[RayData]]
    zero_counts: list[list[int]]  # per critical ray, counts in W_j(eps) at r/4, r/2, r
    epsilon: float
    r_max: float
    notes: list[str] = field(default_factory=list)

    @property
    def uniform(self) -> bool:
        return all(len({rd.tag for rd in rs}) == 1 for rs in self.rays)

    @property
    def adjacent_decay(self) -> bool:
        m = len(self.sector_tags)
        return any(self.sector_tags[k] == "decay" and self.sector_tags[(k + 1) % m] == "decay" for k in range(m))

    @property
    def inconclusive(self) -> int:
        return sum(t == "inconclusive" for t in self.sector_tags) + sum(t == "inconclusive" for t in self.ray_tags)


def _ray_tag(values: np.ndarray, margin: float = 10.0) -> tuple[str, float, float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    noise = hi - lo + 1e-12
    if lo > margin * noise:
        return "blow_up", lo, hi, noise
    if hi < -margin * noise:
        return "decay", lo, hi, noise
    return "inconclusive", lo, hi, noise


def shortage_epsilon(n: int) -> float:
    """One third of the sector half-angle."""
    return math.pi / (n + 2) / 3


def classify_rays(sol: Solution, r_max: float, rays_per_sector: int = 3,
                  samples: int = 11) -> RayClassification:
    dc = sol.dc
    n2 = dc.n + 2
    q = dc.q
    radii = np.linspace(0.9 * r_max, r_max, samples)
    # remove the arbitrary normalisation: measure growth relative to the size of (f, f') at -c
    cs = sol.center_state
    base = math.log(abs(cs.f) + abs(cs.fp)) + cs.log_scale
    sector_tags, rays = [], []
    for k in range(n2):
        lo = dc.theta[(k - 1) % n2] - (TWO_PI if k == 0 else 0.0)
        data = []
        for i in range(rays_per_sector):
            a = lo + TWO_PI / n2 * (i + 1) / (rays_per_sector + 1)
            vals = (sol.log_abs_profile(a, radii) - base) / radii ** q
            tag, mn, mx, noise = _ray_tag(vals)
            data.append(RayData(a, mn, mx, noise, tag))
        tags = {d.tag for d in data}
        sector_tags.append(tags.pop() if len(tags) == 1 else "inconclusive")
        rays.append(data)
    eps = shortage_epsilon(dc.n)
    R = abs(dc.mu) * dc.R_min
    ray_tags, counts = [], []
    for j in range(n2):
        cs = []
        for rr in (r_max / 4, r_max / 2, r_max):
            box = PolarBox(sol.center, R, rr, dc.theta[j] - eps, dc.theta[j] + eps)
            cs.append(robust_winding(sol, box)[0])
        counts.append(cs)
        if cs[0] < cs[1] < cs[2]:
            ray_tags.append("non_shortage")
        elif cs[1] == cs[2]:
            ray_tags.append("shortage")
        else:
            ray_tags.append("inconclusive")
    return RayClassification(sector_tags, ray_tags, rays, counts, eps, r_max)


def indicator(dc: DerivedConstants, theta: float, sign: int = 1) -> float:
    """(2/(n+2)) |p_n|^{1/2} |sin(q theta + arg p_n / 2)| with the requested sign."""
    arg_pn = -(dc.n + 2) * cmath.phase(dc.mu)
    return sign * 2 / (dc.n + 2) * dc.sqrt_abs_pn * abs(math.sin(dc.q * theta + arg_pn / 2))


# -- one zero per square ------------------------------------------------------------------

@dataclass(frozen=True)
class OscillationWindow:
    gamma: float
    sigma0: float
    z0: complex  # centre of the square Q_{0, gamma}
    alpha: float  # sup of the tail integral over the sampled part of H0

    @property
    def level(self) -> float:
        return 1 + math.sin(self.gamma) / math.cosh(self.gamma)


def oscillation_window(pf: PerturbationField, gamma: float, y0: float = 0.0,
                       sigma0: float | None = None, x0: float | None = None,
                       y_samples=None) -> OscillationWindow:
    """Half-plane H0 = {Re z > sigma0} on which exp(tail) < 1 + sin(gamma)/cosh(gamma)."""
    if not 0 < gamma < math.pi / 2:
        raise ValueError("precondition: gamma must lie in (0, pi/2)")
    if y_samples is None:
        y_samples = (y0 - 3.0, y0 - gamma, y0, y0 + gamma, y0 + 3.0)
    if sigma0 is None:
        sigma0 = max(pf.R, half_plane_edge(pf, gamma, (0.0,) + tuple(y_samples)))
    alpha = max(tail_integral(pf, complex(sigma0 * (1 + 1e-12), y)) for y in (0.0,) + tuple(y_samples))
    level = 1 + math.sin(gamma) / math.cosh(gamma)
    if not math.exp(alpha) < level:
        raise ValueError(f"precondition: exp(tail) = {math.exp(alpha):.4f} is not below "
                         f"1 + sin(gamma)/cosh(gamma) = {level:.4f} on H0")
    if x0 is None:
        x0 = sigma0 + 0.5 * math.pi
    if not (sigma0 + gamma < x0 <= sigma0 + math.pi - gamma):
        raise ValueError("x0 must satisfy sigma0 + gamma < x0 <= sigma0 + pi - gamma")
    return OscillationWindow(gamma=gamma, sigma0=sigma0, z0=complex(x0, y0), alpha=alpha)


def _phase_sum(values: np.ndarray) -> float:
    v = np.concatenate([values, values[:1]])
    d = np.angle(v[1:] / v[:-1])
    if np.any(np.abs(d) > math.pi / 2):
        raise BoundaryTooClose("phase step above pi/2; refine the boundary sampling")
    return float(d.sum())


@dataclass
class SquareReport:
    K: int
    per_square: list[int]
    rectangle_count: int
    expected_rectangle: int
    rho: float
    n_rho: int
    ratio: float
    straddlers: list[complex]
    passed: bool


def square_lemma_check(pf: PerturbationField, window: OscillationWindow, K: int = 100,
                       per_edge: int = 48, rho: float | None = None, Y: float = 3.0,
                       tol: float = 1e-12) -> SquareReport:
    """One zero per square Q_{k,gamma}, none elsewhere in the probed part of H0, n(rho)/(rho/pi)."""
    g, z0 = window.gamma, window.z0
    x0, y0 = z0.real, z0.imag
    rho = 100 * math.pi if rho is None else rho
    t = np.linspace(-g, g, per_edge + 1)[:-1]
    ks = np.arange(K + 1)

    def S(points):
        pts = np.asarray(points, dtype=complex)
        sol = successive_approximation(pf, "sin", pts.ravel(), z0=z0, tol=tol)
        return sol.w.reshape(pts.shape), sol.dw.reshape(pts.shape)

    # square boundaries, counter-clockwise from the lower-left corner
    cx = x0 + ks[:, None] * math.pi
    bottom = cx + t[None, :] + 1j * (y0 - g)
    right = cx + g + 1j * (y0 + t[None, :])
    top = cx - t[None, :] + 1j * (y0 + g)
    left = cx - g + 1j * (y0 - t[None, :])
    ring = np.concatenate([bottom, right, top, left], axis=1)
    vals, _ = S(ring)
    per_square = [int(round(_phase_sum(vals[k]) / TWO_PI)) for k in range(K + 1)]

    # a rectangle over all squares: x in [sigma0, x0 + K pi + pi/2], |y - y0| <= Y
    xa, xb = window.sigma0 * (1 + 1e-9), x0 + K * math.pi + math.pi / 2
    nx = int(math.ceil((xb - xa) * 12)) + 1
    ny = int(math.ceil(2 * Y * 12)) + 1
    xs = np.linspace(xa, xb, nx)
    ys = np.linspace(y0 - Y, y0 + Y, ny)
    rect = np.concatenate([xs[:-1] + 1j * ys[0], xb + 1j * ys[:-1], xs[::-1][:-1] + 1j * ys[-1],
                           xa + 1j * ys[::-1][:-1]])
    rvals, _ = S(rect)
    rect_count = int(round(_phase_sum(rvals) / TWO_PI))

    # n(rho): squares wholly inside/outside |z| <= rho are decided by geometry; straddlers by Newton
    n_rho = 0
    straddlers = []
    for k in range(K + 1):
        c = complex(x0 + k * math.pi, y0)
        near = max(0.0, abs(c) - g * math.sqrt(2))
        far = abs(c) + g * math.sqrt(2)
        if far <= rho:
            n_rho += 1
        elif near <= rho:
            z = c
            for _ in range(40):
                w, dw = S([z])
                dz = -w[0] / dw[0]
                z += dz
                if abs(dz) < 1e-13 * abs(z):
                    break
            straddlers.append(z)
            n_rho += abs(z) <= rho
    ratio = n_rho / (rho / math.pi)
    passed = all(c == 1 for c in per_square) and rect_count == K + 1
    return SquareReport(K=K, per_square=per_square, rectangle_count=rect_count, expected_rectangle=K + 1,
                        rho=rho, n_rho=n_rho, ratio=ratio, straddlers=straddlers, passed=passed)
