"""hille-atlas command line.

Exit codes: 0 success, 1 a `verify` check failed, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .config import DEFAULTS, SCHEMA_VERSION
from .equation import EquationError, derive_constants, e_n, normalize, parse_poly
from .liouville import LiouvilleContext
from .svg import emit_svg
from .volterra import asymptotic_pair, inverse_square_field
from .zeros import (LambdaParams, classify_rays, counting_function, default_decay_sector,
                    random_solution, subdominant_solution, zero_atlas)

COMMANDS = ("rays", "normalize", "liouville", "asymptote", "zeros", "classify", "verify")


class UsageError(ValueError):
    pass


def cpair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hille-atlas", description="Zeros and asymptotics of f'' + P(z) f = 0.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--poly", required=True, help='coefficients by increasing power, e.g. "[[0,0],[1,0]]"')
        p.add_argument("--rmax", type=float, default=None)
        p.add_argument("--rmin", type=float, default=None)
        p.add_argument("--tol", type=float, default=None, help="quadrature/iteration tolerance (liouville, asymptote)")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=None, help="use a random solution with this seed")
        p.add_argument("--sector", type=int, default=None,
                       help="sector index (liouville, asymptote) or decay sector of the solution")
        p.add_argument("--format", choices=("json", "csv", "svg"), default=None)
        p.add_argument("--C", type=float, default=DEFAULTS.lambda_C, help="Lambda half-width constant")
    return ap


def _check(args) -> None:
    for name in ("rmax", "rmin", "tol"):
        v = getattr(args, name)
        if v is not None and not (math.isfinite(v) and v > 0):
            raise UsageError(f"--{name} must be a positive number")
    if args.rmin is not None and args.rmax is not None and args.rmin >= args.rmax:
        raise UsageError("--rmin must be below --rmax")
    if args.C <= 0:
        raise UsageError("--C must be positive")


def _header(args, spec) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": args.command,
            "polynomial": spec.to_json(), "config": DEFAULTS.as_dict(),
            "arguments": {k: getattr(args, k) for k in ("rmax", "rmin", "tol", "seed", "sector", "C")}}


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _solution(args, spec, r_max: float):
    dc = derive_constants(spec)
    if args.seed is not None:
        return random_solution(spec, np.random.default_rng(args.seed)), {"kind": "random", "seed": args.seed}
    k = default_decay_sector(dc) if args.sector is None else args.sector
    if not 0 <= k <= dc.n + 1:
        raise UsageError(f"--sector must lie in 0..{dc.n + 1}")
    r_far = DEFAULTS.far_factor * r_max
    return subdominant_solution(spec, k, r_far), {"kind": "decaying", "decay_sector": k, "anchor_radius": r_far}


# -- commands ----------------------------------------------------------------------------

def cmd_rays(args, spec):
    dc = derive_constants(spec)
    rep = _header(args, spec)
    rep.update(n=dc.n, theta=list(dc.theta), psi=list(dc.psi), c=cpair(dc.c), q=dc.q, d=cpair(dc.d),
               mu=cpair(dc.mu), M0=dc.M0, R_min=dc.R_min)
    return rep, None


def cmd_normalize(args, spec):
    Q = normalize(spec)
    rep = _header(args, spec)
    rep.update(n=Q.n, mu=cpair(Q.mu), c=cpair(Q.c), Q=[cpair(x) for x in Q.coeffs], M0=Q.M0, R_min=Q.R_min)
    return rep, None


def cmd_liouville(args, spec):
    Q = normalize(spec)
    j = args.sector or 0
    if not 0 <= j <= Q.n + 1:
        raise UsageError(f"--sector must lie in 0..{Q.n + 1}")
    ctx = LiouvilleContext(Q, j)
    r_lo = args.rmin or 5 * ctx.R
    r_hi = args.rmax or 1000 * ctx.R
    rtol = args.tol or DEFAULTS.liouville_rtol
    radii = np.geomspace(r_lo, r_hi, 25)
    rows = []
    for off in (-0.9, 0.0, 0.9):
        zs = radii * np.exp(1j * (ctx.psi + off * ctx.half_width))
        zq, err = ctx.forward_many(zs, rtol=rtol)
        zser, K, tail = ctx.series_many(zs, tol=max(rtol, DEFAULTS.series_tail_tol))
        for z, a, b, k, t in zip(zs, zser, zq, K, tail):
            rows.append({"z": cpair(z), "zeta_series": cpair(a), "zeta_quadrature": cpair(b),
                         "rel_diff": abs(a - b) / abs(b), "K": cpair(k),
                         "K_over_e_n": abs(k) / e_n(abs(z), Q.n), "tail_bound": float(t)})
    rep = _header(args, spec)
    rep.update(sector=j, R=ctx.R, R_tilde=ctx.R_tilde, rows=rows,
               max_rel_diff=max(r["rel_diff"] for r in rows))
    table = _csv(["z_re", "z_im", "zeta_re", "zeta_im", "rel_diff", "K_abs", "K_over_e_n"],
                 [[*r["z"], *r["zeta_series"], r["rel_diff"], math.hypot(*r["K"]), r["K_over_e_n"]] for r in rows])
    return rep, table


def cmd_asymptote(args, spec):
    """T(zeta) zeta^2 along the sector bisector, then E+ and E- for the inverse-square model."""
    Q = normalize(spec)
    j = args.sector or 0
    if not 0 <= j <= Q.n + 1:
        raise UsageError(f"--sector must lie in 0..{Q.n + 1}")
    ctx = LiouvilleContext(Q, j)
    zs = np.geomspace(5 * ctx.R, 1e4 * ctx.R, 40) * np.exp(1j * ctx.psi)
    zeta, _, _ = ctx.series_many(zs)
    T = np.asarray(ctx.perturbation_T(zs))
    plateau = T * zeta ** 2
    beta = float(-plateau[-1].real)
    x_lo = args.rmin or 10.0
    x_hi = args.rmax or 100.0
    tol = args.tol or DEFAULTS.volterra_tol
    pf = inverse_square_field(beta, "plus")
    grid = np.linspace(x_lo, x_hi, 19)
    pair = asymptotic_pair(pf, grid, tol=tol)
    # on the real axis |e^{+-ix}| = 1, so v_bounds bounds |E -+ e^{+-ix}| directly
    rows = [{"x": float(x.real), "E_plus": cpair(ep), "E_minus": cpair(em), "bound": float(b)}
            for x, ep, em, b in zip(pair.z, pair.E_plus, pair.E_minus, pair.v_bounds)]
    rep = _header(args, spec)
    rep.update(sector=j, T_zeta2=[cpair(v) for v in plateau], zeta=[cpair(v) for v in zeta],
               beta=beta, converged=pair.converged, rows=rows)
    table = _csv(["x", "E_plus_re", "E_plus_im", "E_minus_re", "E_minus_im", "bound"],
                 [[r["x"], *r["E_plus"], *r["E_minus"], r["bound"]] for r in rows])
    return rep, table


def _zero_rows(zs):
    return [[z.location.real, z.location.imag, z.r, z.nearest_j, z.dist_to_translate,
             int(z.in_lambda), z.winding, int(z.refined)] for z in zs]


ZERO_HEADER = ["re", "im", "modulus", "nearest_j", "dist_to_translate", "in_lambda", "winding", "refined"]


def cmd_zeros(args, spec):
    r_max = args.rmax or DEFAULTS.r_max
    sol, info = _solution(args, spec, r_max)
    lam = LambdaParams(C=args.C)
    zs = zero_atlas(sol, r_max, lam=lam)
    rep = _header(args, spec)
    rep.update(solution=info, r_max=r_max, count=len(zs),
               zeros=[{"z": cpair(z.location), "nearest_j": z.nearest_j, "dist_to_translate": z.dist_to_translate,
                       "in_lambda": z.in_lambda, "winding": z.winding, "refined": z.refined} for z in zs])
    rep["_svg"] = emit_svg(zs, sol.dc, C=lam.C, r_max=r_max)
    return rep, _csv(ZERO_HEADER, _zero_rows(zs))


def cmd_classify(args, spec):
    r_max = args.rmax or DEFAULTS.r_max
    sol, info = _solution(args, spec, r_max)
    rc = classify_rays(sol, r_max)
    rep = _header(args, spec)
    rep.update(solution=info, r_max=r_max, sector_tags=rc.sector_tags, ray_tags=rc.ray_tags,
               zero_counts=rc.zero_counts, epsilon=rc.epsilon, uniform=rc.uniform,
               adjacent_decay=rc.adjacent_decay,
               rays=[[{"angle": d.angle, "proxy_min": d.proxy_min, "proxy_max": d.proxy_max, "tag": d.tag}
                      for d in rs] for rs in rc.rays])
    rows = [["sector", k, t] for k, t in enumerate(rc.sector_tags)] + \
           [["ray", j, t] for j, t in enumerate(rc.ray_tags)]
    return rep, _csv(["kind", "index", "tag"], rows)


def cmd_verify(args, spec):
    r_max = args.rmax or DEFAULTS.r_max
    sol, info = _solution(args, spec, r_max)
    dc = sol.dc
    lam = LambdaParams(C=args.C)
    zs = zero_atlas(sol, r_max, lam=lam)
    rc = classify_rays(sol, r_max)
    checks = []

    def check(name, ok, **detail):
        checks.append({"name": name, "passed": bool(ok), **detail})

    rtol = DEFAULTS.count_rtol
    for j, tag in enumerate(rc.ray_tags):
        if tag != "non_shortage":
            continue
        radii = [r_max / 4, r_max / 2, r_max]
        cr = counting_function(zs, dc, j, radii, lam)
        n, pn = cr.n_of_r[-1], cr.predicted_n[-1]
        check(f"n(r) on translate {j}", abs(n / pn - 1) <= rtol, measured=cr.n_of_r,
              predicted=cr.predicted_n, ratio=n / pn)
        ratio = cr.N_of_r[-1] / n if n else float("nan")
        check(f"N(r)/n(r) on translate {j}", n > 0 and abs(ratio * dc.q - 1) <= rtol,
              ratio=ratio, expected=1 / dc.q, empirical_C=cr.empirical_C)
    check("sectors classify uniformly", rc.uniform and "inconclusive" not in rc.sector_tags,
          sector_tags=rc.sector_tags)
    check("no adjacent decay sectors", not rc.adjacent_decay)
    n2 = dc.n + 2
    for k, tag in enumerate(rc.sector_tags):
        if tag == "decay":
            bounding = [rc.ray_tags[(k - 1) % n2], rc.ray_tags[k]]
            check(f"decay sector {k} bounded by shortage rays", all(t == "shortage" for t in bounding),
                  bounding=bounding)
    rep = _header(args, spec)
    rep.update(solution=info, r_max=r_max, zeros=len(zs), checks=checks,
               passed=all(c["passed"] for c in checks))
    rows = [[c["name"], "pass" if c["passed"] else "FAIL"] for c in checks]
    return rep, _csv(["check", "result"], rows)


HANDLERS = {"rays": cmd_rays, "normalize": cmd_normalize, "liouville": cmd_liouville,
            "asymptote": cmd_asymptote, "zeros": cmd_zeros, "classify": cmd_classify, "verify": cmd_verify}


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def run(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 2
    try:
        _check(args)
        spec = parse_poly(args.poly)
        rep, table = HANDLERS[args.command](args, spec)
    except (EquationError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    svg = rep.pop("_svg", None)
    fmt = args.format or ("csv" if args.command == "zeros" else "json")
    if fmt == "svg":
        if svg is None:
            print("error: --format svg is only available for `zeros`", file=sys.stderr)
            return 2
        _emit(svg, args.out)
    elif fmt == "csv":
        if table is None:
            print(f"error: --format csv is not available for `{args.command}`", file=sys.stderr)
            return 2
        _emit(table, args.out)
    else:
        _emit(json.dumps(rep, indent=2, sort_keys=True) + "\n", args.out)
    if args.command == "verify" and not rep["passed"]:
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
