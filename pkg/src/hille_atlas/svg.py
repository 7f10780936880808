"""Deterministic SVG atlas: critical translates, Lambda bands and zeros."""
from __future__ import annotations

import cmath
import math

import numpy as np

from .equation import DerivedConstants, e_n

WIDTH = 640


def _fmt(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def emit_svg(zeros, dc: DerivedConstants, C: float = 10.0, R: float | None = None,
             r_max: float | None = None, title: str = "zero atlas") -> str:
    """SVG 1.1 document; identical input gives byte-identical output."""
    R = abs(dc.mu) * dc.R_min if R is None else R
    center = -dc.c
    if r_max is None:
        r_max = max([abs(z.location - center) for z in zeros] + [4 * R, 1.0]) * 1.05
    half = 1.1 * r_max
    scale = WIDTH / (2 * half)

    def xy(z: complex) -> tuple[str, str]:
        w = z - center
        return _fmt((w.real + half) * scale), _fmt((half - w.imag) * scale)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{WIDTH}" '
        f'viewBox="0 0 {WIDTH} {WIDTH}">',
        f"<title>{title}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{WIDTH}" fill="white"/>',
    ]
    # coordinate axes through the origin of the z-plane
    ox, oy = xy(0j)
    out.append(f'<line x1="0" y1="{oy}" x2="{WIDTH}" y2="{oy}" stroke="#999" stroke-width="0.5"/>')
    out.append(f'<line x1="{ox}" y1="0" x2="{ox}" y2="{WIDTH}" stroke="#999" stroke-width="0.5"/>')

    half_sector = math.pi / (dc.n + 2)
    radii = np.linspace(R, r_max, 64) if r_max > R else np.array([])
    for j, t in enumerate(dc.theta):
        if radii.size:
            width = np.minimum(C * e_n(radii, dc.n), half_sector)
            upper = [center + r * cmath.exp(1j * (t + w)) for r, w in zip(radii, width)]
            lower = [center + r * cmath.exp(1j * (t - w)) for r, w in zip(radii, width)]
            pts = " ".join(",".join(xy(z)) for z in upper + lower[::-1])
            out.append(f'<polygon id="lambda-{j}" points="{pts}" fill="#9ecae1" fill-opacity="0.4" stroke="none"/>')
        x1, y1 = xy(center)
        x2, y2 = xy(center + r_max * cmath.exp(1j * t))
        out.append(f'<line id="translate-{j}" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
                   'stroke="#3182bd" stroke-width="1"/>')
    for z in sorted(zeros, key=lambda r: (r.location.real, r.location.imag)):
        cx, cy = xy(z.location)
        fill = "#de2d26" if z.in_lambda else "#fd8d3c"
        out.append(f'<circle cx="{cx}" cy="{cy}" r="2" fill="{fill}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
