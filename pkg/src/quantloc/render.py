"""Plain SVG drawing of a design: cells, points, domain boundary and optional level-set ellipses."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .control import LyapunovCert
from .lloyd import QuantizerDesign

SIZE = 600


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ring_path(ring: np.ndarray, close: bool = True) -> str:
    head = f"M{_fmt(ring[0, 0])},{_fmt(-ring[0, 1])}"
    rest = "".join(f"L{_fmt(x)},{_fmt(-y)}" for x, y in ring[1:])
    return head + rest + ("Z" if close else "")


def _ellipse(cert: LyapunovCert, level: float, k: int = 180) -> np.ndarray:
    theta = 2.0 * math.pi * np.arange(k) / k
    U = np.column_stack([np.cos(theta), np.sin(theta)])
    C = np.linalg.cholesky(cert.P).T
    return math.sqrt(level) * np.linalg.solve(C, U.T).T


def render_svg(design: QuantizerDesign, cert: LyapunovCert | None = None,
               levels: dict | None = None, title: str | None = None) -> str:
    """SVG text for ``design``; ``levels`` maps labels (e.g. ``"R1"``) to Lyapunov levels.

    Every cell is one ``<path class="cell">`` and every point one
    ``<circle class="point">`` so the output can be checked structurally.
    """
    M = design.domain.M
    pad = 0.08 * M
    lo = -M - pad
    span = 2.0 * (M + pad)
    stroke = span / SIZE
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="{_fmt(lo)} {_fmt(lo)} {_fmt(span)} {_fmt(span)}">',
    ]
    if title:
        parts.append(f"<title>{escape(title)}</title>")
    parts.append(f'<g fill="#eef3fb" stroke="#4a6fa5" stroke-width="{_fmt(stroke)}" '
                 'fill-rule="evenodd">')
    circle_domain = design.domain.kind == "circle"
    for i, cell in enumerate(design.cells):
        if cell.is_empty:
            continue
        d = "".join(_ring_path(r, close=not circle_domain) for r in cell.rings)
        parts.append(f'<path class="cell" data-index="{i}" d="{d}"/>')
    parts.append("</g>")

    dom = design.domain
    boundary = []
    if dom.kind in ("disk", "circle", "annulus"):
        boundary.append(f'<circle class="domain" cx="0" cy="0" r="{_fmt(dom.M)}"/>')
    if dom.kind == "annulus":
        boundary.append(f'<circle class="domain" cx="0" cy="0" r="{_fmt(dom.m)}"/>')
    if dom.kind == "square":
        boundary.append(f'<rect class="domain" x="{_fmt(-dom.M)}" y="{_fmt(-dom.M)}" '
                        f'width="{_fmt(2 * dom.M)}" height="{_fmt(2 * dom.M)}"/>')
    if dom.kind == "polygon":
        boundary.append(f'<path class="domain" d="{_ring_path(np.asarray(dom.vertices))}"/>')
    parts.append(f'<g fill="none" stroke="#222" stroke-width="{_fmt(2 * stroke)}">')
    parts.extend(boundary)
    parts.append("</g>")

    if cert is not None and levels:
        parts.append(f'<g fill="none" stroke="#c0392b" stroke-width="{_fmt(1.5 * stroke)}" '
                     f'stroke-dasharray="{_fmt(6 * stroke)}">')
        for label, level in levels.items():
            if level is None or not level > 0:
                continue
            parts.append(f'<path class="level" data-label={quoteattr(str(label))} '
                         f'd="{_ring_path(_ellipse(cert, level))}"/>')
        parts.append("</g>")

    r = 2.5 * stroke
    parts.append('<g fill="#1b2a41">')
    for i, (x, y) in enumerate(design.points):
        parts.append(f'<circle class="point" data-index="{i}" cx="{_fmt(x)}" cy="{_fmt(-y)}" '
                     f'r="{_fmt(r)}"/>')
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
