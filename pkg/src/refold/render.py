"""SVG pictures of faces, dissections and plan states; OBJ for polycubes."""

from __future__ import annotations

import colorsys
import hashlib
from typing import Iterable, Sequence

from . import geom
from .geom import Point2

Panel = list[tuple[Sequence[Point2], str, str]]  # (ring, fill, label)


def color_for(key: str) -> str:
    """Stable pastel colour for an id."""
    h = int(hashlib.md5(key.encode()).hexdigest()[:8], 16) / 0xFFFFFFFF
    r, g, b = colorsys.hls_to_rgb(h, 0.75, 0.55)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def _bbox(rings: Iterable[Sequence[Point2]]) -> tuple[float, float, float, float]:
    xs, ys = [], []
    for r in rings:
        xs.extend(p[0] for p in r)
        ys.extend(p[1] for p in r)
    if not xs:
        return 0.0, 0.0, 1.0, 1.0
    return min(xs), min(ys), max(xs), max(ys)


def panels_svg(panels: Sequence[Panel], titles: Sequence[str] | None = None, size: float = 240.0,
               labels: bool = False) -> str:
    """Lay panels out left to right, each scaled into a ``size`` square."""
    pad = 12.0
    out = []
    for k, panel in enumerate(panels):
        x0, y0, x1, y1 = _bbox(r for r, _, _ in panel)
        s = (size - 2 * pad) / max(x1 - x0, y1 - y0, 1e-12)
        ox = k * size + pad
        out.append(f'<g transform="translate({ox:.3f},{pad:.3f})">')
        if titles:
            out.append(f'<text x="0" y="-2" font-size="10">{titles[k]}</text>')
        for ring, fill, label in panel:
            pts = " ".join(f"{(p[0] - x0) * s:.3f},{(y1 - p[1]) * s:.3f}" for p in ring)
            out.append(f'<polygon points="{pts}" fill="{fill}" fill-opacity="0.7" stroke="black" '
                       f'stroke-width="0.6"><title>{label}</title></polygon>')
            if labels:
                c = geom.centroid(ring)
                out.append(f'<text x="{(c[0] - x0) * s:.3f}" y="{(y1 - c[1]) * s:.3f}" font-size="7" '
                           f'text-anchor="middle">{label}</text>')
        out.append("</g>")
    w, h = size * max(1, len(panels)), size + pad
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" '
            f'viewBox="0 -{pad:.0f} {w:.0f} {h + pad:.0f}">\n' + "\n".join(out) + "\n</svg>\n")


def manifold_svg(m, labels: bool = True) -> str:
    """Each face in its own panel."""
    return panels_svg([[(f.ring, color_for(f.id), f.id)] for f in m.faces], [f.id for f in m.faces],
                      labels=labels)


def pieces_svg(pieces, faces_p, faces_q) -> str:
    """Pieces placed in P's faces (left panels) and Q's faces (right panels), coloured by piece id."""
    from .dissect import _faces

    panels, titles = [], []
    for side, faces in ((0, faces_p), (1, faces_q)):
        for fid, ring in _faces(faces):
            panel: Panel = [(ring, "#ffffff", fid)]
            panel += [(pc.placed(side), color_for(pc.id), pc.id) for pc in pieces if pc.faces[side] == fid]
            panels.append(panel)
            titles.append(f"{'PQ'[side]}:{fid}")
    return panels_svg(panels, titles)


def plan_svg(plan, face_tag: str | None = "top", every: int = 1) -> str:
    """Outline of one face per state of a plan (the top layer of a double cover by default)."""
    panels, titles = [], []
    for i, m in enumerate(plan.states()):
        if i % every:
            continue
        fs = [f for f in m.faces if face_tag is None or f.tag == face_tag] or list(m.faces)
        panels.append([(f.ring, color_for(f.tag or f.id), f.id) for f in fs])
        titles.append(f"state {i}")
    return panels_svg(panels, titles, size=160.0)


def polycube_obj(pc) -> str:
    from .polycube import to_obj

    return to_obj(pc)
