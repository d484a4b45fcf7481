import xml.etree.ElementTree as ET

from refold import dissect, planar, polycube, render
from refold.geom import P
from refold.manifold import double_cover

SVG = "{http://www.w3.org/2000/svg}"
SQ = [P(0, 0), P(1, 0), P(1, 1), P(0, 1)]
RECT = [P(0, 0), P(2, 0), P(2, 0.5), P(0, 0.5)]


def _polygons(svg: str) -> list:
    return ET.fromstring(svg).findall(f".//{SVG}polygon")


def test_colours_are_stable():
    assert render.color_for("k3") == render.color_for("k3")
    assert render.color_for("k3") != render.color_for("k4")


def test_manifold_svg_has_one_polygon_per_face():
    assert len(_polygons(render.manifold_svg(double_cover(SQ)))) == 2


def test_pieces_svg_colour_matches_across_sides():
    pieces = dissect.common_dissection([SQ], [RECT])
    polys = _polygons(render.pieces_svg(pieces, [SQ], [RECT]))
    by_piece = {}
    for poly in polys:
        by_piece.setdefault(poly.find(f"{SVG}title").text, set()).add(poly.get("fill"))
    for pc in pieces:
        assert by_piece[pc.id] == {render.color_for(pc.id)}


def test_plan_svg_one_panel_per_state():
    pp = planar.plan_planar(planar.DoubleCover.of(SQ), planar.DoubleCover.of(RECT))
    svg = render.plan_svg(pp.plan, every=2)
    panels = ET.fromstring(svg).findall(f"{SVG}g")
    assert len(panels) == (len(pp.plan) + 2) // 2


def test_polycube_obj():
    pc = polycube.Polycube.make([(0, 0, 0)])
    assert render.polycube_obj(pc).count("\nf ") == 6
