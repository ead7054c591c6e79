"""SVG rendering of floorplans and mutual spaces."""

import json
import logging
import pathlib
from typing import Dict, Iterable, Tuple
from xml.etree import ElementTree as ET

from shapely.geometry import Polygon

from mutualspace.floorplan import Floorplan, SemanticLabel, from_model
from mutualspace.geometry import PolygonSet, Point2
from mutualspace.misc import PERSONAL_DIAMETER, G
from mutualspace.subspace import MutualSpace

logger = logging.getLogger(__name__)

SCALE = 100.0  # px per meter
MARGIN = 0.5  # m
WALL_WIDTH = 0.05  # m, drawn thickness of boundary walls
LABEL_COLORS = {
    SemanticLabel.FLOOR: "#f4f1ea",
    SemanticLabel.TABLE: "#c8a165",
    SemanticLabel.WALL: "#4d4d4d",
    SemanticLabel.CHAIR: "#6a8caf",
    SemanticLabel.OBSTACLE: "#b05b5b",
}
UNMATCHED_COLOR = "#9e9e9e"
SHARED_COLOR = "#ffffff"
HOST_USER_COLOR = "#222222"
CLIENT_COLORS = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02")


def client_color(index: int) -> str:
    return CLIENT_COLORS[index % len(CLIENT_COLORS)]


class _Canvas(object):
    """Maps plan meters to SVG pixels with y pointing up."""

    def __init__(self, bounds: Tuple[float, float, float, float]) -> None:
        minx, miny, maxx, maxy = bounds
        self.minx, self.maxy = minx - MARGIN, maxy + MARGIN
        width = (maxx - minx + 2 * MARGIN) * SCALE
        height = (maxy - miny + 2 * MARGIN) * SCALE
        self.root = ET.Element(
            "svg",
            {
                "xmlns": "http://www.w3.org/2000/svg",
                "width": _num(width),
                "height": _num(height),
                "viewBox": f"0 0 {_num(width)} {_num(height)}",
            },
        )

    def xy(self, x: float, y: float) -> Tuple[str, str]:
        return _num((x - self.minx) * SCALE), _num((self.maxy - y) * SCALE)

    def group(self, name: str) -> ET.Element:
        return ET.SubElement(self.root, "g", {"id": name})

    def polygon(self, parent: ET.Element, poly: Polygon, attrs: Dict[str, str]) -> ET.Element:
        points = " ".join(",".join(self.xy(x, y)) for x, y in poly.exterior.coords[:-1])
        return ET.SubElement(parent, "polygon", {"points": points, **attrs})

    def polygons(self, parent: ET.Element, shapes: Iterable[Polygon], attrs: Dict[str, str]) -> None:
        for poly in shapes:
            self.polygon(parent, poly, attrs)

    def line(self, parent: ET.Element, a: Point2, b: Point2, attrs: Dict[str, str]) -> ET.Element:
        (x1, y1), (x2, y2) = self.xy(a.x, a.y), self.xy(b.x, b.y)
        return ET.SubElement(parent, "line", {"x1": x1, "y1": y1, "x2": x2, "y2": y2, **attrs})

    def marker(self, parent: ET.Element, name: str, position: Point2, color: str) -> None:
        cx, cy = self.xy(position.x, position.y)
        radius = _num(PERSONAL_DIAMETER / 2 * SCALE)
        ET.SubElement(
            parent,
            "circle",
            {"class": "user", "cx": cx, "cy": cy, "r": radius, "fill": color, "fill-opacity": "0.35", "stroke": color},
        )
        label = ET.SubElement(
            parent,
            "text",
            {"x": cx, "y": cy, "text-anchor": "middle", "dominant-baseline": "central", "font-size": "14"},
        )
        label.text = name

    def to_bytes(self) -> bytes:
        ET.indent(self.root)
        return b'<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(self.root, encoding="utf-8") + b"\n"


def _num(value: float) -> str:
    text = f"{value:.3f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def _draw_plan(canvas: _Canvas, fp: Floorplan) -> None:
    plan = canvas.group("host")
    canvas.polygon(plan, fp.boundary, {"class": "boundary", "fill": LABEL_COLORS[SemanticLabel.FLOOR], "stroke": "#000000"})
    for region in fp.regions:
        canvas.polygon(plan, region.shape, {"class": region.label.value, "id": region.id, "fill": LABEL_COLORS[region.label]})


def render_floorplan(fp: Floorplan) -> bytes:
    canvas = _Canvas(fp.boundary.bounds)
    _draw_plan(canvas, fp)
    return canvas.to_bytes()


def render_mutual_space(space: MutualSpace) -> bytes:
    """Host plan, client footprints, unmatched area, subspaces, boundary walls and user markers."""
    host = from_model(space.host)
    bounds = PolygonSet(host.boundary)
    for client in space.clients:
        bounds = bounds | client.boundary
    canvas = _Canvas(bounds.bounds)
    _draw_plan(canvas, host)

    clients = canvas.group("clients")
    for i, client in enumerate(space.clients):
        color = client_color(i)
        layer = ET.SubElement(clients, "g", {"id": client.owner, "data-plan": client.plan_id})
        canvas.polygons(layer, client.boundary.polygons, {"class": "footprint", "fill": "none", "stroke": color, "stroke-dasharray": "8 4"})
        canvas.polygons(layer, client.unmatched.polygons, {"class": "unmatched", "fill": UNMATCHED_COLOR, "fill-opacity": "0.6"})
        if client.subspace is not None:
            canvas.polygons(layer, client.subspace.region.polygons, {"class": "subspace", "fill": color, "fill-opacity": "0.25"})
        for wall in client.walls:
            canvas.line(layer, wall.a, wall.b, {"class": "wall", "stroke": color, "stroke-width": _num(WALL_WIDTH * SCALE)})

    if space.shared_region is not None:
        shared = canvas.group("shared")
        canvas.polygons(shared, space.shared_region.polygons, {"class": "shared", "fill": SHARED_COLOR, "stroke": "#000000"})

    users = canvas.group("users")
    owners = {c.owner: i for i, c in enumerate(space.clients)}
    for name, position in sorted(space.positions.items()):
        color = client_color(owners[name]) if name in owners else HOST_USER_COLOR
        canvas.marker(users, name, position, color)
    return canvas.to_bytes()


def load_mutual_space(path: pathlib.Path) -> MutualSpace:
    """Mutual space from a bare MutualSpace JSON or from a run output holding one."""
    data = json.loads(pathlib.Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "mutual_space" in data:
        data = data["mutual_space"]
    return MutualSpace.model_validate(data)


def save_svg(data: bytes, path: pathlib.Path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    logger.info("%sSaved svg to %s", G, path)
    return path

