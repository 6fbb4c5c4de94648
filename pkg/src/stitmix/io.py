"""Artifact writers: JSON snapshots, CSV tables and SVG renders.

Formats
-------
``stitmix.tessellation/1`` JSON: ``{"format", "measure", "clock", "zeta",
"zero_cell_id", "window", "cells": [{"id", "dim", "vertices", "tags"}],
"jumps": [{"index", "time", "parent", "hyperplane": {"offset", "normal"},
"children", "zeta"}]}``. Tags are ``{"kind": "window"|"cut", "index": int}``.

SVG 1.1: one ``<polygon>`` per cell inside a ``<g>`` flipped so that ``y``
points up; the window boundary is drawn as a separate thicker polygon.
"""
from __future__ import annotations

import csv
import io as _io
import json
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Iterable, Sequence

SVG_NS = "http://www.w3.org/2000/svg"
SVG_VERSION = "1.1"


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")
    return path


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


def _points(vs, scale, ox, oy) -> str:
    return " ".join(f"{(x - ox) * scale:.6f},{(y - oy) * scale:.6f}" for x, y in vs)


def render_svg(window_vertices, cells: Sequence[Sequence], size: int = 600,
               stroke: str = "#222", highlight: int | None = None) -> str:
    """SVG of a planar tessellation; ``cells`` are vertex loops."""
    xs = [v[0] for v in window_vertices]
    ys = [v[1] for v in window_vertices]
    ox, oy = min(xs), min(ys)
    span = max(max(xs) - ox, max(ys) - oy)
    scale = size / span
    w = (max(xs) - ox) * scale
    h = (max(ys) - oy) * scale
    ET.register_namespace("", SVG_NS)
    root = ET.Element(f"{{{SVG_NS}}}svg", {
        "version": SVG_VERSION, "width": f"{w:.0f}", "height": f"{h:.0f}",
        "viewBox": f"-2 -2 {w + 4:.6f} {h + 4:.6f}",
    })
    g = ET.SubElement(root, f"{{{SVG_NS}}}g", {"transform": f"matrix(1 0 0 -1 0 {h:.6f})"})
    for k, vs in enumerate(cells):
        fill = "#f4c542" if highlight == k else "none"
        ET.SubElement(g, f"{{{SVG_NS}}}polygon", {
            "points": _points(vs, scale, ox, oy), "fill": fill,
            "stroke": stroke, "stroke-width": "1",
        })
    ET.SubElement(g, f"{{{SVG_NS}}}polygon", {
        "points": _points(window_vertices, scale, ox, oy), "fill": "none",
        "stroke": "#000", "stroke-width": "2.5",
    })
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def render_tessellation(T, **kw) -> str:
    if T.dim != 2:
        raise ValueError("only planar tessellations can be rendered")
    cells = [c.vertices for c in T.cells]
    zero = None
    origin = (0.0, 0.0)
    for k, c in enumerate(T.cells):
        if c.contains(origin):
            zero = k
            break
    return render_svg(T.window.vertices, cells, highlight=kw.pop("highlight", zero), **kw)


def write_svg(path, T, **kw) -> Path:
    path = Path(path)
    path.write_text(render_tessellation(T, **kw), encoding="utf-8")
    return path
