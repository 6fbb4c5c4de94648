"""Plain tessellation values: a window plus its cells."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import GeometryError, Polygon, Polytope, box, polytope_from_json


@dataclass
class Tessellation:
    """Cells with pairwise disjoint interiors covering ``window``."""

    window: Polygon | Polytope
    cells: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.window.dim

    def __len__(self) -> int:
        return len(self.cells)

    @classmethod
    def trivial(cls, window) -> "Tessellation":
        return cls(window, [window])

    def total_volume(self) -> float:
        return math.fsum(c.volume for c in self.cells)

    def zero_cell(self):
        """The cell containing the origin (first one found if on a boundary)."""
        origin = (0.0,) * self.dim
        for c in self.cells:
            if c.contains(origin):
                return c
        return None

    def total_edge_length(self) -> float:
        """Length of the cell boundaries inside the window (planar only)."""
        if self.dim != 2:
            raise GeometryError("edge length is defined for planar tessellations")
        return 0.5 * (math.fsum(c.perimeter for c in self.cells) - self.window.perimeter)

    def restrict(self, sub) -> "Tessellation":
        """``T & W'``: every cell clipped to ``sub``; empty-interior pieces dropped."""
        cells = []
        for c in self.cells:
            piece = c.intersect(sub)
            if piece is not None:
                cells.append(piece)
        return Tessellation(sub, cells)

    def scaled(self, r: float) -> "Tessellation":
        return Tessellation(self.window.scaled(r), [c.scaled(r) for c in self.cells])

    def to_json(self) -> dict:
        return {
            "window": self.window.to_json(),
            "cells": [c.to_json() for c in self.cells],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Tessellation":
        return cls(polytope_from_json(d["window"]), [polytope_from_json(c) for c in d["cells"]])


def square(half_side: float):
    return box([-half_side, -half_side], [half_side, half_side])
