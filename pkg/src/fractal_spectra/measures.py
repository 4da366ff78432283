"""Weakly self-similar measures and per-vertex masses.

The measure distributes mass ratio a to each upright cell, b to each
segment (b = 1/3 - a for the Hanoi attractor) and c to the inverted
gasket (SG3 only, with 6a + 6b + c = 1).  The mass of a vertex is the
integral of its piecewise-harmonic tent function, which has the closed
forms implemented in vertex_masses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (ROLE_BOUNDARY, ROLE_SEG_END, ROLE_SEG_INT, ROLE_SG_BND,
                       ROLE_SG_INT, ApproxGraph)
from .resistance import ParameterError

AFFINE_TOL = 1e-12


@dataclass(frozen=True)
class MeasureParams:
    model: str           # "hanoi" or "sg3"
    a: float
    b: float | None = None   # segment share; implied 1/3 - a for hanoi
    c: float | None = None   # inverted-gasket share, sg3 only

    def segment_share(self) -> float:
        if self.model == "hanoi":
            return 1.0 / 3.0 - self.a
        return self.b

    def gasket_share(self) -> float:
        if self.model == "hanoi":
            return 0.0
        if self.c is not None:
            return self.c
        return 1.0 - 6.0 * self.a - 6.0 * self.b


def validate_measure(params: MeasureParams):
    """Return None if valid, else a human-readable constraint violation."""
    if params.model == "hanoi":
        if not 0 < params.a < 1 / 3:
            return f"hanoi a must lie in the open interval (0, 1/3), got {params.a}"
        if params.b is not None and abs(params.b - (1 / 3 - params.a)) > AFFINE_TOL:
            return f"hanoi b is implied as 1/3 - a = {1/3 - params.a}, got {params.b}"
        return None
    if params.model == "sg3":
        if params.b is None:
            return "sg3 measure needs the segment share b"
        c = params.gasket_share()
        if params.a <= 0 or params.b <= 0 or c <= 0:
            return f"sg3 shares must be positive, got a={params.a} b={params.b} c={c}"
        if abs(6 * params.a + 6 * params.b + c - 1.0) > AFFINE_TOL:
            return f"sg3 shares must satisfy 6a+6b+c=1, got {6*params.a + 6*params.b + c}"
        return None
    return f"unknown model {params.model!r}"


def require_valid(params: MeasureParams) -> MeasureParams:
    msg = validate_measure(params)
    if msg is not None:
        raise ParameterError(msg)
    return params


def vertex_masses(graph: ApproxGraph, params: MeasureParams) -> np.ndarray:
    """Tent-function masses for every vertex of the level-m graph.

    Segment endpoints born at level k get a^m/3 + (1/2)^(m-k+1) a^(k-1) b,
    segment interiors (1/2)^(m-k) a^(k-1) b, gasket corners
    a^m/3 + (1/3)^(m-k+1) a^(k-1) c and gasket interiors twice that second
    term.  The three V0 corners carry a^m/3, the unique choice making the
    masses sum to 1.
    """
    require_valid(params)
    if params.model != graph.model.name:
        raise ParameterError(
            f"measure params are for {params.model!r} but graph is {graph.model.name!r}")
    a = params.a
    b = params.segment_share()
    c = params.gasket_share()
    m = graph.level
    corner = a ** m / 3.0
    out = np.empty(graph.n)
    for v in graph.vertices:
        k = v.birth
        if v.role == ROLE_BOUNDARY:
            out[v.id] = corner
        elif v.role == ROLE_SEG_END:
            out[v.id] = corner + 0.5 ** (m - k + 1) * a ** (k - 1) * b
        elif v.role == ROLE_SEG_INT:
            out[v.id] = 0.5 ** (m - k) * a ** (k - 1) * b
        elif v.role == ROLE_SG_BND:
            out[v.id] = corner + (1.0 / 3.0) ** (m - k + 1) * a ** (k - 1) * c
        elif v.role == ROLE_SG_INT:
            out[v.id] = 2.0 * (1.0 / 3.0) ** (m - k + 1) * a ** (k - 1) * c
        else:
            raise ParameterError(f"vertex {v.id} has unexpected role {v.role!r}")
    assert np.all(out > 0)
    return out


def level1_component_masses(graph: ApproxGraph, params: MeasureParams,
                            masses: np.ndarray) -> dict:
    """Total measure attached to each level-1 component.

    A cell corner splits its mass between the cell side (a^m/3) and its
    bond; here each vertex's mass is credited to the component owning it,
    with corner shares split accordingly.  For a valid measure the cells
    carry a each, the level-1 segments b each and the gasket c.
    """
    a = params.a
    m = graph.level
    corner_share = a ** m / 3.0
    by_addr = {v.address: v for v in graph.vertices}
    out = {}

    if graph.model.name == "hanoi":
        cell_corners = {"1": (".a", "1.b", "1.c"), "2": ("2.a", ".b", "2.c"),
                        "3": ("3.a", "3.b", ".c")}
        n_segs = 3
    else:
        cell_corners = {"1": (".a", "1.b", "1.c"), "2": ("2.a", "2.b", "2.c"),
                        "3": ("3.a", ".b", "3.c"), "4": ("4.a", "4.b", "4.c"),
                        "5": ("5.a", "5.b", "5.c"), "6": ("6.a", "6.b", ".c")}
        n_segs = 6

    for digit, corners in cell_corners.items():
        total = 3.0 * corner_share
        skip = set(corners)
        for v in graph.vertices:
            if v.address.startswith(digit) and v.address not in skip:
                total += masses[v.id]
        out[f"cell:{digit}"] = total

    seg_ends = {
        "hanoi": {0: ("1.b", "2.a"), 1: ("1.c", "3.a"), 2: ("2.c", "3.b")},
        "sg3": {0: ("1.b", "2.a"), 1: ("2.b", "3.a"), 2: ("1.c", "4.a"),
                3: ("4.c", "6.a"), 4: ("3.c", "5.b"), 5: ("5.c", "6.b")},
    }[graph.model.name]
    for i in range(n_segs):
        total = 0.0
        for end in seg_ends[i]:
            total += masses[by_addr[end].id] - corner_share
        prefix = f"s{i}:"
        for v in graph.vertices:
            if v.address.startswith(prefix):
                total += masses[v.id]
        out[f"segment:{i}"] = total

    if graph.model.name == "sg3":
        total = 0.0
        for end in ("2.c", "4.b", "5.a"):
            total += masses[by_addr[end].id] - corner_share
        for v in graph.vertices:
            if v.address.startswith("g:"):
                total += masses[v.id]
        out["gasket"] = total
    return out
