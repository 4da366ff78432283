"""Graph approximations of the two hybrid fractals.

Both spaces are built by substitution from a base triangle.  The Hanoi
attractor (stretched Sierpinski gasket) replaces each triangular cell by
3 shrunken corner cells joined by 3 line segments.  The SG3-based hybrid
replaces each cell by 6 shrunken cells joined by 6 line segments plus one
inverted Sierpinski gasket in the middle.  At every later level, segments
subdivide dyadically, inverted gaskets subdivide as ordinary Sierpinski
gaskets, and cells keep subdividing by the same rule.

Vertices carry stable string addresses so that two builds with identical
inputs are byte-identical, and so that the level-m vertex set embeds into
the level-(m+1) one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

ROLE_BOUNDARY = "boundary_v0"
ROLE_TRIANGLE = "triangle_corner"  # reserved; every non-V0 corner joins a bond
ROLE_SEG_END = "segment_endpoint"
ROLE_SEG_INT = "segment_interior"
ROLE_SG_BND = "invsg_boundary"
ROLE_SG_INT = "invsg_interior"

KIND_TRIANGLE = "triangle"
KIND_SEGMENT = "segment"
KIND_INVSG = "invsg"

SQRT3_2 = 0.8660254037844386467637232


class GeometryError(ValueError):
    pass


class ResourceCapError(RuntimeError):
    """Raised when a requested level would exceed the vertex budget."""


@dataclass(frozen=True)
class HybridModel:
    """Substitution system describing one hybrid fractal.

    directed_summary holds the edge counts of the directed graph on the
    block types (upright cell J1, interval J2, inverted gasket J3).
    """

    name: str                      # "hanoi" or "sg3"
    cell_children: int             # upright children per cell
    segments_per_cell: int         # segment bonds born per cell subdivision
    invsg_per_cell: int            # inverted-gasket bonds per cell subdivision
    directed_summary: dict = field(hash=False)
    layout_scale: float = 0.4      # drawing contraction, cosmetic only

    def __post_init__(self):
        if not 0 < self.layout_scale < 0.5:
            raise GeometryError(f"layout_scale must lie in (0, 1/2), got {self.layout_scale}")


def hanoi_model(layout_scale: float = 0.4) -> HybridModel:
    return HybridModel(
        name="hanoi", cell_children=3, segments_per_cell=3, invsg_per_cell=0,
        directed_summary={"J1_loops": 3, "J1_to_J2": 3, "J1_to_J3": 0,
                          "J2_loops": 2, "J3_loops": 0},
        layout_scale=layout_scale)


def sg3_model(layout_scale: float = 0.25) -> HybridModel:
    return HybridModel(
        name="sg3", cell_children=6, segments_per_cell=6, invsg_per_cell=1,
        directed_summary={"J1_loops": 6, "J1_to_J2": 6, "J1_to_J3": 1,
                          "J2_loops": 2, "J3_loops": 3},
        layout_scale=layout_scale)


def model_by_name(name: str, layout_scale: float | None = None) -> HybridModel:
    key = name.lower()
    if key in ("hanoi", "stretched-sg"):
        return hanoi_model() if layout_scale is None else hanoi_model(layout_scale)
    if key in ("sg3", "sg3hybrid", "sg3-hybrid"):
        return sg3_model() if layout_scale is None else sg3_model(layout_scale)
    raise GeometryError(f"unknown model name {name!r}")


@dataclass(frozen=True)
class Vertex:
    id: int
    x: float
    y: float
    role: str
    birth: int        # birth level of the bond owning this vertex (0 for V0)
    address: str


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    kind: str
    birth: int        # bond birth level; for triangle edges, the graph level


@dataclass
class ApproxGraph:
    """Level-m graph skeleton of a hybrid fractal (edge weights unset)."""

    model: HybridModel
    level: int
    vertices: list        # list[Vertex], sorted by address
    edges: list           # list[Edge], deterministic order
    invsg_cells: list     # list[(owner, sg_word, birth, (c1, c2, c3))], leaf triangles

    @property
    def n(self) -> int:
        return len(self.vertices)

    def boundary_ids(self):
        return [v.id for v in self.vertices if v.role == ROLE_BOUNDARY]

    def interior_ids(self):
        return [v.id for v in self.vertices if v.role != ROLE_BOUNDARY]

    def degrees(self):
        deg = [0] * self.n
        for e in self.edges:
            deg[e.u] += 1
            deg[e.v] += 1
        return deg

    def neighbors(self, vid: int):
        out = []
        for e in self.edges:
            if e.u == vid:
                out.append(e.v)
            elif e.v == vid:
                out.append(e.u)
        return sorted(out)

    def to_json_dict(self) -> dict:
        return {
            "model": self.model.name,
            "level": self.level,
            "vertices": [
                {"id": v.id, "x": v.x, "y": v.y, "role": v.role,
                 "birth": v.birth, "address": v.address}
                for v in self.vertices
            ],
            "edges": [
                {"u": e.u, "v": e.v, "kind": e.kind, "birth": e.birth}
                for e in self.edges
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=1)


class _Builder:
    """Interns vertices by address during the substitution rewriting."""

    def __init__(self):
        self.addr = {}      # address -> temp id
        self.role = []
        self.birth = []

    def vertex(self, address, role, birth):
        tid = self.addr.get(address)
        if tid is None:
            tid = len(self.role)
            self.addr[address] = tid
            self.role.append(role)
            self.birth.append(birth)
        return tid


def predicted_vertex_count(model: HybridModel, level: int) -> int:
    """Vertex count of the level-m graph, from the subdivision recursion."""
    if level < 0:
        raise GeometryError("level must be >= 0")
    v = 3
    cells = 1
    seg_edges = 0
    sg_tris = 0
    for _ in range(level):
        new_per_cell = 6 if model.name == "hanoi" else 15
        v += new_per_cell * cells + seg_edges + 3 * sg_tris
        seg_edges = 2 * seg_edges + model.segments_per_cell * cells
        sg_tris = 3 * sg_tris + model.invsg_per_cell * cells
        cells *= model.cell_children
    return v


def interior_count(model: HybridModel, level: int) -> int:
    """Number of non-boundary vertices of the level-m graph.

    For the Hanoi attractor this equals the closed form
    (3/2)(3^(m+1) - 1) - 3*2^m; the SG3 hybrid has no known closed form
    and uses the recursion directly.
    """
    if level < 1:
        raise GeometryError("interior_count requires level >= 1")
    n = predicted_vertex_count(model, level) - 3
    if model.name == "hanoi":
        closed = 3 * (3 ** (level + 1) - 1) // 2 - 3 * 2 ** level
        assert n == closed
    return n


def build_graph(model: HybridModel, level: int, *, scale: float | None = None,
                max_vertices: int = 2_000_000) -> ApproxGraph:
    """Build the level-m approximation graph by substitution rewriting.

    Deterministic: vertices are sorted lexicographically by address and
    renumbered, so identical inputs give byte-identical serializations.
    """
    if level < 0:
        raise GeometryError("level must be >= 0")
    predicted = predicted_vertex_count(model, level)
    if predicted > max_vertices:
        raise ResourceCapError(
            f"level {level} needs {predicted} vertices, above the cap of {max_vertices}")

    b = _Builder()
    v0 = [b.vertex(f".{c}", ROLE_BOUNDARY, 0) for c in "abc"]
    cells = [("", (v0[0], v0[1], v0[2]))]
    seg_edges = []   # (u, v, birth, owner, lo, hi) with dyadic positions lo < hi
    sg_tris = []     # (owner, sg_word, birth, (c1, c2, c3))

    for lev in range(1, level + 1):
        split = []
        for (u, v, k, owner, lo, hi) in seg_edges:
            mid = (lo + hi) / 2
            mv = b.vertex(f"{owner}:{mid}", ROLE_SEG_INT, k)
            split.append((u, mv, k, owner, lo, mid))
            split.append((mv, v, k, owner, mid, hi))
        seg_edges = split

        new_sg = []
        for (owner, word, k, (c1, c2, c3)) in sg_tris:
            m01 = b.vertex(f"{owner}:{word}m01", ROLE_SG_INT, k)
            m02 = b.vertex(f"{owner}:{word}m02", ROLE_SG_INT, k)
            m12 = b.vertex(f"{owner}:{word}m12", ROLE_SG_INT, k)
            new_sg.append((owner, word + "0", k, (c1, m01, m02)))
            new_sg.append((owner, word + "1", k, (m01, c2, m12)))
            new_sg.append((owner, word + "2", k, (m02, m12, c3)))
        sg_tris = new_sg

        new_cells = []
        for (w, (A, B, C)) in cells:
            if model.name == "hanoi":
                kids = [
                    (A, b.vertex(f"{w}1.b", ROLE_SEG_END, lev),
                     b.vertex(f"{w}1.c", ROLE_SEG_END, lev)),
                    (b.vertex(f"{w}2.a", ROLE_SEG_END, lev), B,
                     b.vertex(f"{w}2.c", ROLE_SEG_END, lev)),
                    (b.vertex(f"{w}3.a", ROLE_SEG_END, lev),
                     b.vertex(f"{w}3.b", ROLE_SEG_END, lev), C),
                ]
                pairs = ((kids[0][1], kids[1][0]), (kids[0][2], kids[2][0]),
                         (kids[1][2], kids[2][1]))
            else:
                # children 1,2,3 bottom row, 4,5 middle row, 6 top;
                # inherited corners: child 1 keeps A, child 3 keeps B, child 6 keeps C
                kids = [
                    (A, b.vertex(f"{w}1.b", ROLE_SEG_END, lev),
                     b.vertex(f"{w}1.c", ROLE_SEG_END, lev)),
                    (b.vertex(f"{w}2.a", ROLE_SEG_END, lev),
                     b.vertex(f"{w}2.b", ROLE_SEG_END, lev),
                     b.vertex(f"{w}2.c", ROLE_SG_BND, lev)),
                    (b.vertex(f"{w}3.a", ROLE_SEG_END, lev), B,
                     b.vertex(f"{w}3.c", ROLE_SEG_END, lev)),
                    (b.vertex(f"{w}4.a", ROLE_SEG_END, lev),
                     b.vertex(f"{w}4.b", ROLE_SG_BND, lev),
                     b.vertex(f"{w}4.c", ROLE_SEG_END, lev)),
                    (b.vertex(f"{w}5.a", ROLE_SG_BND, lev),
                     b.vertex(f"{w}5.b", ROLE_SEG_END, lev),
                     b.vertex(f"{w}5.c", ROLE_SEG_END, lev)),
                    (b.vertex(f"{w}6.a", ROLE_SEG_END, lev),
                     b.vertex(f"{w}6.b", ROLE_SEG_END, lev), C),
                ]
                pairs = ((kids[0][1], kids[1][0]), (kids[1][1], kids[2][0]),
                         (kids[0][2], kids[3][0]), (kids[3][2], kids[5][0]),
                         (kids[2][2], kids[4][1]), (kids[4][2], kids[5][1]))
                # inverted gasket spans the three central corners
                sg_tris.append((f"{w}g", "", lev, (kids[1][2], kids[3][1], kids[4][0])))
            for i, ch in enumerate(kids):
                new_cells.append((w + str(i + 1), ch))
            for i, (p, q) in enumerate(pairs):
                seg_edges.append((p, q, lev, f"{w}s{i}", 0.0, 1.0))
        cells = new_cells

    raw_edges = []
    for (_w, (A, B, C)) in cells:
        raw_edges += [(A, B, KIND_TRIANGLE, level), (B, C, KIND_TRIANGLE, level),
                      (A, C, KIND_TRIANGLE, level)]
    for (u, v, k, _owner, _lo, _hi) in seg_edges:
        raw_edges.append((u, v, KIND_SEGMENT, k))
    for (_owner, _word, k, (p, q, s)) in sg_tris:
        raw_edges += [(p, q, KIND_INVSG, k), (q, s, KIND_INVSG, k), (p, s, KIND_INVSG, k)]

    coords = _coordinates(model, level, scale if scale is not None else model.layout_scale,
                          b, seg_edges, sg_tris)

    order = sorted(b.addr, key=str)
    remap = {b.addr[address]: new_id for new_id, address in enumerate(order)}
    vertices = []
    for new_id, address in enumerate(order):
        tid = b.addr[address]
        x, y = coords[tid]
        vertices.append(Vertex(new_id, x, y, b.role[tid], b.birth[tid], address))
    edges = []
    for (u, v, kind, k) in raw_edges:
        u2, v2 = remap[u], remap[v]
        if u2 > v2:
            u2, v2 = v2, u2
        edges.append(Edge(u2, v2, kind, k))
    edges.sort(key=lambda e: (e.u, e.v, e.kind))
    inv_cells = sorted(
        ((owner, word, k, tuple(remap[c] for c in tri))
         for (owner, word, k, tri) in sg_tris),
        key=lambda t: (t[0], t[1]))

    graph = ApproxGraph(model=model, level=level, vertices=vertices,
                        edges=edges, invsg_cells=inv_cells)
    assert graph.n == predicted
    return graph


def _coordinates(model, level, scale, b, seg_edges, sg_tris):
    """Place every vertex in the plane by composing the affine cell maps."""
    if not 0 < scale < 0.5:
        raise GeometryError(f"layout scale must lie in (0, 1/2), got {scale}")
    coords = {}

    def rec(word, A, B, C, depth):
        for tag, pos in (("a", A), ("b", B), ("c", C)):
            tid = b.addr.get(f"{word}.{tag}")
            if tid is not None:
                coords.setdefault(tid, pos)
        if depth == level:
            return
        s = scale
        ux = (B[0] - A[0], B[1] - A[1])
        vx = (C[0] - A[0], C[1] - A[1])

        def pt(fu, fv):
            return (A[0] + fu * ux[0] + fv * vx[0], A[1] + fu * ux[1] + fv * vx[1])

        if model.name == "hanoi":
            anchors = ((0.0, 0.0), (1.0 - s, 0.0), (0.0, 1.0 - s))
        else:
            h = (1.0 - s) / 2.0
            anchors = ((0.0, 0.0), (h, 0.0), (1.0 - s, 0.0),
                       (0.0, h), (h, h), (0.0, 1.0 - s))
        for i, (au, av) in enumerate(anchors):
            rec(word + str(i + 1), pt(au, av), pt(au + s, av), pt(au, av + s),
                depth + 1)

    rec("", (0.0, 0.0), (1.0, 0.0), (0.5, SQRT3_2), 0)

    # segment interiors sit at their dyadic parameter between the bond ends
    by_owner = {}
    for (u, v, _k, owner, lo, hi) in seg_edges:
        ends = by_owner.setdefault(owner, {})
        ends[lo] = u
        ends[hi] = v
    for ends in by_owner.values():
        p0, p1 = coords[ends[0.0]], coords[ends[1.0]]
        for t, tid in ends.items():
            coords.setdefault(tid, (p0[0] + t * (p1[0] - p0[0]),
                                    p0[1] + t * (p1[1] - p0[1])))

    _place_gasket_interiors(coords, sg_tris)
    return coords


def _place_gasket_interiors(coords, sg_tris):
    # Rebuild each gasket's subdivision tree from its leaf triangles, then
    # place midpoints top-down: the word-w children share midpoints of w's
    # corners.  Leaf corner ids encode the tree (parent = (k0[0], k1[1], k2[2])).
    by_owner = {}
    for (owner, word, _k, tri) in sg_tris:
        by_owner.setdefault(owner, {})[word] = tri
    for tris in by_owner.values():
        depth = max(len(w) for w in tris)
        for d in range(depth, 0, -1):
            for word in [w for w in tris if len(w) == d and w.endswith("0")]:
                pword = word[:-1]
                tris[pword] = (tris[pword + "0"][0], tris[pword + "1"][1],
                               tris[pword + "2"][2])
        stack = [""]
        while stack:
            word = stack.pop()
            if word + "0" not in tris:
                continue
            c1, c2, c3 = tris[word]
            p1, p2, p3 = coords[c1], coords[c2], coords[c3]
            m01 = tris[word + "0"][1]
            m02 = tris[word + "0"][2]
            m12 = tris[word + "1"][2]
            coords.setdefault(m01, ((p1[0] + p2[0]) / 2, (p1[1] + p2[1]) / 2))
            coords.setdefault(m02, ((p1[0] + p3[0]) / 2, (p1[1] + p3[1]) / 2))
            coords.setdefault(m12, ((p2[0] + p3[0]) / 2, (p2[1] + p3[1]) / 2))
            stack += [word + "0", word + "1", word + "2"]


def layout_coordinates(graph: ApproxGraph, layout_scale: float) -> dict:
    """Recompute vertex coordinates at a different drawing contraction.

    Pure function of the graph's model, level and scale; vertex ids match
    the input graph because construction is deterministic.
    """
    rebuilt = build_graph(graph.model, graph.level, scale=layout_scale)
    return {v.id: (v.x, v.y) for v in rebuilt.vertices}


def segment_chain_positions(graph: ApproxGraph) -> dict:
    """Map vertex id -> dyadic position in (0,1) for segment interiors."""
    out = {}
    for v in graph.vertices:
        if v.role == ROLE_SEG_INT:
            out[v.id] = float(Fraction(v.address.rsplit(":", 1)[1]))
    return out
