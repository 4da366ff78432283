"""Resistance assignment, renormalization and network reductions.

Edge weights follow the self-similar scaling rules: triangle edges of the
level-m graph carry R*r^m, a segment edge born at level k carries
R*r^(k-1)*rho*(1/2)^(m-k), and an inverted-gasket edge born at k carries
R*r^(k-1)*rho*(3/5)^(m-k).  For the Hanoi attractor the compatible pairs
satisfy (5/3) r + rho = 1; for the SG3 hybrid rho solves a quadratic in r.

All reductions (effective resistance, trace onto a vertex set, harmonic
extension) are plain weighted-Laplacian linear algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import (KIND_INVSG, KIND_SEGMENT, KIND_TRIANGLE, ApproxGraph,
                       HybridModel, build_graph)

DENSE_SOLVE_LIMIT = 5000


class ParameterError(ValueError):
    pass


class StructuralError(ValueError):
    pass


def hanoi_rho(r: float) -> float:
    """Bond scaling making the Hanoi graph energies compatible."""
    if not 0 < r < 0.6:
        raise ParameterError(f"hanoi r must lie in (0, 3/5), got {r}")
    return 1.0 - 5.0 * r / 3.0


def solve_sg3_rho(r: float) -> float:
    """Positive root of 5 rho^2 + (31 r/3 - 3) rho + (5 r^2 - 7 r/3) = 0.

    The root is unique in (0,1) for r in (0, 7/15) and degenerates to 0 at
    the critical value r = 7/15 (the bare SG3 resistance scaling).
    """
    if not 0 < r < 7 / 15:
        raise ParameterError(f"sg3 r must lie in (0, 7/15), got {r}")
    bq = 31.0 * r / 3.0 - 3.0
    cq = 5.0 * r * r - 7.0 * r / 3.0
    rho = (-bq + math.sqrt(bq * bq - 20.0 * cq)) / 10.0
    residual = abs(5 * rho * rho + bq * rho + cq)
    assert residual < 1e-12
    return rho


@dataclass(frozen=True)
class ResistanceParams:
    model: str            # "hanoi" or "sg3"
    r: float
    rho: float
    R: float = 1.0

    def validate(self):
        if self.R <= 0:
            raise ParameterError("base resistance R must be positive")
        if self.model == "hanoi":
            if not 0 < self.r < 0.6:
                raise ParameterError(f"hanoi r must lie in (0, 3/5), got {self.r}")
            if not 0 < self.rho < 1:
                raise ParameterError(f"hanoi rho must lie in (0, 1), got {self.rho}")
        elif self.model == "sg3":
            if not 0 < self.r < 7 / 15:
                raise ParameterError(f"sg3 r must lie in (0, 7/15), got {self.r}")
            if self.rho <= 0:
                raise ParameterError(f"sg3 rho must be positive, got {self.rho}")
        else:
            raise ParameterError(f"unknown model {self.model!r}")

    @classmethod
    def compatible(cls, model: str, r: float, R: float = 1.0) -> "ResistanceParams":
        """Parameters satisfying the renormalization equation for the model."""
        rho = hanoi_rho(r) if model == "hanoi" else solve_sg3_rho(r)
        return cls(model=model, r=r, rho=rho, R=R)


@dataclass
class WeightedNetwork:
    graph: ApproxGraph
    resistances: np.ndarray   # per edge, aligned with graph.edges

    @property
    def n(self) -> int:
        return self.graph.n


def edge_resistance(kind: str, birth: int, level: int, params: ResistanceParams) -> float:
    if kind == KIND_TRIANGLE:
        return params.R * params.r ** level
    if kind == KIND_SEGMENT:
        return params.R * params.r ** (birth - 1) * params.rho * 0.5 ** (level - birth)
    if kind == KIND_INVSG:
        return params.R * params.r ** (birth - 1) * params.rho * 0.6 ** (level - birth)
    raise StructuralError(f"unknown edge kind {kind!r}")


def assign_resistances(graph: ApproxGraph, params: ResistanceParams) -> WeightedNetwork:
    params.validate()
    if params.model != graph.model.name:
        raise ParameterError(
            f"params are for {params.model!r} but graph is {graph.model.name!r}")
    res = np.array([edge_resistance(e.kind, e.birth, graph.level, params)
                    for e in graph.edges])
    assert np.all(res > 0) and np.all(np.isfinite(res))
    return WeightedNetwork(graph=graph, resistances=res)


def delta_wye(ra: float, rb: float, rc: float):
    """Triangle-to-star conversion preserving pairwise effective resistances.

    ra joins nodes B,C; rb joins A,C; rc joins A,B.  The star legs are
    x at A, y at B, z at C.
    """
    if min(ra, rb, rc) <= 0:
        raise ParameterError("delta_wye requires positive resistances")
    s = ra + rb + rc
    return rb * rc / s, ra * rc / s, ra * rb / s


def laplacian_matrix(net: WeightedNetwork, sparse: bool | None = None):
    """Weighted graph Laplacian; conductance 1/r per edge."""
    n = net.n
    use_sparse = sparse if sparse is not None else n > DENSE_SOLVE_LIMIT
    rows, cols, vals = [], [], []
    for e, r in zip(net.graph.edges, net.resistances):
        c = 1.0 / r
        rows += [e.u, e.v, e.u, e.v]
        cols += [e.u, e.v, e.v, e.u]
        vals += [c, c, -c, -c]
    L = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return L if use_sparse else L.toarray()


def energy(net: WeightedNetwork, u: np.ndarray) -> float:
    """Quadratic form sum (1/r_e) (u_x - u_y)^2."""
    u = np.asarray(u, dtype=float)
    total = 0.0
    for e, r in zip(net.graph.edges, net.resistances):
        d = u[e.u] - u[e.v]
        total += d * d / r
    return total


def effective_resistance(net: WeightedNetwork, u: int, v: int) -> float:
    """Two-point effective resistance via a unit current injection."""
    if u == v:
        raise ParameterError("effective_resistance needs two distinct vertices")
    n = net.n
    L = laplacian_matrix(net)
    ground = next(i for i in range(n) if i not in (u, v))
    keep = [i for i in range(n) if i != ground]
    b = np.zeros(n)
    b[u], b[v] = 1.0, -1.0
    if sp.issparse(L):
        Lr = L[keep, :][:, keep].tocsc()
        x = spla.spsolve(Lr, b[keep])
    else:
        Lr = L[np.ix_(keep, keep)]
        try:
            x = sla.solve(Lr, b[keep], assume_a="pos")
        except sla.LinAlgError:
            raise StructuralError("network is disconnected between the endpoints")
    full = np.zeros(n)
    full[keep] = x
    reff = full[u] - full[v]
    if not np.isfinite(reff) or reff <= 0:
        raise StructuralError("network is disconnected between the endpoints")
    return float(reff)


def trace_form(net: WeightedNetwork, boundary) -> np.ndarray:
    """Schur complement of the Laplacian onto a vertex subset.

    Returns the dense reduced Laplacian acting on the boundary vertices
    (ordered as given); this is the energy form of harmonic extension.
    """
    boundary = list(boundary)
    n = net.n
    inner = [i for i in range(n) if i not in set(boundary)]
    L = laplacian_matrix(net, sparse=False)
    if not inner:
        return L[np.ix_(boundary, boundary)]
    Lbb = L[np.ix_(boundary, boundary)]
    Lbi = L[np.ix_(boundary, inner)]
    Lii = L[np.ix_(inner, inner)]
    return Lbb - Lbi @ sla.solve(Lii, Lbi.T, assume_a="pos")


def harmonic_extension(net: WeightedNetwork, boundary, values) -> np.ndarray:
    """Energy-minimizing extension of boundary data to every vertex."""
    boundary = list(boundary)
    values = np.asarray(values, dtype=float)
    if not boundary:
        raise ParameterError("harmonic_extension needs a nonempty boundary")
    n = net.n
    inner = [i for i in range(n) if i not in set(boundary)]
    out = np.zeros(n)
    out[boundary] = values
    if inner:
        L = laplacian_matrix(net, sparse=False)
        Lii = L[np.ix_(inner, inner)]
        Lib = L[np.ix_(inner, boundary)]
        out[inner] = sla.solve(Lii, -Lib @ values, assume_a="pos")
    return out


def check_compatibility(model: HybridModel, params: ResistanceParams) -> float:
    """Residual of the one-step renormalization.

    Traces the level-1 network of one upright cell onto its three corners
    and returns the maximum deviation of the pairwise effective resistances
    from their level-0 values (2/3 R each).  Compatible parameters give a
    residual at rounding level.
    """
    params.validate()
    g1 = build_graph(model, 1)
    net = assign_resistances(g1, params)
    target = 2.0 * params.R / 3.0
    corners = g1.boundary_ids()
    worst = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            reff = effective_resistance(net, corners[i], corners[j])
            worst = max(worst, abs(reff - target))
    return worst


def boundary_resistance_series(r: float, level: int):
    """Level-m truncation of the boundary-pair resistance expansion.

    Returns (full, tail, metric): `full` is (2/3)(5r/3)^m plus the partial
    sum (2/3) sum_{k<=m} rho (5r/3)^(k-1); `tail` is the partial sum alone;
    `metric` drops the 2/3 prefactor (the dust-free path-metric value).
    With the compatible rho the full truncation telescopes to 2/3 at every
    level.
    """
    rho = hanoi_rho(r)
    q = 5.0 * r / 3.0
    partial = sum(rho * q ** (k - 1) for k in range(1, level + 1))
    full = (2.0 / 3.0) * q ** level + (2.0 / 3.0) * partial
    return full, (2.0 / 3.0) * partial, partial
