"""Discrete Laplacian assembly and eigenproblems.

The operator acts on interior vertices as
(1/mass_x) sum_{y ~ x} (u(y) - u(x)) / r(x,y), a generalized symmetric
eigenproblem L u = lambda M u with diagonal mass matrix M.  Dirichlet
conditions remove the three boundary rows; Neumann conditions eliminate
each boundary value through u(x) = (u(y1) + u(y2)) / 2, the unweighted
mean of its two neighbors, which makes the reduced matrix nonsymmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .geometry import ROLE_BOUNDARY, ApproxGraph
from .measures import MeasureParams, vertex_masses
from .resistance import ParameterError, StructuralError, WeightedNetwork, laplacian_matrix

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

DENSE_EIG_LIMIT = 10_000
CLUSTER_RTOL = 1e-6


class NumericalError(RuntimeError):
    pass


@dataclass
class AssembledOperator:
    """Reduced stiffness/mass pair for one boundary condition."""

    bc: str
    level: int
    stiffness: np.ndarray          # acts on interior vertices
    mass: np.ndarray               # diagonal entries, interior vertices
    interior: list                 # interior vertex ids, in graph order
    boundary: list                 # the three V0 ids
    boundary_neighbors: dict       # V0 id -> (n1, n2) interior neighbor ids
    graph: ApproxGraph

    @property
    def dim(self) -> int:
        return len(self.interior)


@dataclass
class Spectrum:
    bc: str
    level: int
    eigenvalues: np.ndarray        # ascending, one entry per eigenpair
    clusters: list                 # list of (value, multiplicity)
    params: dict = field(default_factory=dict)
    vectors: np.ndarray | None = None   # columns aligned with eigenvalues

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def multiplicity_pattern(self, count: int):
        return tuple(mult for (_val, mult) in self.clusters[:count])


def assemble(net: WeightedNetwork, masses: np.ndarray, bc: str) -> AssembledOperator:
    """Build the reduced generalized eigenproblem for one boundary condition."""
    if bc not in (DIRICHLET, NEUMANN):
        raise ParameterError(f"bc must be dirichlet or neumann, got {bc!r}")
    graph = net.graph
    n = graph.n
    if np.any(masses <= 0):
        raise ParameterError("masses must be strictly positive")
    L = laplacian_matrix(net, sparse=False)
    rowsums = np.abs(L.sum(axis=1))
    assert rowsums.max() <= 1e-9 * np.abs(L).max()
    boundary = graph.boundary_ids()
    interior = graph.interior_ids()
    if not interior:
        return AssembledOperator(bc=bc, level=graph.level,
                                 stiffness=np.zeros((0, 0)), mass=np.zeros(0),
                                 interior=[], boundary=boundary,
                                 boundary_neighbors={}, graph=graph)
    neighbor_map = {}
    for bid in boundary:
        nbrs = graph.neighbors(bid)
        if len(nbrs) != 2:
            raise StructuralError(
                f"boundary vertex {bid} has degree {len(nbrs)}, the Neumann rule needs 2")
        neighbor_map[bid] = tuple(nbrs)
    Lii = L[np.ix_(interior, interior)]
    if bc == DIRICHLET:
        stiff = Lii
    else:
        pos = {vid: j for j, vid in enumerate(interior)}
        C = np.zeros((len(boundary), len(interior)))
        for i, bid in enumerate(boundary):
            for nb in neighbor_map[bid]:
                C[i, pos[nb]] = 0.5
        Lib = L[np.ix_(interior, boundary)]
        stiff = Lii + Lib @ C
    return AssembledOperator(bc=bc, level=graph.level, stiffness=stiff,
                             mass=masses[interior], interior=interior,
                             boundary=boundary, boundary_neighbors=neighbor_map,
                             graph=graph)


def cluster_eigenvalues(values: np.ndarray, rtol: float = CLUSTER_RTOL):
    """Group ascending eigenvalues whose relative gap is below rtol."""
    clusters = []
    i = 0
    n = len(values)
    while i < n:
        j = i + 1
        while j < n and abs(values[j] - values[j - 1]) <= rtol * max(abs(values[j]), 1e-300):
            j += 1
        block = values[i:j]
        clusters.append((float(np.mean(block)), j - i))
        i = j
    return clusters


def solve_spectrum(op: AssembledOperator, *, want_vectors: bool = True,
                   cluster_rtol: float = CLUSTER_RTOL, params: dict | None = None) -> Spectrum:
    """Solve L u = lambda M u on the interior vertices.

    Dirichlet problems are symmetrized with M^(-1/2); the Neumann
    elimination is nonsymmetric and goes through a general eigensolver
    whose spectrum must come out real.
    """
    if op.dim < 1:
        raise ParameterError("cannot solve an empty eigenproblem")
    if op.dim > DENSE_EIG_LIMIT:
        raise NumericalError(
            f"dimension {op.dim} exceeds the dense solver limit {DENSE_EIG_LIMIT}")
    if op.bc == DIRICHLET:
        s = 1.0 / np.sqrt(op.mass)
        sym = op.stiffness * s[:, None] * s[None, :]
        sym = 0.5 * (sym + sym.T)
        if want_vectors:
            w, y = sla.eigh(sym)
            vecs = y * s[:, None]          # M-orthonormal
        else:
            w = sla.eigvalsh(sym)
            vecs = None
    else:
        A = op.stiffness / op.mass[:, None]
        w, y = sla.eig(A)
        if np.max(np.abs(w.imag)) > 1e-10 * max(1.0, np.max(np.abs(w.real))):
            raise NumericalError("Neumann spectrum has a non-real eigenvalue")
        order = np.argsort(w.real)
        w = w.real[order]
        if want_vectors:
            vecs = np.real(y[:, order])
            norms = np.sqrt(np.einsum("ij,i,ij->j", vecs, op.mass, vecs))
            vecs = vecs / norms
        else:
            vecs = None
    w = np.maximum(w, 0.0) if w.min() > -1e-9 * max(1.0, abs(w.max())) else w
    _check_residuals(op, w, vecs)
    return Spectrum(bc=op.bc, level=op.level, eigenvalues=w,
                    clusters=cluster_eigenvalues(w, cluster_rtol),
                    params=dict(params or {}), vectors=vecs)


def _check_residuals(op, w, vecs, rtol=1e-8):
    if vecs is None:
        return
    R = op.stiffness @ vecs - (op.mass[:, None] * vecs) * w[None, :]
    scale = np.linalg.norm(op.stiffness)
    worst = np.abs(R).max()
    if worst > rtol * scale:
        raise NumericalError(f"eigenpair residual {worst:.3e} exceeds {rtol * scale:.3e}")


def eigenfunction(op: AssembledOperator, spec: Spectrum, index: int) -> np.ndarray:
    """Eigenvector extended to all vertices, sign-fixed.

    Dirichlet extends by zero; Neumann extends each boundary corner by the
    mean of its two neighbors.  The largest-magnitude entry is made
    positive.
    """
    if spec.vectors is None:
        raise ParameterError("spectrum was solved without eigenvectors")
    if not 0 <= index < spec.dim:
        raise ParameterError(f"eigenfunction index {index} out of range 0..{spec.dim - 1}")
    full = np.zeros(op.graph.n)
    full[op.interior] = spec.vectors[:, index]
    if op.bc == NEUMANN:
        for bid, (n1, n2) in op.boundary_neighbors.items():
            full[bid] = 0.5 * (full[n1] + full[n2])
    peak = np.argmax(np.abs(full))
    if full[peak] < 0:
        full = -full
    return full


def spectrum_dirichlet_neumann(net: WeightedNetwork, mparams: MeasureParams,
                               *, want_vectors: bool = False):
    """Convenience: solve both boundary conditions on one network."""
    masses = vertex_masses(net.graph, mparams)
    out = {}
    for bc in (DIRICHLET, NEUMANN):
        op = assemble(net, masses, bc)
        out[bc] = solve_spectrum(op, want_vectors=want_vectors)
    return out[DIRICHLET], out[NEUMANN]
