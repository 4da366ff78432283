"""Metric-graph (quantum graph) eigenvalue search for the Hanoi attractor.

On each edge the eigenfunction is a_e sin(lambda x) + b_e cos(lambda x).
Interior vertices impose degree-1 continuity equations plus one Kirchhoff
equation (outgoing derivatives sum to zero); boundary vertices impose one
vanishing-value equation per incident edge.  Stacking all of them gives a
square matrix M(lambda) of size 2|E|, and eigenvalues are the lambda where
M(lambda) drops rank, located by scanning the smallest singular value and
refining each local minimum by golden-section search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .geometry import KIND_TRIANGLE, ApproxGraph
from .resistance import ParameterError, ResistanceParams, StructuralError, edge_resistance

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

CONV_RESISTANCE = "resistance"       # L_e = edge resistance
CONV_POWER = "power"                 # L_e = r^birth
CONV_BOND_SCALED = "bond-scaled"     # segments keep their resistance length,
                                     # triangle edges carry rho * r^m
CONVENTIONS = (CONV_RESISTANCE, CONV_POWER, CONV_BOND_SCALED)

# Golden bottom-of-spectrum values (lambda^2) for r = a = 1/6 used by the
# convention match report; keyed by graph level.
QG_REFERENCE_BOTTOM = {
    1: (10.247, 13.627, 41.306, 59.750, 75.686, 107.259),
    2: (8.578, 12.266, 32.951, 54.613, 57.438, 89.685),
    3: (7.896, 11.424, 30.030, 51.955, 52.592, 83.999),
}


@dataclass
class MetricGraph:
    """Edge-length metric structure over an approximation graph."""

    n_vertices: int
    edges: list                    # (u, v, length) with u < v; x = 0 at u
    dirichlet: frozenset           # vertex ids with vanishing-value condition
    exact_lengths: list | None = None   # Fractions aligned with edges, if rational

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def min_length(self) -> float:
        return min(L for (_u, _v, L) in self.edges)

    def total_length(self) -> float:
        return sum(L for (_u, _v, L) in self.edges)


def edge_length(kind: str, birth: int, level: int, params: ResistanceParams,
                convention: str) -> float:
    if convention == CONV_RESISTANCE:
        return edge_resistance(kind, birth, level, params)
    if convention == CONV_POWER:
        return params.R * params.r ** birth
    if convention == CONV_BOND_SCALED:
        if kind == KIND_TRIANGLE:
            return params.rho * edge_resistance(kind, birth, level, params)
        return edge_resistance(kind, birth, level, params)
    raise ParameterError(f"unknown length convention {convention!r}")


def build_metric_graph(graph: ApproxGraph, params: ResistanceParams,
                       convention: str = CONV_RESISTANCE) -> MetricGraph:
    """Turn a Hanoi approximation graph into a metric graph.

    Edge orientation runs from the lower to the higher vertex id.  Exact
    rational lengths are kept alongside the floats when r is close to a
    small rational, for periodicity analysis.
    """
    if graph.model.name != "hanoi":
        raise ParameterError("metric-graph spectra are implemented for the Hanoi model")
    params.validate()
    lengths = [edge_length(e.kind, e.birth, graph.level, params, convention)
               for e in graph.edges]
    edges = [(e.u, e.v, L) for e, L in zip(graph.edges, lengths)]
    exact = _exact_lengths(lengths)
    return MetricGraph(n_vertices=graph.n, edges=edges,
                       dirichlet=frozenset(graph.boundary_ids()),
                       exact_lengths=exact)


def _exact_lengths(lengths, max_den=10 ** 9, rtol=1e-12):
    exact = []
    for L in lengths:
        f = Fraction(L).limit_denominator(max_den)
        if f <= 0 or abs(float(f) - L) > rtol * L:
            return None
        exact.append(f)
    return exact


def exact_period(mg: MetricGraph) -> float | None:
    """Period of lambda -> M(lambda) when all lengths share a rational unit."""
    if mg.exact_lengths is None:
        return None
    unit = mg.exact_lengths[0]
    for f in mg.exact_lengths[1:]:
        unit = Fraction(math.gcd(unit.numerator * f.denominator,
                                 f.numerator * unit.denominator),
                        unit.denominator * f.denominator)
    return 2.0 * math.pi / float(unit)


class _SecularAssembler:
    """Precomputed index structure for fast batched M(lambda) assembly."""

    def __init__(self, mg: MetricGraph):
        ne = mg.n_edges
        self.dim = 2 * ne
        incidence = {}
        for ei, (u, v, L) in enumerate(mg.edges):
            incidence.setdefault(u, []).append((ei, True))
            incidence.setdefault(v, []).append((ei, False))
        if set(incidence) != set(range(mg.n_vertices)):
            raise StructuralError("metric graph has an isolated vertex")
        terms = []   # (row, col, func, edge, coef); func 0=1, 1=sin, 2=cos
        row = 0

        def value_terms(ei, at_start):
            if at_start:
                return [(ne + ei, 0, 1.0)]                  # b_e
            return [(ei, 1, 1.0), (ne + ei, 2, 1.0)]        # a sinL + b cosL

        def deriv_terms(ei, at_start):
            if at_start:
                return [(ei, 0, 1.0)]                       # +a (u'(0)/lambda)
            return [(ei, 2, -1.0), (ne + ei, 1, 1.0)]       # -a cosL + b sinL

        for v in range(mg.n_vertices):
            inc = incidence[v]
            if v in mg.dirichlet:
                for (ei, at_start) in inc:
                    for (col, func, coef) in value_terms(ei, at_start):
                        terms.append((row, col, func, ei, coef))
                    row += 1
            else:
                e0 = inc[0]
                for (ei, at_start) in inc[1:]:
                    for (col, func, coef) in value_terms(*e0):
                        terms.append((row, col, func, e0[0], coef))
                    for (col, func, coef) in value_terms(ei, at_start):
                        terms.append((row, col, func, ei, -coef))
                    row += 1
                for (ei, at_start) in inc:
                    for (col, func, coef) in deriv_terms(ei, at_start):
                        terms.append((row, col, func, ei, coef))
                row += 1
        if row != self.dim:
            raise StructuralError(f"secular system is not square: {row} != {self.dim}")
        flat = [r * self.dim + c for (r, c, _f, _e, _c) in terms]
        assert len(set(flat)) == len(flat)
        self.flat_idx = np.array(flat)
        self.func = np.array([f for (_r, _c, f, _e, _c2) in terms])
        self.edge_idx = np.array([e for (_r, _c, _f, e, _c2) in terms])
        self.coef = np.array([c for (_r, _c, _f, _e, c) in terms])
        self.lengths = np.array([L for (_u, _v, L) in mg.edges])

    def matrices(self, lams: np.ndarray) -> np.ndarray:
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        phase = lams[:, None] * self.lengths[self.edge_idx][None, :]
        vals = np.where(self.func == 0, 1.0,
                        np.where(self.func == 1, np.sin(phase), np.cos(phase)))
        vals = vals * self.coef[None, :]
        out = np.zeros((len(lams), self.dim * self.dim))
        out[:, self.flat_idx] = vals
        return out.reshape(len(lams), self.dim, self.dim)


def build_secular(mg: MetricGraph, lam: float) -> np.ndarray:
    """The square secular matrix M(lambda); singular iff lambda^2 is an eigenvalue."""
    if lam <= 0:
        raise ParameterError("build_secular needs lambda > 0; the basis degenerates at 0")
    return _SecularAssembler(mg).matrices(np.array([lam]))[0]


def singular_values(mg: MetricGraph, lam: float) -> np.ndarray:
    return np.linalg.svd(build_secular(mg, lam), compute_uv=False)


@dataclass
class QSpectrum:
    roots: list                   # (lambda*, multiplicity, sigma_min/sigma_max)
    lam_grid: np.ndarray
    smin_grid: np.ndarray         # normalized smallest singular value on the grid
    convention: str = CONV_RESISTANCE
    params: dict = field(default_factory=dict)

    def lambdas(self):
        return np.array([lam for (lam, _m, _s) in self.roots])

    def lambda_squared(self):
        return self.lambdas() ** 2


def default_grid_step(mg: MetricGraph) -> float:
    return min(0.01, math.pi * mg.min_length() / 20.0)


def scan_spectrum(mg: MetricGraph, lam_min: float, lam_max: float,
                  grid_step: float | None = None, threshold: float = 1e-8,
                  refine_tol: float = 1e-10, batch: int = 256,
                  max_roots: int | None = None) -> QSpectrum:
    """Locate the metric-graph eigenvalues in [lam_min, lam_max].

    Scans the normalized smallest singular value of M(lambda) on a regular
    grid, brackets each local minimum and refines it by golden-section
    search; a refined minimum is accepted when sigma_min < threshold *
    sigma_max.  Multiplicity counts the singular values under the
    threshold.
    """
    step = default_grid_step(mg) if grid_step is None else float(grid_step)
    nyquist = math.pi * mg.min_length() / 10.0
    if step > nyquist:
        raise ParameterError(
            f"grid step {step} too coarse to resolve the fastest oscillation; "
            f"use at most {nyquist:.6g}")
    lam_min = max(lam_min, 1e-4)
    asm = _SecularAssembler(mg)

    def smin_ratio_batch(lams):
        sv = np.linalg.svd(asm.matrices(lams), compute_uv=False)
        return sv[:, -1] / sv[:, 0]

    grid = np.arange(lam_min, lam_max + step, step)
    vals = np.empty(len(grid))
    for i0 in range(0, len(grid), batch):
        vals[i0:i0 + batch] = smin_ratio_batch(grid[i0:i0 + batch])

    def f(lam):
        return smin_ratio_batch(np.array([lam]))[0]

    roots = []
    for i in range(1, len(grid) - 1):
        if not (vals[i] < vals[i - 1] and vals[i] <= vals[i + 1]):
            continue
        a, b = grid[i - 1], grid[i + 1]
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc, fd = f(c), f(d)
        while b - a > refine_tol:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = f(d)
        lam_star = 0.5 * (a + b)
        sv = np.linalg.svd(asm.matrices(np.array([lam_star]))[0], compute_uv=False)
        ratio = sv[-1] / sv[0]
        if ratio < threshold:
            mult = int(np.sum(sv < threshold * sv[0]))
            roots.append((float(lam_star), mult, float(ratio)))
            if max_roots is not None and len(roots) >= max_roots:
                break
    return QSpectrum(roots=roots, lam_grid=grid, smin_grid=vals)


def qg_eigenfunction(mg: MetricGraph, lam_star: float, threshold: float = 1e-6):
    """Per-edge (a_e, b_e) coefficients of the near-nullspace at lambda*.

    Returns an array of shape (mult, n_edges, 2).  Raises when lambda* is
    not close to singular.  Each returned function is continuous at every
    non-Dirichlet vertex and vanishes at Dirichlet vertices to the
    threshold.
    """
    M = build_secular(mg, lam_star)
    u, s, vt = np.linalg.svd(M)
    mask = s < threshold * s[0]
    if not np.any(mask):
        raise ParameterError(
            f"lambda = {lam_star} is not near-singular (smallest ratio {s[-1]/s[0]:.2e})")
    ne = mg.n_edges
    out = []
    for row in vt[mask.nonzero()[0], :]:
        coeffs = np.stack([row[:ne], row[ne:]], axis=1)
        resid = np.linalg.norm(M @ row)
        assert resid <= 1e-6 * max(1.0, np.linalg.norm(M))
        out.append(coeffs)
    return np.array(out)


def edge_values(mg: MetricGraph, coeffs: np.ndarray, lam: float, samples: int = 33):
    """Sample one eigenfunction along each edge (for plotting and checks)."""
    out = []
    for (u, v, L), (a, b) in zip(mg.edges, coeffs):
        x = np.linspace(0.0, L, samples)
        out.append((u, v, x, a * np.sin(lam * x) + b * np.cos(lam * x)))
    return out


def vertex_values(mg: MetricGraph, coeffs: np.ndarray, lam: float):
    """Eigenfunction values at vertices, averaged over incident edges."""
    acc = np.zeros(mg.n_vertices)
    cnt = np.zeros(mg.n_vertices)
    for (u, v, L), (a, b) in zip(mg.edges, coeffs):
        acc[u] += b
        cnt[u] += 1
        acc[v] += a * math.sin(lam * L) + b * math.cos(lam * L)
        cnt[v] += 1
    return acc / np.maximum(cnt, 1.0)


def renormalize_qg(lam_squared: float, a: float, r: float) -> float:
    """Rescale a metric-graph eigenvalue to the measure-Laplacian scale.

    On first-generation intervals the two operators differ by the factor
    (3 - 5r) / (1 - 3a); at r = a = 1/6 this is 13/3.
    """
    if not 0 < a < 1 / 3:
        raise ParameterError(f"a must lie in (0, 1/3), got {a}")
    if not 0 < r < 0.6:
        raise ParameterError(f"r must lie in (0, 3/5), got {r}")
    return lam_squared * (3.0 - 5.0 * r) / (1.0 - 3.0 * a)


def convention_match_report(graph_by_level: dict, params: ResistanceParams,
                            rtol_accept: float = 1e-2):
    """Compare each length convention's bottom spectrum with golden values.

    graph_by_level maps graph level -> ApproxGraph for the levels present
    in QG_REFERENCE_BOTTOM (any subset).  Returns a dict with per-convention
    worst relative errors and the selected convention, or None if nothing
    matches within rtol_accept.
    """
    report = {"conventions": {}, "selected": None, "rtol_accept": rtol_accept}
    best = None
    for conv in CONVENTIONS:
        worst = 0.0
        detail = {}
        ok = True
        for level, graph in sorted(graph_by_level.items()):
            ref = QG_REFERENCE_BOTTOM.get(level)
            if ref is None:
                continue
            mg = build_metric_graph(graph, params, conv)
            lam_max = math.sqrt(ref[-1]) * 1.25
            qs = scan_spectrum(mg, 1e-3, lam_max, max_roots=len(ref) + 2)
            got = qs.lambda_squared()
            if len(got) < len(ref):
                ok = False
                detail[level] = {"error": "too few roots found",
                                 "found": [round(float(x), 6) for x in got]}
                continue
            errs = np.abs(got[:len(ref)] - np.array(ref)) / np.array(ref)
            detail[level] = {"lambda_squared": [round(float(x), 6) for x in got[:len(ref)]],
                             "reference": list(ref),
                             "max_rel_err": float(errs.max())}
            worst = max(worst, float(errs.max()))
        report["conventions"][conv] = {"matched": ok and worst <= rtol_accept,
                                       "worst_rel_err": worst if ok else None,
                                       "levels": detail}
        if ok and worst <= rtol_accept and (best is None or worst < best[1]):
            best = (conv, worst)
    if best is not None:
        report["selected"] = best[0]
    return report
