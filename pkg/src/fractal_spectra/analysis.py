"""Counting functions, exponent fits, Weyl ratios and eigenvalue taxonomy.

The eigenvalue counting function N(x) counts eigenvalues <= x with
multiplicity.  Its log-log slope over the converged bottom of the
spectrum estimates d_S/2; the Weyl ratio N(x)/x^(d_S/2) is bounded and
log-periodically oscillating when the exponent is right.  Dirichlet
eigenvalues split into Dirichlet-only, offspring (rescaled copies of a
previous-level Dirichlet-Neumann eigenvalue by 1/(ra)) and new
Dirichlet-Neumann values.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .geometry import ApproxGraph
from .resistance import ParameterError
from .spectrum import Spectrum

DN_MATCH_RTOL = 1e-6
OFFSPRING_RTOL = 1e-4
SUPPORT_TOL = 1e-8

LABEL_DIRICHLET_ONLY = "dirichlet_only"
LABEL_DN_OFFSPRING = "dn_offspring"
LABEL_DN_NEW = "dn_new"

REGIME_SUB = "sub"
REGIME_CRITICAL = "critical"
REGIME_SUPER = "super"

# default exponent-fit window: the first this many eigenvalues (the part of
# the spectrum that has converged at desk-scale levels)
DEFAULT_FIT_COUNT = 50


@dataclass
class CountingFunction:
    """Right-continuous step function N(x) built from sorted eigenvalues."""

    eigenvalues: np.ndarray    # ascending, multiplicity = repetition

    def __post_init__(self):
        self.eigenvalues = np.sort(np.asarray(self.eigenvalues, dtype=float))

    def __call__(self, x) -> int | np.ndarray:
        if np.isscalar(x):
            return int(bisect_right(self.eigenvalues, x))
        return np.searchsorted(self.eigenvalues, np.asarray(x), side="right")

    @property
    def total(self) -> int:
        return len(self.eigenvalues)

    def jump_points(self):
        return np.unique(self.eigenvalues)


def counting_function(spec: Spectrum) -> CountingFunction:
    if spec.dim == 0:
        raise ParameterError("spectrum is empty")
    return CountingFunction(spec.eigenvalues.copy())


def fit_spectral_exponent(cf: CountingFunction, window: tuple | None = None):
    """Least-squares slope of log N against log x at eigenvalue locations.

    `window` is an (x_lo, x_hi) pair; by default it spans the lowest
    DEFAULT_FIT_COUNT eigenvalues, the converged bottom of the spectrum.
    Returns (slope, stderr).
    """
    ev = cf.eigenvalues
    if window is None:
        hi = ev[min(DEFAULT_FIT_COUNT, len(ev)) - 1]
        window = (ev[0], hi)
    x_lo, x_hi = window
    if x_lo <= 0:
        raise ParameterError("fit window must be positive")
    sel = (ev >= x_lo) & (ev <= x_hi)
    if sel.sum() < 10:
        raise ParameterError(f"fit window contains {int(sel.sum())} eigenvalues, need >= 10")
    idx = np.nonzero(sel)[0]
    xs = np.log(ev[idx])
    ys = np.log(idx + 1.0)       # N at each eigenvalue, with multiplicity
    n = len(xs)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    denom = max(n - 2, 1) * np.sum((xs - xs.mean()) ** 2)
    stderr = math.sqrt(float(np.sum(resid ** 2)) / denom)
    return float(slope), stderr


def weyl_ratio(cf: CountingFunction, d_s: float, x_lo: float | None = None,
               x_hi: float | None = None, points: int = 400):
    """Sample N(x)/x^(d_s/2) on a log-spaced grid; returns (x, ratio)."""
    if d_s <= 0:
        raise ParameterError("spectral dimension must be positive")
    ev = cf.eigenvalues
    lo = ev[0] if x_lo is None else x_lo
    hi = ev[-1] if x_hi is None else x_hi
    xs = np.geomspace(lo, hi, points)
    ratio = cf(xs) / xs ** (d_s / 2.0)
    return xs, ratio


def match_dn(dirichlet: Spectrum, neumann: Spectrum, rtol: float = DN_MATCH_RTOL):
    """Dirichlet cluster values that also occur in the Neumann spectrum."""
    nvals = np.array([v for (v, _m) in neumann.clusters])
    out = []
    for (val, mult) in dirichlet.clusters:
        j = np.searchsorted(nvals, val)
        for cand in (j - 1, j):
            if 0 <= cand < len(nvals) and abs(nvals[cand] - val) <= rtol * max(abs(val), 1e-300):
                out.append((val, mult))
                break
    return out


def classify_dn(dirichlet: Spectrum, neumann: Spectrum, prev_level_dn,
                ra: float, rtol: float = DN_MATCH_RTOL,
                offspring_rtol: float = OFFSPRING_RTOL):
    """Label each Dirichlet cluster.

    A cluster is Dirichlet-Neumann when it matches a Neumann cluster to
    rtol; a D-N cluster is an offspring when some previous-level D-N value
    mu satisfies lambda = mu / (ra) to offspring_rtol, and new otherwise.
    Returns a list of (value, multiplicity, label).
    """
    dn_values = {val for (val, _m) in match_dn(dirichlet, neumann, rtol)}
    prev = sorted(prev_level_dn)
    out = []
    for (val, mult) in dirichlet.clusters:
        if val not in dn_values:
            out.append((val, mult, LABEL_DIRICHLET_ONLY))
            continue
        label = LABEL_DN_NEW
        for mu in prev:
            if abs(val - mu / ra) <= offspring_rtol * max(abs(val), 1e-300):
                label = LABEL_DN_OFFSPRING
                break
        out.append((val, mult, label))
    return out


@dataclass(frozen=True)
class RegimeReport:
    ra: float
    regime: str
    predicted_exponent: float      # growth exponent of N(x) per the regime
    printed_exponent: float        # exponent as printed for the sub regime
                                   # (negative; kept for reference, not asserted)
    log_correction: bool
    d_s: float


def spectral_dimension_sg3(ra: float) -> float:
    """max of the three branch values 2log6/(-log ra), 1, 2log3/log5."""
    if not 0 < ra < 1:
        raise ParameterError(f"ra must lie in (0,1), got {ra}")
    return max(2.0 * math.log(6.0) / (-math.log(ra)), 1.0,
               2.0 * math.log(3.0) / math.log(5.0))


def sg3_regime(r: float, a: float, crit_rtol: float = 1e-12) -> RegimeReport:
    """Asymptotic regime of the SG3 hybrid counting function.

    Thresholds: ra below 1/36 is sub-critical, equal (to crit_rtol) is
    critical with a logarithmic correction, and between 1/36 and 1/9 is
    super-critical with exponent log6 / (-log ra).
    """
    if not 0 < r < 7 / 15:
        raise ParameterError(f"r must lie in (0, 7/15), got {r}")
    if a <= 0:
        raise ParameterError(f"a must be positive, got {a}")
    ra = r * a
    if ra >= 1 / 9:
        raise ParameterError(f"ra must lie below 1/9, got {ra}")
    log35 = math.log(3.0) / math.log(5.0)
    d_s = spectral_dimension_sg3(ra)
    if abs(ra - 1 / 36) <= crit_rtol * (1 / 36):
        return RegimeReport(ra=ra, regime=REGIME_CRITICAL, predicted_exponent=log35,
                            printed_exponent=log35, log_correction=True, d_s=d_s)
    if ra < 1 / 36:
        # the sub regime's printed exponent is negative, inconsistent with a
        # nondecreasing counting function; report the sign-corrected value
        return RegimeReport(ra=ra, regime=REGIME_SUB, predicted_exponent=log35,
                            printed_exponent=-log35, log_correction=False, d_s=d_s)
    expo = math.log(6.0) / (-math.log(ra))
    return RegimeReport(ra=ra, regime=REGIME_SUPER, predicted_exponent=expo,
                        printed_exponent=expo, log_correction=False, d_s=d_s)


def support_classify(eigvec: np.ndarray, graph: ApproxGraph,
                     tol: float = SUPPORT_TOL) -> str | None:
    """Smallest inverted-gasket cell containing the support of a vector.

    The support is the set of vertices with |u| > tol * max|u|.  Returns
    the cell address "owner" or "owner:word" of the deepest gasket
    sub-triangle containing every support vertex, or None when the support
    is empty or not confined to a single gasket.
    """
    eigvec = np.asarray(eigvec, dtype=float)
    peak = np.abs(eigvec).max()
    if peak == 0:
        return None
    support = set(np.nonzero(np.abs(eigvec) > tol * peak)[0])
    if not support:
        return None
    by_owner = {}
    for (owner, word, _k, tri) in graph.invsg_cells:
        d = by_owner.setdefault(owner, {})
        d.setdefault(word, set()).update(tri)
    for owner in sorted(by_owner):
        leaves = by_owner[owner]
        allv = set().union(*leaves.values())
        if not support <= allv:
            continue
        word = ""
        depth = max(len(w) for w in leaves)
        while len(word) < depth:
            stepped = False
            for child in (word + "0", word + "1", word + "2"):
                holder = set().union(*(vs for w, vs in leaves.items()
                                       if w.startswith(child)))
                if support <= holder:
                    word = child
                    stepped = True
                    break
            if not stepped:
                break
        return f"{owner}:{word}" if word else owner
    return None


def count_supported(spec: Spectrum, graph: ApproxGraph, op,
                    tol: float = SUPPORT_TOL):
    """Counting function over eigenpairs supported inside inverted gaskets.

    `op` is the AssembledOperator the spectrum came from (for boundary
    extension).  Returns (CountingFunction, labels) with one address-or-None
    per eigenpair.
    """
    from .spectrum import eigenfunction
    if spec.vectors is None:
        raise ParameterError("spectrum was solved without eigenvectors")
    kept = []
    labels = []
    for i in range(spec.dim):
        vec = eigenfunction(op, spec, i)
        addr = support_classify(vec, graph, tol)
        labels.append(addr)
        if addr is not None:
            kept.append(spec.eigenvalues[i])
    cf = CountingFunction(np.array(kept)) if kept else CountingFunction(np.array([]))
    return cf, labels
