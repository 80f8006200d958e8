"""Decoy-state linear program for upper bounds on photon-number yields.

Observed Z-basis gains are Poisson mixtures of the unknown yields
p_ZZ(k_c, k_d | n_A, n_B). Keeping only the yields in S_cut as unknowns and
bounding the rest between 0 and 1 turns each observation into two linear
inequalities; maximizing one yield subject to them gives its upper bound.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from tfqkd.channel import KEY_PATTERNS, ChannelParams, Pattern, gain_zz, yield_zz
from tfqkd.numerics import poisson_pmf
from tfqkd.phase_error import Pair, TruncationSets

log = logging.getLogger(__name__)

LP_TOL = 1e-9
# coefficients below this fraction of their row maximum are moved into the
# unconstrained remainder; the solver would otherwise drop them itself
PRUNE_REL = 1e-8
DEFAULT_DECOYS = (0.0, 0.001, 0.1)


class Provenance(str, enum.Enum):
    EXACT = "exact"
    LP = "lp"
    TRIVIAL = "trivial"


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED_GUARDED = "unbounded-guarded"


class InfeasibleObservations(RuntimeError):
    """No yield table reproduces the observed gains."""


@dataclass(frozen=True)
class DecoyObservations:
    """Observed Z-basis gains for each pair of decoy intensities.

    ``intensities`` lists (beta_A^2, beta_B^2); ``gains[pattern][i]`` is the
    gain of ``pattern`` at ``intensities[i]``.
    """

    intensities: tuple[tuple[float, float], ...]
    gains: dict[Pattern, tuple[float, ...]]

    def __post_init__(self):
        for ia, ib in self.intensities:
            if ia < 0 or ib < 0:
                raise ValueError(f"decoy intensities must be >= 0, got {(ia, ib)}")
        for pat, g in self.gains.items():
            if len(g) != len(self.intensities):
                raise ValueError(f"pattern {pat}: {len(g)} gains for {len(self.intensities)} intensity pairs")
            if any(not 0.0 <= x <= 1.0 for x in g):
                raise ValueError(f"pattern {pat}: gains must lie in [0, 1]")

    @classmethod
    def from_channel(cls, ch: ChannelParams, decoys: Sequence[float] = DEFAULT_DECOYS,
                     patterns: Iterable[Pattern] = KEY_PATTERNS) -> "DecoyObservations":
        """Gains the honest channel would produce for every pair from ``decoys`` x ``decoys``."""
        pairs = tuple((a, b) for a in decoys for b in decoys)
        gains = {Pattern(*p): tuple(gain_zz(math.sqrt(a), math.sqrt(b), p, ch) for a, b in pairs)
                 for p in patterns}
        return cls(pairs, gains)


@dataclass
class LPProblem:
    """max c.x  s.t.  A_ub x <= b_ub,  0 <= x <= 1.

    Variables are the yields at ``variables`` (the S_cut pairs) in order.
    """

    variables: list[Pair]
    target: Pair
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray

    @property
    def n_constraints(self) -> int:
        return self.A_ub.shape[0]


def _poisson_row(intensity: float, m_cut: int) -> np.ndarray:
    return np.array([poisson_pmf(intensity, n) for n in range(m_cut + 1)])


def build_lp(target: Pair, obs: DecoyObservations, sets: TruncationSets,
             pattern: Pattern = KEY_PATTERNS[0]) -> LPProblem:
    """Linear program maximizing the yield at ``target`` given the observed gains.

    For every intensity pair, with P = P_A(n_A) P_B(n_B) over S_cut:
      gain >= sum_S_cut y P          (drop the nonnegative rest)
      1 - gain >= sum_S_cut (1 - y) P  (the rest is at most its Poisson mass)

    Pairs whose weight P is negligible within a row are treated like pairs
    outside S_cut for that row. Both inequalities only get weaker, so the
    problem remains a relaxation and its optimum a valid upper bound.
    """
    variables = sets.s_cut
    index = {p: i for i, p in enumerate(variables)}
    if tuple(target) not in index:
        raise ValueError(f"target {tuple(target)} is not in S_cut (m_cut={sets.m_cut})")
    c = np.zeros(len(variables))
    c[index[tuple(target)]] = 1.0
    gains = obs.gains.get(Pattern(*pattern), ()) if obs.intensities else ()
    rows = []
    rhs = []
    for (ia, ib), g in zip(obs.intensities, gains):
        pa = _poisson_row(ia, sets.m_cut)
        pb = _poisson_row(ib, sets.m_cut)
        coef = np.array([pa[a] * pb[b] for a, b in variables])
        coef[coef < PRUNE_REL * coef.max()] = 0.0
        mass = math.fsum(coef)
        # y.P <= g
        rows.append(coef)
        rhs.append(g)
        # 1 - g >= mass - y.P  <=>  -y.P <= 1 - g - mass
        rows.append(-coef)
        rhs.append((1.0 - g) - mass)
    A = np.array(rows).reshape(len(rows), len(variables))
    return LPProblem(variables, tuple(target), c, A, np.array(rhs))


def _dual_certificate(c: np.ndarray, A: np.ndarray, b: np.ndarray, lam: np.ndarray) -> float:
    """Weak-duality bound max c.x <= lam.b + sum(max(0, c - A^T lam)) over 0 <= x <= 1, any lam >= 0."""
    lam = np.maximum(lam, 0.0)
    reduced = c - A.T @ lam
    return math.fsum(np.concatenate([lam * b, np.maximum(reduced, 0.0)]))


def solve_lp(problem: LPProblem) -> tuple[float, LPStatus]:
    """Maximize the target yield. Box bounds make the problem bounded.

    Rows are rescaled by their largest coefficient before solving. The value
    returned is not the solver's primal objective but the weak-duality bound
    built from its dual multipliers, which is a valid upper bound whatever
    the solver's feasibility tolerances were.
    """
    n = len(problem.variables)
    if problem.n_constraints == 0:
        return 1.0, LPStatus.OPTIMAL
    A = problem.A_ub.copy()
    b = problem.b_ub.copy()
    scale = np.max(np.abs(A), axis=1)
    scale[scale == 0] = 1.0
    A /= scale[:, None]
    b /= scale
    res = None
    for method, tol in _SOLVER_ATTEMPTS:
        res = linprog(-problem.c, A_ub=A, b_ub=b, bounds=[(0.0, 1.0)] * n, method=method,
                      options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol})
        if res.status in (0, 2, 3):
            break
        log.debug("LP attempt %s (tol %g) ended with status %d: %s", method, tol, res.status, res.message)
    if res.status == 2:
        return math.nan, LPStatus.INFEASIBLE
    if res.status == 3:
        return 1.0, LPStatus.UNBOUNDED_GUARDED
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    lam = -np.asarray(res.ineqlin.marginals)
    bound = _dual_certificate(problem.c, A, b, lam)
    if bound < -res.fun - 1e-6:
        log.debug("dual certificate %.3e below primal %.3e", bound, -res.fun)
    return float(min(1.0, max(0.0, bound))), LPStatus.OPTIMAL


# Fallbacks for solver breakdowns; the returned bound is certified by duality
# either way, so tolerances only affect tightness.
_SOLVER_ATTEMPTS = (
    ("highs-ds", LP_TOL / 10),
    ("highs-ipm", LP_TOL / 10),
    ("highs-ds", LP_TOL),
)


@dataclass
class YieldBounds:
    """Upper bounds on p_ZZ(pattern | n_A, n_B) with their provenance.

    Pairs not listed are trivially bounded by 1.
    """

    pattern: Pattern
    bounds: dict[Pair, tuple[float, Provenance]] = field(default_factory=dict)

    def __getitem__(self, pair: Pair) -> float:
        return self.bounds.get(tuple(pair), (1.0, Provenance.TRIVIAL))[0]

    def provenance(self, pair: Pair) -> Provenance:
        return self.bounds.get(tuple(pair), (1.0, Provenance.TRIVIAL))[1]

    def as_mapping(self) -> dict[Pair, float]:
        return {k: v for k, (v, _) in self.bounds.items()}


def _needed_pairs(sets: TruncationSets) -> list[Pair]:
    return sorted(set(sets.photon_pairs(0)) | set(sets.photon_pairs(1)))


def exact_yield_bounds(ch: ChannelParams, sets: TruncationSets,
                       patterns: Iterable[Pattern] = KEY_PATTERNS) -> dict[Pattern, YieldBounds]:
    """Infinite-decoy idealization: the bounds are the true yields."""
    out = {}
    for p in patterns:
        p = Pattern(*p)
        out[p] = YieldBounds(p, {pair: (yield_zz(*pair, p, ch), Provenance.EXACT)
                                 for pair in _needed_pairs(sets)})
    return out


def yield_upper_bounds(obs: DecoyObservations, sets: TruncationSets,
                       patterns: Iterable[Pattern] = KEY_PATTERNS) -> dict[Pattern, YieldBounds]:
    """Solve one LP per needed photon-number pair and per pattern.

    Raises InfeasibleObservations if the gains are inconsistent.
    """
    out = {}
    cache: dict[tuple, float] = {}
    for p in patterns:
        p = Pattern(*p)
        yb = YieldBounds(p)
        key_gains = obs.gains.get(p, ())
        for pair in _needed_pairs(sets):
            key = (pair, key_gains)
            if key not in cache:
                val, status = solve_lp(build_lp(pair, obs, sets, p))
                if status is LPStatus.INFEASIBLE:
                    raise InfeasibleObservations(f"no yield table matches the gains of pattern {p}")
                cache[key] = val
            yb.bounds[pair] = (cache[key], Provenance.LP)
        out[p] = yb
    return out
