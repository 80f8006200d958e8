"""Cat-state coefficients and the upper bound on the phase-error rate.

The bound combines yield upper bounds on the photon-number pairs listed in the
sets S_0, S_1 with a residual term Delta_j that covers every other pair with
the trivial bound p_ZZ <= 1. Series truncations always err upward, so the
result stays a valid upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

from tfqkd.numerics import TruncatedSeries, geometric_tail

N_TRUNC = 60
DEFAULT_M_CUT = 10

Pair = tuple[int, int]


def cat_coefficient(j: int, n: int, alpha: float) -> float:
    """Coefficient c_n^(j) of |n> in the unnormalized even (j=0) / odd (j=1) cat state."""
    if j not in (0, 1):
        raise ValueError(f"parity must be 0 or 1, got {j}")
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    if n % 2 != j:
        return 0.0
    if alpha == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-alpha * alpha / 2 + n * math.log(alpha) - 0.5 * math.lgamma(n + 1))


@dataclass(frozen=True)
class CatCoefficients:
    """Nonzero cat coefficients up to photon number ``n_trunc``.

    ``parity_terms[j][m]`` holds c_{2m+j}^(j); ``tails[j]`` bounds the sum of
    the coefficients beyond the table.
    """

    alpha: float
    n_trunc: int
    parity_terms: tuple[tuple[float, ...], tuple[float, ...]]
    tails: tuple[float, float]

    def c(self, j: int, n: int) -> float:
        if n % 2 != j:
            return 0.0
        m = (n - j) // 2
        terms = self.parity_terms[j]
        return terms[m] if m < len(terms) else cat_coefficient(j, n, self.alpha)

    def series(self, j: int) -> TruncatedSeries:
        return TruncatedSeries(self.parity_terms[j], self.tails[j])


@lru_cache(maxsize=4096)
def cat_coefficients(alpha: float, n_trunc: int = N_TRUNC) -> CatCoefficients:
    """Tabulate c_n^(j) for n <= n_trunc with a geometric bound on the remainder.

    Consecutive same-parity ratios alpha^2 / sqrt((n+1)(n+2)) decrease in n,
    so the first omitted ratio majorizes all later ones.
    """
    if alpha < 0 or not math.isfinite(alpha):
        raise ValueError(f"amplitude must be finite and >= 0, got {alpha}")
    parity_terms = []
    tails = []
    a2 = alpha * alpha
    for j in (0, 1):
        ns = range(j, n_trunc + 1, 2)
        terms = tuple(cat_coefficient(j, n, alpha) for n in ns)
        n_next = (ns[-1] + 2) if len(ns) else j
        first_out = cat_coefficient(j, n_next, alpha)
        ratio = a2 / math.sqrt((n_next + 1) * (n_next + 2))
        if ratio >= 1.0:
            raise ValueError(f"n_trunc={n_trunc} too small for alpha={alpha}")
        parity_terms.append(terms)
        tails.append(geometric_tail(first_out, ratio))
    return CatCoefficients(alpha, n_trunc, (parity_terms[0], parity_terms[1]), (tails[0], tails[1]))


@dataclass(frozen=True)
class TruncationSets:
    """Which photon-number pairs get a nontrivial yield bound.

    Attributes:
        S0, S1: (m_A, m_B) index pairs; pair (m_A, m_B) in S_j refers to the
            yield at photon numbers (2 m_A + j, 2 m_B + j).
        m_cut: S_cut = {(n_A, n_B) : n_A, n_B <= m_cut}, the unknowns of the
            decoy linear program.
    """

    S0: frozenset = field(default_factory=frozenset)
    S1: frozenset = field(default_factory=frozenset)
    m_cut: int = DEFAULT_M_CUT

    def __post_init__(self):
        object.__setattr__(self, "S0", frozenset(tuple(p) for p in self.S0))
        object.__setattr__(self, "S1", frozenset(tuple(p) for p in self.S1))
        for j, pairs in ((0, self.S0), (1, self.S1)):
            for m_A, m_B in pairs:
                if m_A < 0 or m_B < 0:
                    raise ValueError(f"negative index pair {(m_A, m_B)} in S_{j}")
                if 2 * m_A + j > self.m_cut or 2 * m_B + j > self.m_cut:
                    raise ValueError(
                        f"S_{j} pair {(m_A, m_B)} maps to photon numbers outside S_cut (m_cut={self.m_cut})")

    def set_for(self, j: int) -> frozenset:
        return self.S0 if j == 0 else self.S1

    def photon_pairs(self, j: int) -> list[Pair]:
        return sorted((2 * a + j, 2 * b + j) for a, b in self.set_for(j))

    @property
    def s_cut(self) -> list[Pair]:
        return [(a, b) for a in range(self.m_cut + 1) for b in range(self.m_cut + 1)]

    @classmethod
    def default(cls, m_cut: int = DEFAULT_M_CUT) -> "TruncationSets":
        return cls(frozenset({(0, 0), (0, 1), (1, 0), (1, 1)}),
                   frozenset({(0, 0), (0, 1), (1, 0)}), m_cut)

    @classmethod
    def from_n_max(cls, n_max: int, m_cut: int | None = None) -> "TruncationSets":
        """S_j = {(m_A, m_B) : 2 m_A + j + 2 m_B + j <= n_max}."""
        if n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {n_max}")
        pairs = []
        for j in (0, 1):
            pairs.append(frozenset((a, b) for a in range(n_max + 1) for b in range(n_max + 1)
                                   if 2 * a + 2 * b + 2 * j <= n_max))
        return cls(pairs[0], pairs[1], n_max if m_cut is None else m_cut)


def residual_delta(j: int, alpha: float, sets: TruncationSets, n_trunc: int = N_TRUNC) -> float:
    """Delta_j = sum over (m_A, m_B) not in S_j of c_{2m_A+j}^(j) c_{2m_B+j}^(j).

    The pairs inside the table are summed directly (no cancellation against
    the set members); everything touching the tail is bounded via the
    geometric majorant.
    """
    cat = cat_coefficients(alpha, n_trunc)
    terms = cat.parity_terms[j]
    tail = cat.tails[j]
    inside = set(sets.set_for(j))
    parts = []
    for a, ca in enumerate(terms):
        if ca == 0.0:
            continue
        for b, cb in enumerate(terms):
            if (a, b) not in inside:
                parts.append(ca * cb)
    head = math.fsum(terms)
    # pairs with at least one index past the table: 2 * head * tail + tail^2
    parts.append(2 * head * tail + tail * tail)
    return math.fsum(parts)


def phase_error_upper(pattern, alpha: float, yield_upper: Mapping[Pair, float], sets: TruncationSets,
                      p_xx: float, n_trunc: int = N_TRUNC) -> float:
    """Upper bound on the phase-error rate for one key pattern.

    ``yield_upper`` maps photon-number pairs (n_A, n_B) to upper bounds on
    p_ZZ(pattern | n_A, n_B); only pairs (2 m_A + j, 2 m_B + j) with
    (m_A, m_B) in S_j are read. Missing entries count as 1. The caller clamps
    the result at 1/2 before taking entropies.
    """
    if p_xx <= 0.0:
        raise ZeroDivisionError("phase-error bound undefined for p_XX <= 0")
    total = []
    for j in (0, 1):
        inner = []
        for m_A, m_B in sorted(sets.set_for(j)):
            n_A, n_B = 2 * m_A + j, 2 * m_B + j
            y = min(1.0, max(0.0, yield_upper.get((n_A, n_B), 1.0)))
            inner.append(cat_coefficient(j, n_A, alpha) * cat_coefficient(j, n_B, alpha) * math.sqrt(y))
        inner.append(residual_delta(j, alpha, sets, n_trunc))
        total.append(math.fsum(inner) ** 2)
    return math.fsum(total) / p_xx
