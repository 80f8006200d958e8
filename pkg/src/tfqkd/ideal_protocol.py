"""Single-photon-source protocol (Protocol 1, and its prepare-and-measure twin).

Each party holds |phi_q> = sqrt(q)|0>|0> + sqrt(1-q)|1>|1> (qubit, pulse).
Without dark counts or misalignment the rates have closed forms; otherwise
the conditional qubit states are obtained by exact enumeration through
:mod:`tfqkd.fock_oracle`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from tfqkd.channel import KEY_PATTERNS, ChannelParams, Pattern
from tfqkd.fock_oracle import (
    ChannelOutput,
    apply_losses_and_misalignment,
    fock_input,
    pattern_distribution,
    vacuum_projections,
)
from tfqkd.numerics import binary_entropy

Q_TOL = 1e-4


@dataclass(frozen=True)
class IdealPoint:
    """Protocol 1 statistics for one (q, eta) point and one key pattern.

    r0, r1, r2 split the single-click probability of one detector by how many
    photons reach the station; r0 is nonzero only with dark counts.
    R is the rate summed over both key patterns, clamped at zero.
    """

    q: float
    eta: float
    r1: float
    r2: float
    e_X: float
    e_Z: float
    R: float
    r0: float = 0.0

    @property
    def r(self) -> float:
        return self.r0 + self.r1 + self.r2


def _check(q: float, eta: float) -> None:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")


def single_click_rates(q: float, eta: float) -> tuple[float, float]:
    """Probabilities (r1, r2) that one given detector alone clicks, split by photon number."""
    _check(q, eta)
    t = math.sqrt(eta)
    r1 = t * (1 - q) * q + (1 - q) ** 2 * t * (1 - t)
    r2 = 0.5 * (1 - q) ** 2 * eta
    return r1, r2


def error_rates_ideal(q: float, eta: float) -> tuple[float, float]:
    """(e_X, e_Z) for the ideal channel; e_Z = 2 e_X."""
    r1, r2 = single_click_rates(q, eta)
    r = r1 + r2
    if r <= 0.0:
        raise ZeroDivisionError("no single-click events at q = 1")
    t = math.sqrt(eta)
    lost = (1 - q) * (1 - t)
    # q + lost vanishes only at q = 0, eta = 1, where r1 = 0 as well
    vac_fraction = lost / (q + lost) if r1 > 0 else 0.0
    e_Z = (r1 / r) * vac_fraction + r2 / r
    return e_Z / 2, e_Z


def _raw_rate(q: float, eta: float) -> float:
    r1, r2 = single_click_rates(q, eta)
    r = r1 + r2
    if r <= 0.0:
        return 0.0
    e_X, e_Z = error_rates_ideal(q, eta)
    return 2 * r * (1 - binary_entropy(e_X) - binary_entropy(e_Z))


def key_rate_protocol1(q: float, eta: float) -> float:
    """Asymptotic key rate per pulse, max{0, 2r [1 - h(e_X) - h(e_Z)]}."""
    _check(q, eta)
    return max(0.0, _raw_rate(q, eta))


# qubit basis order |00>, |01>, |10>, |11> (Alice, Bob)
_BASIS = list(itertools.product((0, 1), repeat=2))


@lru_cache(maxsize=256)
def _conditional_kernels(ch: ChannelParams) -> tuple[dict[Pattern, np.ndarray], dict[Pattern, np.ndarray]]:
    """q-independent part of the conditional qubit operators.

    K[pattern][x, y] = Tr[E_pattern Channel(|y><x|)] for photon-number inputs
    x, y in {0,1}^2. With w = (sqrt(q), sqrt(1-q)) per party the unnormalized
    qubit state after announcing ``pattern`` is W K W, W = diag of w products.

    Also returns A[pattern][x, n]: the diagonal K[x, x] split by the number n
    of photons that survive the channel.
    """
    outs = [apply_losses_and_misalignment(fock_input(a, b), ch) for a, b in _BASIS]
    kernels = {p: np.zeros((4, 4), dtype=complex) for p in KEY_PATTERNS}
    arrivals = {p: np.zeros((4, 3)) for p in KEY_PATTERNS}
    for x, y in itertools.product(range(4), repeat=2):
        dist = pattern_distribution(vacuum_projections(outs[y], outs[x]), ch.p_d)
        for p in KEY_PATTERNS:
            kernels[p][x, y] = dist[p]
    for x, (a, b) in enumerate(_BASIS):
        for lost, branch in outs[x].branches.items():
            single = ChannelOutput({lost: branch})
            dist = pattern_distribution(vacuum_projections(single), ch.p_d)
            for p in KEY_PATTERNS:
                arrivals[p][x, a + b - sum(lost)] += dist[p].real
    return kernels, arrivals


def _qubit_state(q: float, ch: ChannelParams, pattern: Pattern) -> np.ndarray:
    w = np.array([math.sqrt(q), math.sqrt(1 - q)])
    weights = np.array([w[a] * w[b] for a, b in _BASIS])
    return weights[:, None] * _conditional_kernels(ch)[0][pattern] * weights[None, :]


def _arrival_split(q: float, ch: ChannelParams, pattern: Pattern) -> list[float]:
    w = np.array([math.sqrt(q), math.sqrt(1 - q)])
    weights_sq = np.array([(w[a] * w[b]) ** 2 for a, b in _BASIS])
    return [float(v) for v in weights_sq @ _conditional_kernels(ch)[1][pattern]]


_H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
_HH = np.kron(_H, _H)


def _pattern_stats(q: float, ch: ChannelParams, pattern: Pattern) -> tuple[float, float, float]:
    rho = _qubit_state(q, ch, pattern)
    p = float(rho.trace().real)
    diag = rho.diagonal().real
    if p <= 0.0:
        # nothing announced: no correlation to exploit
        return 0.0, 0.5, 0.5
    rho_x = _HH @ rho @ _HH
    px = rho_x.diagonal().real
    # X outcome order ++, +-, -+, --; pattern 10 keys b_A = b_B, pattern 01 keys b_A != b_B
    mismatch = px[1] + px[2] if pattern == (1, 0) else px[0] + px[3]
    e_X = float(mismatch / p)
    e_Z = float((diag[0] + diag[3]) / p)
    return p, e_X, e_Z


def _imperfect_raw_rate(q: float, ch: ChannelParams) -> float:
    total = 0.0
    for pat in KEY_PATTERNS:
        p, e_X, e_Z = _pattern_stats(q, ch, pat)
        if p > 0:
            total += p * (1 - binary_entropy(e_X) - binary_entropy(e_Z))
    return total


def protocol1_with_imperfections(q: float, eta: float, p_d: float = 0.0, theta_A: float = 0.0,
                                 theta_B: float = 0.0, delta: float = 0.0) -> IdealPoint:
    """Protocol 1 with dark counts, polarization misalignment and phase mismatch.

    The rotation model is the same as the coherent-state channel model. The
    returned statistics are those of pattern (1, 0); R sums both key patterns.
    """
    _check(q, eta)
    ch = ChannelParams(eta, p_d, theta_A, theta_B, delta)
    _, e_X, e_Z = _pattern_stats(q, ch, KEY_PATTERNS[0])
    r0, r1, r2 = _arrival_split(q, ch, KEY_PATTERNS[0])
    R = max(0.0, _imperfect_raw_rate(q, ch))
    return IdealPoint(q=q, eta=eta, r1=r1, r2=r2, e_X=e_X, e_Z=e_Z, R=R, r0=r0)


def _golden_refine(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    res = minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                          options={"xatol": tol / 4})
    return float(res.x), float(-res.fun)


def optimize_q(eta: float, p_d: float = 0.0, theta_A: float = 0.0, theta_B: float = 0.0,
               delta: float = 0.0) -> tuple[float, float]:
    """Vacuum weight q maximizing the Protocol 1 rate at transmittance eta.

    A 0.01-step scan brackets the optimum, then a bounded scalar search
    refines it to 1e-4 in q. Returns (1.0, 0.0) if no q gives a positive rate.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if p_d == 0.0 and theta_A == 0.0 and theta_B == 0.0 and delta == 0.0:
        def f(q): return _raw_rate(q, eta)
    else:
        ch = ChannelParams(eta, p_d, theta_A, theta_B, delta)
        def f(q): return _imperfect_raw_rate(q, ch)
    grid = np.linspace(0.01, 0.99, 99)
    vals = [f(q) for q in grid]
    i = int(np.argmax(vals))
    if vals[i] <= 0.0:
        return 1.0, 0.0
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    q_opt, r_opt = _golden_refine(f, lo, hi, Q_TOL)
    if r_opt < vals[i]:
        q_opt, r_opt = float(grid[i]), vals[i]
    return q_opt, max(0.0, r_opt)
