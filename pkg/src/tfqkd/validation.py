"""Cross-module consistency suites run by ``tfqkd validate``."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from tfqkd.channel import KEY_PATTERNS, ChannelParams, gain_xx, yield_zz
from tfqkd.decoy_lp import DEFAULT_DECOYS, DecoyObservations, LPStatus, build_lp, solve_lp
from tfqkd.fock_oracle import oracle_gain_xx, oracle_yield
from tfqkd.ideal_protocol import error_rates_ideal
from tfqkd.phase_error import TruncationSets

ORACLE_TOL = 1e-9
IDENTITY_TOL = 1e-12


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def channel_grid() -> list[ChannelParams]:
    """27 channels: 3 transmittances x 3 dark-count levels x 3 misalignment settings."""
    angles = [(0.0, 0.0), (math.asin(math.sqrt(0.02)), -math.asin(math.sqrt(0.02))), (0.1, 0.4)]
    return [ChannelParams(eta, p_d, tA, tB)
            for eta, p_d, (tA, tB) in itertools.product([1.0, 0.1, 1e-3], [0.0, 1e-6, 1e-2], angles)]


def check_oracle_yields() -> Check:
    worst = 0.0
    for ch in channel_grid():
        for n_A, n_B, pat in itertools.product(range(4), range(4), KEY_PATTERNS):
            worst = max(worst, abs(yield_zz(n_A, n_B, pat, ch) - oracle_yield(n_A, n_B, pat, ch)))
    return Check("yield_zz vs Fock oracle (n_A, n_B <= 3, 27 channels)", worst < ORACLE_TOL,
                 f"max |diff| = {worst:.3e} (tol {ORACLE_TOL:g})")


def check_oracle_gains() -> Check:
    worst = 0.0
    for ch in channel_grid():
        for a2, b_A, b_B, pat in itertools.product([0.01, 0.1, 0.3], (0, 1), (0, 1), KEY_PATTERNS):
            alpha = math.sqrt(a2)
            worst = max(worst, abs(gain_xx(b_A, b_B, pat, alpha, ch) - oracle_gain_xx(b_A, b_B, pat, alpha, ch)))
    return Check("gain_xx vs Fock oracle (alpha^2 in {0.01, 0.1, 0.3})", worst < ORACLE_TOL,
                 f"max |diff| = {worst:.3e} (tol {ORACLE_TOL:g})")


def check_delta_invariance() -> Check:
    worst = 0.0
    for ch in channel_grid()[::3]:
        for n_A, n_B, pat in itertools.product(range(4), range(4), KEY_PATTERNS):
            vals = [oracle_yield(n_A, n_B, pat, ChannelParams(ch.eta, ch.p_d, ch.theta_A, ch.theta_B, d))
                    for d in (0.0, 0.1, 0.2)]
            worst = max(worst, max(vals) - min(vals))
    return Check("oracle yields independent of phase mismatch", worst < IDENTITY_TOL,
                 f"max spread = {worst:.3e} (tol {IDENTITY_TOL:g})")


def check_error_identity() -> Check:
    worst = 0.0
    for q in np.linspace(0.0, 0.99, 100):
        for eta in np.geomspace(1e-6, 1.0, 100):
            e_X, e_Z = error_rates_ideal(float(q), float(eta))
            worst = max(worst, abs(e_Z - 2 * e_X))
    return Check("e_Z = 2 e_X on a 100 x 100 (q, eta) grid", worst < IDENTITY_TOL,
                 f"max |e_Z - 2 e_X| = {worst:.3e}")


def check_lp_soundness() -> Check:
    sets = TruncationSets.default()
    targets = [(a, b) for a in range(5) for b in range(5) if a + b <= 4]
    worst = math.inf
    infeasible = 0
    for loss, p_d in itertools.product([0, 20, 40, 60, 80], [1e-8, 1e-6]):
        ch = ChannelParams.from_loss_db(loss, p_d, 2.0)
        obs = DecoyObservations.from_channel(ch, DEFAULT_DECOYS)
        for pat, t in itertools.product(KEY_PATTERNS, targets):
            val, status = solve_lp(build_lp(t, obs, sets, pat))
            if status is not LPStatus.OPTIMAL:
                infeasible += 1
                continue
            worst = min(worst, val - yield_zz(*t, pat, ch))
    n = 10 * len(KEY_PATTERNS) * len(targets)
    return Check("LP upper bounds dominate true yields", worst >= 0.0 and infeasible == 0,
                 f"{n} bounds, {infeasible} not optimal, min (bound - yield) = {worst:.3e}")


SUITES: dict[str, list[Callable[[], Check]]] = {
    "oracle": [check_oracle_yields, check_oracle_gains, check_delta_invariance],
    "identities": [check_error_identity],
    "lp-soundness": [check_lp_soundness],
}


def run_suite(name: str) -> list[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return [fn() for fn in SUITES[name]]
