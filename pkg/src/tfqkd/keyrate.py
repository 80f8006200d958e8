"""Coherent-state protocol (Protocol 3) key rates, alpha optimization and loss scans."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from tfqkd.channel import KEY_PATTERNS, ChannelParams, Pattern, bit_error_x, p_xx_total
from tfqkd.decoy_lp import (
    DEFAULT_DECOYS,
    DecoyObservations,
    YieldBounds,
    exact_yield_bounds,
    yield_upper_bounds,
)
from tfqkd.numerics import binary_entropy
from tfqkd.phase_error import TruncationSets, phase_error_upper

log = logging.getLogger(__name__)

ALPHA_SQ_MIN = 1e-5
ALPHA_SQ_MAX = 1.0
ALPHA_GRID_POINTS = 40
ALPHA_REL_TOL = 1e-3
_INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class PatternRate:
    """Rate contribution of one key pattern; ``rate`` is not clamped."""

    pattern: Pattern
    p_xx: float
    e_x: float
    e_z_upp: float
    rate: float
    degenerate: bool = False


@dataclass
class KeyRatePoint:
    """One evaluated operating point.

    ``rate`` sums max(R_pattern, 0) over both key patterns. ``error`` holds a
    message when the point could not be evaluated; numeric fields are then nan.
    """

    loss_db: float
    alpha_sq: float
    patterns: dict[Pattern, PatternRate] = field(default_factory=dict)
    rate: float = 0.0
    plob: float = math.nan
    error: str | None = None

    @property
    def alpha(self) -> float:
        return math.sqrt(self.alpha_sq)


def plob_bound(eta: float) -> float:
    """Repeaterless secret-key capacity -log2(1 - eta) of a pure-loss channel."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"PLOB bound needs eta in (0, 1), got {eta}")
    return -math.log1p(-eta) / math.log(2)


def key_rate_pattern(pattern: Pattern, alpha: float, ch: ChannelParams, bounds: YieldBounds,
                     sets: TruncationSets) -> PatternRate:
    """p_XX [1 - h(e_X) - h(min(1/2, e_Z^upp))] for one key pattern, unclamped.

    Degenerate inputs (no single-click probability) give a zero contribution
    flagged as degenerate.
    """
    pattern = Pattern(*pattern)
    p_xx = p_xx_total(pattern, alpha, ch)
    if p_xx <= 0.0:
        return PatternRate(pattern, p_xx, math.nan, math.nan, 0.0, degenerate=True)
    e_x = bit_error_x(alpha, ch)
    e_z = phase_error_upper(pattern, alpha, bounds.as_mapping(), sets, p_xx)
    rate = p_xx * (1.0 - binary_entropy(e_x) - binary_entropy(min(0.5, e_z)))
    return PatternRate(pattern, p_xx, e_x, e_z, rate)


def key_rate_total(alpha: float, ch: ChannelParams, bounds: dict[Pattern, YieldBounds],
                   sets: TruncationSets, loss_db: float = math.nan) -> KeyRatePoint:
    """Sum of the per-pattern rates, each clamped at zero first."""
    pats = {p: key_rate_pattern(p, alpha, ch, bounds[p], sets) for p in KEY_PATTERNS}
    rate = math.fsum(max(pr.rate, 0.0) for pr in pats.values())
    plob = plob_bound(ch.eta) if ch.eta < 1.0 else math.inf
    return KeyRatePoint(loss_db, alpha * alpha, pats, rate, plob)


def _raw_total(alpha_sq: float, ch, bounds, sets) -> float:
    # unclamped sum keeps a slope for the optimizer where the rate is negative
    alpha = math.sqrt(alpha_sq)
    return math.fsum(key_rate_pattern(p, alpha, ch, bounds[p], sets).rate for p in KEY_PATTERNS)


def _golden_max(f, lo: float, hi: float, rel_tol: float) -> float:
    """Golden-section search for the maximizer of a unimodal f on [lo, hi] (in log space)."""
    a, b = math.log(lo), math.log(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    while b - a > rel_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(math.exp(d))
    return math.exp((a + b) / 2)


def resolve_bounds(ch: ChannelParams, sets: TruncationSets, yield_mode: str = "exact",
                   decoys: Sequence[float] = DEFAULT_DECOYS) -> dict[Pattern, YieldBounds]:
    """Yield bounds for the requested mode: 'exact' yields or decoy 'lp' estimates."""
    if yield_mode == "exact":
        return exact_yield_bounds(ch, sets)
    if yield_mode in ("lp", "decoy"):
        return yield_upper_bounds(DecoyObservations.from_channel(ch, decoys), sets)
    raise ValueError(f"unknown yield mode {yield_mode!r}")


def optimize_alpha(ch: ChannelParams, sets: TruncationSets, yield_mode: str = "exact",
                   decoys: Sequence[float] = DEFAULT_DECOYS, bounds: dict | None = None,
                   grid_points: int = ALPHA_GRID_POINTS, loss_db: float = math.nan,
                   ) -> tuple[float, KeyRatePoint]:
    """Maximize the total rate over alpha^2 in [1e-5, 1].

    A log-spaced grid locates the best cell, then golden-section search
    refines it to relative tolerance 1e-3. If no alpha gives a positive rate
    the grid minimum is returned with rate 0.
    """
    if bounds is None:
        bounds = resolve_bounds(ch, sets, yield_mode, decoys)
    grid = np.geomspace(ALPHA_SQ_MIN, ALPHA_SQ_MAX, grid_points)
    vals = [_raw_total(a2, ch, bounds, sets) for a2 in grid]
    i = int(np.argmax(vals))
    if vals[i] <= 0.0:
        a2 = ALPHA_SQ_MIN
        point = key_rate_total(math.sqrt(a2), ch, bounds, sets, loss_db)
        point.rate = 0.0
        return math.sqrt(a2), point
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid_points - 1)]
    a2 = _golden_max(lambda x: _raw_total(x, ch, bounds, sets), lo, hi, ALPHA_REL_TOL)
    if _raw_total(a2, ch, bounds, sets) < vals[i]:
        a2 = float(grid[i])
    point = key_rate_total(math.sqrt(a2), ch, bounds, sets, loss_db)
    return math.sqrt(a2), point


@dataclass(frozen=True)
class Scenario:
    """Everything but the loss needed to evaluate Protocol 3 at one point."""

    p_d: float = 0.0
    misalignment_percent: float = 0.0
    delta: float = 0.0
    sets: TruncationSets = field(default_factory=TruncationSets.default)
    yield_mode: str = "exact"
    decoys: tuple[float, ...] = DEFAULT_DECOYS
    alpha_sq: float | None = None

    def channel(self, loss_db: float) -> ChannelParams:
        return ChannelParams.from_loss_db(loss_db, self.p_d, self.misalignment_percent, self.delta)


def evaluate(scenario: Scenario, loss_db: float) -> KeyRatePoint:
    ch = scenario.channel(loss_db)
    bounds = resolve_bounds(ch, scenario.sets, scenario.yield_mode, scenario.decoys)
    if scenario.alpha_sq is not None:
        return key_rate_total(math.sqrt(scenario.alpha_sq), ch, bounds, scenario.sets, loss_db)
    return optimize_alpha(ch, scenario.sets, bounds=bounds, loss_db=loss_db)[1]


def scan_loss(scenario: Scenario, losses_db: Iterable[float]) -> list[KeyRatePoint]:
    """Evaluate ``scenario`` at each loss, re-optimizing alpha every time.

    A failing point is recorded with its error message and the scan moves on.
    """
    losses = list(losses_db)
    if any(b < a for a, b in zip(losses, losses[1:])):
        raise ValueError("loss grid must be nondecreasing")
    rows = []
    for loss in losses:
        try:
            rows.append(evaluate(scenario, loss))
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            log.warning("loss %.3f dB failed: %s", loss, exc)
            rows.append(KeyRatePoint(loss, math.nan, rate=math.nan, error=str(exc)))
    return rows
