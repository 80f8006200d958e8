"""Key rates for twin-field type QKD with coherent states and threshold detectors.

Modules:
    numerics: entropy, Poisson weights, Bessel I0, truncated series.
    channel: closed-form gains and yields of the symmetric lossy channel.
    fock_oracle: brute-force Fock-space simulation used as a cross-check.
    ideal_protocol: the single-photon (vacuum/one-photon qubit) protocol.
    phase_error: cat-state coefficients and the phase-error upper bound.
    decoy_lp: decoy-state linear programs for yield upper bounds.
    keyrate: coherent-state key rates, amplitude optimization, loss scans.
    cli: command line runner.
"""

from tfqkd.channel import KEY_PATTERNS, ChannelParams, Pattern
from tfqkd.keyrate import Scenario, evaluate, plob_bound, scan_loss
from tfqkd.phase_error import TruncationSets

__all__ = ["KEY_PATTERNS", "ChannelParams", "Pattern", "Scenario", "TruncationSets", "evaluate",
           "plob_bound", "scan_loss"]
__version__ = "0.1.0"
