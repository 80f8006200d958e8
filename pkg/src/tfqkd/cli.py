"""Command line entry point: scenario runs to CSV and validation suites.

Usage::

    tfqkd run --protocol 3 --pd 1e-7 --loss 0:100:1 --misalignment 2 --yield-mode exact -o rates.csv
    tfqkd run --config scenario.cfg --pd 1e-6
    tfqkd validate oracle

A config file holds ``key = value`` lines (``#`` starts a comment) using the
long flag names with dashes or underscores; flags given on the command line
win over the file.

Exit codes: 0 success, 1 validation or evaluation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass

from tfqkd.channel import KEY_PATTERNS, misalignment_angle
from tfqkd.decoy_lp import DEFAULT_DECOYS
from tfqkd.ideal_protocol import (
    error_rates_ideal,
    key_rate_protocol1,
    optimize_q,
    protocol1_with_imperfections,
    single_click_rates,
)
from tfqkd.keyrate import Scenario, plob_bound, scan_loss
from tfqkd.phase_error import DEFAULT_M_CUT, TruncationSets
from tfqkd.validation import SUITES, run_suite

log = logging.getLogger("tfqkd")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

CSV_COLUMNS = ["loss_db", "alpha_sq_opt", "p_xx_10", "p_xx_01", "e_x", "e_z_upp_10", "e_z_upp_01",
               "rate", "plob"]


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation found."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class RunConfig:
    protocol: int
    loss_db_start: float
    loss_db_stop: float
    loss_db_step: float
    p_d: float = 0.0
    misalignment_percent: float = 0.0
    delta: float = 0.0
    yield_mode: str = "exact"
    decoy_intensities: tuple[float, ...] = DEFAULT_DECOYS
    m_cut: int = DEFAULT_M_CUT
    n_max: int | None = None
    alpha: float | None = None
    q: float | None = None
    output: str = "-"

    def losses(self) -> list[float]:
        """Inclusive grid start, start + step, ... <= stop; empty if stop < start."""
        if self.loss_db_stop < self.loss_db_start:
            return []
        n = int(math.floor((self.loss_db_stop - self.loss_db_start) / self.loss_db_step + 1e-9))
        return [round(self.loss_db_start + i * self.loss_db_step, 12) for i in range(n + 1)]

    def sets(self) -> TruncationSets:
        if self.n_max is not None:
            return TruncationSets.from_n_max(self.n_max, max(self.m_cut, self.n_max))
        return TruncationSets.default(self.m_cut)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _loss_range(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("expected start:stop:step")
    return tuple(float(p) for p in parts)


_KEYS = {
    "protocol": int,
    "loss": _loss_range,
    "loss-start": float,
    "loss-stop": float,
    "loss-step": float,
    "pd": float,
    "misalignment": float,
    "delta": float,
    "yield-mode": str,
    "decoys": _float_list,
    "mcut": int,
    "nmax": int,
    "alpha": float,
    "q": float,
    "optimize-alpha": lambda s: s.strip().lower() in ("1", "true", "yes", "on", ""),
    "optimize-q": lambda s: s.strip().lower() in ("1", "true", "yes", "on", ""),
    "output": str,
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into a dict of typed values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}"])
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("_", "-").lower()
        if key not in _KEYS:
            raise ConfigError([f"{source}:{lineno}: unknown key {key!r}"])
        try:
            values[key] = _KEYS[key](value)
        except ValueError as exc:
            raise ConfigError([f"{source}:{lineno}: bad value for {key!r}: {exc}"]) from None
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfqkd", description="Twin-field type QKD key-rate calculator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a scenario over a loss grid and write CSV")
    run.add_argument("--config", help="key = value file; flags override it")
    run.add_argument("--protocol", type=int)
    run.add_argument("--loss", type=_loss_range, metavar="START:STOP:STEP", help="loss grid in dB, inclusive")
    run.add_argument("--loss-start", type=float)
    run.add_argument("--loss-stop", type=float)
    run.add_argument("--loss-step", type=float)
    run.add_argument("--pd", type=float, help="dark count probability per detector per pulse")
    run.add_argument("--misalignment", type=float, help="polarization misalignment in percent")
    run.add_argument("--delta", type=float, help="phase mismatch as a fraction of pi")
    run.add_argument("--yield-mode", choices=["exact", "decoy"])
    run.add_argument("--decoys", type=_float_list, help="comma separated decoy intensities beta^2")
    run.add_argument("--mcut", type=int)
    run.add_argument("--nmax", type=int, help="use N_max-parameterized sets S_0, S_1")
    run.add_argument("--alpha", type=float, help="fixed signal amplitude (Protocol 3)")
    run.add_argument("--optimize-alpha", action="store_const", const=True)
    run.add_argument("--q", type=float, help="fixed vacuum weight (Protocol 1)")
    run.add_argument("--optimize-q", action="store_const", const=True)
    run.add_argument("-o", "--output")

    val = sub.add_parser("validate", help="run a cross-module validation suite")
    val.add_argument("suite", choices=sorted(SUITES))
    return parser


def parse_config(argv: list[str] | None = None, text: str | None = None) -> RunConfig:
    """Merge an optional config file (or ``text``) with ``run`` flags and validate."""
    args = _build_parser().parse_args(["run", *(argv or [])])
    values = {}
    if text is not None:
        values.update(parse_config_text(text))
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read(), args.config))
        except OSError as exc:
            raise ConfigError([f"cannot read config {args.config}: {exc}"]) from None
    for key in _KEYS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            values[key] = flag
    return _validate(values)


def _validate(v: dict) -> RunConfig:
    problems = []
    start, stop, step = v.get("loss", (None, None, None))
    start = v.get("loss-start", start)
    stop = v.get("loss-stop", stop)
    step = v.get("loss-step", step)
    protocol = v.get("protocol")
    if protocol is None:
        problems.append("protocol is required (1 or 3)")
    elif protocol not in (1, 3):
        problems.append(f"protocol must be 1 or 3, got {protocol}")
    if None in (start, stop, step):
        problems.append("loss grid is required (--loss START:STOP:STEP)")
    elif step <= 0:
        problems.append(f"loss step must be > 0, got {step}")
    elif start < 0:
        problems.append(f"loss must be >= 0 dB, got {start}")
    p_d = v.get("pd", 0.0)
    if not 0.0 <= p_d <= 1.0:
        problems.append(f"pd must lie in [0, 1], got {p_d}")
    mis = v.get("misalignment", 0.0)
    if not 0.0 <= mis <= 100.0:
        problems.append(f"misalignment must be a percentage in [0, 100], got {mis}")
    decoys = v.get("decoys", DEFAULT_DECOYS)
    if any(d < 0 for d in decoys):
        problems.append("decoy intensities must be >= 0")
    mode = v.get("yield-mode", "exact")
    if mode not in ("exact", "decoy"):
        problems.append(f"yield-mode must be 'exact' or 'decoy', got {mode!r}")
    m_cut = v.get("mcut", DEFAULT_M_CUT)
    if m_cut < 3:
        problems.append(f"mcut must be >= 3 to hold the default sets, got {m_cut}")
    n_max = v.get("nmax")
    if n_max is not None and n_max < 0:
        problems.append(f"nmax must be >= 0, got {n_max}")
    alpha, q = v.get("alpha"), v.get("q")
    if alpha is not None and v.get("optimize-alpha"):
        problems.append("give either alpha or optimize-alpha, not both")
    if q is not None and v.get("optimize-q"):
        problems.append("give either q or optimize-q, not both")
    if alpha is not None and not 0.0 < alpha <= 1.0:
        problems.append(f"alpha must lie in (0, 1], got {alpha}")
    if q is not None and not 0.0 <= q <= 1.0:
        problems.append(f"q must lie in [0, 1], got {q}")
    if problems:
        raise ConfigError(problems)
    return RunConfig(protocol=protocol, loss_db_start=start, loss_db_stop=stop, loss_db_step=step,
                     p_d=p_d, misalignment_percent=mis, delta=v.get("delta", 0.0), yield_mode=mode,
                     decoy_intensities=tuple(decoys), m_cut=m_cut, n_max=n_max, alpha=alpha, q=q,
                     output=v.get("output", "-"))


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def _protocol1_rows(cfg: RunConfig) -> tuple[list[list[float]], list[str]]:
    theta = misalignment_angle(cfg.misalignment_percent)
    ideal = cfg.p_d == 0.0 and theta == 0.0 and cfg.delta == 0.0
    rows, errors = [], []
    for loss in cfg.losses():
        try:
            eta = 10.0 ** (-loss / 10.0)
            q = cfg.q if cfg.q is not None else optimize_q(eta, cfg.p_d, theta, -theta, cfg.delta)[0]
            if ideal:
                r = sum(single_click_rates(q, eta))
                # no single clicks at q = 1; report the uninformative 1/2
                e_x, e_z = error_rates_ideal(q, eta) if r > 0 else (0.5, 0.5)
                rate = key_rate_protocol1(q, eta)
            else:
                pt = protocol1_with_imperfections(q, eta, cfg.p_d, theta, -theta, cfg.delta)
                r, e_x, e_z, rate = pt.r, pt.e_X, pt.e_Z, pt.R
            plob = plob_bound(eta) if eta < 1.0 else math.inf
            rows.append([loss, q, r, r, e_x, e_z, e_z, rate, plob])
        except (ValueError, ArithmeticError) as exc:
            errors.append(f"loss {loss}: {exc}")
            rows.append([loss] + [math.nan] * 8)
    return rows, errors


def _protocol3_rows(cfg: RunConfig) -> tuple[list[list[float]], list[str]]:
    scenario = Scenario(p_d=cfg.p_d, misalignment_percent=cfg.misalignment_percent, delta=cfg.delta,
                        sets=cfg.sets(), yield_mode=cfg.yield_mode, decoys=cfg.decoy_intensities,
                        alpha_sq=None if cfg.alpha is None else cfg.alpha**2)
    rows, errors = [], []
    for pt in scan_loss(scenario, cfg.losses()):
        if pt.error:
            errors.append(f"loss {pt.loss_db}: {pt.error}")
            rows.append([pt.loss_db] + [math.nan] * 8)
            continue
        p10, p01 = (pt.patterns[p] for p in KEY_PATTERNS)
        rows.append([pt.loss_db, pt.alpha_sq, p10.p_xx, p01.p_xx, p10.e_x,
                     min(0.5, p10.e_z_upp), min(0.5, p01.e_z_upp), pt.rate, pt.plob])
    return rows, errors


def render_csv(cfg: RunConfig) -> tuple[str, list[str]]:
    """CSV text for ``cfg`` and the list of per-point errors."""
    rows, errors = (_protocol1_rows if cfg.protocol == 1 else _protocol3_rows)(cfg)
    header = list(CSV_COLUMNS)
    if cfg.protocol == 1:
        header[1] = "q_opt"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(float(x)) for x in row])
    return buf.getvalue(), errors


def run_scenario(cfg: RunConfig) -> int:
    """Write the CSV for ``cfg``; nonzero exit if any point failed."""
    text, errors = render_csv(cfg)
    if cfg.output == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_FAILURE if errors else EXIT_OK


def run_validation(suite: str) -> int:
    checks = run_suite(suite)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILURE


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        return run_validation(args.suite)
    run_argv = [a for a in argv if a not in ("-v", "--verbose")][1:]
    try:
        cfg = parse_config(run_argv)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_USAGE
    return run_scenario(cfg)


if __name__ == "__main__":
    sys.exit(main())
