"""Command-line harness: config ingestion, scenario dispatch, CSV output.

Usage:
    blindcal <scenario> [--config PATH] [--seed U64] [--lengths SPEC]
             [--trials N] [--shots N] [--iters N] [--eps-th F]
             [--mu F] [--mu1 F] [--mu2 F] [--cost {infidelity|error-rate}]
             [--exact] [--out PATH]

Scenarios: random-states, bb84, bb84-shots, entswap, multipartite-ghz,
multipartite-w, theorem1.

Config files are flat UTF-8 ``key=value`` lines with ``#`` comments, using the
same keys as the long flags (``eps_th`` for ``--eps-th``) plus optional
``optimizer.*`` overrides.  Precedence: flag > config file > BLINDCAL_SEED
environment variable (seed only) > built-in defaults.

Exit codes: 0 success, 1 configuration error, 2 runtime error.  The output
CSV is written atomically (temp file + rename), so interrupted or failed runs
leave no destination file behind.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .optimizer import OPTIMIZER_KINDS, OptimizerConfig
from .protocol import CalibrationConfig
from .qcore import maximally_mixed
from .scenarios import (
    ScenarioResult,
    scenario_bb84,
    scenario_bb84_shots_sweep,
    scenario_entswap,
    scenario_multipartite,
    scenario_random_states,
    scenario_theorem1,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "format_value",
    "write_csv",
    "run",
    "main",
]

SCENARIOS = (
    "random-states",
    "bb84",
    "bb84-shots",
    "entswap",
    "multipartite-ghz",
    "multipartite-w",
    "theorem1",
)

CSV_HEADER = (
    "scenario,length_km,trial,metric,value_uncalibrated,value_calibrated,"
    "iterations_used,shots,seed"
)

COST_ALIASES = {"infidelity": "infidelity_tomographic", "error-rate": "error_rate"}

DEFAULT_MU = 0.05
DEFAULT_I_MAX = 250
DEFAULT_EPSILON = 1e-7

_SCENARIO_LENGTHS = {
    "random-states": (50.0,),
    "bb84": tuple(float(v) for v in range(10, 131, 10)),
    "bb84-shots": (120.0,),
    "entswap": tuple(float(v) for v in range(10, 131, 10)),
    "multipartite-ghz": (50.0,),
    "multipartite-w": (50.0,),
    "theorem1": (0.0,),
}
_SCENARIO_TRIALS = {
    "random-states": 1,
    "bb84": 50,
    "bb84-shots": 10,
    "entswap": 10,
    "multipartite-ghz": 10,
    "multipartite-w": 10,
    "theorem1": 100,
}
_SCENARIO_SHOTS = {
    "random-states": 15000,
    "bb84": 1000,
    "entswap": 1000,
    "multipartite-ghz": 20000,
    "multipartite-w": 20000,
}
DEFAULT_SHOT_SWEEP = (250, 500, 1000, 2000, 5000, 10000)
DEFAULT_THEOREM1_SWEEP = (1000, 10000, 100000)


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key."""


@dataclass
class RunConfig:
    scenario: str
    lengths_km: Optional[tuple[float, ...]] = None
    seed: int = 0
    trials: Optional[int] = None
    shots: Optional[int] = None
    i_max: Optional[int] = None
    epsilon_th: float = DEFAULT_EPSILON
    mu: float = DEFAULT_MU
    mu1: float = DEFAULT_MU
    mu2: float = DEFAULT_MU
    cost_kind: str = "infidelity_tomographic"
    optimizer_overrides: dict = field(default_factory=dict)
    exact_mode: bool = False
    output_path: str = "results.csv"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"scenario: unknown scenario {self.scenario!r}; expected one of {SCENARIOS}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must be a 64-bit unsigned integer, got {self.seed}")
        for key in ("trials", "shots", "i_max"):
            v = getattr(self, key)
            if v is not None and v < 1:
                raise ConfigError(f"{key}: must be >= 1, got {v}")
        if self.epsilon_th < 0:
            raise ConfigError(f"eps_th: must be >= 0, got {self.epsilon_th}")
        for key in ("mu", "mu1", "mu2"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key}: must be >= 0, got {getattr(self, key)}")
        if self.lengths_km is not None:
            if not self.lengths_km:
                raise ConfigError("lengths: at least one length required")
            if any(v < 0 for v in self.lengths_km):
                raise ConfigError(f"lengths: lengths must be >= 0, got {self.lengths_km}")
        if self.cost_kind == "error_rate" and self.scenario != "entswap":
            raise ConfigError(
                "cost: error-rate cost applies only to the entswap scenario"
            )


def parse_lengths(spec: str) -> tuple[float, ...]:
    """Parse '10:130:10' (inclusive range) or '25,50,100' or a single value."""
    spec = spec.strip()
    if not spec:
        raise ConfigError("lengths: empty length specification")
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError("range form is start:stop:step")
            start, stop, step = (float(p) for p in parts)
            if step <= 0:
                raise ValueError("step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            if count < 1:
                raise ValueError("empty range")
            return tuple(start + k * step for k in range(count))
        return tuple(float(p) for p in spec.split(","))
    except ValueError as exc:
        raise ConfigError(f"lengths: cannot parse {spec!r} ({exc})") from None


def _parse_typed(key: str, raw: str, kind: type):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


_FILE_KEYS = {
    "scenario": str,
    "lengths": str,
    "seed": int,
    "trials": int,
    "shots": int,
    "iters": int,
    "eps_th": float,
    "mu": float,
    "mu1": float,
    "mu2": float,
    "cost": str,
    "exact": bool,
    "out": str,
}
_OPTIMIZER_KEYS = {
    "optimizer.kind": str,
    "optimizer.a": float,
    "optimizer.c": float,
    "optimizer.A": float,
    "optimizer.alpha_exp": float,
    "optimizer.gamma_exp": float,
    "optimizer.step_size": float,
}


def parse_config_file(text: str) -> dict:
    """Parse flat key=value config text into a typed dictionary."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in _FILE_KEYS:
            values[key] = _parse_typed(key, raw, _FILE_KEYS[key])
        elif key in _OPTIMIZER_KEYS:
            values.setdefault("optimizer", {})[key.split(".", 1)[1]] = _parse_typed(
                key, raw, _OPTIMIZER_KEYS[key]
            )
        else:
            raise ConfigError(f"{key}: unknown configuration key")
    return values


def _resolve_cost(key: str, raw: str) -> str:
    if raw in COST_ALIASES:
        return COST_ALIASES[raw]
    if raw in COST_ALIASES.values():
        return raw
    raise ConfigError(
        f"{key}: unknown cost {raw!r}; expected 'infidelity' or 'error-rate'"
    )


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); config errors are exit 1
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="blindcal", add_help=True, description=__doc__)
    parser.add_argument("scenario", nargs="?")
    parser.add_argument("--config", dest="config_path")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--lengths")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--shots", type=int)
    parser.add_argument("--iters", type=int)
    parser.add_argument("--eps-th", dest="eps_th", type=float)
    parser.add_argument("--mu", type=float)
    parser.add_argument("--mu1", type=float)
    parser.add_argument("--mu2", type=float)
    parser.add_argument("--cost", choices=sorted(COST_ALIASES))
    parser.add_argument("--exact", action="store_true", default=None)
    parser.add_argument("--out")
    return parser


def parse_config(
    argv: Sequence[str], env: Optional[dict] = None, file_text: Optional[str] = None
) -> RunConfig:
    """Build a validated RunConfig from flags, optional config file, and env.

    ``file_text`` short-circuits reading ``--config`` from disk (for tests);
    otherwise the file named by ``--config`` is read here.
    """
    env = dict(os.environ if env is None else env)
    args = _build_parser().parse_args(list(argv))

    file_values: dict = {}
    if file_text is None and args.config_path:
        try:
            with open(args.config_path, "r", encoding="utf-8") as fh:
                file_text = fh.read()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config_path!r}: {exc}") from None
    if file_text is not None:
        file_values = parse_config_file(file_text)

    def pick(flag_value, file_key: str, default):
        if flag_value is not None:
            return flag_value
        if file_key in file_values:
            return file_values[file_key]
        return default

    seed_default = 0
    if "BLINDCAL_SEED" in env:
        seed_default = _parse_typed("BLINDCAL_SEED", env["BLINDCAL_SEED"], int)

    scenario = pick(args.scenario, "scenario", None)
    if scenario is None:
        raise ConfigError("scenario: a scenario name is required")

    lengths_raw = pick(args.lengths, "lengths", None)
    lengths = parse_lengths(lengths_raw) if lengths_raw is not None else None

    cost_raw = pick(args.cost, "cost", None)
    cost_kind = _resolve_cost("cost", cost_raw) if cost_raw is not None else (
        "infidelity_tomographic"
    )

    optimizer_overrides = dict(file_values.get("optimizer", {}))
    if "kind" in optimizer_overrides and optimizer_overrides["kind"] not in OPTIMIZER_KINDS:
        raise ConfigError(
            f"optimizer.kind: unknown kind {optimizer_overrides['kind']!r}; "
            f"expected one of {OPTIMIZER_KINDS}"
        )

    return RunConfig(
        scenario=scenario,
        lengths_km=lengths,
        seed=pick(args.seed, "seed", seed_default),
        trials=pick(args.trials, "trials", None),
        shots=pick(args.shots, "shots", None),
        i_max=pick(args.iters, "iters", None),
        epsilon_th=pick(args.eps_th, "eps_th", DEFAULT_EPSILON),
        mu=pick(args.mu, "mu", DEFAULT_MU),
        mu1=pick(args.mu1, "mu1", DEFAULT_MU),
        mu2=pick(args.mu2, "mu2", DEFAULT_MU),
        cost_kind=cost_kind,
        optimizer_overrides=optimizer_overrides,
        exact_mode=bool(pick(args.exact, "exact", False)),
        output_path=pick(args.out, "out", "results.csv"),
    )


def format_value(value: float) -> str:
    """Format a float with 9 significant digits, plain decimal notation."""
    if not math.isfinite(value):
        raise ValueError(f"cannot format non-finite value {value}")
    if value == 0.0:
        return "0.00000000"
    magnitude = abs(value)
    exponent = math.floor(math.log10(magnitude))
    for _ in range(2):  # rounding can push the value into the next decade
        decimals = max(0, 8 - exponent)
        text = f"{magnitude:.{decimals}f}"
        rounded = float(text)
        if rounded == 0.0 or math.floor(math.log10(rounded)) == exponent:
            break
        exponent += 1
    return ("-" + text) if value < 0 else text


def write_csv(result: ScenarioResult, path: str):
    """Write rows sorted by (length, trial, metric); atomic replace at ``path``."""
    if not result.rows:
        raise ValueError("refusing to write an empty result table")
    ordered = sorted(
        result.rows,
        key=lambda r: (r.length_km, r.trial, r.metric, r.iterations_used, r.shots, r.seed),
    )
    lines = [CSV_HEADER]
    for r in ordered:
        lines.append(
            ",".join(
                (
                    r.scenario,
                    format_value(r.length_km),
                    str(r.trial),
                    r.metric,
                    format_value(r.value_uncalibrated),
                    format_value(r.value_calibrated),
                    str(r.iterations_used),
                    str(r.shots),
                    str(r.seed),
                )
            )
        )
    text = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(prefix=".blindcal-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _session_template(config: RunConfig, i_max_default: int) -> CalibrationConfig:
    shots = config.shots
    if shots is None:
        shots = _SCENARIO_SHOTS.get(config.scenario, 1000)
    optimizer = OptimizerConfig(
        **{("big_a" if k == "A" else k): v for k, v in config.optimizer_overrides.items()}
    )
    return CalibrationConfig(
        calibration_set=(maximally_mixed(1),),  # placeholder; scenarios replace it
        batch_size=shots,
        epsilon_th=config.epsilon_th,
        i_max=config.i_max if config.i_max is not None else i_max_default,
        cost_kind=config.cost_kind,
        optimizer=optimizer,
        exact_mode=config.exact_mode,
    )


def dispatch(config: RunConfig) -> ScenarioResult:
    """Run the named scenario with defaults filled per scenario."""
    lengths = config.lengths_km or _SCENARIO_LENGTHS[config.scenario]
    trials = config.trials if config.trials is not None else _SCENARIO_TRIALS[config.scenario]
    noise = dict(mu_rot=config.mu, mu_bit=config.mu1, mu_phase=config.mu2)
    if config.scenario == "random-states":
        template = _session_template(config, DEFAULT_I_MAX)
        return scenario_random_states(
            lengths, template, config.seed, trials=trials, **noise
        )
    if config.scenario == "bb84":
        template = _session_template(config, DEFAULT_I_MAX)
        return scenario_bb84(lengths, template, config.seed, trials=trials, **noise)
    if config.scenario == "bb84-shots":
        template = _session_template(config, i_max_default=20)
        sweep = DEFAULT_SHOT_SWEEP if config.shots is None else (config.shots,)
        return scenario_bb84_shots_sweep(
            sweep, lengths[0], template, config.seed, trials=trials, **noise
        )
    if config.scenario == "entswap":
        template = _session_template(config, DEFAULT_I_MAX)
        return scenario_entswap(lengths, template, config.seed, trials=trials, **noise)
    if config.scenario in ("multipartite-ghz", "multipartite-w"):
        template = _session_template(config, DEFAULT_I_MAX)
        kind = config.scenario.split("-", 1)[1]
        return scenario_multipartite(
            kind, range(2, 6), lengths, template, config.seed,
            trials=trials, mu_rot=config.mu,
        )
    if config.scenario == "theorem1":
        sweep = DEFAULT_THEOREM1_SWEEP if config.shots is None else (config.shots,)
        return scenario_theorem1(sweep, config.seed, trials=trials)
    raise ConfigError(f"scenario: unknown scenario {config.scenario!r}")


def run(config: RunConfig) -> int:
    """Execute a validated config; returns the process exit code."""
    try:
        result = dispatch(config)
        write_csv(result, config.output_path)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"blindcal: runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"blindcal: configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        return run(config)
    except ConfigError as exc:
        print(f"blindcal: configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
