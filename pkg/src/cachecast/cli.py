"""Command-line front end.

Subcommands: ``sweep`` (parameter sweeps to CSV/JSON), ``figure`` (named
figure-data presets), ``validate`` (self-checks with a machine-readable
report), ``timeline`` (JSON-lines event log of one transmission stage).

Average SNR is given in dB on the command line and converted to linear
internally. Exit codes: 0 success, 1 validation failure, 2 parameter
error, 3 numeric error. The CACHECAST_WORKERS environment variable sets
the Monte Carlo worker count; results are identical for any value.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import NumericsError, ParameterError
from .experiments import (
    FIGURE_PRESETS,
    ExperimentSpec,
    parse_axis,
    run_figure,
    run_sweep,
    timeline_for,
    validate_system,
)
from .system import SeedSpec, SystemConfig, snr_from_db


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cachecast",
        description="Cache-aided delivery over Rayleigh fading: sweeps, "
                    "figure data, validation, stage timelines.")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a parameter sweep")
    sweep.add_argument("--axis", help="sweep axis, e.g. rho_db=-20:30:1 or b=2,4,8")
    sweep.add_argument("--gain", type=int, help="nominal gain (served groups)")
    sweep.add_argument("--users-per-group", type=int)
    sweep.add_argument("--rho-db", type=float, help="average SNR in dB when fixed")
    sweep.add_argument("--library-size", type=int)
    sweep.add_argument("--schemes", help="comma list from tdm,mn,acc")
    sweep.add_argument("--analytics", help="comma list, e.g. exact-mn,large-b")
    sweep.add_argument("--trials", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--out", help="output file path")
    sweep.add_argument("--format", choices=("csv", "json"))
    sweep.add_argument("--timing", action="store_true", default=None,
                       help="include wall-clock timings (breaks byte-level "
                            "reproducibility across runs)")
    sweep.add_argument("--config", help="JSON file with spec fields; flags override")

    figure = sub.add_parser("figure", help="reproduce one figure preset")
    figure.add_argument("name", choices=sorted(FIGURE_PRESETS))
    figure.add_argument("--out", required=True, help="output directory")
    figure.add_argument("--trials", type=int, default=100_000)
    figure.add_argument("--seed", type=int, default=42)

    validate = sub.add_parser("validate", help="run the self-check suite")
    validate.add_argument("--trials", type=int, default=100_000)
    validate.add_argument("--seed", type=int, default=42)
    validate.add_argument("--gain", type=int, default=2)
    validate.add_argument("--users-per-group", type=int, default=4)
    validate.add_argument("--cache-states", type=int, default=4,
                          help="cache states (>= gain); fixes the placement size")
    validate.add_argument("--rho-db", type=float, default=0.0)
    validate.add_argument("--tol-scale", type=float, default=1.0)
    validate.add_argument("--out", help="write the JSON report here instead of stdout")

    timeline = sub.add_parser("timeline", help="export one stage's event log")
    timeline.add_argument("--preset", choices=("example2",))
    timeline.add_argument("--gain", type=int, default=3)
    timeline.add_argument("--users-per-group", type=int, default=3)
    timeline.add_argument("--rho-db", type=float, default=0.0)
    timeline.add_argument("--seed", type=int, default=42)
    timeline.add_argument("--subfile-size", type=float, default=1.0)
    timeline.add_argument("--out", required=True, help="JSON-lines output path")
    return parser


_SPEC_FIELDS = {
    "axis": "axis", "gain": "nominal_gain", "users_per_group": "users_per_group",
    "rho_db": "rho_db", "library_size": "library_size", "schemes": "schemes",
    "analytics": "analytics", "trials": "num_trials", "seed": "base_seed",
    "out": "out_path", "format": "out_format", "timing": "include_timing",
}


def _split_list(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return tuple(part.strip() for part in str(value).split(",") if part.strip())


def _sweep_spec(args) -> ExperimentSpec:
    settings = {}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"could not read config file {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ParameterError("config file must hold a JSON object")
        for key, value in loaded.items():
            if key not in _SPEC_FIELDS:
                raise ParameterError(f"unknown config field {key!r}")
            settings[_SPEC_FIELDS[key]] = value
    for flag, field_name in _SPEC_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            settings[field_name] = value

    axis = settings.pop("axis", None)
    if axis is None:
        raise ParameterError("a sweep axis is required (--axis or config file)")
    axis_name, axis_values = parse_axis(str(axis))
    settings["schemes"] = _split_list(settings.get("schemes")) or ()
    settings["analytics"] = _split_list(settings.get("analytics")) or ()
    settings.setdefault("include_timing", False)
    defaults = {"nominal_gain": 4, "users_per_group": 4, "rho_db": 0.0,
                "library_size": None, "num_trials": 100_000, "base_seed": 42,
                "out_path": None, "out_format": "csv"}
    for key, value in defaults.items():
        settings.setdefault(key, value)
    return ExperimentSpec(axis_name=axis_name, axis_values=axis_values, **settings)


def _cmd_sweep(args) -> int:
    spec = _sweep_spec(args)
    rows = run_sweep(spec)
    if not spec.out_path:
        for row in rows:
            print(f"{row.swept}\t{row.scheme}\trate={row.rate_mean}\t"
                  f"gain={row.gain}\t{row.error or ''}")
    return 0


def _cmd_figure(args) -> int:
    path = run_figure(args.name, args.out, num_trials=args.trials, base_seed=args.seed)
    print(path)
    return 0


def _cmd_validate(args) -> int:
    config = SystemConfig.from_gain(args.gain, args.users_per_group,
                                    snr_from_db(args.rho_db),
                                    num_cache_states=args.cache_states)
    report = validate_system(config, num_trials=args.trials,
                             base_seed=args.seed, tol_scale=args.tol_scale)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if report.passed else 1


def _cmd_timeline(args) -> int:
    if args.preset:
        timeline = timeline_for(preset=args.preset)
    else:
        config = SystemConfig.from_gain(args.gain, args.users_per_group,
                                        snr_from_db(args.rho_db))
        timeline = timeline_for(config=config, seed=SeedSpec(base_seed=args.seed),
                                subfile_size=args.subfile_size)
    timeline.write_jsonl(args.out)
    print(args.out)
    return 0


_COMMANDS = {
    "sweep": _cmd_sweep,
    "figure": _cmd_figure,
    "validate": _cmd_validate,
    "timeline": _cmd_timeline,
}


def exit_code_for(exc: Exception) -> int:
    """Exit-code policy: parameter errors 2, numeric errors 3."""
    if isinstance(exc, ParameterError):
        return 2
    if isinstance(exc, NumericsError):
        return 3
    raise exc


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ParameterError, NumericsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
