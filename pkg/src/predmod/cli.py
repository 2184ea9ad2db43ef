"""Command line front end: run an experiment, validate a config, list presets.

Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 internal error.
Failures emit a single machine-readable JSON record on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import EXPERIMENTS, PRESETS, load_config, preset_config, validate_config
from .errors import PredmodError, ValidationError
from .runner import FORMATS, run_experiment

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

EXPERIMENT_DESCRIPTIONS = {
    "decompose": "Error decomposition at each probe under the configured policy",
    "optimal-shift": "Sweep constant outcome shifts at each probe and locate the best one",
    "showcase": "Train, fix predictions, modify outcomes, report per-user errors and MSE",
    "generalization": "Showcase MSE against the same model scored on fresh unmodified users",
    "ab-test": "Replicated two-group comparison with the modification layer on vs off",
}


def _error_record(kind: str, message: str, **extra) -> str:
    return json.dumps({"error": {"kind": kind, "message": message, **extra}}, sort_keys=True)


def _resolve_config(target: str, seed: int | None):
    if target in PRESETS:
        config = preset_config(target)
    else:
        path = Path(target)
        if not path.exists():
            if "/" not in target and "\\" not in target and not target.endswith(".json"):
                # a bare word that is not a file: almost certainly a preset typo
                known = ", ".join(sorted(PRESETS))
                raise ValidationError(
                    [f"unknown preset {target!r}; available presets: {known}"]
                )
            raise FileNotFoundError(f"config file not found: {target}")
        config = load_config(path)
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    return config


def _cmd_run(args) -> int:
    if args.workers < 1:
        raise ValidationError([f"workers: must be >= 1, got {args.workers}"])
    config = _resolve_config(args.config, args.seed)
    out_dir = Path(args.out_dir) if args.out_dir else Path.cwd() / f"results-{config.experiment}"
    result = run_experiment(config, out_dir, workers=args.workers, fmt=args.format)
    for path in list(result.outputs) + [result.manifest_path]:
        print(path)
    return EXIT_OK


def _cmd_validate(args) -> int:
    violations = validate_config(args.config)
    if violations:
        for v in violations:
            print(v)
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


def scenario_catalog() -> list[dict]:
    catalog = [
        {"name": name, "kind": "experiment", "description": EXPERIMENT_DESCRIPTIONS[name]}
        for name in EXPERIMENTS
        if name in EXPERIMENT_DESCRIPTIONS
    ]
    catalog.extend(
        {"name": name, "kind": "preset", "description": PRESETS[name]["description"]}
        for name in sorted(PRESETS)
    )
    return catalog


def _cmd_scenarios(args) -> int:
    catalog = scenario_catalog()
    if args.json:
        print(json.dumps(catalog, indent=2, sort_keys=True))
        return EXIT_OK
    width = max(len(entry["name"]) for entry in catalog)
    for entry in catalog:
        print(f"{entry['name']:<{width}}  [{entry['kind']}]  {entry['description']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predmod",
        description="Simulation lab for predictions that are pushed to come true.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file or preset")
    run_p.add_argument("config", help="path to a JSON config file, or a preset name")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--out-dir", default=None, help="output directory (default: ./results-<experiment>)")
    run_p.add_argument("--workers", type=int, default=1, help="max parallel workers")
    run_p.add_argument("--format", choices=list(FORMATS), default="csv", help="tabular output format")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="validate a config file without running it")
    val_p.add_argument("config", help="path to a JSON config file")
    val_p.set_defaults(func=_cmd_validate)

    sc_p = sub.add_parser("scenarios", help="list experiments and scenario presets")
    sc_p.add_argument("--json", action="store_true", help="emit the catalog as JSON")
    sc_p.set_defaults(func=_cmd_scenarios)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(_error_record("validation", str(exc), violations=exc.violations), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(_error_record("io", str(exc)), file=sys.stderr)
        return EXIT_IO
    except PredmodError as exc:
        print(_error_record("internal", str(exc)), file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        print(_error_record("internal", f"{type(exc).__name__}: {exc}"), file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
