"""Command-line entry point: python -m app.main <command> [--config PATH] [--out DIR] [--seed INT]."""

from __future__ import annotations

import argparse
import json
from pathlib import Path
import sys
from typing import List, Optional, Sequence

from pydantic import ValidationError

from .experiments import validate_setup
from .models import ExperimentConfig, SuiteConfig
from .report_store import ReportStore
from .settings import load_settings
from .suite_runner import SuiteRunner, suite_report


COMMANDS = ("identities", "modulus-scan", "kernels", "pde-residual", "second-derivative", "all")

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "examples" / "suite.json"


class ConfigError(Exception):
    """Config could not be read or validated; maps to exit code 2."""


def load_configs(path: Path) -> List[ExperimentConfig]:
    """One experiment object or {"experiments": [...]}."""
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e

    try:
        if isinstance(raw, dict) and "experiments" in raw:
            return SuiteConfig.model_validate(raw).experiments
        return [ExperimentConfig.model_validate(raw)]
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


def select(configs: Sequence[ExperimentConfig], command: str, seed: Optional[int]) -> List[ExperimentConfig]:
    chosen = [c for c in configs if command == "all" or c.experiment == command]
    if not chosen:
        raise ConfigError(f"no '{command}' experiments in config")
    if seed is not None:
        chosen = [c.model_copy(update={"seed": seed}) for c in chosen]
    return chosen


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="app.main", description="Layer-potential regularity experiments")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, default=DEFAULT_CONFIG, help="experiment or suite JSON")
    parser.add_argument("--out", type=Path, default=None, help="output directory (default MIRANDA_LAYERS_OUT_DIR)")
    parser.add_argument("--seed", type=int, default=None, help="override the seed of every experiment")
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = load_settings()

    try:
        configs = select(load_configs(args.config), args.command, args.seed)
        for config in configs:
            validate_setup(config, settings.quadrature)
    except (ConfigError, ValueError) as e:
        print(f"[config] {e}", file=sys.stderr)
        return EXIT_CONFIG

    print(f"[config] {len(configs)} experiment(s) from {args.config}, threads={settings.threads}")
    runner = SuiteRunner(settings=settings)
    outcomes = runner.run_sync(configs)
    report = suite_report(outcomes, seed=args.seed)

    store = ReportStore(args.out if args.out is not None else settings.out_dir)
    store.write_outcomes(outcomes, report)
    print(f"[suite] report written to {store.report_path}")

    for r in report.experiments:
        for c in r.criteria:
            if c.asserted and not c.passed:
                print(f"[suite] {r.name}: {c.name} failed (value={c.value}, threshold={c.threshold}) {c.detail}")
    return EXIT_OK if report.passed else EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(cli_main())
