#!/usr/bin/env python3
"""
Export the boundary frame of an experiment config to CSV.

Usage:
    python export_frame.py --config ../examples/laplace_circle.json --out frame.csv
    python export_frame.py --config ../examples/modulus_scan.json --nodes 1024 --field single --out field.csv

Frame columns: t, x1, x2, nu1, nu2, w. With --field, the layer potential is
evaluated on the interior point grid of the config and written as x1, x2, re, im.
"""

import argparse
import json
import sys
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from app.experiments import interior_points, validate_setup
from app.models import ExperimentConfig
from app.moduli import SampledFunction
from app.potentials import double_layer, single_layer


def main() -> int:
    parser = argparse.ArgumentParser(description="Export a boundary frame (and optionally a field) to CSV")
    parser.add_argument("--config", type=Path, required=True, help="single-experiment JSON config")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--nodes", type=int, default=None, help="override n_nodes")
    parser.add_argument("--field", choices=["single", "double"], default=None)
    args = parser.parse_args()

    raw = json.loads(args.config.read_text(encoding="utf-8"))
    if args.nodes is not None:
        raw["n_nodes"] = args.nodes
    config = ExperimentConfig.model_validate(raw)
    setup = validate_setup(config)

    if args.field is None:
        path = setup.frame.to_csv(args.out)
        print(f"[export] {setup.frame.n} nodes -> {path}")
        return 0

    g = config.points
    X = interior_points(setup.curve, g.count, g.interior_scale)
    if args.field == "single":
        values = single_layer(setup.fundamental, setup.frame, setup.density, X, setup.quadrature)
    else:
        values = double_layer(setup.coefficients, setup.fundamental, setup.frame, setup.density, X, setup.quadrature)
    path = SampledFunction(X, values).to_csv(args.out)
    print(f"[export] {X.shape[0]} field values -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
