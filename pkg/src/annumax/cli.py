"""Command-line entry point: one subcommand per experiment.

Configuration may come from a flat key-value file (``key = value`` per
line, ``#`` comments) via ``--config``; command-line flags override file
values.  Outputs land in ``--out`` as ``raw.csv``, ``summary.txt`` and
``config.echo``.  The exit status is nonzero iff an asserted invariant
failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import ExperimentConfig, ExperimentKind, run

_RESERVED_KEYS = {"dim", "delta", "seed", "samples", "out", "quiet"}


def parse_config_file(path) -> dict:
    """Parse ``key = value`` lines; later keys win, '#' starts a comment."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annumax",
        description=(
            "Scaling and audit experiments for thickened spherical regions: "
            "intersection volume sweeps, dyadic class audits and maximal-"
            "average norms."
        ),
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for kind in ExperimentKind:
        p = sub.add_parser(kind.value, help=f"run the {kind.value} experiment")
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--dim", type=int, help="ambient dimension (default 3)")
        p.add_argument(
            "--delta",
            type=float,
            action="append",
            help="thickness value; repeat for a sweep",
        )
        p.add_argument("--seed", type=int, help="base random seed (default 0)")
        p.add_argument("--samples", type=int, help="Monte-Carlo samples per estimate")
        p.add_argument("--out", type=Path, help="output directory for reports")
        p.add_argument("--quiet", action="store_true", help="suppress stdout summary")
    return parser


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    file_values: dict[str, str] = {}
    if args.config is not None:
        file_values = parse_config_file(args.config)

    def pick(flag_value, key, convert):
        if flag_value is not None:
            return flag_value
        if key in file_values:
            return convert(file_values[key])
        return None

    n = pick(args.dim, "dim", int)
    deltas = args.delta
    if deltas is None and "delta" in file_values:
        deltas = [float(tok) for tok in file_values["delta"].replace(",", " ").split()]
    seed = pick(args.seed, "seed", int)
    samples = pick(args.samples, "samples", int)
    out = pick(args.out, "out", Path)
    quiet = args.quiet or file_values.get("quiet", "").lower() in ("1", "true", "yes")
    params = {k: v for k, v in file_values.items() if k not in _RESERVED_KEYS}
    return ExperimentConfig(
        experiment=ExperimentKind(args.experiment),
        n=n if n is not None else 3,
        deltas=tuple(deltas) if deltas else None,
        seed=seed if seed is not None else 0,
        samples=samples,
        out=out,
        quiet=quiet,
        params=params,
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = build_config(args)
    result = run(cfg)
    if not cfg.quiet:
        for key, value in result.summary.items():
            print(f"{key} = {value}")
        for warning in result.warnings:
            print(f"warning: {warning}")
        for failure in result.failures:
            print(f"FAILURE: {failure}")
        print("passed" if result.passed else "FAILED")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
