"""Command-line interface: simulate | condition | reconstruct | oracle | verify | run."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import fock, pipeline, sampleio, tomography


def _load_config(args) -> pipeline.RunConfig:
    if args.config:
        config = pipeline.load_config(args.config)
    else:
        config = pipeline.RunConfig()
    return pipeline.config_overrides(config, seed=args.seed)


def _add_common(parser):
    parser.add_argument("--config", help="path to a key = value configuration file")
    parser.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("--out", default="out", help="output directory")


def cmd_simulate(args) -> int:
    config = _load_config(args)
    paths = pipeline.simulate(config, args.out, threads=args.threads)
    print(f"wrote {len(paths)} CVQS files under {Path(args.out) / 'samples'}")
    return 0


def cmd_condition(args) -> int:
    config = _load_config(args)
    sample_dir = args.samples or str(Path(args.out) / "samples")
    merged = pipeline.condition_from_files(config, sample_dir, args.out)
    n = sum(len(h) for h in merged.values())
    print(f"wrote {n} marginal tables under {Path(args.out) / 'marginals'}")
    return 0


def cmd_reconstruct(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    marg_root = out / "marginals"
    if not marg_root.is_dir():
        raise pipeline.PipelineError("reconstruct", f"no marginals directory under {out}")
    wigner_dir = out / "wigner"
    wigner_dir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for poly_dir in sorted(p for p in marg_root.iterdir() if p.is_dir()):
        angles, rows = [], []
        for csv in sorted(poly_dir.glob("angle_*.csv")):
            millideg = int(csv.stem.split("_")[1])
            angles.append(math.radians(millideg / 1000.0))
            centers, density = sampleio.read_marginal_csv(csv)
            rows.append(density)
        marginals = tomography.MarginalSet(
            angles=np.array(angles), centers=centers, densities=np.stack(rows)
        )
        grid = pipeline.reconstruct_marginals(config, marginals)
        sampleio.write_wigner_csv(wigner_dir / f"{poly_dir.name}.csv", grid)
        sampleio.write_pgm(wigner_dir / f"{poly_dir.name}.pgm", grid)
        for key, value in tomography.wigner_metrics(grid).as_dict().items():
            entries[f"{poly_dir.name}.{key}"] = value
    sampleio.write_report(out / "metrics.txt", entries)
    print(f"wrote Wigner grids and metrics under {out}")
    return 0


def cmd_oracle(args) -> int:
    config = _load_config(args)
    out = Path(args.out) / "oracle"
    out.mkdir(parents=True, exist_ok=True)
    params = config.params
    centers = (
        np.arange(config.histogram_bins) + 0.5
    ) * 2 * config.histogram_range / config.histogram_bins - config.histogram_range
    axes = tomography.phase_space_axes(config.grid_extent, config.grid_points)
    entries = {}
    references = pipeline.oracle_reference(config)
    for label, entry in references.items():
        slug = pipeline.polynomial_slug(label)
        poly_dir = out / slug
        poly_dir.mkdir(parents=True, exist_ok=True)
        for theta in params.tomography_angles:
            density = pipeline.oracle_marginal(config, entry, theta, centers)
            millideg = round(math.degrees(theta) * 1000)
            sampleio.write_marginal_csv(
                poly_dir / f"angle_{millideg:06d}.csv",
                centers,
                density,
                np.zeros(centers.size, dtype=int),
                density,
            )
        grid = tomography.WignerGrid(
            xs=axes, ps=axes, values=fock.wigner_exact(entry["weighted_state"], axes, axes)
        )
        sampleio.write_wigner_csv(out / f"{slug}_wigner.csv", grid)
        sampleio.write_pgm(out / f"{slug}_wigner.pgm", grid)
        entries[f"{label}.herald_analogue"] = entry["herald_analogue"]
        for key, value in tomography.wigner_metrics(grid).as_dict().items():
            entries[f"{label}.{key}"] = value
    sampleio.write_report(out / "oracle_metrics.txt", entries)
    print(f"wrote oracle references under {out}")
    return 0


def cmd_verify(args) -> int:
    config = _load_config(args)
    passed, results = pipeline.verify(config, args.out)
    for name in sorted(results):
        print(f"{name}: {results[name]}")
    return 0 if passed else 1


def cmd_run(args) -> int:
    config = _load_config(args)
    pipeline.run(config, args.out, threads=args.threads)
    print(f"metrics written to {Path(args.out) / 'metrics.txt'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvtomo",
        description=(
            "Simulate dual-homodyne photon-number weighting and reconstruct "
            "photon-subtracted squeezed-vacuum Wigner functions"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    handlers = {
        "simulate": (cmd_simulate, "generate the raw CVQS sample files"),
        "condition": (cmd_condition, "build weighted marginals from CVQS files"),
        "reconstruct": (cmd_reconstruct, "inverse-Radon the marginal tables"),
        "oracle": (cmd_oracle, "write the exact Fock-basis references"),
        "verify": (cmd_verify, "run the internal consistency battery"),
        "run": (cmd_run, "full pipeline: simulate, condition, reconstruct, compare"),
    }
    for name, (handler, help_text) in handlers.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "condition":
            p.add_argument("--samples", help="directory of CVQS files (default <out>/samples)")
        p.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except pipeline.PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
