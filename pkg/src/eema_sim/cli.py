"""Command line driver.

    sim run --experiment lifetime --protocol eema,leach --scenario scenario1 \
            --seeds 20 --out results.csv
    sim analyze --scenario scenario1
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .analysis import AnalyticalInputs, summary_table
from .eema import layer_range
from .experiments import (
    EXPERIMENTS,
    ExperimentSpec,
    run_delay_sweep,
    run_layer_sweep,
    run_lifetime,
)
from .engine import PROTOCOLS
from .io import ConfigFileError, export, export_rows, load_config
from .model import ConfigurationError
from .presets import PRESETS, get_scenario

log = logging.getLogger("eema_sim")


def _parse_seeds(value: str) -> list[int]:
    if "," in value:
        return [int(v) for v in value.split(",") if v]
    return list(range(int(value)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Hierarchical clustering simulator for wireless sensor networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--config", help="JSON experiment config file")
    run.add_argument("--experiment", choices=EXPERIMENTS)
    run.add_argument("--protocol",
                     help=f"comma-separated subset of {','.join(PROTOCOLS)}")
    run.add_argument("--scenario", help=f"preset name ({', '.join(PRESETS)})")
    run.add_argument("--seeds", help="seed count, or explicit comma list")
    run.add_argument("--out", help="output file path")
    run.add_argument("--format", choices=("csv", "json"), dest="fmt")
    run.add_argument("--max-rounds", type=int)
    run.add_argument("--stop-at", choices=("fnd", "hna", "lnd"))
    run.add_argument("--initial-energy", type=float,
                     help="override the scenario energy budget (J)")
    run.add_argument("--full", action="store_true",
                     help="add the full-scale (N=4000, M=2000) sweep point")

    analyze = sub.add_parser("analyze", help="print the closed-form quantities")
    analyze.add_argument("--scenario", default="scenario1",
                         help=f"preset name ({', '.join(PRESETS)})")
    analyze.add_argument("--layer", type=int, default=3,
                         help="layer whose super-cluster range to use")
    return parser


def _spec_from_args(args) -> ExperimentSpec:
    if args.config:
        spec = load_config(args.config)
    else:
        spec = ExperimentSpec(experiment=args.experiment or "lifetime")
    if args.experiment:
        spec.experiment = args.experiment
    if args.protocol:
        spec.protocols = [p.strip() for p in args.protocol.split(",") if p.strip()]
    if args.scenario:
        spec.scenario = args.scenario
    if args.seeds:
        spec.seeds = _parse_seeds(args.seeds)
    if args.out:
        spec.output = args.out
    if args.fmt:
        spec.fmt = args.fmt
    if args.max_rounds:
        spec.max_rounds = args.max_rounds
    if args.stop_at:
        spec.stop_at = args.stop_at
    if args.full:
        spec.full_scale = True
    spec.validate()
    if args.initial_energy is not None:
        cfg = spec.resolve_scenario()
        cfg.initial_energy = args.initial_energy
        cfg.validate()
        spec.scenario = cfg
    return spec


def _print_summary(reports) -> None:
    print(f"{'protocol':<8} {'FND':>10} {'HNA':>10} {'LND':>10} "
          f"{'E/round (J)':>14} {'beyond':>7}")
    for rep in reports:
        def fmt(v):
            return f"{v:10.1f}" if v is not None else f"{'-':>10}"
        energy = (f"{rep.mean_energy_before_fnd:14.6f}"
                  if rep.mean_energy_before_fnd is not None else f"{'-':>14}")
        print(f"{rep.protocol:<8} {fmt(rep.fnd_mean)} {fmt(rep.hna_mean)} "
              f"{fmt(rep.lnd_mean)} {energy} {rep.beyond_horizon:>7}")


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    cfg = spec.resolve_scenario()
    failures = []
    if spec.experiment in ("lifetime", "energy"):
        reports = []
        for proto in spec.protocols:
            try:
                reports.extend(run_lifetime(
                    ExperimentSpec(
                        experiment=spec.experiment, protocols=[proto],
                        scenario=cfg, seeds=spec.seeds,
                        max_rounds=spec.max_rounds, stop_at=spec.stop_at,
                    )
                ))
            except Exception as exc:  # keep going; report at exit
                log.error("protocol %s failed: %s", proto, exc)
                failures.append(proto)
        _print_summary(reports)
        if spec.output:
            export(reports, spec.fmt, spec.output,
                   config_digest=cfg.digest(), seeds=spec.seeds)
            print(f"wrote {spec.output}")
    elif spec.experiment == "layer_sweep":
        rows = run_layer_sweep(spec)
        for row in rows:
            print(f"n={row['n']:<6} m={row['m']:<7} layers={row['layers']} "
                  f"energy={row['energy_j']:.6f} J")
        if spec.output:
            export_rows(rows, ["n", "m", "layers", "rounds", "energy_j"],
                        spec.fmt, spec.output, config_digest=cfg.digest(),
                        seeds=spec.seeds)
            print(f"wrote {spec.output}")
    elif spec.experiment == "delay_sweep":
        rows = run_delay_sweep(spec)
        for row in rows:
            print(f"n={row['n']:<6} m={row['m']:<7} bs={row['bs']:<8} "
                  f"{row['architecture']:<5} delay={row['delay_tu']:.1f}")
        if spec.output:
            export_rows(rows, ["n", "m", "bs", "architecture", "delay_tu"],
                        spec.fmt, spec.output, config_digest=cfg.digest(),
                        seeds=spec.seeds)
            print(f"wrote {spec.output}")
    elif spec.experiment == "analyze":
        return cmd_analyze_config(cfg)
    if failures:
        print(f"failed protocols: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def cmd_analyze_config(cfg, layer: int = 3) -> int:
    r_s = cfg.r_s if cfg.r_s is not None else layer_range(layer, cfg.r_c, cfg.r_t)
    inputs = AnalyticalInputs(
        n=cfg.n_nodes, m_field=cfg.field_size_m, r_c=cfg.r_c, r_s=r_s,
        r_t=cfg.r_t, l=cfg.data_frame_bits, radio=cfg.radio,
    )
    table = summary_table(inputs)
    width = max(len(k) for k in table)
    for key, value in table.items():
        print(f"{key:<{width}}  {value:.6g}")
    return 0


def cmd_analyze(args) -> int:
    cfg = get_scenario(args.scenario)
    return cmd_analyze_config(cfg, layer=args.layer)


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("EEMA_SIM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "analyze":
            return cmd_analyze(args)
    except (ConfigFileError, ConfigurationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
