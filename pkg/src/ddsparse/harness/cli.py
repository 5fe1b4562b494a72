"""Command-line front end.

Five subcommands cover the workflow end to end::

    ddsparse simulate        draw a road scene and its ground-truth channel
    ddsparse regions         estimate the dense-region layout from data
    ddsparse estimate        run one estimator on one synthesized measurement
    ddsparse benchmark       Monte-Carlo NMSE sweep over seeds x SNR x estimator
    ddsparse ablate-leakage  paired sweep with the pulse-leakage model on/off

Every subcommand starts from a named preset (``--preset``), optionally
replaced wholesale by a JSON config (``--config``), and writes its
artifacts into ``--out``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..estimator import admm_solve, cross_validate
from ..lattice import SpreadingFunction
from ..regions import build_partition, estimate_regions_from_data
from .config import PRESET_NAMES, ExperimentConfig, ablation_config
from .io import (
    emit_plots_csv,
    export_ablation_csv,
    export_benchmark_csv,
    export_partition_csv,
    export_regions_csv,
    export_scenario_csv,
    export_spreading_csv,
    export_timing_csv,
    import_spreading_csv,
    nmse_db,
)
from .runner import (
    SeedSystem,
    _admm_config,
    _group_regularizer,
    ablation_delta_db,
    dispatch_estimator,
    leakage_ablation,
    mean_nmse,
    nmse,
    run_benchmark,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--preset", choices=PRESET_NAMES, default="tiny",
        help="named parameter set to start from (default: tiny)",
    )
    parser.add_argument(
        "--config", type=Path, default=None,
        help="JSON experiment config; replaces the preset entirely",
    )
    parser.add_argument(
        "--seed", type=int, default=None,
        help="run a single seed instead of the config's seed list",
    )
    parser.add_argument(
        "--out", type=Path, default=Path("."),
        help="directory for output files (default: current directory)",
    )


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig.preset(args.preset)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if getattr(args, "estimators", None):
        cfg = replace(cfg, estimators=tuple(args.estimators))
    if getattr(args, "snr", None) is not None and isinstance(args.snr, list):
        cfg = replace(cfg, snr_db=tuple(args.snr))
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    seed = cfg.seeds[0]
    grid = cfg.grid()
    from ..channel import ground_truth_spreading, sample_scenario

    scenario = sample_scenario(
        cfg.geometry, cfg.n_md, cfg.n_sd, cfg.n_di, seed=seed, profile=cfg.profile
    ).synced_to_los(grid)
    x_true = ground_truth_spreading(scenario, grid)
    export_scenario_csv(scenario, out / "scenario.csv")
    export_spreading_csv(x_true, out / "spreading.csv")
    counts = scenario.counts()
    print(f"seed {seed}: {counts['md']} mobile, {counts['sd']} static, "
          f"{counts['di']} diffuse paths")
    print(f"grid: {grid.n_doppler} Doppler x {grid.m} delay bins, "
          f"N_r={grid.nr}, Ts={grid.ts:g} s")
    print(f"channel energy {x_true.energy:.6g}; "
          f"nonzero bins {int(np.count_nonzero(x_true.values))}")
    print(f"wrote {out / 'scenario.csv'} and {out / 'spreading.csv'}")
    return 0


def _cmd_regions(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    if args.input is not None:
        x = import_spreading_csv(args.input)
        grid = x.grid
        source = str(args.input)
    else:
        system = SeedSystem(cfg, cfg.seeds[0])
        grid = system.grid
        y = system.measurement(args.snr)
        x_hat, _ = dispatch_estimator(
            "ls", y, system.a, system.noise_var(args.snr), cfg,
            partition=system.partition, pre=system.pre,
            pre_ridge=system.pre_ridge, support=system.support,
            diffuse_var=system.diffuse_var, region_mask=system.region_mask,
            true_power=system.true_power,
        )
        x = SpreadingFunction(grid, x_hat)
        source = f"ridge pilot estimate at {args.snr:g} dB (seed {cfg.seeds[0]})"
    regions = estimate_regions_from_data(x, cfg.alpha_d, cfg.alpha_nu)
    partition = build_partition(regions, grid)
    export_regions_csv(regions, out / "regions.csv")
    export_partition_csv(partition, out / "partition.csv")
    print(f"regions from {source}:")
    print(f"  delay: m0={regions.m0} delta_m={regions.delta_m} (of {regions.m_max})")
    print(f"  Doppler: k_s={regions.k_s} delta_k={regions.delta_k} "
          f"(of {regions.k_max})")
    n1, n2, n3 = partition.region_counts()
    print(f"  bins: {n1} near-static, {n2} high-Doppler, {n3} outside")
    print(f"wrote {out / 'regions.csv'} and {out / 'partition.csv'}")
    return 0


def _cmd_estimate(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    seed = cfg.seeds[0]
    system = SeedSystem(cfg, seed)
    noise_var = system.noise_var(args.snr)
    y = system.measurement(args.snr)
    name = args.estimator
    if args.cv:
        if not name.startswith("nested-"):
            raise ValueError("--cv applies to the nested estimators only")
        unit = float(np.sqrt(noise_var * system.grid.nr))
        candidates = [s * unit for s in cfg.lam_grid]
        base = _admm_config(cfg, 0.0, 0.0, f_g=_group_regularizer(cfg, name))
        best_cfg, scores = cross_validate(
            y, system.a, system.partition, candidates, ratio=cfg.lam_ratio,
            base_cfg=base,
        )
        res = admm_solve(y, system.a, system.partition, best_cfg, pre=system.pre)
        x_hat, iters = res.x_hat, res.iterations
        picked = best_cfg.lam_group / unit
        print(f"cross-validation picked lam scale {picked:g} "
              f"from {list(cfg.lam_grid)}")
        for lam, score in zip(candidates, scores):
            print(f"  lam={lam:.4g}  heldout={score:.6g}")
    else:
        x_hat, iters = dispatch_estimator(
            name, y, system.a, noise_var, cfg,
            partition=system.partition, pre=system.pre,
            pre_ridge=system.pre_ridge, support=system.support,
            diffuse_var=system.diffuse_var, region_mask=system.region_mask,
            true_power=system.true_power,
        )
    err = nmse(x_hat, system.x_true)
    export_spreading_csv(SpreadingFunction(system.grid, x_hat), out / "estimate.csv")
    export_spreading_csv(
        SpreadingFunction(system.grid, system.x_true), out / "truth.csv"
    )
    print(f"{name} at {args.snr:g} dB (seed {seed}): "
          f"NMSE {nmse_db(err):.2f} dB, {iters} iterations")
    print(f"wrote {out / 'estimate.csv'} and {out / 'truth.csv'}")
    return 0


def _cmd_benchmark(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    rows = run_benchmark(cfg)
    export_benchmark_csv(rows, out / "benchmark.csv")
    export_timing_csv(rows, out / "benchmark_timing.csv")
    cfg.save(out / "config.json")
    failures = sum(1 for r in rows if r.nmse is None)
    means = mean_nmse(rows)
    print(f"{len(rows)} rows ({failures} failed) over {len(cfg.seeds)} seeds")
    print(f"{'estimator':<16} {'snr_db':>7} {'mean_nmse_db':>13}")
    for est in sorted(cfg.estimators):
        for snr in sorted(cfg.snr_db):
            key = (est, snr)
            if key in means:
                print(f"{est:<16} {snr:>7g} {nmse_db(means[key]):>13.2f}")
            else:
                print(f"{est:<16} {snr:>7g} {'--':>13}")
    paths = emit_plots_csv(rows, out)
    print(f"wrote {out / 'benchmark.csv'}, {out / 'benchmark_timing.csv'}, "
          f"{len(paths)} plot tables, {out / 'config.json'}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = ablation_config(_load_config(args), pad=args.pad)
    out = _outdir(args)
    rows = leakage_ablation(cfg)
    export_ablation_csv(rows, out / "ablation.csv")
    cfg.save(out / "config.json")
    deltas = ablation_delta_db(rows)
    if not deltas:
        raise ValueError("no successful ablation rows")
    print(f"{'estimator':<16} {'snr_db':>7} {'gain_db':>9}")
    for (est, snr) in sorted(deltas):
        print(f"{est:<16} {snr:>7g} {deltas[(est, snr)]:>9.2f}")
    print(f"wrote {out / 'ablation.csv'} and {out / 'config.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddsparse",
        description="Delay-Doppler channel estimation for vehicular links",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a scene and export its channel")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("regions", help="estimate the dense-region layout")
    _add_common(p)
    p.add_argument("--input", type=Path, default=None,
                   help="spreading-function CSV; omit to simulate one")
    p.add_argument("--snr", type=float, default=20.0,
                   help="SNR in dB for the simulated pilot (default: 20)")
    p.set_defaults(func=_cmd_regions)

    p = sub.add_parser("estimate", help="run one estimator on one measurement")
    _add_common(p)
    p.add_argument("--snr", type=float, default=20.0,
                   help="SNR in dB (default: 20)")
    p.add_argument("--estimator", default="nested-scad",
                   help="estimator name (default: nested-scad)")
    p.add_argument("--cv", action="store_true",
                   help="pick the penalty weight by cross-validation")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("benchmark", help="Monte-Carlo NMSE sweep")
    _add_common(p)
    p.add_argument("--snr", type=float, nargs="+", default=None,
                   help="override the config's SNR list (dB)")
    p.add_argument("--estimators", nargs="+", default=None,
                   help="override the config's estimator list")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("ablate-leakage",
                       help="compare estimation with and without the leakage model")
    _add_common(p)
    p.add_argument("--snr", type=float, nargs="+", default=None,
                   help="override the config's SNR list (dB)")
    p.add_argument("--estimators", nargs="+", default=None,
                   help="override the config's estimator list")
    p.add_argument("--pad", type=float, default=1.5,
                   help="Doppler-axis padding factor for the ablation grid "
                        "(default: 1.5)")
    p.set_defaults(func=_cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
