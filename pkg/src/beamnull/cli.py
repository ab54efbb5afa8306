"""Command-line interface: run pipelines, learn single beams, sweep surrogates."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment
from .agent import ActorCriticConfig, BeamAgent, learn
from .arrays import angle_grid, beam_pattern, export_pattern_csv, to_combiner
from .channels import ArrayGeometry, ConfigError, build_scenario
from .environment import ActualEnvironment, full_metrics
from .experiment import (
    ARTIFACT_FILES,
    beam_record,
    load_config,
    resolve_config,
    run_pipeline,
    sweep_surrogate,
    write_log_csv,
    write_sweep_csv,
)
from .oracle import exhaustive_search


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="override the config seed list with one seed")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--surrogate", choices=["none", "model", "fc"], help="surrogate mode")
    parser.add_argument("--antennas", type=int, help="number of array elements")
    parser.add_argument("--bits", type=int, help="phase shifter resolution in bits")
    parser.add_argument("--interferers", type=int, help="number of interferers to place")
    parser.add_argument("--iterations", type=int, help="aware-stage learning iterations")


def _config_from_args(args) -> dict:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = resolve_config()
    if args.antennas is not None:
        cfg["scenario"]["antennas"] = args.antennas
    if args.bits is not None:
        cfg["scenario"]["bits"] = args.bits
    if args.interferers is not None:
        cfg["interferer_count"] = args.interferers
    if args.surrogate is not None:
        cfg["surrogate"]["mode"] = args.surrogate
    if args.iterations is not None:
        cfg["iterations"]["aware"] = args.iterations
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    if args.out is not None:
        cfg["output_dir"] = str(args.out)
    return cfg


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    for seed in cfg["seeds"]:
        artifact = run_pipeline(cfg, seed=seed, out_dir=cfg["output_dir"])
        deltas = artifact.summary["deltas"]
        print(f"seed {seed}: artifact at {artifact.directory}")
        print(f"  SIR improvement (dB): {['%.2f' % d for d in deltas['sir_improvement_db']]}")
        print(f"  combining gain loss (dB): {deltas['gain_loss_db']:.4f}")
    return 0


def cmd_learn(args) -> int:
    """Learn a single beam for the configured scenario as-is."""
    cfg = _config_from_args(args)
    seed = cfg["seeds"][0]
    scenario_cfg = dict(cfg["scenario"])
    scenario_cfg["seed"] = seed
    scenario = build_scenario(scenario_cfg)
    agent = BeamAgent(
        ActorCriticConfig(antennas=scenario.geometry.antennas, bits=scenario.codebook.bits,
                          **cfg["agent"]),
        seed=experiment.derived_seed(seed, 11),
    )
    env = ActualEnvironment(scenario, noise_db=cfg["measurement_noise_db"])
    iterations = args.iterations if args.iterations else cfg["iterations"]["aware"]
    result = learn(agent, env, iterations)

    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    record = beam_record(scenario, result.best_phases)
    with open(out / "beam.json", "w") as fh:
        json.dump(record, fh, indent=2)
    write_log_csv(out / "trajectory.csv", result.log)
    grid = angle_grid(cfg["angle_grid_deg"])
    pattern = beam_pattern(to_combiner(result.best_phases), grid, scenario.geometry)
    export_pattern_csv(out / "pattern.csv", grid, pattern)
    print(f"best SINR {10 * np.log10(max(result.best_sinr, 1e-30)):.2f} dB "
          f"after {result.measurement_pairs} measurement pairs; beam saved to {out / 'beam.json'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    seed = cfg["seeds"][0]
    scenario_cfg = dict(cfg["scenario"])
    scenario_cfg["seed"] = seed
    if scenario_cfg["interferer_azimuths_deg"] is None:
        # The sweep needs interference active; spread the default interferers
        # uniformly when no angles are configured.
        k = max(cfg["interferer_count"], 1)
        scenario_cfg["interferer_azimuths_deg"] = list(np.linspace(20.0, 60.0, k))
    scenario = build_scenario(scenario_cfg)
    sizes = args.samples or (50, 100, 200, 500, 1000, 2000, 5000, 10000)
    rows = sweep_surrogate(scenario, sample_sizes=sizes, draws=args.draws, seed=seed)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / "surrogate_sweep.csv"
    write_sweep_csv(path, rows)
    print(f"wrote {len(rows)} sweep rows to {path}")
    return 0


def cmd_pattern(args) -> int:
    with open(args.beam) as fh:
        record = json.load(fh)
    geometry = ArrayGeometry(antennas=record["antennas"])
    grid = angle_grid(args.grid_deg)
    pattern = beam_pattern(to_combiner(np.asarray(record["phases_rad"])), grid, geometry)
    export_pattern_csv(args.out, grid, pattern)
    print(f"wrote beam pattern to {args.out}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _config_from_args(args)
    seed = cfg["seeds"][0]
    scenario_cfg = dict(cfg["scenario"])
    scenario_cfg["seed"] = seed
    if scenario_cfg["interferer_azimuths_deg"] is None and cfg["interferer_count"] > 0:
        scenario_cfg["interferer_azimuths_deg"] = list(
            np.linspace(20.0, 60.0, cfg["interferer_count"])
        )
    scenario = build_scenario(scenario_cfg)
    result = exhaustive_search(scenario)
    metrics = full_metrics(scenario, to_combiner(result.best_phases))
    print(f"enumerated {result.n_beams} beams")
    print(f"best SINR {metrics.sinr_db:.4f} dB at phases {np.round(result.best_phases, 6).tolist()}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "oracle_beam.json", "w") as fh:
            json.dump(beam_record(scenario, result.best_phases), fh, indent=2)
        print(f"saved to {args.out / 'oracle_beam.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamnull",
        description="Learn interference-nulling analog combining beams from power measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: unaware beam, interferer placement, aware beam")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_learn = sub.add_parser("learn", help="learn a single beam for the configured scenario")
    _add_common(p_learn)
    p_learn.set_defaults(func=cmd_learn)

    p_sweep = sub.add_parser("sweep-surrogate", help="surrogate accuracy vs training-set size")
    _add_common(p_sweep)
    p_sweep.add_argument("--samples", type=int, nargs="+", help="training-set sizes")
    p_sweep.add_argument("--draws", type=int, default=1, help="independent dataset draws")
    p_sweep.set_defaults(func=cmd_sweep)

    p_pattern = sub.add_parser("pattern", help="evaluate a saved beam over an angle grid")
    p_pattern.add_argument("--beam", type=Path, required=True, help="beam JSON file")
    p_pattern.add_argument("--out", type=Path, required=True, help="output CSV path")
    p_pattern.add_argument("--grid-deg", type=float, default=0.1, help="grid resolution in degrees")
    p_pattern.set_defaults(func=cmd_pattern)

    p_oracle = sub.add_parser("oracle", help="exhaustive search over all quantized beams (small M)")
    _add_common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
