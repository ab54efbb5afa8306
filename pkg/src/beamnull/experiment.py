"""End-to-end pipeline: unaware beam -> sidelobe-aligned interferers -> aware beam.

Runs are driven by a JSON config in which every tunable appears explicitly
with its default.  Each (config, seed) pair produces a self-contained
artifact directory of CSV/JSON files; re-running from the stored snapshot
reproduces the run bit-exactly in noiseless mode.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .agent import ActorCriticConfig, BeamAgent, learn
from .arrays import (
    SIR_CAP_DB,
    angle_grid,
    beam_pattern,
    export_pattern_csv,
    find_sidelobe_peaks,
    to_combiner,
)
from .channels import (
    ConfigError,
    Scenario,
    build_scenario,
    place_interferers,
    scenario_config_defaults,
    scenario_from_dict,
    scenario_to_dict,
)
from .environment import ActualEnvironment, Metrics, full_metrics
from .surrogate import (
    SurrogateDataset,
    SurrogateSpec,
    SwitchController,
    make_predictor,
    nmse,
    run_assisted_learning,
    train_surrogate,
)

SCHEMA_VERSION = 1

ARTIFACT_FILES = {
    "config": "config.json",
    "scenario": "scenario.json",
    "trajectory_unaware": "trajectory_unaware.csv",
    "trajectory_aware": "trajectory_aware.csv",
    "beam_unaware": "beam_unaware.json",
    "beam_aware": "beam_aware.json",
    "pattern_unaware": "pattern_unaware.csv",
    "pattern_aware": "pattern_aware.csv",
    "summary": "summary.json",
}


def experiment_config_defaults() -> dict:
    """The full config tree with every default spelled out."""
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario_config_defaults(),
        # Interferer count used when the scenario defers placement to the
        # strongest sidelobes of the learned unaware beam.
        "interferer_count": 2,
        "agent": {
            "gamma": 0.5,
            "tau": 0.005,
            "actor_lr": 1e-4,
            "critic_lr": 1e-3,
            "replay_capacity": 4096,
            "batch_size": 128,
            "explore_sigma": 0.5,
            "explore_decay": 0.995,
            "explore_floor": 0.05,
        },
        "surrogate": {
            "mode": "none",  # none | model | fc
            "rank_interference": None,
            "rank_signal": 2,
            "fc_hidden": 64,
            "fc_encoding": "reim",
            "use_offset": True,
            "n_real": 250,
            "rounds": 4,
            "nmse_threshold": 0.05,
            "stagnation_window": 500,
            "max_virtual_per_round": 2000,
        },
        "iterations": {"unaware": 2000, "aware": 5000},
        "measurement_noise_db": 0.0,
        "angle_grid_deg": 0.1,
        "seeds": [0],
        "output_dir": "runs",
    }


def _merge(defaults: dict, overrides: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in overrides.items():
        if key not in defaults:
            raise ConfigError(f"unknown config field: {path}{key}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge(defaults[key], value, f"{path}{key}.")
        else:
            out[key] = value
    return out


def resolve_config(config: dict | None = None) -> dict:
    """Merge a partial config into the defaults, rejecting unknown fields."""
    cfg = _merge(experiment_config_defaults(), config or {})
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version: {cfg['schema_version']!r}")
    if cfg["surrogate"]["mode"] not in ("none", "model", "fc"):
        raise ConfigError("surrogate.mode must be one of none|model|fc")
    if cfg["interferer_count"] < 0:
        raise ConfigError("interferer_count must be >= 0")
    for stage in ("unaware", "aware"):
        if cfg["iterations"][stage] < 1:
            raise ConfigError(f"iterations.{stage} must be >= 1")
    return cfg


def load_config(path) -> dict:
    with open(path) as fh:
        return resolve_config(json.load(fh))


def derived_seed(seed: int, stream: int) -> int:
    """A decorrelated child seed for one named stream of a run."""
    return int(np.random.SeedSequence((seed, stream)).generate_state(1)[0])


def scenario_digest(scenario: Scenario) -> str:
    blob = json.dumps(scenario_to_dict(scenario), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def metrics_to_dict(metrics: Metrics) -> dict:
    return {
        "sinr_db": metrics.sinr_db,
        "snr_db": metrics.snr_db,
        "inr_db": metrics.inr_db,
        "sir_db": [min(float(s), SIR_CAP_DB) for s in metrics.sir_db],
        "sir_overall_db": metrics.sir_overall_db,
        "signal_gain": metrics.signal_gain,
        "rate": metrics.rate,
    }


def beam_record(scenario: Scenario, phases) -> dict:
    """JSON form of a learned beam plus its metrics against `scenario`."""
    phases = np.asarray(phases, dtype=float)
    return {
        "schema_version": SCHEMA_VERSION,
        "antennas": scenario.geometry.antennas,
        "bits": scenario.codebook.bits,
        "phases_rad": phases.tolist(),
        "scenario_digest": scenario_digest(scenario),
        "metrics": metrics_to_dict(full_metrics(scenario, to_combiner(phases))),
    }


def summarize(scenario: Scenario, unaware: dict, aware: dict) -> dict:
    """Before/after table for two beam records learned on the same scenario."""
    digest = scenario_digest(scenario)
    if unaware["scenario_digest"] != digest or aware["scenario_digest"] != digest:
        raise ValueError("beam records were not evaluated on this scenario")
    mu = full_metrics(scenario, to_combiner(np.asarray(unaware["phases_rad"])))
    ma = full_metrics(scenario, to_combiner(np.asarray(aware["phases_rad"])))
    return {
        "schema_version": SCHEMA_VERSION,
        "unaware": metrics_to_dict(mu),
        "aware": metrics_to_dict(ma),
        "deltas": {
            "sir_improvement_db": [
                min(float(a - u), SIR_CAP_DB) for a, u in zip(ma.sir_db, mu.sir_db)
            ],
            "inr_reduction_db": mu.inr_db - ma.inr_db,
            "gain_loss_db": 10.0 * np.log10(mu.signal_gain / ma.signal_gain),
            "sinr_improvement_db": ma.sinr_db - mu.sinr_db,
            "rate_gain": ma.rate - mu.rate,
        },
    }


def write_log_csv(path, rows) -> None:
    """Per-iteration trajectory rows (dicts with identical keys) to CSV."""
    if not rows:
        raise ValueError("no rows to write")
    fields = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_cell(v) for k, v in row.items()})


def _format_cell(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return value


def read_log_csv(path) -> list[dict]:
    """Inverse of write_log_csv; numeric fields come back as floats."""
    with open(path, newline="") as fh:
        rows = []
        for row in csv.DictReader(fh):
            parsed = {}
            for key, value in row.items():
                if key == "phase":
                    parsed[key] = value
                else:
                    parsed[key] = float(value)
            rows.append(parsed)
    return rows


@dataclass
class StageResult:
    phases: np.ndarray
    sinr: float
    log: list
    measurement_pairs: int


@dataclass
class RunArtifact:
    directory: Path
    config: dict
    scenario: Scenario
    unaware: dict
    aware: dict
    summary: dict


def _agent_for(cfg: dict, scenario_cfg: dict, seed: int) -> BeamAgent:
    ac = ActorCriticConfig(antennas=scenario_cfg["antennas"], bits=scenario_cfg["bits"], **cfg["agent"])
    return BeamAgent(ac, seed=seed)


def _learn_stage(cfg: dict, scenario: Scenario, seed: int, use_surrogate: bool,
                 iterations: int) -> StageResult:
    env = ActualEnvironment(scenario, noise_db=cfg["measurement_noise_db"])
    agent = _agent_for(cfg, cfg["scenario"], seed)
    sur = cfg["surrogate"]
    if use_surrogate and sur["mode"] != "none":
        controller = SwitchController(
            n_real=sur["n_real"],
            rounds=sur["rounds"],
            nmse_threshold=sur["nmse_threshold"],
            stagnation_window=sur["stagnation_window"],
            max_virtual_per_round=sur["max_virtual_per_round"],
        )
        spec = SurrogateSpec(
            architecture="model" if sur["mode"] == "model" else "fc",
            rank_interference=sur["rank_interference"],
            rank_signal=sur["rank_signal"],
            fc_hidden=sur["fc_hidden"],
            fc_encoding=sur["fc_encoding"],
            use_offset=sur["use_offset"],
        )
        result = run_assisted_learning(env, agent, controller, spec, seed=seed)
        return StageResult(result.best_phases, result.best_sinr, result.log, result.real_measurement_pairs)
    result = learn(agent, env, iterations)
    return StageResult(result.best_phases, result.best_sinr, result.log, result.measurement_pairs)


def run_pipeline(config: dict | None = None, seed: int | None = None, out_dir=None) -> RunArtifact:
    """Execute the four-stage pipeline for one seed and write the artifact.

    Stages: (i) build the target channel; (ii) learn the interference-unaware
    beam with no interferers active; (iii) place the interferers on the
    unaware beam's strongest sidelobes (unless the config fixes their angles);
    (iv) learn the interference-aware beam, optionally surrogate-assisted.
    """
    cfg = resolve_config(config)
    if seed is None:
        seed = cfg["seeds"][0]
    out_dir = Path(out_dir if out_dir is not None else cfg["output_dir"])
    run_dir = out_dir / f"seed{seed:04d}"
    run_dir.mkdir(parents=True, exist_ok=True)

    scenario_cfg = dict(cfg["scenario"])
    scenario_cfg["seed"] = seed
    base = build_scenario(scenario_cfg)

    # Stage ii: no interferers, so the SINR reward degenerates to SNR.
    unaware_scenario = replace(base, interferers=())
    unaware_stage = _learn_stage(
        cfg, unaware_scenario, derived_seed(seed, 10), use_surrogate=False,
        iterations=cfg["iterations"]["unaware"],
    )

    grid = angle_grid(cfg["angle_grid_deg"])
    unaware_w = to_combiner(unaware_stage.phases)
    unaware_pattern = beam_pattern(unaware_w, grid, base.geometry)

    # Stage iii: interferer placement.
    sidelobe_warning = False
    if base.interferers:
        scenario = base
        interferer_azimuths = [p.azimuth for c in base.interferers for p in c.paths]
    else:
        k = cfg["interferer_count"]
        if k > 0:
            peaks = find_sidelobe_peaks(grid, unaware_pattern, k)
            sidelobe_warning = not peaks.found_all
            scenario = place_interferers(base, peaks.azimuths, gain=cfg["scenario"]["interferer_gain"])
            interferer_azimuths = list(peaks.azimuths)
        else:
            scenario = base
            interferer_azimuths = []

    # Stage iv: aware learning with interference active.
    aware_stage = _learn_stage(
        cfg, scenario, derived_seed(seed, 11), use_surrogate=True,
        iterations=cfg["iterations"]["aware"],
    )
    aware_w = to_combiner(aware_stage.phases)
    aware_pattern = beam_pattern(aware_w, grid, base.geometry)

    unaware_record = beam_record(scenario, unaware_stage.phases)
    aware_record = beam_record(scenario, aware_stage.phases)
    summary = summarize(scenario, unaware_record, aware_record)
    summary.update(
        seed=seed,
        target_azimuth_deg=float(np.rad2deg(base.target.paths[0].azimuth)),
        interferer_azimuths_deg=[float(np.rad2deg(a)) for a in interferer_azimuths],
        sidelobe_warning=sidelobe_warning,
        real_measurement_pairs={
            "unaware": unaware_stage.measurement_pairs,
            "aware": aware_stage.measurement_pairs,
        },
    )

    resolved = copy.deepcopy(cfg)
    resolved["seeds"] = [seed]
    _write_json(run_dir / ARTIFACT_FILES["config"], resolved)
    _write_json(run_dir / ARTIFACT_FILES["scenario"], scenario_to_dict(scenario))
    write_log_csv(run_dir / ARTIFACT_FILES["trajectory_unaware"], unaware_stage.log)
    write_log_csv(run_dir / ARTIFACT_FILES["trajectory_aware"], aware_stage.log)
    _write_json(run_dir / ARTIFACT_FILES["beam_unaware"], unaware_record)
    _write_json(run_dir / ARTIFACT_FILES["beam_aware"], aware_record)
    export_pattern_csv(run_dir / ARTIFACT_FILES["pattern_unaware"], grid, unaware_pattern)
    export_pattern_csv(run_dir / ARTIFACT_FILES["pattern_aware"], grid, aware_pattern)
    _write_json(run_dir / ARTIFACT_FILES["summary"], summary)

    return RunArtifact(
        directory=run_dir,
        config=resolved,
        scenario=scenario,
        unaware=unaware_record,
        aware=aware_record,
        summary=summary,
    )


def _write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_artifact_scenario(directory) -> Scenario:
    with open(Path(directory) / ARTIFACT_FILES["scenario"]) as fh:
        return scenario_from_dict(json.load(fh))


def random_quantized_beams(scenario: Scenario, n: int, rng: np.random.Generator) -> np.ndarray:
    """n combiners drawn uniformly from the codebook grid, shape (n, M)."""
    phases = rng.choice(scenario.codebook.values, size=(n, scenario.geometry.antennas))
    return np.exp(1j * phases) / np.sqrt(scenario.geometry.antennas)


def measured_powers(scenario: Scenario, w_batch) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless (interference+noise, signal) powers for a batch of beams."""
    p_in = np.full(w_batch.shape[0], scenario.noise_power)
    for ch in scenario.interferers:
        p_in += np.abs(w_batch @ np.conj(ch.vector)) ** 2 * scenario.tx_power
    p_s = np.abs(w_batch @ np.conj(scenario.target.vector)) ** 2 * scenario.tx_power
    return p_in, p_s


def sweep_surrogate(
    scenario: Scenario,
    sample_sizes=(50, 100, 200, 500, 1000, 2000, 5000, 10000),
    draws: int = 1,
    heldout: int = 2000,
    seed: int = 0,
    architectures=("model", "fc"),
    kinds=("interference", "signal"),
    spec: SurrogateSpec | None = None,
) -> list[dict]:
    """Held-out NMSE of each architecture as the training-set size grows.

    Training sets are nested (the N-sample set is a prefix of the larger
    ones), drawn fresh per draw; the held-out set is independent.
    """
    spec = spec or SurrogateSpec()
    sizes = sorted(sample_sizes)
    rows = []
    for draw in range(draws):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 7, draw)))
        pool_w = random_quantized_beams(scenario, sizes[-1], rng)
        held_w = random_quantized_beams(scenario, heldout, rng)
        pool = {"interference": None, "signal": None}
        held = {"interference": None, "signal": None}
        pool["interference"], pool["signal"] = measured_powers(scenario, pool_w)
        held["interference"], held["signal"] = measured_powers(scenario, held_w)
        for kind in kinds:
            held_ds = SurrogateDataset(kind, scenario.geometry.antennas)
            for w, p in zip(held_w, held[kind]):
                held_ds.append(w, p)
            for arch in architectures:
                for n in sizes:
                    train_ds = SurrogateDataset(kind, scenario.geometry.antennas)
                    for w, p in zip(pool_w[:n], pool[kind][:n]):
                        train_ds.append(w, p)
                    arch_spec = SurrogateSpec(
                        architecture=arch,
                        rank_interference=spec.rank_interference,
                        rank_signal=spec.rank_signal,
                        fc_hidden=spec.fc_hidden,
                        fc_encoding=spec.fc_encoding,
                        use_offset=spec.use_offset,
                        hyper=spec.hyper,
                    )
                    arch_id = {"model": 0, "fc": 1}[arch]
                    pred_rng = np.random.default_rng(
                        np.random.SeedSequence((seed, 8, draw, n, arch_id))
                    )
                    predictor = make_predictor(
                        arch_spec, kind, scenario.geometry.antennas, scenario.n_interferers, pred_rng
                    )
                    train_surrogate(predictor, train_ds, spec.hyper)
                    rows.append(
                        {
                            "draw": draw,
                            "n_samples": n,
                            "architecture": arch,
                            "kind": kind,
                            "nmse": nmse(predictor, held_ds),
                        }
                    )
    return rows


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["draw", "n_samples", "architecture", "kind", "nmse"])
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "nmse": f"{row['nmse']:.17g}"})
