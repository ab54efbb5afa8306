"""Geometric channels for the target user and interferers, and full scenarios."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .arrays import ArrayGeometry, PhaseCodebook, array_response, make_codebook

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised when a scenario/experiment config violates its invariants."""


@dataclass(frozen=True)
class PathComponent:
    """One propagation path: complex gain (path-loss absorbed) and arrival angles."""

    gain: complex
    azimuth: float
    elevation: float = 0.0


@dataclass(frozen=True)
class Channel:
    """Sum of path contributions; `vector` caches the complex M-vector."""

    paths: tuple[PathComponent, ...]
    vector: np.ndarray


def multipath_channel(geometry: ArrayGeometry, paths) -> Channel:
    """h = sum_l gain_l * a(azimuth_l); linear in every path gain."""
    paths = tuple(paths)
    if not paths:
        raise ValueError("multipath_channel needs at least one path")
    h = np.zeros(geometry.antennas, dtype=complex)
    for p in paths:
        h += p.gain * array_response(geometry, p.azimuth, p.elevation)
    h.flags.writeable = False
    return Channel(paths=paths, vector=h)


def los_channel(geometry: ArrayGeometry, gain: complex, azimuth: float) -> Channel:
    """Single line-of-sight path."""
    return multipath_channel(geometry, [PathComponent(gain=complex(gain), azimuth=float(azimuth))])


@dataclass(frozen=True)
class Scenario:
    """Array, codebook, channels, and power levels for one simulated cell.

    Transmit symbols are abstracted to their expected powers: every
    transmitter uses the same average power `tx_power` and the receiver adds
    noise of power `noise_power` per antenna.
    """

    geometry: ArrayGeometry
    codebook: PhaseCodebook
    target: Channel
    interferers: tuple[Channel, ...] = ()
    tx_power: float = 1.0
    noise_power: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.tx_power <= 0:
            raise ValueError(f"tx_power must be > 0, got {self.tx_power}")
        if self.noise_power <= 0:
            raise ValueError(f"noise_power must be > 0, got {self.noise_power}")

    @property
    def n_interferers(self) -> int:
        return len(self.interferers)

    def interference_matrix(self) -> np.ndarray:
        """Columns are the interferer channel vectors, shape (M, K)."""
        if not self.interferers:
            return np.zeros((self.geometry.antennas, 0), dtype=complex)
        return np.stack([c.vector for c in self.interferers], axis=1)


# Uniformly random gain phases come from dedicated streams so that adding or
# removing interferers never perturbs the target channel.
_TARGET_STREAM = 1
_INTERFERER_STREAM = 2


def _gain_with_random_phase(magnitude: float, rng: np.random.Generator) -> complex:
    return magnitude * np.exp(1j * rng.uniform(-np.pi, np.pi))


def build_scenario(config: dict) -> Scenario:
    """Construct a Scenario from a plain config dict (see `scenario_config_defaults`).

    Interferer azimuths may be omitted (`interferer_azimuths_deg: null`) and
    placed later with `place_interferers`, e.g. on the sidelobes of a learned
    beam.  Everything random is drawn from streams derived from `seed`.
    """
    cfg = scenario_config_defaults()
    unknown = set(config) - set(cfg) - {"schema_version"}
    if unknown:
        raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
    cfg.update(config)

    problems = []
    if not isinstance(cfg["antennas"], int) or cfg["antennas"] < 1:
        problems.append("antennas (integer >= 1)")
    if not isinstance(cfg["bits"], int) or not 1 <= cfg["bits"] <= 16:
        problems.append("bits (integer in [1, 16])")
    if cfg["spacing"] <= 0:
        problems.append("spacing (> 0)")
    if cfg["tx_power"] <= 0:
        problems.append("tx_power (> 0)")
    if cfg["noise_power"] <= 0:
        problems.append("noise_power (> 0)")
    if cfg["target_gain"] <= 0:
        problems.append("target_gain (> 0)")
    if cfg["interferer_gain"] <= 0:
        problems.append("interferer_gain (> 0)")
    if problems:
        raise ConfigError("invalid scenario config: " + "; ".join(problems))

    geometry = ArrayGeometry(antennas=cfg["antennas"], spacing=cfg["spacing"])
    codebook = make_codebook(cfg["bits"])
    seed = int(cfg["seed"])

    rng_target = np.random.default_rng(np.random.SeedSequence((seed, _TARGET_STREAM)))
    target = los_channel(
        geometry,
        _gain_with_random_phase(cfg["target_gain"], rng_target),
        np.deg2rad(cfg["target_azimuth_deg"]),
    )

    scenario = Scenario(
        geometry=geometry,
        codebook=codebook,
        target=target,
        interferers=(),
        tx_power=float(cfg["tx_power"]),
        noise_power=float(cfg["noise_power"]),
        seed=seed,
    )
    if cfg["interferer_azimuths_deg"] is not None:
        azimuths = np.deg2rad(np.asarray(cfg["interferer_azimuths_deg"], dtype=float))
        scenario = place_interferers(scenario, azimuths, gain=cfg["interferer_gain"])
    return scenario


def place_interferers(scenario: Scenario, azimuths, gain: float = 1.0) -> Scenario:
    """Return a copy of the scenario with LOS interferers at the given azimuths.

    Gain phases are drawn from a stream derived from the scenario seed, so the
    result is deterministic and independent of when placement happens.
    """
    rng = np.random.default_rng(np.random.SeedSequence((scenario.seed, _INTERFERER_STREAM)))
    interferers = tuple(
        los_channel(scenario.geometry, _gain_with_random_phase(gain, rng), float(az))
        for az in np.atleast_1d(azimuths)
    )
    return replace(scenario, interferers=interferers)


def scenario_config_defaults() -> dict:
    """Every scenario config field with its default, in one place."""
    return {
        "antennas": 8,
        "bits": 3,
        "spacing": 0.5,
        "target_azimuth_deg": 0.0,
        "target_gain": 1.0,
        "interferer_azimuths_deg": None,
        "interferer_gain": 1.0,
        "tx_power": 1.0,
        # Default 20 dB SNR at unit target gain: noise subdominant, as in the
        # SIR-focused evaluation this models.
        "noise_power": 0.01,
        "seed": 0,
    }


def scenario_to_dict(scenario: Scenario) -> dict:
    """JSON-ready form; rebuilding reproduces channel vectors bit-exactly."""

    def channel_dict(ch: Channel) -> dict:
        return {
            "paths": [
                {
                    "gain_re": p.gain.real,
                    "gain_im": p.gain.imag,
                    "azimuth_rad": p.azimuth,
                    "elevation_rad": p.elevation,
                }
                for p in ch.paths
            ]
        }

    return {
        "schema_version": SCHEMA_VERSION,
        "antennas": scenario.geometry.antennas,
        "spacing": scenario.geometry.spacing,
        "bits": scenario.codebook.bits,
        "target": channel_dict(scenario.target),
        "interferers": [channel_dict(c) for c in scenario.interferers],
        "tx_power": scenario.tx_power,
        "noise_power": scenario.noise_power,
        "seed": scenario.seed,
    }


def scenario_from_dict(data: dict) -> Scenario:
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported scenario schema_version: {data.get('schema_version')!r}")
    geometry = ArrayGeometry(antennas=data["antennas"], spacing=data["spacing"])

    def channel(ch: dict) -> Channel:
        paths = [
            PathComponent(
                gain=complex(p["gain_re"], p["gain_im"]),
                azimuth=p["azimuth_rad"],
                elevation=p.get("elevation_rad", 0.0),
            )
            for p in ch["paths"]
        ]
        return multipath_channel(geometry, paths)

    return Scenario(
        geometry=geometry,
        codebook=make_codebook(data["bits"]),
        target=channel(data["target"]),
        interferers=tuple(channel(c) for c in data["interferers"]),
        tx_power=data["tx_power"],
        noise_power=data["noise_power"],
        seed=data["seed"],
    )
