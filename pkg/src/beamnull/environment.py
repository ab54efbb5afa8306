"""Power measurements via the on/off protocol, SINR estimation, and the step interface.

The receiver measures interference-plus-noise power while the target is
silent, then signal-plus-interference-plus-noise with the same beam while it
transmits.  Their difference estimates the signal power; no channel state is
ever used by the learning loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import SIR_CAP_DB, to_combiner
from .channels import Scenario


@dataclass(frozen=True)
class PowerMeasurement:
    """One on/off measurement pair (linear watts)."""

    sin_power: float  # signal + interference + noise
    in_power: float   # interference + noise

    @property
    def signal_power(self) -> float:
        return self.sin_power - self.in_power


@dataclass(frozen=True)
class StepOutcome:
    next_state: np.ndarray
    reward: int
    sinr: float
    measurement: PowerMeasurement


@dataclass(frozen=True)
class Metrics:
    """Link-quality report for one beam against one scenario (ratios in dB)."""

    sinr_db: float
    snr_db: float
    inr_db: float
    sir_db: np.ndarray  # one entry per interferer, +inf for a perfect null
    signal_gain: float  # |w^H h|^2, linear
    rate: float         # log2(1 + SINR), bits/s/Hz

    @property
    def sir_overall_db(self) -> float:
        lin = 10.0 ** (-self.sir_db / 10.0)
        total = np.sum(lin)
        if total == 0.0:
            return SIR_CAP_DB
        return min(-10.0 * np.log10(total), SIR_CAP_DB)


def combined_power(w, h) -> float:
    """|w^H h|^2 for one beam and one channel vector.

    Summed elementwise (not BLAS dot) so that symmetric cancellations are
    exact and a perfect null really measures zero.
    """
    x = np.sum(np.conj(w) * h)
    return (x * np.conj(x)).real


def _perturb(power: float, noise_db: float, rng) -> float:
    """Multiplicative log-normal measurement error, sigma in dB."""
    if noise_db <= 0.0:
        return power
    if rng is None:
        raise ValueError("measurement noise requires an rng")
    return power * 10.0 ** (rng.normal(0.0, noise_db) / 10.0)


def measure_interference_plus_noise(scenario: Scenario, w, noise_db: float = 0.0, rng=None) -> float:
    """P_{I+N} = sum_k |w^H h_k|^2 * P_x + sigma^2."""
    total = scenario.noise_power
    for ch in scenario.interferers:
        total += combined_power(w, ch.vector) * scenario.tx_power
    return _perturb(total, noise_db, rng)


def measure_signal_plus_interference_plus_noise(
    scenario: Scenario, w, noise_db: float = 0.0, rng=None
) -> float:
    """P_{S+I+N} = |w^H h|^2 * P_x + P_{I+N}."""
    total = scenario.noise_power + combined_power(w, scenario.target.vector) * scenario.tx_power
    for ch in scenario.interferers:
        total += combined_power(w, ch.vector) * scenario.tx_power
    return _perturb(total, noise_db, rng)


def measure(scenario: Scenario, w, noise_db: float = 0.0, rng=None) -> PowerMeasurement:
    """Run the on/off protocol once for the given beam."""
    p_in = measure_interference_plus_noise(scenario, w, noise_db, rng)
    p_sin = measure_signal_plus_interference_plus_noise(scenario, w, noise_db, rng)
    return PowerMeasurement(sin_power=p_sin, in_power=p_in)


def estimate_sinr(m: PowerMeasurement) -> float:
    """(P_{S+I+N} - P_{I+N}) / P_{I+N}, clamped at zero under measurement noise."""
    if m.in_power <= 0.0:
        raise ValueError(f"interference+noise power must be positive, got {m.in_power}")
    return max(0.0, m.sin_power - m.in_power) / m.in_power


def _check_quantized(action, codebook) -> None:
    if not np.all(np.isin(action, codebook.values)):
        raise ValueError("action phases must be quantized to the codebook")


def step(
    scenario: Scenario,
    prev_sinr: float,
    action,
    noise_db: float = 0.0,
    rng=None,
) -> StepOutcome:
    """Apply a quantized phase vector, measure, and reward the SINR change.

    Reward is +1 only for a strict improvement over `prev_sinr`; equality
    counts as failure.
    """
    action = np.asarray(action, dtype=float)
    _check_quantized(action, scenario.codebook)
    w = to_combiner(action)
    m = measure(scenario, w, noise_db, rng)
    sinr = estimate_sinr(m)
    reward = 1 if sinr > prev_sinr else -1
    return StepOutcome(next_state=action, reward=reward, sinr=sinr, measurement=m)


def analytic_sinr(scenario: Scenario, w) -> float:
    """The objective |w^H h|^2 P_x / (sum_k |w^H h_k|^2 P_x + sigma^2)."""
    s = combined_power(w, scenario.target.vector) * scenario.tx_power
    i = sum(combined_power(w, ch.vector) for ch in scenario.interferers) * scenario.tx_power
    return s / (i + scenario.noise_power)


def full_metrics(scenario: Scenario, w) -> Metrics:
    """Everything reported about a beam: SINR/SNR/INR, per-interferer SIR, gain, rate."""
    s_gain = combined_power(w, scenario.target.vector)
    i_gains = np.array([combined_power(w, ch.vector) for ch in scenario.interferers])
    s = s_gain * scenario.tx_power
    i_total = i_gains.sum() * scenario.tx_power
    sinr = s / (i_total + scenario.noise_power)
    snr = s / scenario.noise_power
    inr = i_total / scenario.noise_power
    with np.errstate(divide="ignore"):
        sir_db = 10.0 * np.log10(s_gain) - 10.0 * np.log10(i_gains)
    return Metrics(
        sinr_db=10.0 * np.log10(sinr) if sinr > 0 else -np.inf,
        snr_db=10.0 * np.log10(snr) if snr > 0 else -np.inf,
        inr_db=10.0 * np.log10(inr) if inr > 0 else -np.inf,
        sir_db=sir_db,
        signal_gain=s_gain,
        rate=np.log2(1.0 + sinr),
    )


def metrics_log_row(metrics: Metrics) -> dict:
    """Flatten Metrics into the per-step CSV fields (SIR capped for serialization)."""
    row = {"sinr_db": metrics.sinr_db}
    for k, sir in enumerate(metrics.sir_db, start=1):
        row[f"sir{k}_db"] = min(sir, SIR_CAP_DB)
    row["inr_db"] = metrics.inr_db
    row["signal_gain_linear"] = metrics.signal_gain
    return row


class ActualEnvironment:
    """Step/measure interface over a concrete scenario.

    Holds the optional measurement-noise stream; with `noise_db=0` (default)
    every quantity is exact and runs are bit-reproducible.
    """

    def __init__(self, scenario: Scenario, noise_db: float = 0.0, rng=None):
        self.scenario = scenario
        self.noise_db = float(noise_db)
        if noise_db > 0 and rng is None:
            rng = np.random.default_rng(np.random.SeedSequence((scenario.seed, 3)))
        self.rng = rng
        self.measurement_pairs = 0  # on/off pairs consumed so far

    @property
    def n_interferers(self) -> int:
        return self.scenario.n_interferers

    def measure(self, phases) -> PowerMeasurement:
        """On/off measurement pair for a beam given as phases."""
        w = to_combiner(np.asarray(phases, dtype=float))
        self.measurement_pairs += 1
        return measure(self.scenario, w, self.noise_db, self.rng)

    def step(self, prev_sinr: float, action) -> StepOutcome:
        self.measurement_pairs += 1
        return step(self.scenario, prev_sinr, action, self.noise_db, self.rng)

    def log_metrics(self, phases) -> dict:
        """True metrics of a beam; free (no measurement budget) -- logging only."""
        return metrics_log_row(full_metrics(self.scenario, to_combiner(phases)))
