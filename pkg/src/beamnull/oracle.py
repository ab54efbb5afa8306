"""Exhaustive search over the full quantized beam space (small arrays only)."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .channels import Scenario

DEFAULT_LIMIT = 1 << 20


@dataclass(frozen=True)
class OracleResult:
    best_phases: np.ndarray
    best_sinr: float
    n_beams: int


def exhaustive_search(scenario: Scenario, limit: int = DEFAULT_LIMIT) -> OracleResult:
    """Evaluate every phase vector in the codebook grid and return the SINR optimum.

    The space has (2^bits)^antennas beams; refuses to enumerate more than
    `limit` of them.
    """
    m = scenario.geometry.antennas
    values = scenario.codebook.values
    total = values.size ** m
    if total > limit:
        raise ValueError(f"beam space has {total} elements, above the limit of {limit}")

    phases = np.array(list(product(values, repeat=m)))
    w = np.exp(1j * phases) / np.sqrt(m)
    signal = np.abs(w @ np.conj(scenario.target.vector)) ** 2 * scenario.tx_power
    interference = np.zeros(total)
    for ch in scenario.interferers:
        interference += np.abs(w @ np.conj(ch.vector)) ** 2 * scenario.tx_power
    sinr = signal / (interference + scenario.noise_power)
    best = int(np.argmax(sinr))
    return OracleResult(best_phases=phases[best], best_sinr=float(sinr[best]), n_beams=total)
