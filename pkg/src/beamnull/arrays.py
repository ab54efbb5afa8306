"""Phase codebooks, combining vectors, and beam patterns for uniform linear arrays.

All angles are in radians unless a name says otherwise.  Azimuth follows the
broadside convention for a ULA: 0 is perpendicular to the array axis and the
visible region is [-pi/2, pi/2].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# SIR of a perfectly nulled interferer is +inf; serialized values are capped here.
SIR_CAP_DB = 200.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and spacing in wavelengths."""

    antennas: int
    spacing: float = 0.5

    def __post_init__(self):
        if self.antennas < 1:
            raise ValueError(f"antennas must be >= 1, got {self.antennas}")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be > 0, got {self.spacing}")


@dataclass(frozen=True)
class PhaseCodebook:
    """The 2**bits discrete phases an r-bit phase shifter can realize.

    Values are uniformly spaced over (-pi, pi], sorted ascending, and anchored
    so that both 0 and pi are members.
    """

    bits: int
    values: np.ndarray

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def step(self) -> float:
        return 2.0 * np.pi / self.values.size


def make_codebook(bits: int) -> PhaseCodebook:
    """Build the uniform phase grid {-pi + k*2pi/2^bits : k = 1..2^bits}."""
    if not 1 <= bits <= 16:
        raise ValueError(f"bits must be in [1, 16], got {bits}")
    n = 1 << bits
    step = 2.0 * np.pi / n
    values = -np.pi + step * np.arange(1, n + 1)
    values.flags.writeable = False
    return PhaseCodebook(bits=bits, values=values)


def wrap_phase(phases):
    """Wrap angles into (-pi, pi]."""
    phases = np.asarray(phases, dtype=float)
    wrapped = np.mod(phases + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def to_combiner(phases) -> np.ndarray:
    """Map a phase vector to the unit-norm combining vector exp(j*theta)/sqrt(M)."""
    phases = np.asarray(phases, dtype=float)
    m = phases.shape[-1]
    return np.exp(1j * phases) / np.sqrt(m)


def quantize(phases, codebook: PhaseCodebook) -> np.ndarray:
    """Element-wise nearest codebook phase; ties go to the smaller value.

    Inputs are expected in (-pi, pi].  The tie-break is deterministic because
    the codebook is sorted ascending and argmin returns the first minimum.
    """
    phases = np.asarray(phases, dtype=float)
    dist = np.abs(phases[..., None] - codebook.values)
    return codebook.values[np.argmin(dist, axis=-1)]


def array_response(geometry: ArrayGeometry, azimuth: float, elevation: float = 0.0) -> np.ndarray:
    """Plane-wave response of the ULA: a_m = exp(j*2pi*spacing*m*sin(azimuth)).

    Elevation is accepted for forward compatibility with planar arrays but the
    ULA is modeled in azimuth only (broadside elevation).
    """
    m = np.arange(geometry.antennas)
    return np.exp(1j * 2.0 * np.pi * geometry.spacing * m * np.sin(azimuth))


def array_manifold(geometry: ArrayGeometry, azimuths) -> np.ndarray:
    """Stack of array responses, shape (antennas, len(azimuths))."""
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    m = np.arange(geometry.antennas)[:, None]
    return np.exp(1j * 2.0 * np.pi * geometry.spacing * m * np.sin(azimuths)[None, :])


def beam_pattern(w, azimuths, geometry: ArrayGeometry) -> np.ndarray:
    """Receive gain |w^H a(phi)|^2 at each azimuth (linear power)."""
    azimuths = np.asarray(azimuths, dtype=float)
    if azimuths.size == 0:
        raise ValueError("angle grid is empty")
    proj = np.conj(np.asarray(w)) @ array_manifold(geometry, azimuths)
    return np.abs(proj) ** 2


def angle_grid(resolution_deg: float = 0.1, span_deg: float = 90.0) -> np.ndarray:
    """Dense azimuth grid in radians over [-span, +span] degrees."""
    n = int(round(2 * span_deg / resolution_deg)) + 1
    return np.deg2rad(np.linspace(-span_deg, span_deg, n))


@dataclass(frozen=True)
class SidelobeSearch:
    """Sidelobe angles/gains sorted by gain; found_all is False when fewer
    than the requested count exist."""

    azimuths: np.ndarray
    gains: np.ndarray
    found_all: bool


def find_sidelobe_peaks(azimuths, gains, count: int) -> SidelobeSearch:
    """Locate the `count` strongest sidelobe peaks of a sampled beam pattern.

    The main lobe (the global maximum plus its contiguous region above half
    power) is excluded.  The grid must be dense enough to resolve lobes:
    resolution <= 0.25 degrees.
    """
    azimuths = np.asarray(azimuths, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if azimuths.size != gains.size:
        raise ValueError("azimuths and gains must have equal length")
    res = np.max(np.diff(azimuths)) if azimuths.size > 1 else np.inf
    if res > np.deg2rad(0.25) + 1e-12:
        raise ValueError("angle grid coarser than 0.25 degrees")

    n = gains.size
    is_peak = np.zeros(n, dtype=bool)
    if n >= 2:
        is_peak[0] = gains[0] > gains[1]
        is_peak[-1] = gains[-1] > gains[-2]
    if n >= 3:
        interior = (gains[1:-1] > gains[:-2]) & (gains[1:-1] >= gains[2:])
        is_peak[1:-1] = interior

    # Main lobe: contiguous half-power region around the global maximum.
    top = int(np.argmax(gains))
    half = gains[top] / 2.0
    lo = top
    while lo > 0 and gains[lo - 1] >= half:
        lo -= 1
    hi = top
    while hi < n - 1 and gains[hi + 1] >= half:
        hi += 1
    is_peak[lo:hi + 1] = False

    idx = np.flatnonzero(is_peak)
    order = idx[np.argsort(gains[idx])[::-1]]
    found_all = order.size >= count
    chosen = order[:count]
    return SidelobeSearch(azimuths=azimuths[chosen], gains=gains[chosen], found_all=found_all)


def hpbw(antennas: int) -> float:
    """Approximate half-power beamwidth of a half-wavelength ULA, radians."""
    if antennas < 2:
        raise ValueError(f"hpbw needs antennas >= 2, got {antennas}")
    return 1.78 / antennas


def gain_to_db(gain, floor: float = 1e-30):
    """Linear power to dB with a floor so exact nulls stay finite."""
    return 10.0 * np.log10(np.maximum(np.asarray(gain, dtype=float), floor))


def export_pattern_csv(path, azimuths, gains) -> None:
    """Write a beam pattern as CSV with columns angle_deg, gain_linear, gain_db."""
    azimuths = np.asarray(azimuths, dtype=float)
    gains = np.asarray(gains, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg", "gain_linear", "gain_db"])
        for az, g in zip(np.rad2deg(azimuths), gains):
            writer.writerow([f"{az:.17g}", f"{g:.17g}", f"{gain_to_db(g):.17g}"])
