import numpy as np
import pytest
from numpy.testing import assert_allclose

from beamnull.arrays import (
    ArrayGeometry,
    angle_grid,
    array_response,
    beam_pattern,
    export_pattern_csv,
    find_sidelobe_peaks,
    hpbw,
    make_codebook,
    quantize,
    to_combiner,
    wrap_phase,
)


class TestCodebook:
    def test_one_bit(self):
        cb = make_codebook(1)
        assert_allclose(np.sort(cb.values), [0.0, np.pi])

    def test_two_bit(self):
        cb = make_codebook(2)
        assert_allclose(cb.values, [-np.pi / 2, 0.0, np.pi / 2, np.pi])

    def test_three_bit_grid(self):
        cb = make_codebook(3)
        assert cb.values.size == 8
        assert_allclose(np.diff(cb.values), np.pi / 4)
        assert 0.0 in cb.values
        assert np.pi in cb.values

    def test_max_is_exactly_pi(self):
        for bits in range(1, 9):
            assert make_codebook(bits).values.max() == np.pi

    def test_values_in_half_open_interval(self):
        cb = make_codebook(5)
        assert np.all(cb.values > -np.pi)
        assert np.all(cb.values <= np.pi)

    @pytest.mark.parametrize("bits", [0, -1, 17])
    def test_rejects_bad_bits(self, bits):
        with pytest.raises(ValueError):
            make_codebook(bits)


class TestCombiner:
    def test_single_antenna_identity(self):
        assert_allclose(to_combiner([0.0]), [1.0 + 0j])

    def test_two_antennas(self):
        assert_allclose(to_combiner([0.0, np.pi]), [1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-15)

    def test_four_uniform(self):
        assert_allclose(to_combiner(np.zeros(4)), 0.5 * np.ones(4))

    def test_unit_norm_random(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            m = rng.integers(1, 65)
            w = to_combiner(rng.uniform(-np.pi, np.pi, m))
            assert abs(np.linalg.norm(w) - 1.0) < 1e-12
            assert_allclose(np.abs(w), 1 / np.sqrt(m), atol=1e-12)


class TestQuantize:
    def test_nearest(self):
        cb = make_codebook(3)
        assert_allclose(quantize(np.array([0.3]), cb), [0.0])

    def test_tie_breaks_down(self):
        cb = make_codebook(2)
        # pi/4 sits exactly between 0 and pi/2
        assert_allclose(quantize(np.array([np.pi / 4]), cb), [0.0])

    def test_fixed_point(self):
        cb = make_codebook(4)
        assert np.array_equal(quantize(cb.values, cb), cb.values)

    def test_idempotent_and_member(self):
        rng = np.random.default_rng(1)
        for bits in (1, 2, 3, 5):
            cb = make_codebook(bits)
            phases = rng.uniform(-np.pi, np.pi, size=(50, 8))
            phases[phases == -np.pi] = np.pi
            q = quantize(phases, cb)
            assert np.array_equal(quantize(q, cb), q)
            assert np.all(np.isin(q, cb.values))


class TestArrayResponse:
    def test_broadside(self):
        assert_allclose(array_response(ArrayGeometry(2), 0.0), [1.0, 1.0])

    def test_endfire(self):
        assert_allclose(array_response(ArrayGeometry(2), np.pi / 2), [1.0, -1.0], atol=1e-12)

    def test_thirty_degrees(self):
        assert_allclose(array_response(ArrayGeometry(2), np.pi / 6), [1.0, 1j], atol=1e-12)

    def test_unit_modulus(self):
        rng = np.random.default_rng(2)
        g = ArrayGeometry(16)
        for az in rng.uniform(-np.pi / 2, np.pi / 2, 200):
            assert_allclose(np.abs(array_response(g, az)), 1.0, atol=1e-12)


class TestBeamPattern:
    def test_matched_filter_gain(self):
        g = ArrayGeometry(8)
        az = 0.35
        w = array_response(g, az) / np.sqrt(8)
        assert_allclose(beam_pattern(w, [az], g), [8.0], rtol=1e-12)
        # the conjugate beam is the matched filter for the mirrored direction
        assert_allclose(beam_pattern(np.conj(w), [-az], g), [8.0], rtol=1e-12)

    def test_uniform_beam_broadside(self):
        g = ArrayGeometry(8)
        assert_allclose(beam_pattern(to_combiner(np.zeros(8)), [0.0], g), [8.0])

    def test_bounded_by_antenna_count(self):
        rng = np.random.default_rng(3)
        g = ArrayGeometry(12)
        grid = angle_grid(0.25)
        for _ in range(20):
            w = to_combiner(rng.uniform(-np.pi, np.pi, 12))
            assert np.all(beam_pattern(w, grid, g) <= 12.0 + 1e-9)

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(4)
        cb = make_codebook(3)
        g = ArrayGeometry(8)
        grid = angle_grid(0.25)
        for _ in range(10):
            phases = quantize(rng.uniform(-np.pi, np.pi, 8), cb)
            shift = rng.choice(cb.values)
            shifted = wrap_phase(phases + shift)
            p1 = beam_pattern(to_combiner(phases), grid, g)
            p2 = beam_pattern(to_combiner(shifted), grid, g)
            assert_allclose(p1, p2, atol=1e-9)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            beam_pattern(to_combiner(np.zeros(4)), [], ArrayGeometry(4))


def closed_form_uniform_gain(m, azimuths):
    """Array-factor power of the uniform-phase beam, computed from the closed form."""
    psi = np.pi * np.sin(azimuths)
    num = np.sin(m * psi / 2.0) ** 2
    den = m * np.sin(psi / 2.0) ** 2
    out = np.where(np.abs(np.sin(psi / 2.0)) < 1e-12, float(m), num / np.where(den == 0, 1, den))
    return out


class TestSidelobeSearch:
    def test_strongest_sidelobe_of_uniform_beam(self):
        # Oracle: scan the closed-form array factor on a very dense grid.
        m = 8
        dense = np.deg2rad(np.arange(-90, 90.0005, 0.001))
        gains = closed_form_uniform_gain(m, dense)
        top = np.argmax(gains)
        half = gains[top] / 2
        lo = top
        while gains[lo - 1] >= half:
            lo -= 1
        hi = top
        while gains[hi + 1] >= half:
            hi += 1
        mask = np.ones(dense.size, bool)
        mask[lo:hi + 1] = False
        interior = (gains[1:-1] > gains[:-2]) & (gains[1:-1] >= gains[2:])
        peaks = np.flatnonzero(np.concatenate([[False], interior, [False]]) & mask)
        oracle_az = dense[peaks[np.argmax(gains[peaks])]]
        oracle_gain = gains[peaks].max()

        g = ArrayGeometry(m)
        grid = angle_grid(0.1)
        w = to_combiner(np.zeros(m))
        pattern = beam_pattern(w, grid, g)
        found = find_sidelobe_peaks(grid, pattern, 1)
        assert found.found_all
        assert abs(abs(found.azimuths[0]) - abs(oracle_az)) < np.deg2rad(0.11)
        # gain at the returned angle must match direct evaluation
        direct = beam_pattern(w, found.azimuths, g)
        assert_allclose(found.gains, direct, rtol=1e-12)
        assert_allclose(found.gains[0], oracle_gain, rtol=1e-3)

    def test_fewer_sidelobes_than_requested(self):
        g = ArrayGeometry(4)
        grid = angle_grid(0.1)
        pattern = beam_pattern(to_combiner(np.zeros(4)), grid, g)
        found = find_sidelobe_peaks(grid, pattern, 50)
        assert not found.found_all
        assert 0 < found.azimuths.size < 50

    def test_isotropic_pattern(self):
        grid = angle_grid(0.1)
        pattern = np.ones_like(grid)
        found = find_sidelobe_peaks(grid, pattern, 2)
        assert not found.found_all
        assert found.azimuths.size == 0

    def test_coarse_grid_rejected(self):
        grid = np.deg2rad(np.arange(-90.0, 91.0, 1.0))
        with pytest.raises(ValueError):
            find_sidelobe_peaks(grid, np.ones_like(grid), 1)


class TestHpbw:
    def test_sixteen_elements(self):
        # 1.78/16 rad, about 6.37 degrees
        assert_allclose(hpbw(16), 0.11125)
        assert_allclose(np.rad2deg(hpbw(16)), 6.374, atol=5e-3)

    def test_formula(self):
        assert_allclose(hpbw(8), 0.2225)
        assert_allclose(hpbw(2), 0.89)

    def test_rejects_single_antenna(self):
        with pytest.raises(ValueError):
            hpbw(1)


def test_pattern_csv_export(tmp_path):
    g = ArrayGeometry(4)
    grid = angle_grid(0.25)
    pattern = beam_pattern(to_combiner(np.zeros(4)), grid, g)
    path = tmp_path / "pattern.csv"
    export_pattern_csv(path, grid, pattern)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert set(data.dtype.names) == {"angle_deg", "gain_linear", "gain_db"}
    assert_allclose(data["gain_linear"], pattern)
    assert_allclose(data["angle_deg"], np.rad2deg(grid))
    finite = pattern > 1e-30
    assert_allclose(data["gain_db"][finite], 10 * np.log10(pattern[finite]))


def test_wrap_phase_half_open():
    x = np.array([-np.pi, np.pi, 3 * np.pi, -3 * np.pi, 0.1, 2 * np.pi + 0.1])
    w = wrap_phase(x)
    assert np.all(w > -np.pi)
    assert np.all(w <= np.pi)
    assert_allclose(w[4], 0.1)
    assert_allclose(w[5], 0.1, atol=1e-12)
