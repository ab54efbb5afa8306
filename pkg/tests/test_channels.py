import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from beamnull.arrays import ArrayGeometry
from beamnull.channels import (
    ConfigError,
    PathComponent,
    build_scenario,
    los_channel,
    multipath_channel,
    place_interferers,
    scenario_from_dict,
    scenario_to_dict,
)


class TestLosChannel:
    def test_broadside(self):
        ch = los_channel(ArrayGeometry(2), 1.0, 0.0)
        assert_allclose(ch.vector, [1.0, 1.0])

    def test_scalar_multiple(self):
        ch = los_channel(ArrayGeometry(2), 2j, 0.0)
        assert_allclose(ch.vector, [2j, 2j])

    def test_norm_is_gain_times_sqrt_m(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            m = rng.integers(1, 33)
            gain = rng.normal() + 1j * rng.normal()
            az = rng.uniform(-np.pi / 2, np.pi / 2)
            ch = los_channel(ArrayGeometry(m), gain, az)
            assert_allclose(np.linalg.norm(ch.vector), abs(gain) * np.sqrt(m), rtol=1e-12)


class TestMultipathChannel:
    def test_cancellation(self):
        paths = [PathComponent(1.0, 0.3), PathComponent(-1.0, 0.3)]
        ch = multipath_channel(ArrayGeometry(4), paths)
        assert_allclose(ch.vector, np.zeros(4), atol=1e-15)

    def test_single_path_equals_los(self):
        g = ArrayGeometry(6)
        a = multipath_channel(g, [PathComponent(0.5 - 0.2j, -0.4)])
        b = los_channel(g, 0.5 - 0.2j, -0.4)
        assert np.array_equal(a.vector, b.vector)

    def test_two_path_elementwise_oracle(self):
        # independent per-element recomputation of the path sum
        g = ArrayGeometry(4)
        paths = [PathComponent(1.0, 0.0), PathComponent(0.5, np.deg2rad(30.0))]
        ch = multipath_channel(g, paths)
        expected = np.zeros(4, dtype=complex)
        for m in range(4):
            for p in paths:
                expected[m] += p.gain * np.exp(1j * np.pi * m * np.sin(p.azimuth))
        assert_allclose(ch.vector, expected, rtol=1e-12)

    def test_empty_paths_rejected(self):
        with pytest.raises(ValueError):
            multipath_channel(ArrayGeometry(4), [])

    def test_linearity_in_gains(self):
        rng = np.random.default_rng(1)
        g = ArrayGeometry(8)
        for _ in range(20):
            paths = [
                PathComponent(rng.normal() + 1j * rng.normal(), rng.uniform(-1.2, 1.2))
                for _ in range(3)
            ]
            alpha = rng.normal() + 1j * rng.normal()
            scaled = [PathComponent(alpha * p.gain, p.azimuth) for p in paths]
            assert_allclose(
                multipath_channel(g, scaled).vector,
                alpha * multipath_channel(g, paths).vector,
                rtol=1e-12,
            )


class TestBuildScenario:
    def test_no_interferers_by_default(self):
        sc = build_scenario({"antennas": 8, "bits": 3})
        assert sc.n_interferers == 0
        assert sc.geometry.antennas == 8
        assert sc.codebook.bits == 3

    def test_same_seed_is_bitwise_identical(self):
        cfg = {"antennas": 8, "bits": 3, "interferer_azimuths_deg": [10.0, -30.0], "seed": 7}
        a = build_scenario(cfg)
        b = build_scenario(cfg)
        assert np.array_equal(a.target.vector, b.target.vector)
        for ca, cb in zip(a.interferers, b.interferers):
            assert np.array_equal(ca.vector, cb.vector)

    def test_zero_noise_rejected(self):
        with pytest.raises(ConfigError, match="noise_power"):
            build_scenario({"antennas": 4, "bits": 2, "noise_power": 0.0})

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            build_scenario({"antennas": 4, "bits": 2, "antenas": 8})

    def test_error_lists_offending_fields(self):
        with pytest.raises(ConfigError) as err:
            build_scenario({"antennas": 0, "bits": 2, "tx_power": -1.0})
        assert "antennas" in str(err.value)
        assert "tx_power" in str(err.value)

    def test_placement_is_deferred_deterministically(self):
        sc = build_scenario({"antennas": 8, "bits": 3, "seed": 5})
        placed_1 = place_interferers(sc, np.deg2rad([20.0, -40.0]))
        placed_2 = place_interferers(sc, np.deg2rad([20.0, -40.0]))
        assert placed_1.n_interferers == 2
        for ca, cb in zip(placed_1.interferers, placed_2.interferers):
            assert np.array_equal(ca.vector, cb.vector)
        # target channel untouched by placement
        assert np.array_equal(sc.target.vector, placed_1.target.vector)


class TestSerialization:
    def test_round_trip_reproduces_vectors(self):
        sc = build_scenario(
            {"antennas": 8, "bits": 3, "interferer_azimuths_deg": [12.5, -33.0], "seed": 11}
        )
        blob = json.dumps(scenario_to_dict(sc))
        back = scenario_from_dict(json.loads(blob))
        assert np.array_equal(back.target.vector, sc.target.vector)
        for ca, cb in zip(back.interferers, sc.interferers):
            assert np.array_equal(ca.vector, cb.vector)
        assert back.codebook.bits == sc.codebook.bits
        assert back.tx_power == sc.tx_power
        assert back.noise_power == sc.noise_power

    def test_rejects_unknown_schema(self):
        sc = build_scenario({"antennas": 4, "bits": 2})
        data = scenario_to_dict(sc)
        data["schema_version"] = 99
        with pytest.raises(ConfigError):
            scenario_from_dict(data)
