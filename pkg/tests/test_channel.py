import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relaysec.channel import (ChannelSet, PowerConfig, UncertaintyRadii,
                              db_to_linear, linear_to_db, load_scenario,
                              scalar_bounds_perfect, scalar_bounds_robust,
                              scenario_from_dict)


class TestConversions:
    @given(st.floats(min_value=1e-6, max_value=1e6))
    def test_round_trip(self, x):
        assert linear_to_db(db_to_linear(linear_to_db(x))) == pytest.approx(
            linear_to_db(x), abs=1e-12)

    def test_reference_points(self):
        assert db_to_linear(0.0) == 1.0
        assert db_to_linear(9.0) == pytest.approx(7.94328235, abs=1e-7)
        with pytest.raises(ValueError):
            linear_to_db(0.0)


class TestChannelSet:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            ChannelSet(g=np.ones(2), h0=1.0, h=np.ones(3),
                       z0=np.ones(1), z=np.ones((1, 2)))
        with pytest.raises(ValueError):
            ChannelSet(g=np.ones(2), h0=1.0, h=np.ones(2),
                       z0=np.ones(2), z=np.ones((1, 2)))

    def test_at_least_one_eavesdropper(self):
        with pytest.raises(ValueError):
            ChannelSet(g=np.ones(2), h0=1.0, h=np.ones(2),
                       z0=np.ones(0), z=np.ones((0, 2)))

    def test_finite(self):
        with pytest.raises(ValueError):
            ChannelSet(g=np.array([1.0, np.inf]), h0=1.0, h=np.ones(2),
                       z0=np.ones(1), z=np.ones((1, 2)))


class TestScalarBounds:
    def test_perfect_matches_direct_arithmetic(self, scenario):
        b = scalar_bounds_perfect(scenario.channels, scenario.power)
        assert b.a == pytest.approx(0.3822**2 + 0.3976**2, abs=1e-12)
        g = scenario.channels.g
        assert b.c == pytest.approx(float(np.sum(np.abs(g) ** 2)), abs=1e-12)
        assert b.b[0] == pytest.approx(0.0123**2 + 0.0137**2, abs=1e-12)
        assert b.a_max == b.a

    def test_all_zero_channels(self):
        ch = ChannelSet(g=np.zeros(2), h0=0.0, h=np.ones(2),
                        z0=np.zeros(1), z=np.ones((1, 2)))
        pw = PowerConfig(Ps=1.0, Ps_max=1.0, Pr_max=1.0, N0=1.0)
        b = scalar_bounds_perfect(ch, pw)
        assert b.a == 0.0 and b.c == 0.0 and b.b == (0.0,)

    def test_zero_radius_reduction(self, scenario):
        perfect = scalar_bounds_perfect(scenario.channels, scenario.power)
        robust = scalar_bounds_robust(scenario.channels,
                                      UncertaintyRadii.zero(3),
                                      scenario.power)
        assert robust == perfect

    def test_robust_deflates_and_inflates(self, scenario):
        perfect = scalar_bounds_perfect(scenario.channels, scenario.power)
        robust = scalar_bounds_robust(scenario.channels,
                                      UncertaintyRadii.uniform(0.01, 3),
                                      scenario.power)
        assert robust.a < perfect.a < robust.a_max
        assert robust.c < perfect.c
        assert all(rb > pb for rb, pb in zip(robust.b, perfect.b))
        h0_abs = abs(scenario.channels.h0)
        assert robust.a == pytest.approx((h0_abs - 0.01) ** 2, abs=1e-12)
        assert robust.a_max == pytest.approx((h0_abs + 0.01) ** 2, abs=1e-12)

    def test_clamp_to_zero(self, scenario):
        big = abs(scenario.channels.h0) + 0.1
        radii = UncertaintyRadii(eps_g=100.0, eps_h0=big, eps_h=0.0,
                                 eps_z0=(0.0,) * 3, eps_z=(0.0,) * 3)
        b = scalar_bounds_robust(scenario.channels, radii, scenario.power)
        assert b.a == 0.0
        assert b.c == 0.0
        assert b.a_max > 0.0

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            UncertaintyRadii(eps_g=-0.1)


class TestScenarioLoading:
    def test_bundled_scenario(self, scenario):
        assert scenario.channels.N == 2
        assert scenario.channels.J == 3
        b = scalar_bounds_perfect(scenario.channels, scenario.power)
        assert b.c > 0
        assert scenario.power.Pr_max == pytest.approx(db_to_linear(9.0))
        assert scenario.alphabet.name == "BPSK"
        assert scenario.radii.is_zero()

    def _doc(self, scenario_path):
        return json.loads(scenario_path.read_text())

    def test_no_eavesdroppers_rejected(self, scenario_path):
        doc = self._doc(scenario_path)
        doc["J"] = 0
        doc["z0"] = []
        doc["z"] = []
        with pytest.raises(ValueError, match="at least one eavesdropper"):
            scenario_from_dict(doc)

    def test_length_mismatch_rejected(self, scenario_path):
        doc = self._doc(scenario_path)
        doc["h"] = doc["h"][:1]
        with pytest.raises(ValueError, match="h"):
            scenario_from_dict(doc)

    def test_missing_power_listed(self, scenario_path):
        doc = self._doc(scenario_path)
        del doc["Pr_max_dB"]
        with pytest.raises(ValueError, match="Pr_max"):
            scenario_from_dict(doc)

    def test_error_aggregation(self, scenario_path):
        doc = self._doc(scenario_path)
        del doc["Pr_max_dB"]
        doc["h"] = doc["h"][:1]
        with pytest.raises(ValueError) as exc:
            scenario_from_dict(doc)
        msg = str(exc.value)
        assert "Pr_max" in msg and ";" in msg

    def test_malformed_json_reports_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "N": 2,\n  broken\n}')
        with pytest.raises(ValueError, match="line 3"):
            load_scenario(p)

    def test_linear_power_tag(self, scenario_path):
        doc = self._doc(scenario_path)
        del doc["Pr_max_dB"]
        doc["Pr_max_linear"] = 7.9433
        sc = scenario_from_dict(doc)
        assert sc.power.Pr_max == 7.9433

    def test_eps_all_shorthand(self, scenario_path):
        doc = self._doc(scenario_path)
        doc["radii"] = {"eps_all": 0.02}
        sc = scenario_from_dict(doc)
        assert sc.radii == UncertaintyRadii.uniform(0.02, 3)

    def test_per_link_radii(self, scenario_path):
        doc = self._doc(scenario_path)
        doc["radii"] = {"eps_g": 0.01, "eps_z0": [0.1, 0.2, 0.3],
                        "eps_z": [0.0, 0.0, 0.0]}
        sc = scenario_from_dict(doc)
        assert sc.radii.eps_g == 0.01
        assert sc.radii.eps_z0 == (0.1, 0.2, 0.3)
        assert sc.radii.eps_h == 0.0

    def test_inline_alphabet(self, scenario_path):
        doc = self._doc(scenario_path)
        doc["alphabet"] = [[1.0, 0.0], [-1.0, 0.0]]
        sc = scenario_from_dict(doc)
        assert sc.alphabet.M == 2

    def test_power_config_validation(self):
        with pytest.raises(ValueError):
            PowerConfig(Ps=2.0, Ps_max=1.0, Pr_max=1.0, N0=1.0)
        with pytest.raises(ValueError):
            PowerConfig(Ps=1.0, Ps_max=1.0, Pr_max=0.0, N0=1.0)
        with pytest.raises(ValueError):
            PowerConfig(Ps=1.0, Ps_max=1.0, Pr_max=1.0, N0=0.0)
