import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaysec.alphabet import Alphabet, MiEvaluator, bpsk, named_alphabet, qpsk

# frozen Monte-Carlo references (1e7 draws, see tests/test_oracle.py for
# the live 3-sigma agreement check)
MC_REFS = {0.5: 0.48594415, 1.0: 0.72145154, 2.0: 0.91282113,
           5.0: 0.99675875, 10.0: 0.99998356}


@pytest.fixture(scope="module")
def ev():
    return MiEvaluator(bpsk(), quadrature_order=64)


class TestAlphabet:
    def test_bpsk_points(self):
        a = bpsk()
        assert a.M == 2
        assert set(np.round(a.points, 12)) == {1.0 + 0j, -1.0 + 0j}

    def test_zero_mean_enforced(self):
        with pytest.raises(ValueError):
            Alphabet((1.0 + 0j, 0.5 + 0j), name="bad")

    def test_unit_power_enforced(self):
        with pytest.raises(ValueError):
            Alphabet((2.0 + 0j, -2.0 + 0j), name="bad")

    def test_distinct_symbols(self):
        with pytest.raises(ValueError):
            Alphabet.from_points([1.0, 1.0, -1.0, -1.0])

    def test_min_size(self):
        with pytest.raises(ValueError):
            Alphabet.from_points([0.0])

    def test_from_points_renormalizes_small_drift(self):
        a = Alphabet.from_points([1.0 + 1e-10, -1.0])
        assert abs(np.mean(np.abs(a.points) ** 2) - 1.0) < 1e-12

    def test_from_points_rejects_large_drift(self):
        with pytest.raises(ValueError):
            Alphabet.from_points([1.5, -1.0])

    def test_named(self):
        assert named_alphabet("BPSK").M == 2
        assert named_alphabet("qpsk").M == 4
        with pytest.raises(ValueError):
            named_alphabet("256-XYZ")


class TestMutualInformation:
    def test_zero_snr_exact(self, ev):
        assert ev.mutual_information(0.0) == 0.0

    def test_high_snr_saturates(self, ev):
        assert ev.mutual_information(100.0) == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("rho,ref", sorted(MC_REFS.items()))
    def test_matches_frozen_monte_carlo(self, ev, rho, ref):
        # 3 sigma of the 1e7-draw estimator is < 4e-4 at these points
        assert ev.mutual_information(rho) == pytest.approx(ref, abs=4e-4)

    def test_negative_rho_rejected(self, ev):
        with pytest.raises(ValueError):
            ev.mutual_information(-0.1)

    def test_low_order_rejected(self):
        with pytest.raises(ValueError):
            MiEvaluator(bpsk(), quadrature_order=8)

    def test_monotone_in_rho(self, ev):
        grid = np.logspace(-3, 3, 100)
        vals = [ev.mutual_information(float(r)) for r in grid]
        assert all(vals[i] <= vals[i + 1] + 1e-9 for i in range(len(vals) - 1))

    def test_concave_in_rho(self, ev):
        grid = np.linspace(0.0, 20.0, 81)
        vals = np.array([ev.mutual_information(float(r)) for r in grid])
        second = vals[2:] - 2 * vals[1:-1] + vals[:-2]
        assert np.max(second) <= 1e-7

    def test_bounds(self, ev):
        for rho in np.logspace(-3, 3, 40):
            v = ev.mutual_information(float(rho))
            assert 0.0 <= v <= 1.0 + 1e-12

    def test_qpsk_bounds(self):
        ev4 = MiEvaluator(qpsk(), quadrature_order=32)
        v = ev4.mutual_information(5.0)
        assert 1.0 < v < 2.0

    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=0.0, max_value=50.0))
    def test_bounded_property(self, ev, rho):
        v = ev.mutual_information(rho)
        assert 0.0 <= v <= 1.0 + 1e-12

    def test_half_rate(self, ev):
        assert ev.half_rate(0.0) == 0.0
        assert ev.half_rate(2.0) == pytest.approx(
            0.5 * ev.mutual_information(2.0), abs=1e-15)


class TestInverse:
    def test_zero_target(self, ev):
        assert ev.inverse_mi(0.0) == 0.0

    def test_round_trip_at_fixed_rho(self, ev):
        y = ev.mutual_information(2.5)
        assert ev.inverse_mi(y) == pytest.approx(2.5, abs=1e-6)

    def test_round_trip_grid(self, ev):
        for y in np.linspace(0.0, 0.99, 23):
            rho = ev.inverse_mi(float(y))
            assert abs(ev.mutual_information(rho) - y) <= 1e-8

    def test_saturated_target_is_infinite(self, ev):
        assert math.isinf(ev.inverse_mi(1.0))
        assert math.isinf(ev.inverse_mi(1.7))

    def test_negative_target_rejected(self, ev):
        with pytest.raises(ValueError):
            ev.inverse_mi(-0.01)

    def test_fig3_operating_point(self, ev):
        rho = ev.inverse_mi(2 * 0.0810)
        assert ev.mutual_information(rho) == pytest.approx(0.162, abs=1e-9)
