import math

import numpy as np
import pytest

from relaysec.alphabet import MiEvaluator, bpsk
from relaysec.channel import ScalarBounds
from relaysec.oracle import (OracleConfig, beamformer_search, mi_monte_carlo,
                             sample_error_ball, worst_case_error_search)
from relaysec.perfect import PerfectInstance


@pytest.fixture(scope="module")
def cfg():
    return OracleConfig(mc_samples=200_000, search_samples=20_000,
                        error_samples=5_000, seed=99)


class TestMonteCarloMi:
    def test_zero_snr(self, cfg):
        est, se = mi_monte_carlo(bpsk(), 0.0, cfg)
        assert se <= 1e-3
        assert abs(est) <= 3 * se + 1e-12

    def test_saturation(self, cfg):
        est, se = mi_monte_carlo(bpsk(), 100.0, cfg)
        assert est == pytest.approx(1.0, abs=max(3 * se, 1e-6))

    def test_quadrature_agreement(self, cfg):
        ev = MiEvaluator(bpsk(), quadrature_order=64)
        for rho in (0.5, 1.0, 2.0, 5.0, 10.0):
            est, se = mi_monte_carlo(bpsk(), rho, cfg)
            assert abs(ev.mutual_information(rho) - est) <= 3 * se

    def test_deterministic(self, cfg):
        a = mi_monte_carlo(bpsk(), 1.0, cfg)
        b = mi_monte_carlo(bpsk(), 1.0, cfg)
        assert a == b

    def test_negative_rho_rejected(self, cfg):
        with pytest.raises(ValueError):
            mi_monte_carlo(bpsk(), -1.0, cfg)

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            OracleConfig(mc_samples=10)


def _instance(h, z, b, cap, Pr=7.9433, a=0.3, c=6.0, use_an=True):
    bounds = ScalarBounds(a=a, b=b, c=c, a_max=a)
    return PerfectInstance(bounds=bounds, h=np.asarray(h, dtype=complex),
                           z=np.atleast_2d(np.asarray(z, dtype=complex)),
                           N0=1.0, Pr_max=Pr, rho_eav_cap=cap, use_an=use_an)


class TestBeamformerSearch:
    def test_matched_filter_limit(self, cfg):
        # no binding cap, AN off: optimum aligns with h and uses all power
        h = np.array([0.6 - 0.2j, -0.3 + 0.8j])
        inst = _instance(h, [[0.0, 0.0]], (0.0,), math.inf,
                         c=1e9, use_an=False)
        found = beamformer_search(inst, cfg, use_an=False)
        assert found is not None
        t, Phi, Psi = found
        expected = inst.bounds.a + inst.Pr_max * float(np.sum(np.abs(h) ** 2))
        assert t >= 0.99 * expected
        assert np.allclose(Psi, 0)

    def test_infeasible_returns_none(self, cfg):
        inst = _instance([1.0, 0.5], [[0.4, 0.1]], (2.0,), 1.0)
        assert inst.a_priori_infeasible
        # direct-link SNR at the eavesdropper already exceeds the cap, so
        # no candidate can pass the feasibility filter
        from relaysec.oracle import _feasible
        assert not _feasible(np.zeros(2, dtype=complex),
                             np.zeros((2, 2), dtype=complex), inst)

    def test_search_respects_power(self, cfg):
        h = np.array([0.2 - 0.7j, -0.4 - 0.3j])
        z = np.array([[0.38 + 0.08j, 0.84 - 0.09j]])
        inst = _instance(h, z, (3.4e-4,), 0.5, a=0.304, c=6.11)
        found = beamformer_search(inst, cfg)
        assert found is not None
        t, Phi, Psi = found
        power = float(np.trace(Phi).real + np.trace(Psi).real)
        assert power <= inst.Pr_max * (1 + 1e-6)
        assert np.linalg.matrix_rank(Phi, tol=1e-9) <= 1


class TestErrorBall:
    def test_samples_inside_ball(self):
        rng = np.random.default_rng(5)
        draws = sample_error_ball(rng, 3, 0.07, 500)
        norms = np.linalg.norm(draws, axis=1)
        assert np.all(norms <= 0.07 + 1e-12)
        # both shell and interior points occur
        assert np.sum(norms > 0.069) > 100
        assert np.sum(norms < 0.06) > 50

    def test_zero_radius_is_nominal(self, cfg):
        h = np.array([1.0 + 0j, 0.5j])
        fn = lambda v: float(np.real(v @ v.conj()))
        val, e = worst_case_error_search(fn, h, 0.0, cfg)
        assert val == fn(h)
        assert np.all(e == 0)

    def test_isotropic_max_exact(self, cfg):
        h = np.array([0.2174 - 0.6913j, -0.4047 - 0.3159j])
        Psi = np.eye(2)
        fn = lambda v: 1.0 + float(np.real(v @ Psi @ v.conj()))
        val, e = worst_case_error_search(fn, h, 0.05, cfg, mode="max",
                                         matrix=Psi)
        assert val == pytest.approx(1.0 + (np.linalg.norm(h) + 0.05) ** 2,
                                    abs=1e-12)
        assert np.linalg.norm(e) <= 0.05 + 1e-9

    def test_exact_extreme_dominates_sampling(self, cfg):
        rng = np.random.default_rng(11)
        for _ in range(5):
            A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            M = (A + A.conj().T) / 2
            h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            fn = lambda v: float(np.real(v @ M @ v.conj()))
            lo, _ = worst_case_error_search(fn, h, 0.1, cfg, mode="min",
                                            matrix=M)
            lo_s, _ = worst_case_error_search(fn, h, 0.1, cfg, mode="min")
            hi, _ = worst_case_error_search(fn, h, 0.1, cfg, mode="max",
                                            matrix=M)
            hi_s, _ = worst_case_error_search(fn, h, 0.1, cfg, mode="max")
            assert lo <= lo_s + 1e-12
            assert hi >= hi_s - 1e-12

    def test_bad_mode_rejected(self, cfg):
        with pytest.raises(ValueError):
            worst_case_error_search(lambda v: 0.0, np.zeros(2), 0.1, cfg,
                                    mode="sideways")
