import math

import numpy as np
import pytest

from relaysec.channel import UncertaintyRadii
from relaysec.oracle import OracleConfig, worst_case_error_search
from relaysec.perfect import STATUS_DIRECT_DOMINATES, STATUS_EAV_DIRECT, STATUS_OK
from relaysec.perfect import make_instance as make_perfect
from relaysec.perfect import solve_rate
from relaysec.robust import (RobustInstance, active_eavesdroppers,
                             build_robust_feasibility, make_instance,
                             solve_robust_rate, soundness_checks, sweep_eps)
from relaysec.sdp import solve_feasibility

from conftest import subset_scenario

R0 = 0.0810


@pytest.fixture(scope="module")
def sc2(scenario):
    return subset_scenario(scenario, [0, 1])


@pytest.fixture(scope="module")
def out_eps02(sc2, mi):
    inst = make_instance(sc2, mi, R0, radii=UncertaintyRadii.uniform(0.02, 2))
    return inst, solve_robust_rate(inst, mi, R0)


class TestReduction:
    def test_zero_radius_matches_perfect(self, sc2, mi):
        p_out = solve_rate(make_perfect(sc2, mi, R0), mi, R0)
        r_out = solve_robust_rate(make_instance(sc2, mi, R0), mi, R0)
        # both bisections run at tol = 1e-6 * max(c, 1)
        inst = make_instance(sc2, mi, R0)
        tol = 1e-6 * max(inst.bounds.c, 1.0)
        assert abs(r_out.r_max - p_out.t_max) <= 2 * tol
        assert r_out.status == STATUS_OK

    def test_r_zero_feasible(self, sc2, mi):
        inst = make_instance(sc2, mi, R0)
        rep = solve_feasibility(build_robust_feasibility(inst, 0.0))
        assert rep.feasible


class TestRobustSolve:
    def test_eps_solution_valid(self, out_eps02):
        inst, out = out_eps02
        assert out.status == STATUS_OK
        assert out.rank_ratio <= 1e-6
        assert out.power_used <= inst.Pr_max * (1 + 1e-6)
        # every auxiliary scalar and multiplier is nonnegative
        assert all(v >= -1e-12 for v in out.scalars.values())

    def test_lmi_blocks_psd_at_witness(self, out_eps02, mi):
        inst, out = out_eps02
        problem = build_robust_feasibility(inst, out.r_max)
        rep = solve_feasibility(problem, x0=out.witness_x)
        assert rep.feasible
        margins = problem.evaluate(rep.x)
        assert min(margins.values()) >= -1e-8

    def test_lower_bounds_perfect(self, sc2, mi, out_eps02):
        _, out = out_eps02
        p_out = solve_rate(make_perfect(sc2, mi, R0), mi, R0)
        assert out.r_max <= p_out.t_max + 2e-5

    def test_monotone_in_eps(self, sc2, mi):
        pts = sweep_eps(sc2, mi, R0, [0.0, 0.01, 0.03])
        rates = [o.secrecy_rate for _, o in pts]
        assert all(rates[i + 1] <= rates[i] + 1e-6
                   for i in range(len(rates) - 1))

    def test_a_priori_infeasible(self, sc2, mi):
        inst = make_instance(sc2, mi, 0.0)  # cap 0 < inflated b_j
        out = solve_robust_rate(inst, mi, 0.0)
        assert out.status == STATUS_EAV_DIRECT
        assert out.secrecy_rate == 0.0

    def test_relay_link_swallowed_by_error(self, sc2, mi):
        # error ball larger than ||g|| clamps c to 0: relay unusable
        g_norm = float(np.linalg.norm(sc2.channels.g))
        radii = UncertaintyRadii(eps_g=g_norm + 0.1, eps_z0=(0.0, 0.0),
                                 eps_z=(0.0, 0.0))
        inst = make_instance(sc2, mi, R0, radii=radii)
        assert inst.bounds.c == 0.0
        out = solve_robust_rate(inst, mi, R0)
        assert out.status == STATUS_DIRECT_DOMINATES
        assert out.secrecy_rate == 0.0

    def test_negative_r_rejected(self, sc2, mi):
        inst = make_instance(sc2, mi, R0)
        with pytest.raises(ValueError):
            build_robust_feasibility(inst, -0.5)

    def test_unbounded_cap_drops_eavesdropper_blocks(self, sc2, mi):
        inst = make_instance(sc2, mi, 0.6, radii=UncertaintyRadii.uniform(0.02, 2))
        assert math.isinf(inst.rho_eav_cap)
        assert active_eavesdroppers(inst) == []
        problem = build_robust_feasibility(inst, 0.5)
        assert not any(name.startswith("B") for name, _ in problem.psd_blocks)


class TestSoundness:
    def test_sampled_errors_respect_bounds(self, out_eps02):
        from relaysec.oracle import sample_error_ball
        inst, out = out_eps02
        rng = np.random.default_rng(21)
        checks = soundness_checks(out, inst)
        assert len(checks) >= 6
        for name, fn, center, eps, bound, sense in checks:
            draws = sample_error_ball(rng, center.size, eps, 10_000)
            vals = np.array([fn(center + e) for e in draws])
            if sense == ">=":
                assert vals.min() >= bound - 1e-6, name
            else:
                assert vals.max() <= bound + 1e-6, name

    def test_exact_worst_case_destination(self, out_eps02):
        # the certified destination-numerator bound r1 holds at the exact
        # ball extreme, not just at sampled points
        inst, out = out_eps02
        cfg = OracleConfig(seed=4, error_samples=2000)
        a, N0 = inst.bounds.a, inst.N0
        M = a * out.Psi + out.Phi
        fn = lambda v: a * N0 + float(np.real(v @ M @ v.conj()))
        val, _ = worst_case_error_search(fn, inst.estimates.h,
                                         inst.radii.eps_h, cfg,
                                         mode="min", matrix=M)
        assert val >= out.scalars["r1"] - 1e-6
