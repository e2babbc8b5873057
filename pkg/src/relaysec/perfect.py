"""Perfect-CSI secrecy-rate maximization.

For a fixed common-message rate R0 the destination SNR surrogate t is
maximized by bisection over the feasibility of a small LMI system in
the signal covariance Phi (rank-relaxed) and the artificial-noise
covariance Psi. The secrecy rate is then {0.5*I(t_max) - R0}^+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .alphabet import MiEvaluator
from .channel import ScalarBounds, Scenario, scalar_bounds_perfect
from .sdp import (FeasibilityReport, InfeasibleAtLowerBound, LmiProblem,
                  bisect_max, minimize_linear, solve_feasibility)

STATUS_OK = "ok"
STATUS_EAV_DIRECT = "eav_direct_link_exceeds_R0"
STATUS_DIRECT_DOMINATES = "direct_link_dominates"
STATUS_INFEASIBLE = "infeasible_at_zero"


@dataclass(frozen=True)
class PerfectInstance:
    bounds: ScalarBounds
    h: np.ndarray                 # (N,) relay->destination gains
    z: np.ndarray                 # (J, N) relay->eavesdropper gains
    N0: float
    Pr_max: float
    rho_eav_cap: float            # I^{-1}(2 R0); may be +inf
    use_an: bool = True

    def __post_init__(self):
        if self.rho_eav_cap < 0:
            raise ValueError("rho_eav_cap must be >= 0 or +inf")

    @property
    def N(self) -> int:
        return self.h.size

    @property
    def J(self) -> int:
        return self.z.shape[0]

    @property
    def a_priori_infeasible(self) -> bool:
        return any(b > self.rho_eav_cap for b in self.bounds.b)


@dataclass
class SolveOutcome:
    t_max: float
    Phi: np.ndarray
    Psi: np.ndarray
    phi: np.ndarray
    rank_ratio: float
    secrecy_rate: float
    R0: float
    power_used: float
    status: str = STATUS_OK
    witness_x: np.ndarray | None = field(default=None, repr=False)


def active_eavesdroppers(inst: PerfectInstance) -> list[int]:
    """Indices j whose cap constraint can actually bind: dropped when the
    cap exceeds the largest composite SNR any feasible (Phi, Psi) can
    produce at eavesdropper j."""
    if math.isinf(inst.rho_eav_cap):
        return []
    out = []
    for j in range(inst.J):
        zn2 = float(np.linalg.norm(inst.z[j])) ** 2
        worst = inst.bounds.b[j] + inst.Pr_max * zn2 / inst.N0
        if inst.rho_eav_cap < worst:
            out.append(j)
    return out


def build_feasibility(inst: PerfectInstance, t: float) -> LmiProblem:
    """LMI feasibility system for 'destination composite SNR >= t'."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if inst.a_priori_infeasible:
        raise InfeasibleAtLowerBound(
            "eavesdropper direct-link SNR exceeds the R0 cap")
    a, c = inst.bounds.a, inst.bounds.c
    N0, Pr = inst.N0, inst.Pr_max

    p = LmiProblem()
    Phi = p.add_matrix_var("Phi", inst.N)
    Psi = p.add_matrix_var("Psi", inst.N) if inst.use_an else None

    def combo(qf_phi, qf_psi_scale, w):
        coefs = dict(Phi.quad_form(w)) if qf_phi else {}
        if Psi is not None and qf_psi_scale != 0.0:
            for i, v in Psi.quad_form(w).items():
                coefs[i] = coefs.get(i, 0.0) + qf_psi_scale * v
        return coefs

    # destination: (t - a)(N0 + h Psi h*) - h Phi h* <= 0
    coefs = combo(False, t - a, inst.h)
    for i, v in Phi.quad_form(inst.h).items():
        coefs[i] = coefs.get(i, 0.0) - v
    p.add_ineq("dest_rate", (t - a) * N0, coefs)

    # eavesdroppers: z Phi z* - (cap - b_j)(N0 + z Psi z*) <= 0
    for j in active_eavesdroppers(inst):
        margin = inst.rho_eav_cap - inst.bounds.b[j]
        coefs = combo(True, -margin, inst.z[j])
        p.add_ineq(f"eav_cap_{j}", -margin * N0, coefs)

    # decodability: h Phi h* - (c - a)(N0 + h Psi h*) <= 0
    coefs = combo(True, -(c - a), inst.h)
    p.add_ineq("decodability", -(c - a) * N0, coefs)

    # relay power
    coefs = dict(Phi.trace_form())
    if Psi is not None:
        coefs.update(Psi.trace_form())
    p.add_ineq("relay_power", -Pr, coefs)
    return p


def extract_beamvector(Phi: np.ndarray):
    """Principal eigenpair of Phi as the beamvector, with the rank-1
    quality ratio lambda_2 / lambda_1."""
    Phi = np.asarray(Phi, dtype=complex)
    evals, evecs = np.linalg.eigh(Phi)
    lam1, lam2 = evals[-1], (evals[-2] if evals.size > 1 else 0.0)
    if evals[0] < -1e-9 * max(1.0, abs(evals).max()):
        raise ValueError("Phi is not positive semidefinite")
    if lam1 <= 1e-14:
        return np.zeros(Phi.shape[0], dtype=complex), 0.0
    phi = math.sqrt(max(lam1, 0.0)) * evecs[:, -1]
    # fix the global phase: first non-negligible entry real nonnegative
    for v in phi:
        if abs(v) > 1e-12 * abs(phi).max():
            phi = phi * np.exp(-1j * np.angle(v))
            break
    rank_ratio = max(lam2, 0.0) / lam1
    return phi, float(rank_ratio)


def _polish_witness(inst, t, x):
    """Minimum-power point at fixed t. The max-slack witness spreads any
    surplus power across eigendirections; the minimum-power optimizer is
    the rank-1 point, so polish before extracting the beamvector."""
    problem = build_feasibility(inst, t)
    cost = np.zeros(problem.nvar)
    for mv in problem.matrix_vars.values():
        for i, v in mv.trace_form().items():
            cost[i] = v
    try:
        x = minimize_linear(problem, cost, x,
                            gap_tol=1e-9 * max(inst.Pr_max, 1.0))
    except ValueError:
        pass  # witness not strictly interior; keep it as-is
    Phi = problem.matrix_vars["Phi"].value(x)
    Psi = (problem.matrix_vars["Psi"].value(x)
           if "Psi" in problem.matrix_vars else np.zeros_like(Phi))
    return Phi, Psi, x


def _outcome_from_witness(inst, t_max, rep, R0, mi: MiEvaluator, status=STATUS_OK):
    Phi, Psi, x = _polish_witness(inst, t_max, rep.x)
    phi, rank_ratio = extract_beamvector(Phi)
    rate = max(0.0, mi.half_rate(min(t_max, inst.bounds.c)) - R0)
    return SolveOutcome(
        t_max=t_max, Phi=Phi, Psi=Psi, phi=phi, rank_ratio=rank_ratio,
        secrecy_rate=rate, R0=R0,
        power_used=float(np.trace(Phi).real + np.trace(Psi).real),
        status=status, witness_x=rep.x if rep.x is not None else x)


def _zero_outcome(inst, R0, status):
    N = inst.N
    Z = np.zeros((N, N), dtype=complex)
    return SolveOutcome(t_max=0.0, Phi=Z, Psi=Z.copy(),
                        phi=np.zeros(N, dtype=complex), rank_ratio=0.0,
                        secrecy_rate=0.0, R0=R0, power_used=0.0, status=status)


def solve_rate(inst: PerfectInstance, mi: MiEvaluator, R0: float = 0.0,
               bisect_tol: float | None = None, feas_tol: float = 1e-7,
               warm_x: np.ndarray | None = None) -> SolveOutcome:
    """Maximize t by bisection on [0, c] and convert to a secrecy rate."""
    if inst.a_priori_infeasible:
        return _zero_outcome(inst, R0, STATUS_EAV_DIRECT)
    if inst.bounds.a > inst.bounds.c:
        return _zero_outcome(inst, R0, STATUS_DIRECT_DOMINATES)
    c = inst.bounds.c
    tol = bisect_tol if bisect_tol is not None else 1e-6 * max(c, 1.0)
    state = {"x": warm_x}

    def check(t):
        rep = solve_feasibility(build_feasibility(inst, t),
                                feas_tol=feas_tol, x0=state["x"])
        if rep.feasible:
            state["x"] = rep.x
        return rep

    try:
        t_max, rep = bisect_max(check, 0.0, c, tol)
    except InfeasibleAtLowerBound:
        return _zero_outcome(inst, R0, STATUS_INFEASIBLE)
    return _outcome_from_witness(inst, t_max, rep, R0, mi)


def make_instance(scenario: Scenario, mi: MiEvaluator, R0: float,
                  use_an: bool = True) -> PerfectInstance:
    bounds = scalar_bounds_perfect(scenario.channels, scenario.power)
    return PerfectInstance(
        bounds=bounds, h=scenario.channels.h, z=scenario.channels.z,
        N0=scenario.power.N0, Pr_max=scenario.power.Pr_max,
        rho_eav_cap=mi.inverse_mi(2.0 * R0), use_an=use_an)


@dataclass
class SweepResult:
    outcomes: list
    R_D: float
    best_R0: float
    best_rate: float


def sweep_R0(scenario: Scenario, mi: MiEvaluator, L: int | None = None,
             use_an: bool = True, eavesdroppers=None) -> SweepResult:
    """Secrecy rate over the grid R0 = l * R_D / L, l = 0..L.

    R_D is the relay-decodability ceiling 0.5*I(Ps_max*||g||^2/N0).
    eavesdroppers optionally restricts to a subset of indices (J' <= J).
    """
    L = L if L is not None else scenario.solver.grid_L
    if L < 10:
        raise ValueError("grid size L must be >= 10")
    ch, pw = scenario.channels, scenario.power
    if eavesdroppers is not None:
        sub = list(eavesdroppers)
        if not sub:
            raise ValueError("eavesdropper subset must be non-empty")
        ch = type(ch)(g=ch.g, h0=ch.h0, h=ch.h,
                      z0=ch.z0[sub], z=ch.z[sub])
    rho_relay = pw.Ps_max * float(np.linalg.norm(ch.g)) ** 2 / pw.N0
    R_D = mi.half_rate(rho_relay)
    delta = R_D / L
    bounds = scalar_bounds_perfect(ch, pw)
    tol = scenario.solver.bisect_tol_rel * max(bounds.c, 1.0)

    outcomes = []
    warm_x = None
    lo_floor = 0.0
    prev_key = None
    prev_outcome = None
    step_hint = None
    for l in range(L + 1):
        R0 = l * delta
        cap = mi.inverse_mi(2.0 * R0)
        inst = PerfectInstance(bounds=bounds, h=ch.h, z=ch.z, N0=pw.N0,
                               Pr_max=pw.Pr_max, rho_eav_cap=cap,
                               use_an=use_an)
        if inst.a_priori_infeasible:
            outcomes.append(_zero_outcome(inst, R0, STATUS_EAV_DIRECT))
            continue
        if inst.bounds.a > inst.bounds.c:
            outcomes.append(_zero_outcome(inst, R0, STATUS_DIRECT_DOMINATES))
            continue
        key = tuple(active_eavesdroppers(inst))
        if not key and prev_key == key and prev_outcome is not None:
            # cap constraints all vacuous: t_max no longer depends on R0
            out = _clone_with_R0(prev_outcome, R0, inst, mi)
            outcomes.append(out)
            continue
        if (prev_outcome is not None and prev_outcome.status == STATUS_OK
                and warm_x is not None
                and prev_outcome.t_max + tol < inst.bounds.c):
            # plateau probe: t_max is non-decreasing in R0, so when one
            # step above the previous optimum is still infeasible the
            # whole solve (and its polished witness) carries over
            probe = prev_outcome.t_max + tol
            rep = solve_feasibility(build_feasibility(inst, probe), x0=warm_x)
            if not rep.feasible:
                out = _clone_with_R0(prev_outcome, R0, inst, mi)
                prev_key = key
                outcomes.append(out)
                continue
            warm_x = rep.x
            lo_floor = max(lo_floor, probe)
        # t_max is non-decreasing in R0, so restart bisection at the
        # previous optimum
        out = _solve_from(inst, mi, R0, tol, lo_floor, warm_x, step_hint)
        if out.status == STATUS_OK:
            if prev_outcome is not None and prev_outcome.status == STATUS_OK:
                step_hint = max(out.t_max - prev_outcome.t_max, 4.0 * tol)
            warm_x = out.witness_x
            lo_floor = max(lo_floor, out.t_max)
        prev_key, prev_outcome = key, out
        outcomes.append(out)

    best = max(outcomes, key=lambda o: o.secrecy_rate)
    return SweepResult(outcomes=outcomes, R_D=R_D,
                       best_R0=best.R0, best_rate=best.secrecy_rate)


def _clone_with_R0(prev: SolveOutcome, R0, inst, mi: MiEvaluator):
    rate = max(0.0, mi.half_rate(min(prev.t_max, inst.bounds.c)) - R0)
    return SolveOutcome(
        t_max=prev.t_max, Phi=prev.Phi, Psi=prev.Psi, phi=prev.phi,
        rank_ratio=prev.rank_ratio, secrecy_rate=rate, R0=R0,
        power_used=prev.power_used, status=prev.status,
        witness_x=prev.witness_x)


def _solve_from(inst, mi, R0, tol, lo, warm_x, step_hint=None):
    c = inst.bounds.c
    state = {"x": warm_x}

    def check(t):
        rep = solve_feasibility(build_feasibility(inst, t), x0=state["x"])
        if rep.feasible:
            state["x"] = rep.x
        return rep

    hi = c
    if lo > 0.0 and step_hint is not None and lo + tol < c:
        # t_max typically advances by about the previous grid increment,
        # so bracket upward from the warm lower bound instead of
        # bisecting all of [lo, c]
        w = max(step_hint, 8.0 * tol)
        while True:
            probe = lo + w
            if probe >= c:
                break
            if check(probe).feasible:
                lo = probe
                w *= 4.0
            else:
                hi = probe
                break
    try:
        t_max, rep = bisect_max(check, lo, hi, tol)
    except InfeasibleAtLowerBound:
        if lo > 0.0:
            # warm lower bound was too aggressive; fall back to 0
            return _solve_from(inst, mi, R0, tol, 0.0, warm_x)
        return _zero_outcome(inst, R0, STATUS_INFEASIBLE)
    return _outcome_from_witness(inst, t_max, rep, R0, mi)


@dataclass
class KktReport:
    dest_rate_residual: float        # activity of the destination constraint
    power_used: float
    power_saturated: bool
    decodability_slack: float
    t_above_a: bool
    details: dict


def verify_kkt(outcome: SolveOutcome, inst: PerfectInstance,
               tol: float = 1e-5) -> KktReport:
    """Stationarity side-checks at the returned witness: the destination
    constraint is active, and full relay power is used whenever the
    decodability constraint is slack."""
    h, N0 = inst.h, inst.N0
    Phi, Psi = outcome.Phi, outcome.Psi
    hPhih = float(np.real(h @ Phi @ h.conj()))
    hPsih = float(np.real(h @ Psi @ h.conj()))
    e59 = (outcome.t_max - inst.bounds.a) * (N0 + hPsih) - hPhih
    dec_slack = (inst.bounds.c - inst.bounds.a) * (N0 + hPsih) - hPhih
    saturated = abs(outcome.power_used - inst.Pr_max) <= tol * max(1.0, inst.Pr_max)
    return KktReport(
        dest_rate_residual=e59,
        power_used=outcome.power_used,
        power_saturated=saturated,
        decodability_slack=dec_slack,
        t_above_a=outcome.t_max > inst.bounds.a or np.allclose(Phi, 0),
        details={"hPhih": hPhih, "hPsih": hPsih},
    )
