"""Imperfect-CSI secrecy-rate lower bound.

Each fractional SNR constraint is split into independent bounds on its
numerator and denominator quadratics (auxiliary scalars r1..r4, s1j,
s2j), and each "for all errors in the ball" quadratic bound becomes one
bordered (N+1)x(N+1) LMI through the S-procedure, with a nonnegative
multiplier per ball. The surrogate r is maximized by bisection exactly
as in the perfect-CSI path; the resulting rate is a guaranteed lower
bound for every error realization inside the radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .alphabet import MiEvaluator
from .channel import (ChannelSet, ScalarBounds, Scenario, UncertaintyRadii,
                      scalar_bounds_robust)
from .perfect import (STATUS_DIRECT_DOMINATES, STATUS_EAV_DIRECT,
                      STATUS_INFEASIBLE, STATUS_OK, extract_beamvector)
from .sdp import (InfeasibleAtLowerBound, LinMat, LmiProblem, bisect_max,
                  minimize_linear, solve_feasibility)

STATUS_ROBUST_INFEASIBLE = "robust_infeasible_at_zero"


@dataclass(frozen=True)
class RobustInstance:
    estimates: ChannelSet         # CSI estimates, not the true gains
    radii: UncertaintyRadii
    bounds: ScalarBounds          # worst/best-case direct-link scalars
    N0: float
    Pr_max: float
    rho_eav_cap: float            # I^{-1}(2 R0); may be +inf
    use_an: bool = True

    def __post_init__(self):
        if self.rho_eav_cap < 0:
            raise ValueError("rho_eav_cap must be >= 0 or +inf")

    @property
    def N(self) -> int:
        return self.estimates.N

    @property
    def J(self) -> int:
        return self.estimates.J

    @property
    def a_priori_infeasible(self) -> bool:
        return any(b > self.rho_eav_cap for b in self.bounds.b)

    @property
    def relay_needed(self) -> bool:
        """c > a_max is required for the decodability surrogate (r3, r4)
        to admit a positive margin."""
        return self.bounds.c > self.bounds.a_max


@dataclass
class RobustOutcome:
    r_max: float
    Phi: np.ndarray
    Psi: np.ndarray
    phi: np.ndarray
    rank_ratio: float
    secrecy_rate: float
    R0: float
    power_used: float
    scalars: dict
    status: str = STATUS_OK
    witness_x: np.ndarray | None = field(default=None, repr=False)


def active_eavesdroppers(inst: RobustInstance) -> list[int]:
    """Indices j whose cap constraint can bind under the worst error:
    dropped when the cap exceeds the largest composite SNR reachable
    with the full relay budget and an inflated channel."""
    if math.isinf(inst.rho_eav_cap):
        return []
    out = []
    for j in range(inst.J):
        zn = float(np.linalg.norm(inst.estimates.z[j])) + inst.radii.eps_z[j]
        worst = inst.bounds.b[j] + inst.Pr_max * zn**2 / inst.N0
        if inst.rho_eav_cap < worst:
            out.append(j)
    return out


def build_robust_feasibility(inst: RobustInstance, r: float) -> LmiProblem:
    """LMI system for 'worst-case destination composite SNR >= r'."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if inst.a_priori_infeasible:
        raise InfeasibleAtLowerBound(
            "worst-case eavesdropper direct-link SNR exceeds the R0 cap")
    N = inst.N
    a, c, a_max = inst.bounds.a, inst.bounds.c, inst.bounds.a_max
    N0, Pr = inst.N0, inst.Pr_max
    h_hat = inst.estimates.h
    eps_h = inst.radii.eps_h

    p = LmiProblem()
    Phi = p.add_matrix_var("Phi", N)
    Psi = p.add_matrix_var("Psi", N) if inst.use_an else None

    def mix(phi_scale: float, psi_scale: float) -> LinMat:
        lm = LinMat(N)
        if phi_scale != 0.0:
            for i, F in Phi.expr(phi_scale).coefs.items():
                lm.add(i, F)
        if Psi is not None and psi_scale != 0.0:
            for i, F in Psi.expr(psi_scale).coefs.items():
                lm.add(i, F)
        return lm

    def ball_bound(name, inner, center, eps, mult, corner_const, corner_coefs):
        """PSD block certifying corner_const + (c+e) inner (c+e)* plus
        the corner scalar terms >= 0 for every ||e|| <= eps."""
        blk = inner.bordered(center)
        D = np.zeros((N + 1, N + 1), dtype=complex)
        D[:N, :N] = np.eye(N)
        D[N, N] = -eps**2
        blk.add(mult, D)
        C = np.zeros((N + 1, N + 1), dtype=complex)
        C[N, N] = corner_const
        blk.add_const(C)
        for i, v in corner_coefs.items():
            E = np.zeros((N + 1, N + 1), dtype=complex)
            E[N, N] = v
            blk.add(i, E)
        p.add_psd(name, blk)

    r1 = p.add_scalar_var("r1")
    r2 = p.add_scalar_var("r2")
    r3 = p.add_scalar_var("r3")
    r4 = p.add_scalar_var("r4")
    lam = [p.add_scalar_var(f"lam{k}") for k in (1, 2, 3, 4)]

    # destination numerator lower / denominator upper bounds
    ball_bound("A1", mix(1.0, a), h_hat, eps_h, lam[0], a * N0, {r1: -1.0})
    ball_bound("A2", mix(0.0, -1.0), h_hat, eps_h, lam[1], -N0, {r2: +1.0})
    # decodability numerator upper / denominator lower bounds
    ball_bound("A3", mix(-1.0, 0.0), h_hat, eps_h, lam[2], 0.0, {r3: +1.0})
    ball_bound("A4", mix(0.0, 1.0), h_hat, eps_h, lam[3], N0, {r4: -1.0})

    for j in active_eavesdroppers(inst):
        b_j = inst.bounds.b[j]
        z_hat = inst.estimates.z[j]
        eps_z = inst.radii.eps_z[j]
        s1 = p.add_scalar_var(f"s1_{j}")
        s2 = p.add_scalar_var(f"s2_{j}")
        mu1 = p.add_scalar_var(f"mu1_{j}")
        mu2 = p.add_scalar_var(f"mu2_{j}")
        # eavesdropper numerator upper / denominator lower bounds
        ball_bound(f"B1_{j}", mix(-1.0, -b_j), z_hat, eps_z, mu1,
                   -b_j * N0, {s1: +1.0})
        ball_bound(f"B2_{j}", mix(0.0, 1.0), z_hat, eps_z, mu2,
                   N0, {s2: -1.0})
        # worst-case eavesdropper SNR cap: s1/s2 <= cap
        p.add_ineq(f"eav_cap_{j}", 0.0, {s1: 1.0, s2: -inst.rho_eav_cap})

    # worst-case destination SNR target: r <= r1/r2 (r fixed this probe)
    p.add_ineq("dest_rate", 0.0, {r2: r, r1: -1.0})
    # worst-case decodability: r3/r4 <= c - a_max
    p.add_ineq("decodability", 0.0, {r3: 1.0, r4: -(c - a_max)})

    coefs = dict(Phi.trace_form())
    if Psi is not None:
        coefs.update(Psi.trace_form())
    p.add_ineq("relay_power", -Pr, coefs)
    return p


def _zero_outcome(inst: RobustInstance, R0, status) -> RobustOutcome:
    N = inst.N
    Z = np.zeros((N, N), dtype=complex)
    return RobustOutcome(r_max=0.0, Phi=Z, Psi=Z.copy(),
                         phi=np.zeros(N, dtype=complex), rank_ratio=0.0,
                         secrecy_rate=0.0, R0=R0, power_used=0.0,
                         scalars={}, status=status)


def _polish_witness(inst, r, x):
    """Minimum-power point at fixed r; squeezes the rank-1 structure out
    of the max-slack witness exactly as in the perfect-CSI path."""
    problem = build_robust_feasibility(inst, r)
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
    scalars = {name: float(x[i]) for name, i in problem.scalar_vars.items()}
    return Phi, Psi, scalars, x


def solve_robust_rate(inst: RobustInstance, mi: MiEvaluator, R0: float = 0.0,
                      bisect_tol: float | None = None, feas_tol: float = 1e-7,
                      warm_x: np.ndarray | None = None) -> RobustOutcome:
    """Maximize the worst-case SNR surrogate r on [0, c] and convert to
    a secrecy-rate lower bound."""
    if inst.a_priori_infeasible:
        return _zero_outcome(inst, R0, STATUS_EAV_DIRECT)
    if not inst.relay_needed:
        return _zero_outcome(inst, R0, STATUS_DIRECT_DOMINATES)
    c = inst.bounds.c
    tol = bisect_tol if bisect_tol is not None else 1e-6 * max(c, 1.0)
    state = {"x": warm_x}

    def check(r):
        rep = solve_feasibility(build_robust_feasibility(inst, r),
                                feas_tol=feas_tol, x0=state["x"])
        if rep.feasible:
            state["x"] = rep.x
        return rep

    try:
        r_max, rep = bisect_max(check, 0.0, c, tol)
    except InfeasibleAtLowerBound:
        return _zero_outcome(inst, R0, STATUS_ROBUST_INFEASIBLE)
    Phi, Psi, scalars, _ = _polish_witness(inst, r_max, rep.x)
    phi, rank_ratio = extract_beamvector(Phi)
    rate = max(0.0, mi.half_rate(min(r_max, c)) - R0)
    return RobustOutcome(
        r_max=r_max, Phi=Phi, Psi=Psi, phi=phi, rank_ratio=rank_ratio,
        secrecy_rate=rate, R0=R0,
        power_used=float(np.trace(Phi).real + np.trace(Psi).real),
        scalars=scalars, status=STATUS_OK, witness_x=rep.x)


def make_instance(scenario: Scenario, mi: MiEvaluator, R0: float,
                  radii: UncertaintyRadii | None = None,
                  use_an: bool = True) -> RobustInstance:
    radii = radii if radii is not None else scenario.radii
    bounds = scalar_bounds_robust(scenario.channels, radii, scenario.power)
    return RobustInstance(
        estimates=scenario.channels, radii=radii, bounds=bounds,
        N0=scenario.power.N0, Pr_max=scenario.power.Pr_max,
        rho_eav_cap=mi.inverse_mi(2.0 * R0), use_an=use_an)


def sweep_eps(scenario: Scenario, mi: MiEvaluator, R0: float,
              eps_grid, use_an: bool = True, eavesdroppers=None):
    """Rate lower bound at fixed R0 over a grid of uniform error radii.
    Returns a list of (eps, RobustOutcome)."""
    ch = scenario.channels
    if eavesdroppers is not None:
        sub = list(eavesdroppers)
        if not sub:
            raise ValueError("eavesdropper subset must be non-empty")
        ch = type(ch)(g=ch.g, h0=ch.h0, h=ch.h, z0=ch.z0[sub], z=ch.z[sub])
        scenario = type(scenario)(channels=ch, power=scenario.power,
                                  radii=scenario.radii,
                                  alphabet=scenario.alphabet,
                                  solver=scenario.solver)
    out = []
    for eps in eps_grid:
        if eps < 0:
            raise ValueError("error radii must be nonnegative")
        radii = UncertaintyRadii.uniform(float(eps), ch.J)
        inst = make_instance(scenario, mi, R0, radii=radii, use_an=use_an)
        tol = scenario.solver.bisect_tol_rel * max(inst.bounds.c, 1.0)
        out.append((float(eps), solve_robust_rate(inst, mi, R0,
                                                  bisect_tol=tol)))
    return out


def soundness_checks(outcome: RobustOutcome, inst: RobustInstance):
    """The quadratic bounds certified by each LMI, as (name, quad_fn,
    center, radius, bound, sense) tuples for replay over sampled errors.
    sense '>=' means quad_fn(center+e) >= bound must hold on the ball."""
    if outcome.status != STATUS_OK:
        return []
    Phi, Psi, sc = outcome.Phi, outcome.Psi, outcome.scalars
    a = inst.bounds.a
    N0 = inst.N0
    h_hat = inst.estimates.h

    def qf(M, offset=0.0):
        return lambda v: offset + float(np.real(v @ M @ v.conj()))

    checks = [
        ("dest_num_A1", qf(a * Psi + Phi, a * N0), h_hat,
         inst.radii.eps_h, sc["r1"], ">="),
        ("dest_den_A2", qf(Psi, N0), h_hat, inst.radii.eps_h, sc["r2"], "<="),
        ("decod_num_A3", qf(Phi), h_hat, inst.radii.eps_h, sc["r3"], "<="),
        ("decod_den_A4", qf(Psi, N0), h_hat, inst.radii.eps_h, sc["r4"], ">="),
    ]
    for j in active_eavesdroppers(inst):
        b_j = inst.bounds.b[j]
        z_hat = inst.estimates.z[j]
        eps_z = inst.radii.eps_z[j]
        checks.append((f"eav_num_B1_{j}", qf(b_j * Psi + Phi, b_j * N0),
                       z_hat, eps_z, sc[f"s1_{j}"], "<="))
        checks.append((f"eav_den_B2_{j}", qf(Psi, N0),
                       z_hat, eps_z, sc[f"s2_{j}"], ">="))
    return checks
