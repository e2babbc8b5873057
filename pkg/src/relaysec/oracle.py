"""Brute-force verifiers kept independent of the solver path.

Everything here avoids the quadrature / SDP machinery on purpose: Monte
Carlo for the mutual information, random-plus-polish search over rank-1
beamformers, and sampling of CSI error balls. Fixed seeds make every
oracle run reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

LN2 = math.log(2.0)


@dataclass(frozen=True)
class OracleConfig:
    mc_samples: int = 1_000_000
    search_samples: int = 100_000
    error_samples: int = 10_000
    seed: int = 12345

    def __post_init__(self):
        for n in (self.mc_samples, self.search_samples, self.error_samples):
            if n < 1000:
                raise ValueError("oracle sample counts must be >= 1000")


def mi_monte_carlo(alphabet, rho: float, cfg: OracleConfig):
    """Monte-Carlo estimate of I(rho) with its standard error.

    Samples a uniform symbol index and CN(0,1) noise, then averages the
    per-sample information density. Batched to bound memory.
    """
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    a = alphabet.points
    M = a.size
    rng = np.random.default_rng(cfg.seed)
    total = 0.0
    total_sq = 0.0
    n_done = 0
    batch = 500_000
    while n_done < cfg.mc_samples:
        n = min(batch, cfg.mc_samples - n_done)
        l = rng.integers(0, M, size=n)
        theta = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
        d = math.sqrt(rho) * (a[l][:, None] - a[None, :])  # (n, M)
        arg = -np.abs(d) ** 2 - 2.0 * (
            theta.real[:, None] * d.real + theta.imag[:, None] * d.imag
        )
        mx = np.max(arg, axis=1)
        lse = mx + np.log(np.sum(np.exp(arg - mx[:, None]), axis=1))
        samples = math.log2(M) - lse / LN2
        total += float(np.sum(samples))
        total_sq += float(np.sum(samples**2))
        n_done += n
    mean = total / n_done
    var = max(total_sq / n_done - mean**2, 0.0)
    std_err = math.sqrt(var / n_done)
    return mean, std_err


def _relay_snr(phi, Psi, h, N0):
    num = float(np.real(np.conj(h) @ np.outer(phi, np.conj(phi)) @ h))
    den = N0 + float(np.real(np.conj(h) @ Psi @ h))
    return num / den


def _feasible(phi, Psi, inst, slack=1e-9):
    """Direct evaluation of the eavesdropper-cap and decodability
    constraints at a rank-1 candidate."""
    N0 = inst.N0
    if not math.isinf(inst.rho_eav_cap):
        for j, z in enumerate(inst.z):
            lhs = inst.bounds.b[j] + _relay_snr(phi, Psi, z, N0)
            if lhs > inst.rho_eav_cap + slack:
                return False
    dest = inst.bounds.a + _relay_snr(phi, Psi, inst.h, N0)
    return dest <= inst.bounds.c + slack


def _objective(phi, Psi, inst):
    return inst.bounds.a + _relay_snr(phi, Psi, inst.h, inst.N0)


def _unpack(x, N, use_an):
    phi = x[:N] + 1j * x[N : 2 * N]
    if use_an:
        # Psi = L L^H with L lower-triangular (real diag)
        L = np.zeros((N, N), dtype=complex)
        idx = 2 * N
        for i in range(N):
            for k in range(i + 1):
                if k == i:
                    L[i, k] = x[idx]
                    idx += 1
                else:
                    L[i, k] = x[idx] + 1j * x[idx + 1]
                    idx += 2
        Psi = L @ L.conj().T
    else:
        Psi = np.zeros((N, N), dtype=complex)
    return phi, Psi


def beamformer_search(inst, cfg: OracleConfig, use_an: bool = True,
                      n_polish: int = 12):
    """Random search plus constrained local polish over rank-1 beamformers.

    Candidates parameterize phi directly and Psi through a Cholesky
    factor, so every iterate is rank-1 / PSD by construction. Returns
    (t_best, Phi, Psi) lower-bounding the SDP optimum, or None when no
    feasible candidate is found.
    """
    N = inst.h.size
    if N > 3:
        raise ValueError("search oracle supports N <= 3 only")
    rng = np.random.default_rng(cfg.seed)
    Pr = inst.Pr_max
    n_psi = N * N if use_an else 0
    dim = 2 * N + n_psi

    def neg_objective(x):
        phi, Psi = _unpack(x, N, use_an)
        return -_objective(phi, Psi, inst)

    def power_slack(x):
        phi, Psi = _unpack(x, N, use_an)
        return Pr - float(np.sum(np.abs(phi) ** 2) + np.trace(Psi).real)

    def eav_slack(j):
        def f(x):
            phi, Psi = _unpack(x, N, use_an)
            return inst.rho_eav_cap - inst.bounds.b[j] - _relay_snr(phi, Psi, inst.z[j], inst.N0)
        return f

    def decod_slack(x):
        phi, Psi = _unpack(x, N, use_an)
        return inst.bounds.c - inst.bounds.a - _relay_snr(phi, Psi, inst.h, inst.N0)

    constraints = [{"type": "ineq", "fun": power_slack},
                   {"type": "ineq", "fun": decod_slack}]
    if not math.isinf(inst.rho_eav_cap):
        constraints += [{"type": "ineq", "fun": eav_slack(j)}
                        for j in range(len(inst.z))]

    # random exploration: keep the best feasible starts
    starts = []  # (t, x)
    for _ in range(max(1, cfg.search_samples // 256)):
        xs = rng.standard_normal((256, dim))
        for x in xs:
            phi, Psi = _unpack(x, N, use_an)
            power = float(np.sum(np.abs(phi) ** 2) + np.trace(Psi).real)
            if power <= 0:
                continue
            x = x * math.sqrt(Pr / power) * rng.uniform(0.05, 1.0) ** 0.5
            phi, Psi = _unpack(x, N, use_an)
            if power_slack(x) < 0 or not _feasible(phi, Psi, inst):
                continue
            t = _objective(phi, Psi, inst)
            starts.append((t, x.copy()))
    if not starts:
        return None
    starts.sort(key=lambda p: -p[0])

    best_t, best_x = starts[0]
    for _, x0 in starts[:n_polish]:
        res = minimize(neg_objective, x0, method="SLSQP",
                       constraints=constraints,
                       options={"maxiter": 400, "ftol": 1e-12})
        x = res.x
        phi, Psi = _unpack(x, N, use_an)
        power = float(np.sum(np.abs(phi) ** 2) + np.trace(Psi).real)
        if power > Pr:
            s = math.sqrt(Pr / power)
            phi, Psi = phi * s, Psi * s * s
        if _feasible(phi, Psi, inst, slack=1e-7):
            t = _objective(phi, Psi, inst)
            if t > best_t:
                best_t = t
                best_x = None  # phi/Psi already materialized
                best_pair = (phi, Psi)
    if best_x is not None:
        phi, Psi = _unpack(best_x, N, use_an)
        best_pair = (phi, Psi)
    phi, Psi = best_pair
    return _objective(phi, Psi, inst), np.outer(phi, np.conj(phi)), Psi


def sample_error_ball(rng, n: int, eps: float, count: int) -> np.ndarray:
    """Uniform draws from the complex n-ball boundary of radius eps,
    mixed with interior points; shape (count, n)."""
    z = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    on_boundary = z / norms * eps
    radii = rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / (2 * n))
    interior = on_boundary * radii
    # half boundary, half interior: extremes of quadratics sit on the shell
    mask = rng.uniform(size=(count, 1)) < 0.5
    return np.where(mask, on_boundary, interior)


def _ball_quadratic_minimizer(A, b, eps):
    """Exact minimizer of x^T A x + 2 b^T x over ||x|| <= eps for real
    symmetric A (trust-region subproblem via the secular equation)."""
    evals, V = np.linalg.eigh(A)
    bt = V.T @ b

    def x_of(nu):
        return -bt / (evals + nu)

    # interior stationary point when A is PD and it fits in the ball
    if evals[0] > 0:
        x = x_of(0.0)
        if np.linalg.norm(x) <= eps:
            return V @ x
    lo = max(0.0, -evals[0]) + 1e-14

    def norm_at(nu):
        return float(np.linalg.norm(x_of(nu)))

    if norm_at(lo) <= eps:
        # hard case: pad with the bottom eigendirection to reach the shell
        x = x_of(lo)
        deficit = max(eps**2 - float(x @ x), 0.0)
        x[0] += math.sqrt(deficit)
        return V @ x
    hi = lo + 1.0
    while norm_at(hi) > eps:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm_at(mid) > eps:
            lo = mid
        else:
            hi = mid
    return V @ x_of(hi)


def worst_case_error_search(quad_fn, center: np.ndarray, eps: float,
                            cfg: OracleConfig, mode: str = "min",
                            matrix: np.ndarray | None = None):
    """Extremize quad_fn(center + e) over the ball ||e|| <= eps.

    Always samples the ball (boundary-weighted). When the Hermitian
    matrix M of a pure quadratic quad_fn(v) = const + v M v^H is given,
    the exact extreme is also computed by solving the trust-region
    subproblem in the real embedding and the better of the two wins.
    """
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    n = center.size
    if eps == 0.0:
        return float(quad_fn(center)), np.zeros(n, dtype=complex)
    rng = np.random.default_rng(cfg.seed)
    draws = sample_error_ball(rng, n, eps, cfg.error_samples)
    vals = np.array([quad_fn(center + e) for e in draws])
    k = int(np.argmin(vals)) if mode == "min" else int(np.argmax(vals))
    best_val, best_e = float(vals[k]), draws[k]
    if matrix is not None:
        from .sdp import complex_to_real_embed
        sign = 1.0 if mode == "min" else -1.0
        # row-vector form v M v^H equals the embedded form of conj(M)
        A = sign * complex_to_real_embed(np.asarray(matrix).conj())
        c_r = np.concatenate([center.real, center.imag])
        x = _ball_quadratic_minimizer(A, A @ c_r, eps)
        e = x[:n] + 1j * x[n:]
        val = float(quad_fn(center + e))
        if (mode == "min" and val < best_val) or (mode == "max" and val > best_val):
            best_val, best_e = val, e
    return best_val, best_e
