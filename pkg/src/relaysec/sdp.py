"""Small dense Hermitian LMI machinery.

Feasibility of an affine PSD system is decided by a phase-I barrier
method: maximize the minimum slack s such that every PSD constraint
shifted by -s*I and every scalar inequality shifted by +s holds. The
system is strictly feasible iff the optimal s exceeds feas_tol; the
`marginal` band is treated as infeasible by the bisection driver so the
returned operating point stays achievable.

Problem sizes here are tiny (matrix blocks of dimension <= N+1 with
N = 2..4), so everything is dense numpy and a damped Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_HERM_TOL = 1e-12


def check_hermitian(H: np.ndarray, tol: float = _HERM_TOL) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H.view(float))):
        raise ValueError("matrix has non-finite entries")
    dev = np.max(np.abs(H - H.conj().T))
    if dev > tol * max(1.0, np.max(np.abs(H))):
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    return H


def complex_to_real_embed(H: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]].

    PSD is preserved both ways and every eigenvalue of H appears twice
    in the embedding.
    """
    H = check_hermitian(H)
    A, B = H.real, H.imag
    return np.block([[A, -B], [B, A]])


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Real-parameter basis of n x n Hermitian matrices: diagonal units,
    then symmetric and antisymmetric off-diagonal pairs."""
    basis = []
    for i in range(n):
        E = np.zeros((n, n), dtype=complex)
        E[i, i] = 1.0
        basis.append(E)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n), dtype=complex)
            E[i, j] = 1.0
            E[j, i] = 1.0
            basis.append(E)
            E = np.zeros((n, n), dtype=complex)
            E[i, j] = 1j
            E[j, i] = -1j
            basis.append(E)
    return basis


class LinMat:
    """Affine Hermitian-matrix-valued expression C + sum_i x_i F_i."""

    def __init__(self, dim: int, const=None):
        self.dim = dim
        self.const = np.zeros((dim, dim), dtype=complex) if const is None else np.asarray(const, dtype=complex).copy()
        self.coefs: dict[int, np.ndarray] = {}

    def add(self, idx: int, F: np.ndarray) -> "LinMat":
        F = np.asarray(F, dtype=complex)
        if idx in self.coefs:
            self.coefs[idx] = self.coefs[idx] + F
        else:
            self.coefs[idx] = F.copy()
        return self

    def add_const(self, C) -> "LinMat":
        self.const = self.const + np.asarray(C, dtype=complex)
        return self

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        S = self.const.copy()
        for i, F in self.coefs.items():
            S += x[i] * F
        return S

    def bordered(self, w: np.ndarray) -> "LinMat":
        """Map each coefficient M to [[M, M w^H], [w M, w M w^H]] for a
        row vector w; used for the S-procedure blocks."""
        w = np.asarray(w, dtype=complex).reshape(1, -1)
        if w.shape[1] != self.dim:
            raise ValueError("border vector length mismatch")
        out = LinMat(self.dim + 1)

        def border(M):
            Mw = M @ w.conj().T
            return np.block([[M, Mw], [w @ M, w @ Mw]])

        out.const = border(self.const)
        for i, F in self.coefs.items():
            out.coefs[i] = border(F)
        return out


@dataclass
class MatrixVar:
    name: str
    dim: int
    offset: int                      # first real-parameter index
    basis: list = field(repr=False, default=None)

    @property
    def nparams(self) -> int:
        return self.dim * self.dim

    @property
    def indices(self) -> range:
        return range(self.offset, self.offset + self.nparams)

    def expr(self, scale: float = 1.0) -> LinMat:
        lm = LinMat(self.dim)
        for k, B in enumerate(self.basis):
            lm.add(self.offset + k, scale * B)
        return lm

    def quad_form(self, w: np.ndarray) -> dict[int, float]:
        """Coefficients of w X w^H (real) as a linear form in the
        parameters, for a row vector w."""
        w = np.asarray(w, dtype=complex)
        return {
            self.offset + k: float(np.real(w @ B @ w.conj()))
            for k, B in enumerate(self.basis)
        }

    def trace_form(self) -> dict[int, float]:
        return {
            self.offset + k: float(np.real(np.trace(B)))
            for k, B in enumerate(self.basis)
        }

    def value(self, x: np.ndarray) -> np.ndarray:
        X = np.zeros((self.dim, self.dim), dtype=complex)
        for k, B in enumerate(self.basis):
            X += x[self.offset + k] * B
        return X


class LmiProblem:
    """Container for Hermitian PSD variables, nonnegative scalars,
    affine PSD constraints, and affine scalar inequalities (<= 0)."""

    def __init__(self):
        self.nvar = 0
        self.matrix_vars: dict[str, MatrixVar] = {}
        self.scalar_vars: dict[str, int] = {}
        self.psd_blocks: list[tuple[str, LinMat]] = []
        self.ineqs: list[tuple[str, float, dict[int, float]]] = []

    def add_matrix_var(self, name: str, dim: int) -> MatrixVar:
        var = MatrixVar(name, dim, self.nvar, basis=hermitian_basis(dim))
        self.nvar += var.nparams
        self.matrix_vars[name] = var
        self.add_psd(f"{name}_psd", var.expr())
        return var

    def add_scalar_var(self, name: str, nonneg: bool = True) -> int:
        idx = self.nvar
        self.nvar += 1
        self.scalar_vars[name] = idx
        if nonneg:
            self.add_ineq(f"{name}_nonneg", 0.0, {idx: -1.0})
        return idx

    def add_psd(self, name: str, lm: LinMat):
        self.psd_blocks.append((name, lm))

    def add_ineq(self, name: str, const: float, coefs: dict[int, float]):
        self.ineqs.append((name, float(const), dict(coefs)))

    # ---- direct evaluation, used for independent witness replay ----

    def evaluate(self, x: np.ndarray):
        """Per-constraint margins at x: min eigenvalue for PSD blocks,
        -(lhs) for inequalities. All margins >= 0 means feasible."""
        margins = {}
        for name, lm in self.psd_blocks:
            S = lm.evaluate(x)
            margins[name] = float(np.min(np.linalg.eigvalsh(S)))
        for name, const, coefs in self.ineqs:
            val = const + sum(c * x[i] for i, c in coefs.items())
            margins[name] = -val
        return margins

    def max_violation(self, x: np.ndarray) -> float:
        return max(0.0, -min(self.evaluate(x).values()))


@dataclass
class FeasibilityReport:
    status: str                      # strictly_feasible | infeasible | marginal
    slack: float                     # optimal phase-I minimum slack
    x: np.ndarray | None = None
    witness: dict | None = None
    max_violation: float = math.inf
    barrier_iterations: int = 0
    diagnostics: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "strictly_feasible"


class _Barrier:
    """Log-det barrier for min cost@y s.t. blocks(y) >= 0, A y + b <= 0."""

    def __init__(self, blocks, A, b, cost):
        self.blocks = blocks          # list of (idx, F stack, const)
        self.A = A
        self.b = b
        self.cost = cost
        self.nvars = cost.size
        self.m = sum(blk[2].shape[0] for blk in blocks) + b.size

    def state(self, y):
        """Cholesky factors of the blocks and inequality slacks, or None
        when y is outside the domain."""
        chols = []
        for idx, F, C in self.blocks:
            S = C + np.tensordot(y[idx], F, axes=1)
            try:
                L = np.linalg.cholesky(S)
            except np.linalg.LinAlgError:
                return None
            chols.append(L)
        d = -(self.b + self.A @ y) if self.A.size else np.zeros(0)
        if d.size and np.min(d) <= 0:
            return None
        return chols, d

    def value(self, tau, y, st):
        chols, d = st
        val = tau * float(self.cost @ y)
        for L in chols:
            val -= 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
        if d.size:
            val -= float(np.sum(np.log(d)))
        return val

    def grad_hess(self, tau, y, st):
        chols, d = st
        g = tau * self.cost.copy()
        H = np.zeros((self.nvars, self.nvars))
        for (idx, F, C), L in zip(self.blocks, chols):
            W = np.linalg.inv(L)
            Sinv = W.conj().T @ W
            M = np.einsum("ab,pbc->pac", Sinv, F)
            g[idx] += -np.real(np.einsum("paa->p", M))
            Hb = np.real(np.einsum("pab,qba->pq", M, M))
            H[np.ix_(idx, idx)] += Hb
        if d.size:
            inv_d = 1.0 / d
            g += self.A.T @ inv_d
            H += (self.A * (inv_d**2)[:, None]).T @ self.A
        return g, H

    def center(self, tau, y, st, newton_tol=1e-9, max_steps=60):
        """Damped Newton minimization of the barrier at fixed tau.
        Returns (y, st, steps, ok)."""
        steps = 0
        for _ in range(max_steps):
            g, H = self.grad_hess(tau, y, st)
            try:
                step = np.linalg.solve(H + 1e-12 * np.eye(self.nvars), -g)
            except np.linalg.LinAlgError:
                return y, st, steps, False
            decrement = float(-g @ step)
            steps += 1
            alpha = 1.0
            f0 = self.value(tau, y, st)
            accepted = False
            while alpha > 1e-12:
                y_new = y + alpha * step
                st_new = self.state(y_new)
                if st_new is not None and self.value(tau, y_new, st_new) <= f0 - 0.01 * alpha * decrement:
                    y, st = y_new, st_new
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                return y, st, steps, False
            if decrement * 0.5 < newton_tol:
                break
        return y, st, steps, True


def _problem_arrays(problem: LmiProblem, extra_var: bool = False):
    """Raw coefficient arrays for the barrier; extra_var appends one
    variable (the phase-I slack) coupled as -I to every block and +1 to
    every inequality."""
    n = problem.nvar
    width = n + 1 if extra_var else n
    blocks = []
    for _, lm in problem.psd_blocks:
        idx = np.fromiter(lm.coefs.keys(), dtype=int, count=len(lm.coefs))
        F = (np.stack([lm.coefs[i] for i in idx]) if idx.size
             else np.zeros((0, lm.dim, lm.dim), dtype=complex))
        if extra_var:
            idx = np.concatenate([idx, [n]]).astype(int)
            F = np.concatenate([F, [-np.eye(lm.dim, dtype=complex)]])
        blocks.append((idx, F, lm.const))
    b = np.array([c for _, c, _ in problem.ineqs])
    rows = np.zeros((len(problem.ineqs), width))
    for r, (_, _, coefs) in enumerate(problem.ineqs):
        for i, c in coefs.items():
            rows[r, i] = c
        if extra_var:
            rows[r, n] = 1.0
    return blocks, rows, b


def _witness_report(problem, x, status, slack, iters):
    witness = {name: var.value(x) for name, var in problem.matrix_vars.items()}
    witness.update({name: float(x[i]) for name, i in problem.scalar_vars.items()})
    return FeasibilityReport(
        status=status, slack=slack, x=x, witness=witness,
        max_violation=problem.max_violation(x), barrier_iterations=iters)


def solve_feasibility(problem: LmiProblem, feas_tol: float = 1e-7,
                      x0: np.ndarray | None = None,
                      max_iter: int = 200) -> FeasibilityReport:
    """Phase-I barrier feasibility check. x0 optionally warm-starts the
    variable vector (the slack is always re-initialized)."""
    if not (0 < feas_tol <= 1e-3):
        raise ValueError("feas_tol must be in (0, 1e-3]")
    n = problem.nvar
    blocks, A, b = _problem_arrays(problem, extra_var=True)
    cost = np.zeros(n + 1)
    cost[n] = -1.0    # maximize the slack
    bar = _Barrier(blocks, A, b, cost)

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.zeros(n + 1)
    y[:n] = x
    # strictly interior start: s below every current margin
    margins = []
    for idx, F, C in blocks:
        S = C + np.tensordot(y[idx[:-1]], F[:-1], axes=1) if idx.size > 1 else C
        margins.append(float(np.min(np.linalg.eigvalsh(S))))
    if A.size:
        margins.extend((-(b + A[:, :n] @ x)).tolist())
    spread = max(1e-3, 0.1 * (max(margins) - min(margins))) if margins else 1.0
    y[n] = (min(margins) - spread) if margins else -1.0

    st = bar.state(y)
    if st is None:
        raise RuntimeError("phase-I initialization failed to be interior")

    total_newton = 0
    tau = 10.0
    gap_target = 0.25 * feas_tol
    status = None
    while True:
        y, st, steps, ok = bar.center(tau, y, st)
        total_newton += steps
        s_cur = float(y[n])
        if not ok:
            return FeasibilityReport(
                status="marginal", slack=s_cur,
                diagnostics="newton step failure",
                barrier_iterations=total_newton)
        if total_newton > max_iter * 10:
            return FeasibilityReport(
                status="marginal", slack=s_cur,
                diagnostics="iteration cap exceeded",
                barrier_iterations=total_newton)
        # s* >= s_cur always; s* <= s_cur + m/tau (up to centering error)
        if s_cur > feas_tol:
            status = "strictly_feasible"
            break
        if s_cur + 2.0 * bar.m / tau <= feas_tol:
            status = "infeasible"
            break
        if bar.m / tau < gap_target:
            status = "marginal"
            break
        tau *= 30.0

    if status == "infeasible":
        return FeasibilityReport(status=status, slack=float(y[n]),
                                 barrier_iterations=total_newton)
    return _witness_report(problem, y[:n], status, float(y[n]), total_newton)


def minimize_linear(problem: LmiProblem, cost: np.ndarray, x0: np.ndarray,
                    gap_tol: float = 1e-9, max_iter: int = 400) -> np.ndarray:
    """Central-path minimization of cost@x over the problem's feasible
    set, started from a strictly interior x0. Used to polish feasibility
    witnesses (e.g. toward the minimum-power, rank-1 point)."""
    blocks, A, b = _problem_arrays(problem, extra_var=False)
    bar = _Barrier(blocks, A, b, np.asarray(cost, dtype=float))
    y = np.asarray(x0, dtype=float).copy()
    st = bar.state(y)
    if st is None:
        raise ValueError("x0 is not strictly interior")
    tau = 1.0
    total = 0
    while bar.m / tau >= gap_tol:
        y, st, steps, ok = bar.center(tau, y, st)
        total += steps
        if not ok or total > max_iter * 10:
            break
        tau *= 30.0
    y, st, _, _ = bar.center(tau, y, st)
    return y


class InfeasibleAtLowerBound(Exception):
    """check(lo) failed; the caller's program has an empty feasible set."""


def bisect_max(check, lo: float, hi: float, tol: float,
               refine_tol: float | None = None):
    """Largest v in [lo, hi] with check(v) feasible, to within tol.

    check(v) returns a FeasibilityReport (or anything with .feasible and
    .x). Assumes feasibility is monotone decreasing in v. refine_tol
    optionally continues shrinking the bracket past tol purely to sharpen
    the returned witness.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if hi < lo:
        raise ValueError("need hi >= lo")
    rep = check(lo)
    if not rep.feasible:
        raise InfeasibleAtLowerBound(f"infeasible at lower bound {lo}")
    best_v, best_rep = lo, rep

    rep_hi = check(hi)
    if rep_hi.feasible:
        return hi, rep_hi

    target = refine_tol if refine_tol is not None else tol
    while hi - best_v > target:
        mid = 0.5 * (best_v + hi)
        rep = check(mid)
        if rep.feasible:
            best_v, best_rep = mid, rep
        else:
            hi = mid
    return best_v, best_rep
