"""Command-line front end: sweeps, figure reproduction, oracles, checks.

Every delimited output starts with a '#'-prefixed provenance header
(scenario hash, command line, solver settings, timestamp, version); the
body below it is plain RFC-4180 CSV so the files load directly into
gnuplot / pandas. Figure commands additionally render a PNG next to the
CSV data.

Exit codes: 0 success, 1 solver/check failure, 2 input error.
"""

from __future__ import annotations

import concurrent.futures
import csv
import datetime
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__, oracle, perfect, robust
from .alphabet import Alphabet, MiEvaluator, named_alphabet
from .channel import UncertaintyRadii, load_scenario
from .oracle import OracleConfig, mi_monte_carlo, sample_error_ball
from .sdp import solve_feasibility

EXIT_SOLVER = 1
EXIT_INPUT = 2


def _fail_input(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_INPUT)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


@dataclass
class RunManifest:
    command: str
    flags: dict
    scenario_path: str | None
    scenario_sha256: str | None
    solver: dict

    def header_lines(self):
        ts = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        lines = [
            f"# relaysec {__version__}",
            f"# command: {self.command}",
            f"# flags: {json.dumps(self.flags, sort_keys=True)}",
            f"# solver: {json.dumps(self.solver, sort_keys=True)}",
            f"# timestamp: {ts}",
        ]
        if self.scenario_path is not None:
            lines.insert(2, f"# scenario: {self.scenario_path} sha256={self.scenario_sha256}")
        return lines

    def as_dict(self):
        ts = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        return {
            "version": __version__,
            "command": self.command,
            "flags": self.flags,
            "scenario": self.scenario_path,
            "scenario_sha256": self.scenario_sha256,
            "solver": self.solver,
            "timestamp": ts,
        }


def _write_csv(path: Path, manifest: RunManifest, columns, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        for line in manifest.header_lines():
            f.write(line + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


class _Ctx:
    """Shared command state resolved from the common flags."""

    def __init__(self, scenario, out, seed, threads, quad_order, bisect_tol,
                 command, flags):
        self.scenario_path = scenario
        self.out = Path(out) if out else Path(".")
        self.seed = seed
        self.threads = max(1, threads)
        self.scenario = None
        self.sha = None
        if scenario is not None:
            try:
                self.scenario = load_scenario(scenario)
            except (OSError, ValueError) as exc:
                _fail_input(exc)
            self.sha = hashlib.sha256(Path(scenario).read_bytes()).hexdigest()
        s = self.scenario.solver if self.scenario else None
        self.quad_order = quad_order or (s.quad_order if s else 64)
        self.bisect_tol_rel = bisect_tol or (s.bisect_tol_rel if s else 1e-6)
        self.mi = None
        if self.scenario is not None:
            self.mi = MiEvaluator(self.scenario.alphabet,
                                  quadrature_order=self.quad_order)
        self.manifest = RunManifest(
            command=command, flags=flags,
            scenario_path=scenario,
            scenario_sha256=self.sha,
            solver={"quad_order": self.quad_order,
                    "bisect_tol_rel": self.bisect_tol_rel,
                    "seed": seed})

    def require_scenario(self):
        if self.scenario is None:
            _fail_input("this command requires --scenario")
        return self.scenario

    def subsets(self):
        """Eavesdropper index blocks: the scenario's explicit
        `eavesdropper_subsets` list, or the full set."""
        doc = json.loads(Path(self.scenario_path).read_text())
        subs = doc.get("eavesdropper_subsets")
        J = self.scenario.channels.J
        if subs is None:
            return [list(range(J))]
        subs = [list(map(int, s)) for s in subs]
        for s in subs:
            if not s or any(j < 0 or j >= J for j in s):
                _fail_input(f"eavesdropper subset {s} out of range for J={J}")
        return subs

    def pmap(self, fn, items):
        if self.threads == 1 or len(items) <= 1:
            return [fn(it) for it in items]
        with concurrent.futures.ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))


def common_options(f):
    opts = [
        click.option("--scenario", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="Scenario JSON file."),
        click.option("--out", type=click.Path(file_okay=False), default=None,
                     help="Output directory (default: current directory)."),
        click.option("--seed", type=int, default=12345, show_default=True),
        click.option("--threads", type=int, default=1, show_default=True),
        click.option("--quad-order", type=int, default=None,
                     help="Gauss-Hermite order per axis (default: scenario)."),
        click.option("--bisect-tol", type=float, default=None,
                     help="Relative bisection tolerance (default: scenario)."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _ctx(command, kwargs, **extra_flags):
    flags = {k: v for k, v in {**kwargs, **extra_flags}.items()
             if not isinstance(v, (bytes,))}
    return _Ctx(kwargs.get("scenario"), kwargs.get("out"), kwargs.get("seed"),
                kwargs.get("threads", 1), kwargs.get("quad_order"),
                kwargs.get("bisect_tol"), command, flags)


@click.group()
@click.version_option(__version__)
def main():
    """Secrecy-rate computation for AN-assisted DF relay beamforming."""


# ---------------------------------------------------------------- mi-table


def _parse_grid(spec: str) -> np.ndarray:
    """Grid spec: 'lo:hi:count', 'log:lo:hi:count', or comma list."""
    try:
        if ":" in spec:
            parts = spec.split(":")
            if parts[0] == "log":
                lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
                if lo <= 0:
                    raise ValueError("log grid requires lo > 0")
                return np.logspace(math.log10(lo), math.log10(hi), n)
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            return np.linspace(lo, hi, n)
        return np.array([float(s) for s in spec.split(",")])
    except (IndexError, ValueError) as exc:
        _fail_input(f"bad grid spec {spec!r}: {exc}")


@main.command("mi-table")
@common_options
@click.option("--alphabet", "alphabet_spec", default="BPSK", show_default=True,
              help="Alphabet name or JSON list of [re,im] points.")
@click.option("--rho-grid", default="0:20:201", show_default=True,
              help="SNR grid: lo:hi:count, log:lo:hi:count, or comma list.")
def mi_table(alphabet_spec, rho_grid, **kwargs):
    """Tabulate the per-symbol mutual information I(rho) in bits."""
    ctx = _ctx("mi-table", kwargs, alphabet=alphabet_spec, rho_grid=rho_grid)
    try:
        if alphabet_spec.strip().startswith("["):
            pts = [complex(p[0], p[1]) for p in json.loads(alphabet_spec)]
            alphabet = Alphabet.from_points(pts, name="custom")
        else:
            alphabet = named_alphabet(alphabet_spec)
    except (ValueError, json.JSONDecodeError, TypeError, IndexError) as exc:
        _fail_input(f"alphabet: {exc}")
    rhos = _parse_grid(rho_grid)
    if np.any(rhos < 0):
        _fail_input("rho grid must be nonnegative")
    mi = MiEvaluator(alphabet, quadrature_order=ctx.quad_order)
    rows = [(float(r), mi.mutual_information(float(r))) for r in rhos]
    out = ctx.out / "mi_table.csv"
    _write_csv(out, ctx.manifest, ["rho", "I_bits"], rows)
    click.echo(f"wrote {out}")


# ----------------------------------------------------------- perfect-sweep


def _an_states(an: str):
    return {"on": [True], "off": [False], "both": [True, False]}[an]


@main.command("perfect-sweep")
@common_options
@click.option("--an", type=click.Choice(["on", "off", "both"]), default="on",
              show_default=True)
@click.option("--L", "L", type=int, default=None,
              help="Grid points (default: scenario grid_L).")
def perfect_sweep(an, L, **kwargs):
    """Secrecy rate vs R0 under perfect CSI."""
    ctx = _ctx("perfect-sweep", kwargs, an=an, L=L)
    sc = ctx.require_scenario()
    rows = []
    for subset in ctx.subsets():
        for use_an in _an_states(an):
            res = perfect.sweep_R0(sc, ctx.mi, L=L, use_an=use_an,
                                   eavesdroppers=subset)
            for o in res.outcomes:
                rows.append((o.R0, o.secrecy_rate, o.t_max, o.rank_ratio,
                             o.power_used, o.status))
    out = ctx.out / "perfect_sweep.csv"
    _write_csv(out, ctx.manifest,
               ["R0", "Rs", "t_max", "rank_ratio", "power_used", "status"],
               rows)
    click.echo(f"wrote {out}")


# ------------------------------------------------------------ robust-sweep


@main.command("robust-sweep")
@common_options
@click.option("--R0", "R0", type=float, default=0.0810, show_default=True)
@click.option("--eps-grid", default="0,0.005,0.01,0.015,0.02,0.025,0.03,0.035,0.04,0.045,0.05",
              show_default=True, help="Comma list of error radii.")
@click.option("--an", type=click.Choice(["on", "off"]), default="on",
              show_default=True)
def robust_sweep(R0, eps_grid, an, **kwargs):
    """Secrecy-rate lower bound vs CSI error radius at fixed R0."""
    ctx = _ctx("robust-sweep", kwargs, R0=R0, eps_grid=eps_grid, an=an)
    sc = ctx.require_scenario()
    eps = sorted(_parse_grid(eps_grid).tolist())
    if any(e < 0 for e in eps):
        _fail_input("error radii must be nonnegative")
    rows = []
    for subset in ctx.subsets():
        pts = robust.sweep_eps(sc, ctx.mi, R0, eps, use_an=(an == "on"),
                               eavesdroppers=subset)
        for e, o in pts:
            rows.append((e, len(subset), o.secrecy_rate, o.r_max,
                         o.rank_ratio, o.status))
    out = ctx.out / "robust_sweep.csv"
    _write_csv(out, ctx.manifest,
               ["eps", "J", "Rs_lower", "r_max", "rank_ratio", "status"],
               rows)
    click.echo(f"wrote {out}")


# ------------------------------------------------------------------- fig2


def _render_curves(path: Path, curves, xlabel, ylabel):
    """curves: list of (label, x array, y array)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for label, x, y in curves:
        ax.plot(x, y, label=label, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


@main.command("fig2")
@common_options
@click.option("--L", "L", type=int, default=None,
              help="Grid points per curve (default: scenario grid_L).")
def fig2(L, **kwargs):
    """Secrecy rate vs R0 for J = 1..J_max with and without AN."""
    ctx = _ctx("fig2", kwargs, L=L)
    sc = ctx.require_scenario()
    J = sc.channels.J
    tasks = [(j, use_an) for j in range(1, J + 1) for use_an in (True, False)]

    def run(task):
        j, use_an = task
        return perfect.sweep_R0(sc, ctx.mi, L=L, use_an=use_an,
                                eavesdroppers=list(range(j)))

    results = ctx.pmap(run, tasks)
    curves = []
    summary = {}
    for (j, use_an), res in zip(tasks, results):
        label = f"J={j}_AN-{'on' if use_an else 'off'}"
        rows = [(o.R0, o.secrecy_rate) for o in res.outcomes]
        _write_csv(ctx.out / f"fig2_{label}.csv", ctx.manifest,
                   ["R0", "Rs"], rows)
        curves.append((label, [r[0] for r in rows], [r[1] for r in rows]))
        summary[label] = {
            "argmax_R0": res.best_R0,
            "max_Rs": res.best_rate,
            "R_D": res.R_D,
            "statuses": sorted({o.status for o in res.outcomes}),
        }
    _write_json(ctx.out / "fig2_summary.json",
                {"manifest": ctx.manifest.as_dict(), "curves": summary})
    _render_curves(ctx.out / "fig2.png", curves, "R0 (bits)", "Rs (bits)")
    click.echo(f"wrote fig2_*.csv, fig2_summary.json, fig2.png in {ctx.out}")


# ------------------------------------------------------------------- fig3


@main.command("fig3")
@common_options
@click.option("--R0", "R0", type=float, default=0.0810, show_default=True)
@click.option("--eps-grid", default="0,0.005,0.01,0.015,0.02,0.025,0.03,0.035,0.04,0.045,0.05",
              show_default=True)
def fig3(R0, eps_grid, **kwargs):
    """Secrecy-rate lower bound vs CSI error radius for J = 1..J_max."""
    ctx = _ctx("fig3", kwargs, R0=R0, eps_grid=eps_grid)
    sc = ctx.require_scenario()
    eps = _parse_grid(eps_grid).tolist()
    if any(e < 0 for e in eps):
        _fail_input("error radii must be nonnegative")
    if eps != sorted(eps):
        click.echo("warning: eps grid was unsorted; sorting", err=True)
        eps = sorted(eps)
    J = sc.channels.J

    def run(j):
        return robust.sweep_eps(sc, ctx.mi, R0, eps,
                                eavesdroppers=list(range(j)))

    results = ctx.pmap(run, list(range(1, J + 1)))
    rows = []
    curves = []
    summary = {}
    for j, pts in zip(range(1, J + 1), results):
        rates = [o.secrecy_rate for _, o in pts]
        rows += [(e, j, o.secrecy_rate) for e, o in pts]
        curves.append((f"J={j}", eps, rates))
        summary[f"J={j}"] = {
            "Rs_at_eps0": rates[0],
            "non_increasing_in_eps": all(
                rates[i + 1] <= rates[i] + 1e-9 for i in range(len(rates) - 1)),
            "statuses": sorted({o.status for _, o in pts}),
        }
    _write_csv(ctx.out / "fig3.csv", ctx.manifest,
               ["eps", "J", "Rs_lower"], rows)
    _write_json(ctx.out / "fig3_summary.json",
                {"manifest": ctx.manifest.as_dict(), "R0": R0,
                 "curves": summary})
    _render_curves(ctx.out / "fig3.png", curves,
                   "CSI error radius", "Rs lower bound (bits)")
    click.echo(f"wrote fig3.csv, fig3_summary.json, fig3.png in {ctx.out}")


# ------------------------------------------------------------ oracle-check


@main.command("oracle-check")
@common_options
@click.option("--mode", type=click.Choice(["mi", "search", "worstcase"]),
              required=True)
@click.option("--R0", "R0", type=float, default=0.0810, show_default=True)
@click.option("--eps", type=float, default=0.02, show_default=True)
def oracle_check(mode, R0, eps, **kwargs):
    """Cross-check solver outputs against brute-force oracles."""
    ctx = _ctx("oracle-check", kwargs, mode=mode, R0=R0, eps=eps)
    cfg = OracleConfig(seed=ctx.seed)
    doc = {"manifest": ctx.manifest.as_dict(), "mode": mode}
    ok = True

    if mode == "mi":
        sc = ctx.scenario
        alphabet = sc.alphabet if sc else named_alphabet("BPSK")
        mi = MiEvaluator(alphabet, quadrature_order=ctx.quad_order)
        points = []
        for rho in (0.5, 1.0, 2.0, 5.0, 10.0):
            est, se = mi_monte_carlo(alphabet, rho, cfg)
            quad = mi.mutual_information(rho)
            z = (quad - est) / se
            points.append({"rho": rho, "quadrature": quad,
                           "monte_carlo": est, "std_err": se, "z": z})
            ok = ok and abs(z) <= 3.0
        doc["points"] = points
    elif mode == "search":
        sc = ctx.require_scenario()
        inst = perfect.make_instance(sc, ctx.mi, R0)
        sdp_out = perfect.solve_rate(inst, ctx.mi, R0)
        found = oracle.beamformer_search(inst, cfg)
        doc["t_sdp"] = sdp_out.t_max
        if found is None:
            doc["t_search"] = None
            ok = sdp_out.status != perfect.STATUS_OK
        else:
            t_search = found[0]
            doc["t_search"] = t_search
            doc["gap"] = sdp_out.t_max - t_search
            ok = (sdp_out.t_max >= t_search - 1e-3
                  and sdp_out.t_max - t_search <= 0.01 * max(sdp_out.t_max, 1e-12))
    else:  # worstcase
        sc = ctx.require_scenario()
        radii = UncertaintyRadii.uniform(eps, sc.channels.J)
        inst = robust.make_instance(sc, ctx.mi, R0, radii=radii)
        out = robust.solve_robust_rate(inst, ctx.mi, R0)
        doc["r_max"] = out.r_max
        doc["status"] = out.status
        checks = []
        rng = np.random.default_rng(ctx.seed)
        for name, fn, center, radius, bound, sense in robust.soundness_checks(out, inst):
            draws = sample_error_ball(rng, center.size, radius,
                                      cfg.error_samples)
            vals = np.array([fn(center + e) for e in draws])
            viol = (bound - vals.min()) if sense == ">=" else (vals.max() - bound)
            checks.append({"name": name, "bound": bound, "sense": sense,
                           "violation": float(viol)})
            ok = ok and viol <= 1e-6
        doc["checks"] = checks

    doc["ok"] = ok
    out = ctx.out / f"oracle_{mode}.json"
    _write_json(out, doc)
    click.echo(f"wrote {out}")
    if not ok:
        sys.exit(EXIT_SOLVER)


# --------------------------------------------------------------- validate


@main.command("validate")
@common_options
@click.option("--R0", "R0", type=float, default=0.0810, show_default=True)
def validate(R0, **kwargs):
    """Run the invariant suite against a scenario; nonzero exit on failure."""
    ctx = _ctx("validate", kwargs, R0=R0)
    sc = ctx.require_scenario()
    mi = ctx.mi
    failures = []
    notes = []

    def check(name, cond, detail=""):
        if not cond:
            failures.append(f"{name}: {detail}" if detail else name)
        click.echo(f"  [{'ok' if cond else 'FAIL'}] {name}" +
                   (f" ({detail})" if detail and not cond else ""))

    click.echo("mutual information:")
    check("I(0) = 0", mi.mutual_information(0.0) == 0.0)
    grid = np.logspace(-3, 3, 100)
    vals = [mi.mutual_information(float(r)) for r in grid]
    check("monotone in rho",
          all(vals[i] <= vals[i + 1] + 1e-9 for i in range(len(vals) - 1)))
    max_bits = math.log2(sc.alphabet.M)
    check("0 <= I <= log2 M", all(-1e-12 <= v <= max_bits + 1e-9 for v in vals))
    ys = np.linspace(0.0, 0.99 * max_bits, 25)
    check("inverse round trip", all(
        abs(mi.mutual_information(mi.inverse_mi(float(y))) - y) <= 1e-8
        for y in ys))

    click.echo("perfect-CSI solve:")
    inst = perfect.make_instance(sc, mi, R0)
    out = perfect.solve_rate(inst, mi, R0)
    check("solver status ok", out.status == perfect.STATUS_OK, out.status)
    if out.status == perfect.STATUS_OK:
        check("rank-1 covariance", out.rank_ratio <= 1e-6,
              f"rank_ratio={out.rank_ratio:.2e}")
        check("power within budget",
              out.power_used <= inst.Pr_max * (1 + 1e-6) + 1e-9)
        kkt = perfect.verify_kkt(out, inst)
        check("destination constraint active",
              abs(kkt.dest_rate_residual) <= 1e-5,
              f"residual={kkt.dest_rate_residual:.2e}")
        rep = solve_feasibility(perfect.build_feasibility(inst, out.t_max))
        check("witness replay", rep.feasible and rep.max_violation <= 1e-6)
        found = oracle.beamformer_search(
            inst, OracleConfig(search_samples=20_000, seed=ctx.seed))
        if found is not None:
            check("oracle dominance", out.t_max >= found[0] - 1e-3,
                  f"sdp={out.t_max:.6f} search={found[0]:.6f}")

    click.echo("robust solve:")
    radii = (sc.radii if not sc.radii.is_zero()
             else UncertaintyRadii.uniform(0.02, sc.channels.J))
    rinst = robust.make_instance(sc, mi, R0, radii=radii)
    if rinst.bounds.c == 0.0:
        notes.append("relay_link_unusable")
        click.echo("  [note] relay_link_unusable (error ball covers g)")
    rout = robust.solve_robust_rate(rinst, mi, R0)
    check("robust status ok", rout.status == perfect.STATUS_OK, rout.status)
    if rout.status == perfect.STATUS_OK:
        check("robust rank-1", rout.rank_ratio <= 1e-6,
              f"rank_ratio={rout.rank_ratio:.2e}")
        check("robust lower-bounds perfect",
              rout.r_max <= out.t_max + 2e-6 * max(inst.bounds.c, 1.0))
        rng = np.random.default_rng(ctx.seed)
        worst = 0.0
        for name, fn, center, radius, bound, sense in robust.soundness_checks(rout, rinst):
            draws = sample_error_ball(rng, center.size, radius, 10_000)
            v = np.array([fn(center + e) for e in draws])
            viol = (bound - v.min()) if sense == ">=" else (v.max() - bound)
            worst = max(worst, float(viol))
        check("error-ball soundness", worst <= 1e-6, f"worst={worst:.2e}")

    doc = {"manifest": ctx.manifest.as_dict(), "failures": failures,
           "notes": notes, "ok": not failures}
    _write_json(ctx.out / "validate.json", doc)
    if failures:
        click.echo(f"{len(failures)} check(s) failed", err=True)
        sys.exit(EXIT_SOLVER)
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
