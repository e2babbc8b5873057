"""Scenario description: channel gains, power budgets, CSI uncertainty.

Holds the per-link scalar SNR bounds used by both optimization paths:
  a     worst-case source->destination direct SNR
  b_j   best-case source->eavesdropper-j direct SNR
  c     worst-case source->relay SNR (decodability ceiling)
  a_max best-case source->destination direct SNR
Under perfect CSI the worst and best cases coincide.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alphabet import Alphabet, named_alphabet


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise ValueError(f"cannot convert nonpositive value {x} to dB")
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class ChannelSet:
    """All complex gains of the two-hop network (truth or CSI estimates)."""

    g: np.ndarray       # (N,) source -> relay
    h0: complex         # source -> destination
    h: np.ndarray       # (N,) relay -> destination
    z0: np.ndarray      # (J,) source -> eavesdropper j
    z: np.ndarray       # (J, N) relay -> eavesdropper j

    def __post_init__(self):
        g = np.asarray(self.g, dtype=complex)
        h = np.asarray(self.h, dtype=complex)
        z0 = np.asarray(self.z0, dtype=complex)
        z = np.asarray(self.z, dtype=complex)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "z0", z0)
        object.__setattr__(self, "z", np.atleast_2d(z))
        if g.ndim != 1 or h.ndim != 1 or g.size != h.size:
            raise ValueError("g and h must be vectors of the same length N")
        if self.z.shape != (z0.size, g.size):
            raise ValueError(
                f"z has shape {self.z.shape}, expected ({z0.size}, {g.size})"
            )
        if z0.size < 1:
            raise ValueError("at least one eavesdropper is required")
        for name, arr in (("g", g), ("h", h), ("z0", z0), ("z", z)):
            if not np.all(np.isfinite(arr.view(float))):
                raise ValueError(f"channel {name} contains non-finite entries")
        if not np.isfinite(self.h0):
            raise ValueError("channel h0 is non-finite")

    @property
    def N(self) -> int:
        return self.g.size

    @property
    def J(self) -> int:
        return self.z0.size


@dataclass(frozen=True)
class PowerConfig:
    Ps: float        # operating source power (linear)
    Ps_max: float    # source budget
    Pr_max: float    # relay budget
    N0: float        # noise power

    def __post_init__(self):
        if not (0 <= self.Ps <= self.Ps_max):
            raise ValueError(f"need 0 <= Ps <= Ps_max, got Ps={self.Ps}, Ps_max={self.Ps_max}")
        if self.Pr_max <= 0:
            raise ValueError("Pr_max must be positive")
        if self.N0 <= 0:
            raise ValueError("N0 must be positive")


@dataclass(frozen=True)
class UncertaintyRadii:
    eps_g: float = 0.0
    eps_h0: float = 0.0
    eps_h: float = 0.0
    eps_z0: tuple = ()
    eps_z: tuple = ()

    def __post_init__(self):
        vals = [self.eps_g, self.eps_h0, self.eps_h, *self.eps_z0, *self.eps_z]
        if any(v < 0 for v in vals):
            raise ValueError("uncertainty radii must be nonnegative")

    @classmethod
    def uniform(cls, eps: float, J: int) -> "UncertaintyRadii":
        return cls(eps, eps, eps, (eps,) * J, (eps,) * J)

    @classmethod
    def zero(cls, J: int) -> "UncertaintyRadii":
        return cls.uniform(0.0, J)

    def is_zero(self) -> bool:
        return all(
            v == 0.0
            for v in (self.eps_g, self.eps_h0, self.eps_h, *self.eps_z0, *self.eps_z)
        )


@dataclass(frozen=True)
class ScalarBounds:
    a: float
    b: tuple
    c: float
    a_max: float


def scalar_bounds_perfect(ch: ChannelSet, pw: PowerConfig) -> ScalarBounds:
    """Direct-link and relay-link SNR scalars under perfect CSI."""
    a = pw.Ps * abs(ch.h0) ** 2 / pw.N0
    b = tuple(pw.Ps * abs(z) ** 2 / pw.N0 for z in ch.z0)
    c = pw.Ps * float(np.linalg.norm(ch.g)) ** 2 / pw.N0
    return ScalarBounds(a=a, b=b, c=c, a_max=a)


def scalar_bounds_robust(ch: ChannelSet, radii: UncertaintyRadii,
                         pw: PowerConfig) -> ScalarBounds:
    """Worst/best-case SNR scalars when the gains are norm-bounded
    estimates: deflate the legitimate links, inflate the eavesdropper
    links."""
    if len(radii.eps_z0) != ch.J or len(radii.eps_z) != ch.J:
        raise ValueError("per-eavesdropper radii lists must have length J")
    h0_abs = abs(ch.h0)
    a = pw.Ps * (h0_abs - radii.eps_h0) ** 2 / pw.N0 if h0_abs > radii.eps_h0 else 0.0
    b = tuple(
        pw.Ps * (abs(z) + e) ** 2 / pw.N0 for z, e in zip(ch.z0, radii.eps_z0)
    )
    g_norm = float(np.linalg.norm(ch.g))
    c = pw.Ps * (g_norm - radii.eps_g) ** 2 / pw.N0 if g_norm > radii.eps_g else 0.0
    a_max = pw.Ps * (h0_abs + radii.eps_h0) ** 2 / pw.N0
    return ScalarBounds(a=a, b=b, c=c, a_max=a_max)


@dataclass(frozen=True)
class SolverSettings:
    bisect_tol_rel: float = 1e-6   # relative to c, applied on the SNR axis
    feas_tol: float = 1e-7
    grid_L: int = 1000
    grid_K: int = 1
    quad_order: int = 64

    def __post_init__(self):
        if self.bisect_tol_rel <= 0 or not (0 < self.feas_tol <= 1e-3):
            raise ValueError("invalid solver tolerances")
        if self.grid_L < 10 or self.grid_K < 1:
            raise ValueError("grid_L must be >= 10 and grid_K >= 1")


@dataclass(frozen=True)
class Scenario:
    channels: ChannelSet
    power: PowerConfig
    radii: UncertaintyRadii
    alphabet: Alphabet
    solver: SolverSettings = field(default_factory=SolverSettings)


def _as_complex(val, where: str) -> complex:
    if (not isinstance(val, (list, tuple))) or len(val) != 2:
        raise ValueError(f"{where}: complex values must be [re, im] pairs, got {val!r}")
    return complex(float(val[0]), float(val[1]))


def _as_cvector(val, n, where: str) -> np.ndarray:
    if not isinstance(val, (list, tuple)) or len(val) != n:
        raise ValueError(f"{where}: expected a list of {n} [re, im] pairs")
    return np.array([_as_complex(v, f"{where}[{i}]") for i, v in enumerate(val)])


def _power(doc: dict, key: str, errors: list) -> float:
    """Power entry: '<key>_dB' (converted) or '<key>_linear'."""
    if f"{key}_dB" in doc:
        return db_to_linear(float(doc[f"{key}_dB"]))
    if f"{key}_linear" in doc:
        return float(doc[f"{key}_linear"])
    errors.append(f"missing power field {key}_dB (or {key}_linear)")
    return math.nan


def scenario_from_dict(doc: dict) -> Scenario:
    errors: list[str] = []
    try:
        N = int(doc["N"])
        J = int(doc["J"])
    except KeyError as exc:
        raise ValueError(f"scenario missing required field {exc}")
    if J < 1:
        raise ValueError("scenario must define at least one eavesdropper (J >= 1)")

    channels = None
    try:
        channels = ChannelSet(
            g=_as_cvector(doc["g"], N, "g"),
            h0=_as_complex(doc["h0"], "h0"),
            h=_as_cvector(doc["h"], N, "h"),
            z0=np.array([_as_complex(v, f"z0[{j}]") for j, v in enumerate(doc["z0"])]),
            z=np.array([_as_cvector(row, N, f"z[{j}]") for j, row in enumerate(doc["z"])]),
        )
        if channels.J != J:
            errors.append(f"z0/z define {channels.J} eavesdroppers but J={J}")
    except (KeyError, ValueError) as exc:
        errors.append(str(exc))

    Ps_max = _power(doc, "Ps_max", errors) if ("Ps_max_dB" in doc or "Ps_max_linear" in doc) else None
    Ps = _power(doc, "Ps", errors)
    if Ps_max is None:
        Ps_max = Ps
    Pr_max = _power(doc, "Pr_max", errors)
    N0 = float(doc.get("N0", 1.0))

    power = None
    try:
        power = PowerConfig(Ps=Ps, Ps_max=Ps_max, Pr_max=Pr_max, N0=N0)
    except ValueError as exc:
        errors.append(str(exc))

    radii = UncertaintyRadii.zero(J)
    try:
        spec = doc.get("radii")
        if spec is not None:
            if "eps_all" in spec:
                radii = UncertaintyRadii.uniform(float(spec["eps_all"]), J)
            else:
                radii = UncertaintyRadii(
                    eps_g=float(spec.get("eps_g", 0.0)),
                    eps_h0=float(spec.get("eps_h0", 0.0)),
                    eps_h=float(spec.get("eps_h", 0.0)),
                    eps_z0=tuple(spec.get("eps_z0", [0.0] * J)),
                    eps_z=tuple(spec.get("eps_z", [0.0] * J)),
                )
            if len(radii.eps_z0) != J or len(radii.eps_z) != J:
                errors.append("radii.eps_z0 / radii.eps_z must have length J")
    except (TypeError, ValueError) as exc:
        errors.append(f"radii: {exc}")

    alphabet = None
    try:
        spec = doc.get("alphabet", "BPSK")
        if isinstance(spec, str):
            alphabet = named_alphabet(spec)
        else:
            alphabet = Alphabet.from_points(
                [complex(p[0], p[1]) for p in spec], name="custom"
            )
    except ValueError as exc:
        errors.append(f"alphabet: {exc}")

    solver = SolverSettings()
    try:
        s = doc.get("solver", {})
        solver = SolverSettings(
            bisect_tol_rel=float(s.get("bisect_tol", 1e-6)),
            feas_tol=float(s.get("feas_tol", 1e-7)),
            grid_L=int(s.get("grid_L", 1000)),
            grid_K=int(s.get("grid_K", 1)),
            quad_order=int(s.get("quad_order", 64)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"solver: {exc}")

    if errors:
        raise ValueError("invalid scenario: " + "; ".join(errors))
    return Scenario(channels=channels, power=power, radii=radii,
                    alphabet=alphabet, solver=solver)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}")
    return scenario_from_dict(doc)
