"""Finite-alphabet mutual information over the complex AWGN channel.

The symbol-wise mutual information I(rho) of a unit-power, zero-mean
M-point constellation at SNR rho is evaluated by tensor-product
Gauss-Hermite quadrature (one grid per real axis, centered per symbol).
I is strictly increasing and concave in rho, which makes its inverse
well defined below the alphabet entropy log2(M).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

LN2 = math.log(2.0)

# grid beyond which I(rho) is numerically indistinguishable from log2(M)
_RHO_CEILING = 1e12


@dataclass(frozen=True)
class Alphabet:
    """Zero-mean, unit-power complex constellation."""

    symbols: tuple[complex, ...]
    name: str = "custom"

    def __post_init__(self):
        pts = np.asarray(self.symbols, dtype=complex)
        if pts.size < 2:
            raise ValueError("alphabet needs at least 2 symbols")
        if not np.all(np.isfinite(pts.view(float))):
            raise ValueError("alphabet symbols must be finite")
        if abs(np.mean(pts)) > 1e-12:
            raise ValueError(f"alphabet mean {np.mean(pts):.3e} is not zero")
        if abs(np.mean(np.abs(pts) ** 2) - 1.0) > 1e-12:
            raise ValueError("alphabet average power is not 1")
        d = np.abs(pts[:, None] - pts[None, :])
        if np.min(d + np.eye(pts.size)) == 0.0:
            raise ValueError("alphabet symbols must be distinct")

    @property
    def M(self) -> int:
        return len(self.symbols)

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=complex)

    @property
    def max_bits(self) -> float:
        return math.log2(self.M)

    @classmethod
    def from_points(cls, points, name: str = "custom") -> "Alphabet":
        """Build an alphabet from raw points, re-normalizing only if the
        input is within 1e-9 of zero-mean / unit-power compliance."""
        pts = np.asarray(points, dtype=complex)
        if pts.size < 2:
            raise ValueError("alphabet needs at least 2 symbols")
        mean = np.mean(pts)
        if abs(mean) > 1e-9:
            raise ValueError(f"alphabet mean {mean:.3e} exceeds 1e-9 tolerance")
        pts = pts - mean
        power = np.mean(np.abs(pts) ** 2)
        if abs(power - 1.0) > 1e-9:
            raise ValueError(f"alphabet power {power:.9f} is not within 1e-9 of 1")
        pts = pts / math.sqrt(power)
        return cls(tuple(pts.tolist()), name=name)


def bpsk() -> Alphabet:
    return Alphabet((1.0 + 0.0j, -1.0 + 0.0j), name="BPSK")


def qpsk() -> Alphabet:
    s = 1.0 / math.sqrt(2.0)
    return Alphabet(
        (s + s * 1j, s - s * 1j, -s + s * 1j, -s - s * 1j), name="QPSK"
    )


_NAMED = {"bpsk": bpsk, "qpsk": qpsk}


def named_alphabet(name: str) -> Alphabet:
    try:
        return _NAMED[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown alphabet {name!r}; known: {sorted(_NAMED)}")


@dataclass
class MiEvaluator:
    """Evaluates I(rho) for one alphabet with a fixed quadrature order.

    Immutable after construction except for the value cache, which is
    guarded by a lock so concurrent sweeps can share one evaluator.
    """

    alphabet: Alphabet
    quadrature_order: int = 64
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.quadrature_order < 16:
            raise ValueError("quadrature_order must be >= 16")
        nodes, weights = np.polynomial.hermite.hermgauss(self.quadrature_order)
        u, v = np.meshgrid(nodes, nodes, indexing="ij")
        w2 = np.outer(weights, weights)
        # normalized so that sum(w) * f == E[f] under the CN(0,1) density
        self._u = u.ravel()
        self._v = v.ravel()
        self._w = (w2 / math.pi).ravel()

    @property
    def max_bits(self) -> float:
        return self.alphabet.max_bits

    def mutual_information(self, rho: float) -> float:
        """I(rho) in bits/symbol for the complex AWGN channel."""
        if rho < 0:
            raise ValueError(f"rho must be nonnegative, got {rho}")
        rho = float(rho)
        if rho == 0.0:
            # all conditionals identical; quadrature would only add roundoff
            return 0.0
        with self._lock:
            cached = self._cache.get(rho)
        if cached is not None:
            return cached
        val = self._evaluate(rho)
        if not np.isfinite(val):
            raise RuntimeError(
                f"mutual information evaluation failed: rho={rho}, "
                f"order={self.quadrature_order}, value={val}"
            )
        with self._lock:
            self._cache[rho] = val
        return val

    def _evaluate(self, rho: float) -> float:
        a = self.alphabet.points
        M = a.size
        d = math.sqrt(rho) * (a[:, None] - a[None, :])  # (M, M): a_l - a_m
        # exponent of p_n(theta + d_lm) / p_n(theta) at quadrature nodes
        arg = (
            -(np.abs(d) ** 2)[:, :, None]
            - 2.0 * (d.real[:, :, None] * self._u + d.imag[:, :, None] * self._v)
        )  # (M, M, Q^2), natural log scale
        mx = np.max(arg, axis=1, keepdims=True)
        lse = mx[:, 0, :] + np.log(np.sum(np.exp(arg - mx), axis=1))  # (M, Q^2)
        penalty = np.sum(lse * self._w[None, :], axis=1) / LN2  # bits, per l
        return float(math.log2(M) - np.mean(penalty))

    def inverse_mi(self, target: float) -> float:
        """SNR rho with I(rho) = target; +inf when target >= log2(M)."""
        if target < 0:
            raise ValueError(f"target must be nonnegative, got {target}")
        if target == 0.0:
            return 0.0
        if target >= self.max_bits - 1e-12:
            return math.inf
        lo, hi = 0.0, 1.0
        while self.mutual_information(hi) < target:
            lo, hi = hi, hi * 8.0
            if hi > _RHO_CEILING:
                return math.inf
        f = lambda r: self.mutual_information(r) - target
        root = brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
        return float(root)

    def half_rate(self, rho: float) -> float:
        """Per-hop information rate 0.5 * I(rho); the 1/2 accounts for the
        two-hop transmission."""
        return 0.5 * self.mutual_information(rho)
