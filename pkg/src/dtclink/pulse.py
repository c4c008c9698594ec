"""Truncated-Fourier flux waveform for the gate pulse.

Phi(t) = Phi_i + Phi_f - (Phi_f/2) * sum_k lambda_k [1 - cos(2 k pi (t - T/2)/T)]

The odd-k coefficients are normalized to sum to 1 so the pulse starts and
ends exactly at the idle bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy import ndarray

NORMALIZATION_TOL = 1e-12


def normalize(lambdas: Sequence[float]) -> tuple[float, ...]:
    """Rescale coefficients so the odd-index (k = 1, 3, ...) sum equals 1."""
    lambdas = tuple(float(x) for x in lambdas)
    odd_sum = sum(lambdas[0::2])
    if abs(odd_sum) < NORMALIZATION_TOL:
        raise ValueError(
            "odd-order coefficient sum is zero: the pulse cannot return to idle"
        )
    return tuple(x / odd_sum for x in lambdas)


@dataclass(frozen=True)
class PulseParams:
    """Waveform parameters: idle bias, amplitude, coefficients, duration (ns)."""

    phi_idle: float
    phi_amp: float
    lambdas: tuple[float, ...]
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if len(self.lambdas) < 1:
            raise ValueError("at least one coefficient required")
        odd_sum = sum(self.lambdas[0::2])
        if abs(odd_sum - 1.0) > NORMALIZATION_TOL:
            raise ValueError(
                f"odd-order coefficients must sum to 1 (got {odd_sum!r}); "
                "use pulse.normalize first"
            )
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if abs(self.phi_idle) > 1.0:
            raise ValueError("idle flux must lie within one flux quantum")
        if abs(self.phi_idle + self.phi_amp) > 1.0:
            raise ValueError("peak flux must lie within one flux quantum")

    @property
    def order(self) -> int:
        return len(self.lambdas)

    def max_excursion(self) -> float:
        """Bound on |Phi(t) - Phi_i|: |Phi_f| * sum_k |lambda_k|."""
        return abs(self.phi_amp) * sum(abs(x) for x in self.lambdas)


def waveform(p: PulseParams, t):
    """Evaluate Phi(t) in flux-quantum units for t in [0, T] (scalar or array)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > p.duration):
        raise ValueError(f"time outside [0, {p.duration}]; clamp explicitly for holds")
    x = 2.0 * np.pi * (t - 0.5 * p.duration) / p.duration
    acc = np.zeros_like(t)
    for k, lam in enumerate(p.lambdas, start=1):
        acc = acc + lam * (1.0 - np.cos(k * x))
    out = p.phi_idle + p.phi_amp - 0.5 * p.phi_amp * acc
    return float(out) if out.ndim == 0 else out


def waveform_derivative(p: PulseParams, t):
    """Analytic dPhi/dt in flux quanta per ns; vanishes at t = 0, T/2, T."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > p.duration):
        raise ValueError(f"time outside [0, {p.duration}]")
    x = 2.0 * np.pi * (t - 0.5 * p.duration) / p.duration
    acc = np.zeros_like(t)
    for k, lam in enumerate(p.lambdas, start=1):
        acc = acc + lam * k * np.sin(k * x)
    out = -0.5 * p.phi_amp * (2.0 * np.pi / p.duration) * acc
    return float(out) if out.ndim == 0 else out


class PulseSamples(NamedTuple):
    times: ndarray   # step midpoints, ns
    widths: ndarray  # step widths, ns (last step shortened to land on T)
    flux: ndarray    # Phi at the midpoints


def sample(p: PulseParams, dt: float) -> PulseSamples:
    """Sample the waveform at midpoints of uniform steps of width ``dt``.

    The final step is shortened so the steps tile [0, T] exactly.
    """
    if not 0 < dt <= p.duration:
        raise ValueError("dt must satisfy 0 < dt <= duration")
    n = int(np.ceil(p.duration / dt - 1e-12))
    edges = np.minimum(dt * np.arange(n + 1), p.duration)
    edges[-1] = p.duration
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    return PulseSamples(times=mids, widths=widths, flux=waveform(p, mids))
