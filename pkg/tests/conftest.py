"""Shared toy circuits for the test suite."""

import numpy as np
import pytest

from dtclink.circuit import CircuitSpec, CouplingEdge, LoopJunction
from dtclink.operators import ModeSpec


def harmonic(freq: float, dim: int = 3, phi_zpf: float = 1.0) -> ModeSpec:
    """Harmonic mode with sqrt(8 E_C E_L) = freq and the given phi_zpf."""
    # phi_zpf = (2 E_C / E_L)^(1/4)  and  freq = sqrt(8 E_C E_L)
    ratio = phi_zpf**4 / 2.0          # E_C / E_L
    e_l = freq / np.sqrt(8.0 * ratio)
    return ModeSpec("harmonic", E_C=ratio * e_l, E_L=e_l, dim=dim)


def transmon(e_c: float, e_j: float, dim: int = 6) -> ModeSpec:
    return ModeSpec("transmon", E_C=e_c, E_J=e_j, dim=dim)


@pytest.fixture
def three_mode_uncoupled():
    """Three uncoupled harmonic modes, dims (3, 3, 3)."""
    return CircuitSpec(
        modes=(
            ("m0", harmonic(4.1, dim=3)),
            ("m1", harmonic(5.3, dim=3)),
            ("m2", harmonic(6.7, dim=3)),
        ),
        edges=(),
        loops=(),
    )


@pytest.fixture
def loop_toy():
    """Three modes with one flux loop (b-c) and one edge (a-b)."""
    return CircuitSpec(
        modes=(
            ("a", transmon(0.25, 12.0, dim=3)),
            ("b", transmon(0.30, 14.0, dim=3)),
            ("c", transmon(0.30, 15.0, dim=3)),
        ),
        edges=(CouplingEdge("a", "b", 0.08),),
        loops=(LoopJunction("b", "c", 1.5, flux_channel=1),),
    )


def two_transmon_circuit(e_c1, e_j1, e_c2, e_j2, j, dim=6):
    return CircuitSpec(
        modes=(("q1", transmon(e_c1, e_j1, dim)), ("q2", transmon(e_c2, e_j2, dim))),
        edges=(CouplingEdge("q1", "q2", j),) if j != 0.0 else (),
        loops=(),
    )
