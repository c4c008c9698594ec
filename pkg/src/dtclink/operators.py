"""Per-mode operator algebra in truncated oscillator bases.

Transmon modes are represented in the harmonic-oscillator basis of their
linearized junction; the full cosine/sine of the phase operator is kept
exactly via spectral calculus. All energies are linear frequencies in GHz
(h = 1), flux in units of the flux quantum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy import ndarray
import scipy.sparse as sp

TRANSMON = "transmon"
HARMONIC = "harmonic"


@dataclass(frozen=True)
class ModeSpec:
    """One circuit mode: a transmon (E_C, E_J) or a harmonic mode (E_C, E_L).

    Parameters
    ----------
    kind:
        ``"transmon"`` or ``"harmonic"``.
    E_C:
        Charging energy in GHz.
    E_J / E_L:
        Josephson (transmon) or inductive (harmonic) energy in GHz; exactly
        one of the two must be set, matching ``kind``.
    dim:
        Number of retained levels, at least 2.
    """

    kind: str
    E_C: float
    E_J: float | None = None
    E_L: float | None = None
    dim: int = 3

    def __post_init__(self):
        if self.kind not in (TRANSMON, HARMONIC):
            raise ValueError(f"unknown mode kind {self.kind!r}")
        if not self.E_C > 0:
            raise ValueError("E_C must be positive")
        if self.kind == TRANSMON:
            if self.E_J is None or not self.E_J > 0:
                raise ValueError("transmon mode requires E_J > 0")
            if self.E_L is not None:
                raise ValueError("transmon mode must not set E_L")
        else:
            if self.E_L is None or not self.E_L > 0:
                raise ValueError("harmonic mode requires E_L > 0")
            if self.E_J is not None:
                raise ValueError("harmonic mode must not set E_J")
        if int(self.dim) < 2:
            raise ValueError("dim must be at least 2")

    @property
    def energy_scale(self) -> float:
        """E_J for a transmon, E_L for a harmonic mode."""
        return self.E_J if self.kind == TRANSMON else self.E_L

    @property
    def phi_zpf(self) -> float:
        return (2.0 * self.E_C / self.energy_scale) ** 0.25

    @property
    def n_zpf(self) -> float:
        # Defined as 1/(2 phi_zpf) so that phi_zpf * n_zpf == 0.5 exactly.
        return 0.5 / self.phi_zpf

    def replace_dim(self, dim: int) -> "ModeSpec":
        return ModeSpec(self.kind, self.E_C, self.E_J, self.E_L, dim)


@dataclass(frozen=True)
class OperatorSet:
    """Single-mode operators, all ``dim x dim``.

    ``phi`` is real symmetric, ``n`` purely imaginary Hermitian, and
    ``cos_phi**2 + sin_phi**2`` is the identity (both are spectral functions
    of the same truncated ``phi``).
    """

    n: ndarray
    phi: ndarray
    cos_phi: ndarray
    sin_phi: ndarray
    lower: ndarray

    @property
    def dim(self) -> int:
        return self.phi.shape[0]

    @property
    def n_imag(self) -> ndarray:
        """Real antisymmetric matrix with n = 1j * n_imag, for real assembly."""
        return self.n.imag


def build_ladder(dim: int) -> tuple[ndarray, ndarray]:
    """Return (lower, raise) ladder operators in a ``dim``-level basis."""
    if dim < 1:
        raise ValueError("dim must be at least 1")
    lower = np.diag(np.sqrt(np.arange(1.0, dim)), k=1)
    return lower, lower.T.copy()


def build_mode_operators(spec: ModeSpec) -> OperatorSet:
    """Build the operator set of a mode from its zero-point amplitudes.

    phi = phi_zpf (a + a^dag), n = i n_zpf (a^dag - a); cos(phi) and sin(phi)
    are evaluated by diagonalizing phi and applying the scalar functions to
    its eigenvalues.
    """
    lower, raise_ = build_ladder(spec.dim)
    phi = spec.phi_zpf * (lower + raise_)
    n = 1j * spec.n_zpf * (raise_ - lower)
    w, v = np.linalg.eigh(phi)
    cos_phi = (v * np.cos(w)) @ v.T
    sin_phi = (v * np.sin(w)) @ v.T
    # Symmetrize away eigensolver round-off so downstream symmetry checks
    # hold to machine precision.
    cos_phi = 0.5 * (cos_phi + cos_phi.T)
    sin_phi = 0.5 * (sin_phi + sin_phi.T)
    return OperatorSet(n=n, phi=phi, cos_phi=cos_phi, sin_phi=sin_phi, lower=lower)


def mode_hamiltonian(spec: ModeSpec, ops: OperatorSet | None = None) -> ndarray:
    """Single-mode Hamiltonian in GHz, real symmetric.

    Transmon: 4 E_C n^2 - E_J cos(phi). Harmonic: 4 E_C n^2 + E_L phi^2 / 2.
    """
    if ops is None:
        ops = build_mode_operators(spec)
    n_im = ops.n_imag
    kinetic = -4.0 * spec.E_C * (n_im @ n_im)
    if spec.kind == TRANSMON:
        return kinetic - spec.E_J * ops.cos_phi
    return kinetic + 0.5 * spec.E_L * (ops.phi @ ops.phi)


def _check_embed_args(op_dim: int, mode_index: int, dims: Sequence[int]) -> None:
    if not 0 <= mode_index < len(dims):
        raise IndexError(f"mode_index {mode_index} out of range for {len(dims)} modes")
    if op_dim != dims[mode_index]:
        raise ValueError(
            f"operator dimension {op_dim} does not match dims[{mode_index}] = {dims[mode_index]}"
        )


def embed(op: ndarray, mode_index: int, dims: Sequence[int]) -> ndarray:
    """Kronecker-embed a single-mode operator into the composite space.

    The mode ordering of ``dims`` is fixed by the caller (for the default
    device: qubit 1, qubit 2, cable m=10, cable m=11, couplers 1A, 1B, 2A, 2B).
    """
    op = np.asarray(op)
    _check_embed_args(op.shape[0], mode_index, dims)
    d_before = int(np.prod(dims[:mode_index], dtype=np.int64))
    d_after = int(np.prod(dims[mode_index + 1:], dtype=np.int64))
    out = np.kron(np.eye(d_before), np.kron(op, np.eye(d_after)))
    return out


def embed_sparse(op: ndarray, mode_index: int, dims: Sequence[int]) -> sp.csr_matrix:
    """Sparse (CSR) variant of :func:`embed`, used by the circuit assembler."""
    op = np.asarray(op)
    _check_embed_args(op.shape[0], mode_index, dims)
    d_before = int(np.prod(dims[:mode_index], dtype=np.int64))
    d_after = int(np.prod(dims[mode_index + 1:], dtype=np.int64))
    out = sp.kron(sp.identity(d_before, format="csr"),
                  sp.kron(sp.csr_matrix(op), sp.identity(d_after, format="csr"),
                          format="csr"),
                  format="csr")
    return out


@dataclass(frozen=True)
class ModeBasis:
    """Mode operators compressed to the lowest ``dim`` single-mode eigenstates.

    Raw oscillator-basis truncation misrepresents a transmon badly at small
    dim (the cosine needs ~8+ oscillator levels to converge), so composite
    assembly diagonalizes each mode in a converged working basis first and
    keeps the lowest levels: energies are exact and coupling matrix elements
    among kept levels are exact, at any retained dim.
    """

    energies: ndarray
    n: ndarray
    phi: ndarray
    cos_phi: ndarray
    sin_phi: ndarray

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    @property
    def n_imag(self) -> ndarray:
        return self.n.imag


def working_dimension(dim: int) -> int:
    return max(dim + 12, 24)


def compress_mode(spec: ModeSpec, working_dim: int | None = None) -> ModeBasis:
    """Diagonalize the mode in a large working basis, keep ``spec.dim`` levels."""
    wd = working_dim or working_dimension(spec.dim)
    big = spec.replace_dim(wd)
    ops = build_mode_operators(big)
    w, v = np.linalg.eigh(mode_hamiltonian(big, ops))
    keep = v[:, :spec.dim]

    def sym(m: ndarray) -> ndarray:
        r = keep.T @ m @ keep
        return 0.5 * (r + r.T)

    n_im = keep.T @ ops.n_imag @ keep
    n_im = 0.5 * (n_im - n_im.T)
    return ModeBasis(
        energies=w[:spec.dim].copy(),
        n=1j * n_im,
        phi=sym(ops.phi),
        cos_phi=sym(ops.cos_phi),
        sin_phi=sym(ops.sin_phi),
    )


def mode_energies(spec: ModeSpec, n_levels: int | None = None,
                  working_dim: int | None = None) -> ndarray:
    """Converged lowest eigenvalues of the single-mode Hamiltonian."""
    wd = working_dim or working_dimension(spec.dim)
    w = np.linalg.eigvalsh(mode_hamiltonian(spec.replace_dim(wd)))
    return w[: (n_levels or spec.dim)].copy()


def transmon_charge_spectrum(E_C: float, E_J: float, charge_cutoff: int = 30,
                             n_levels: int = 6) -> ndarray:
    """Independent transmon oracle: diagonalize in the Cooper-pair charge basis.

    H = 4 E_C m^2 - (E_J/2)(|m><m+1| + h.c.) over m in [-cutoff, cutoff].
    Returns the ``n_levels`` lowest eigenvalues, ascending.
    """
    if charge_cutoff < 10:
        raise ValueError("charge_cutoff must be at least 10")
    m = np.arange(-charge_cutoff, charge_cutoff + 1, dtype=float)
    h = np.diag(4.0 * E_C * m**2)
    off = -0.5 * E_J * np.ones(len(m) - 1)
    h += np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigvalsh(h)[:n_levels]
