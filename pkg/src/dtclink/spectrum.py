"""Eigendecomposition, overlap-based dressed-state labeling, cross-Kerr (ZZ)
extraction, and 1D/2D flux sweeps.

The bare basis is the product basis of single-mode eigenstates with every
inter-mode coupling (capacitive edges and loop junctions) removed; a dressed
state inherits the label of the bare state it overlaps most strongly with.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy import ndarray
import scipy.linalg as sla
import scipy.optimize as sopt
import scipy.sparse as sp

from dtclink.circuit import CircuitSpec, evaluate
from dtclink.errors import TrackingError
from dtclink.operators import compress_mode

SYMMETRY_RTOL = 1e-10
DEFAULT_OVERLAP_FLOOR = 0.25
DEFAULT_N_EIGS = 40


def eigendecompose(h, n_eigs: int | None = None) -> tuple[ndarray, ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors of a real symmetric H.

    ``n_eigs`` restricts the solve to the lowest eigenpairs. Raises
    ``ValueError`` if H is not symmetric within 1e-10 relative.
    """
    if sp.issparse(h):
        scale = abs(h).max() or 1.0
        asym = abs(h - h.T).max()
        dense = h.toarray()
    else:
        dense = np.asarray(h)
        scale = np.abs(dense).max() or 1.0
        asym = np.abs(dense - dense.T).max()
    if asym > SYMMETRY_RTOL * scale:
        raise ValueError(f"matrix is not symmetric: |H - H^T| = {asym:.3e}")
    if n_eigs is not None and n_eigs < dense.shape[0]:
        w, v = sla.eigh(dense, subset_by_index=[0, n_eigs - 1])
    else:
        w, v = sla.eigh(dense)
    return w, v


@dataclass(frozen=True)
class BareBasis:
    """Product basis of single-mode eigenstates (all couplings removed)."""

    mode_ids: tuple[str, ...]
    dims: tuple[int, ...]
    energies: tuple[ndarray, ...]
    vectors: tuple[ndarray, ...]

    @classmethod
    def from_circuit(cls, circuit: CircuitSpec) -> "BareBasis":
        # Assembly works in each mode's compressed eigenbasis, so the bare
        # product states are coordinate vectors with the compressed energies.
        energies, vectors = [], []
        for _, spec in circuit.modes:
            energies.append(compress_mode(spec).energies)
            vectors.append(np.eye(spec.dim))
        return cls(circuit.mode_ids, circuit.dims, tuple(energies), tuple(vectors))

    def _check_label(self, label: Sequence[int]) -> tuple[int, ...]:
        label = tuple(int(x) for x in label)
        if len(label) != len(self.dims):
            raise ValueError(f"label {label} has wrong length for {len(self.dims)} modes")
        for x, d in zip(label, self.dims):
            if not 0 <= x < d:
                raise ValueError(f"label {label} outside truncation {self.dims}")
        return label

    def energy(self, label: Sequence[int]) -> float:
        label = self._check_label(label)
        return float(sum(w[i] for w, i in zip(self.energies, label)))

    def vector(self, label: Sequence[int]) -> ndarray:
        label = self._check_label(label)
        v = self.vectors[0][:, label[0]]
        for m, i in zip(self.vectors[1:], label[1:]):
            v = np.kron(v, m[:, i])
        return v

    def vectors_for(self, labels: Iterable[Sequence[int]]) -> ndarray:
        return np.column_stack([self.vector(lb) for lb in labels])


@dataclass(frozen=True)
class LabeledState:
    label: tuple[int, ...]
    energy: float
    overlap: float
    index: int


@dataclass(frozen=True)
class LabeledSpectrum:
    """Lowest eigenpairs with injective bare-state labels and overlap scores."""

    states: dict[tuple[int, ...], LabeledState]
    eigenvalues: ndarray
    eigenvectors: ndarray | None
    conflicts: tuple[tuple[int, ...], ...]
    missing: tuple[tuple[int, ...], ...]

    def has(self, label) -> bool:
        return tuple(label) in self.states

    def energy(self, label) -> float:
        return self.states[tuple(label)].energy

    def overlap(self, label) -> float:
        return self.states[tuple(label)].overlap

    def vector(self, label) -> ndarray:
        if self.eigenvectors is None:
            raise ValueError("eigenvectors were not retained")
        return self.eigenvectors[:, self.states[tuple(label)].index]

    @property
    def min_overlap(self) -> float:
        return min(s.overlap for s in self.states.values())


def label_states(eigenvalues: ndarray, eigenvectors: ndarray, bare: BareBasis,
                 wanted: Iterable[Sequence[int]],
                 overlap_floor: float = DEFAULT_OVERLAP_FLOOR,
                 flux=None, strict: bool = True,
                 keep_vectors: bool = True) -> LabeledSpectrum:
    """Assign each wanted bare label to its argmax-overlap dressed state.

    Conflicts are resolved greedily in descending overlap order; a label whose
    first-choice state was already claimed is recorded in ``conflicts``. A
    label whose best remaining overlap falls below ``overlap_floor`` raises
    :class:`TrackingError` (or is recorded in ``missing`` when strict=False).
    """
    wanted = [tuple(int(x) for x in lb) for lb in wanted]
    if len(set(wanted)) != len(wanted):
        raise ValueError("wanted labels contain duplicates")
    b = bare.vectors_for(wanted)
    if b.shape[0] != eigenvectors.shape[0]:
        raise ValueError("bare basis and eigenvectors have mismatched dimension")
    overlaps = (eigenvectors.T @ b) ** 2  # (n_eigs, n_labels)

    order = np.argsort(-overlaps.max(axis=0), kind="stable")
    taken = np.zeros(overlaps.shape[0], dtype=bool)
    states: dict[tuple[int, ...], LabeledState] = {}
    conflicts, missing = [], []
    for w_idx in order:
        label = wanted[w_idx]
        col = overlaps[:, w_idx]
        first_choice = int(np.argmax(col))
        masked = np.where(taken, -1.0, col)
        pick = int(np.argmax(masked))
        best = float(masked[pick])
        if best < overlap_floor:
            if strict:
                raise TrackingError(label, max(best, float(col[first_choice])), flux)
            missing.append(label)
            continue
        # Ambiguous when the first choice was already claimed or when the two
        # strongest overlaps are numerically tied (symmetric hybridization).
        tied = False
        if col.size > 1:
            top_two = np.partition(col, -2)[-2:]
            tied = top_two[1] - top_two[0] < 1e-9
        if taken[first_choice] or tied:
            conflicts.append(label)
        taken[pick] = True
        states[label] = LabeledState(label, float(eigenvalues[pick]), best, pick)

    return LabeledSpectrum(
        states=states,
        eigenvalues=np.asarray(eigenvalues),
        eigenvectors=eigenvectors if keep_vectors else None,
        conflicts=tuple(conflicts),
        missing=tuple(missing),
    )


def computational_labels(mode_ids: Sequence[str], qubit_a: str, qubit_b: str,
                         excitations: Iterable[tuple[int, int]] = ((0, 0), (0, 1), (1, 0), (1, 1)),
                         ) -> dict[str, tuple[int, ...]]:
    """Map 'ij' keys to full multi-index labels with all spectators at zero."""
    ia = list(mode_ids).index(qubit_a)
    ib = list(mode_ids).index(qubit_b)
    out = {}
    for i, j in excitations:
        label = [0] * len(mode_ids)
        label[ia], label[ib] = i, j
        out[f"{i}{j}"] = tuple(label)
    return out


@dataclass(frozen=True)
class ZZResult:
    """Cross-Kerr strength zeta = E11 - E01 - E10 + E00 at one flux point."""

    flux: tuple[float, float]
    zeta: float
    energies: dict[str, float]

    def __post_init__(self):
        if not np.isfinite(self.zeta):
            raise ValueError("zeta must be finite")


def zz_strength(spectrum: LabeledSpectrum, labels: dict[str, tuple[int, ...]],
                flux=(0.0, 0.0)) -> ZZResult:
    """Evaluate zeta from the four labeled computational energies."""
    energies = {}
    for key in ("00", "01", "10", "11"):
        label = labels[key]
        if not spectrum.has(label):
            raise TrackingError(label, 0.0, flux)
        energies[key] = spectrum.energy(label)
    zeta = energies["11"] - energies["01"] - energies["10"] + energies["00"]
    return ZZResult(flux=(float(flux[0]), float(flux[1])), zeta=zeta, energies=energies)


# --- sweeps -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    flux: tuple[float, float]
    spectrum: LabeledSpectrum | None
    zz: ZZResult | None
    error: str | None


_POOL_STATE: dict = {}


def _sweep_setup(payload):
    _POOL_STATE["payload"] = payload


def _sweep_point(task):
    idx, flux = task
    parts, bare, wanted, zz_labels, n_eigs, floor, keep_vectors = _POOL_STATE["payload"]
    h = evaluate(parts, flux)
    w, v = eigendecompose(h, n_eigs=n_eigs)
    spec = label_states(w, v, bare, wanted, overlap_floor=floor, flux=flux,
                        strict=False, keep_vectors=keep_vectors)
    error = None
    if spec.missing:
        error = f"tracking lost for labels {sorted(spec.missing)} at flux {flux}"
    zz = None
    if zz_labels is not None:
        try:
            zz = zz_strength(spec, zz_labels, flux=flux)
        except TrackingError as exc:
            error = str(exc)
    return idx, SweepPoint(flux=(float(flux[0]), float(flux[1])),
                           spectrum=spec, zz=zz, error=error)


def _run_indexed(tasks, payload, workers: int):
    """Run per-point tasks, returning results ordered by grid index."""
    results = [None] * len(tasks)
    if workers <= 1:
        _sweep_setup(payload)
        for task in tasks:
            idx, point = _sweep_point(task)
            results[idx] = point
        return results
    with ProcessPoolExecutor(max_workers=workers, initializer=_sweep_setup,
                             initargs=(payload,)) as pool:
        for idx, point in pool.map(_sweep_point, tasks):
            results[idx] = point
    return results


def _check_monotone(grid) -> ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("flux grid must be nonempty")
    if grid.size > 1:
        diffs = np.diff(grid)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("flux grid must be strictly monotone")
    return grid


def _flux_pair(channel: int, value: float, fixed: float) -> tuple[float, float]:
    if channel == 1:
        return (float(value), float(fixed))
    if channel == 2:
        return (float(fixed), float(value))
    raise ValueError("flux channel must be 1 or 2")


def sweep_1d(parts, bare: BareBasis, channel: int, grid, wanted,
             zz_labels: dict[str, tuple[int, ...]] | None = None,
             fixed_flux: float = 0.0, n_eigs: int = DEFAULT_N_EIGS,
             overlap_floor: float = DEFAULT_OVERLAP_FLOOR,
             workers: int = 1, keep_vectors: bool = False) -> list[SweepPoint]:
    """Per-point eigensolve and labeling over a monotone 1D flux grid.

    Tracking failures are recorded per point and the sweep continues; output
    order follows the grid regardless of execution order.
    """
    grid = _check_monotone(grid)
    wanted = [tuple(lb) for lb in wanted]
    if zz_labels is not None:
        for lb in zz_labels.values():
            if tuple(lb) not in wanted:
                wanted.append(tuple(lb))
    payload = (parts, bare, wanted, zz_labels, n_eigs, overlap_floor, keep_vectors)
    tasks = [(i, _flux_pair(channel, g, fixed_flux)) for i, g in enumerate(grid)]
    return _run_indexed(tasks, payload, workers)


@dataclass(frozen=True)
class SweepGrid:
    """2D ZZ landscape over the product grid (row = grid1, column = grid2)."""

    grid1: ndarray
    grid2: ndarray
    zeta: ndarray
    min_overlap: ndarray
    energies: dict[str, ndarray]
    errors: tuple[tuple[int, int, str], ...]

    @property
    def log10_abs_zeta(self) -> ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(np.abs(self.zeta))


def sweep_2d(parts, bare: BareBasis, grid1, grid2,
             zz_labels: dict[str, tuple[int, ...]],
             n_eigs: int = DEFAULT_N_EIGS,
             overlap_floor: float = DEFAULT_OVERLAP_FLOOR,
             workers: int = 1) -> SweepGrid:
    """ZZ landscape over grid1 x grid2 (flux channels 1 and 2)."""
    grid1 = _check_monotone(grid1)
    grid2 = _check_monotone(grid2)
    wanted = [tuple(lb) for lb in zz_labels.values()]
    payload = (parts, bare, wanted, zz_labels, n_eigs, overlap_floor, False)
    tasks = []
    for i, f1 in enumerate(grid1):
        for j, f2 in enumerate(grid2):
            tasks.append((i * len(grid2) + j, (float(f1), float(f2))))
    points = _run_indexed(tasks, payload, workers)

    shape = (len(grid1), len(grid2))
    zeta = np.full(shape, np.nan)
    min_overlap = np.full(shape, np.nan)
    energies = {k: np.full(shape, np.nan) for k in ("00", "01", "10", "11")}
    errors = []
    for flat, point in enumerate(points):
        i, j = divmod(flat, len(grid2))
        if point.error is not None:
            errors.append((i, j, point.error))
        if point.zz is not None:
            zeta[i, j] = point.zz.zeta
            for k in energies:
                energies[k][i, j] = point.zz.energies[k]
        if point.spectrum is not None and point.spectrum.states:
            min_overlap[i, j] = point.spectrum.min_overlap
    return SweepGrid(grid1=grid1, grid2=grid2, zeta=zeta, min_overlap=min_overlap,
                     energies=energies, errors=tuple(errors))


# --- idle / operation point location ---------------------------------------

def _zeta_function(parts, bare, zz_labels, channel, fixed_flux, n_eigs, floor):
    def zeta(value: float) -> float:
        flux = _flux_pair(channel, value, fixed_flux)
        w, v = eigendecompose(evaluate(parts, flux), n_eigs=n_eigs)
        spec = label_states(w, v, bare, list(zz_labels.values()),
                            overlap_floor=floor, flux=flux, keep_vectors=False)
        return zz_strength(spec, zz_labels, flux=flux).zeta
    return zeta


def locate_zero(parts, bare: BareBasis, zz_labels: dict[str, tuple[int, ...]],
                channel: int = 1, search: tuple[float, float] = (0.05, 0.45),
                fixed_flux: float = 0.0, n_scan: int = 161,
                n_eigs: int = DEFAULT_N_EIGS,
                overlap_floor: float = DEFAULT_OVERLAP_FLOOR,
                accept: float = 1e-8) -> tuple[float, float]:
    """Locate a sign-changing zero of zeta (the idle bias) on one channel.

    Scans ``search`` for sign changes and refines each bracket with Brent's
    method. A bracket whose refined point still has |zeta| > ``accept`` GHz is
    a labeling discontinuity (an avoided-crossing branch jump), not a zero,
    and is skipped. Returns (flux, zeta_at_flux).
    """
    zeta = _zeta_function(parts, bare, zz_labels, channel, fixed_flux,
                          n_eigs, overlap_floor)
    grid = np.linspace(search[0], search[1], n_scan)
    values = [zeta(g) for g in grid]
    for lo, hi, zlo, zhi in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if np.sign(zlo) != np.sign(zhi) and zlo != 0.0:
            root = sopt.brentq(zeta, lo, hi, xtol=1e-10, rtol=8.9e-16)
            residual = zeta(root)
            if abs(residual) <= accept:
                return float(root), float(residual)
    raise ValueError(
        f"no sign-changing zero of zeta found on channel {channel} in {search}"
    )


def locate_extremum(parts, bare: BareBasis, zz_labels: dict[str, tuple[int, ...]],
                    channel: int = 1, search: tuple[float, float] = (0.4, 0.6),
                    fixed_flux: float = 0.0, n_scan: int = 21,
                    n_eigs: int = DEFAULT_N_EIGS,
                    overlap_floor: float = DEFAULT_OVERLAP_FLOOR) -> tuple[float, float]:
    """Locate the |zeta| maximum (the operation bias) on one channel."""
    zeta = _zeta_function(parts, bare, zz_labels, channel, fixed_flux,
                          n_eigs, overlap_floor)
    grid = np.linspace(search[0], search[1], n_scan)
    values = np.array([abs(zeta(g)) for g in grid])
    i = int(np.argmax(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if lo == hi:
        return float(grid[i]), float(zeta(grid[i]))
    res = sopt.minimize_scalar(lambda x: -abs(zeta(x)), bounds=(lo, hi),
                               method="bounded", options={"xatol": 1e-7})
    return float(res.x), float(zeta(res.x))
