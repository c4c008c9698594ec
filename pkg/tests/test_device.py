"""Device file schema, the shipped default device, and its structural
symmetries."""

import numpy as np
import pytest

from dtclink import toml_io
from dtclink.circuit import CircuitSpec, CouplingEdge, assemble, evaluate, subsystem
from dtclink.device import (
    Device,
    circuit_to_dict,
    device_from_dict,
    device_to_dict,
    load_device,
    save_device,
)
from dtclink.errors import ConfigError
from dtclink.spectrum import BareBasis, computational_labels, locate_zero, sweep_2d


@pytest.fixture(scope="module")
def default_device():
    return load_device("default")


def test_default_device_loads(default_device):
    circuit = default_device.circuit
    assert circuit.mode_ids == ("Q1", "Q2", "Cb10", "Cb11",
                                "Cp1A", "Cp1B", "Cp2A", "Cp2B")
    assert len(circuit.edges) == 8
    assert len(circuit.loops) == 2
    assert circuit.dims == (4, 4, 3, 3, 3, 3, 3, 3)
    fast = default_device.with_truncation("fast")
    assert fast.dims == (3, 3, 3, 3, 3, 3, 3, 3)
    assert fast.dim == 6561


def test_default_edge_set_matches_topology(default_device):
    expected = {frozenset(p) for p in [
        ("Q1", "Cp1A"), ("Cp1A", "Cp1B"), ("Cb10", "Cp1B"), ("Cb11", "Cp1B"),
        ("Cb10", "Cp2A"), ("Cb11", "Cp2A"), ("Cp2A", "Cp2B"), ("Q2", "Cp2B"),
    ]}
    assert {e.key for e in default_device.circuit.edges} == expected


def test_signed_cable_couplings(default_device):
    by_key = {e.key: e.J for e in default_device.circuit.edges}
    assert by_key[frozenset(("Cb11", "Cp1B"))] == 0.025
    assert by_key[frozenset(("Cb11", "Cp2A"))] == -0.025


def test_cable_free_spectral_range(default_device):
    from dtclink.operators import mode_energies
    circuit = default_device.circuit
    f10 = mode_energies(circuit.mode("Cb10"), n_levels=2)
    f11 = mode_energies(circuit.mode("Cb11"), n_levels=2)
    fsr = (f11[1] - f11[0]) - (f10[1] - f10[0])
    assert abs(fsr - 0.44) < 1e-9


def test_l_subsystem_matches_four_mode_model(default_device):
    sub = subsystem(default_device.circuit, ["Q1", "Cb10", "Cp1A", "Cp1B"])
    assert len(sub.edges) == 3
    assert len(sub.loops) == 1
    keys = {e.key for e in sub.edges}
    assert keys == {frozenset(("Q1", "Cp1A")), frozenset(("Cp1A", "Cp1B")),
                    frozenset(("Cb10", "Cp1B"))}


def test_device_roundtrip(tmp_path, default_device):
    path = tmp_path / "device.toml"
    save_device(default_device, path)
    loaded = load_device(str(path))
    assert loaded.circuit == default_device.circuit
    assert loaded.truncations == default_device.truncations
    assert loaded.operating == default_device.operating
    # canonical serialization is stable
    text1 = toml_io.dumps(device_to_dict(default_device))
    text2 = toml_io.dumps(device_to_dict(loaded))
    assert text1 == text2


def test_device_schema_errors():
    with pytest.raises(ConfigError):
        device_from_dict({"schema_version": 99, "modes": []})
    with pytest.raises(ConfigError):
        device_from_dict({"schema_version": 1, "modes": [{"id": "a"}]})
    good = {"schema_version": 1, "name": "x", "modes": [
        {"id": "a", "kind": "transmon", "E_C": 0.2, "E_J": 10.0, "dim": 3}]}
    device_from_dict(good)
    bad_trunc = dict(good)
    bad_trunc["truncations"] = {"fast": {"zz": 2}}
    with pytest.raises(ConfigError):
        device_from_dict(bad_trunc)
    with pytest.raises(ConfigError):
        load_device("/nonexistent/path.toml")


def _mirror(circuit: CircuitSpec) -> CircuitSpec:
    """Swap the two packages (Q1<->Q2, DTC1<->DTC2) and negate the m=11
    couplings; a gauge flip of the m=11 mode maps this back to the original."""
    swap = {"Q1": "Q2", "Q2": "Q1", "Cp1A": "Cp2B", "Cp2B": "Cp1A",
            "Cp1B": "Cp2A", "Cp2A": "Cp1B", "Cb10": "Cb10", "Cb11": "Cb11"}
    by_id = dict(circuit.modes)
    modes = tuple((mid, by_id[swap[mid]]) for mid, _ in circuit.modes)
    edges = []
    for e in circuit.edges:
        a, b = swap[e.node_a], swap[e.node_b]
        j = -e.J if "Cb11" in (a, b) else e.J
        edges.append(CouplingEdge(a, b, j))
    loops = tuple(
        type(l)(swap[l.node_a], swap[l.node_b], l.E_J_loop,
                2 if l.flux_channel == 1 else 1)
        for l in circuit.loops
    )
    return CircuitSpec(modes, tuple(edges), loops)


def test_mirror_symmetry_spectrum(default_device):
    # Package swap plus m=11 sign flip is a relabeling plus a gauge
    # transformation: the sorted spectrum is unchanged at any flux pair.
    # Checked at reduced truncation to keep the eigensolve cheap.
    small = default_device.circuit.with_dims(
        {m: 2 for m in default_device.circuit.mode_ids})
    mirrored = _mirror(small)
    parts = assemble(small)
    parts_m = assemble(mirrored)
    for f1, f2 in [(0.1, 0.3), (0.28, 0.28), (0.5, 0.2)]:
        w1 = np.linalg.eigvalsh(evaluate(parts, (f1, f2)).toarray())
        w2 = np.linalg.eigvalsh(evaluate(parts_m, (f2, f1)).toarray())
        assert np.abs(w1 - w2).max() < 1e-10 * max(1.0, np.abs(w1).max())


def test_landscape_symmetric_for_symmetrized_device(default_device):
    # A fully mirror-symmetric variant (Q2 := Q1) must give a ZZ landscape
    # symmetric under flux swap; the shipped device itself has distinct qubit
    # frequencies, so symmetrize first.
    circuit = default_device.with_truncation("fast")
    by_id = dict(circuit.modes)
    sym = CircuitSpec(
        modes=tuple((mid, by_id["Q1"] if mid == "Q2" else spec)
                    for mid, spec in circuit.modes),
        edges=circuit.edges, loops=circuit.loops,
    )
    sub = subsystem(sym, ["Q1", "Q2", "Cb10", "Cp1A", "Cp1B", "Cp2A", "Cp2B"])
    parts = assemble(sub)
    bare = BareBasis.from_circuit(sub)
    labels = computational_labels(sub.mode_ids, "Q1", "Q2")
    grid = [0.24, 0.30]
    result = sweep_2d(parts, bare, grid, grid, labels, n_eigs=30)
    z = result.zeta
    assert result.errors == ()
    for i in range(2):
        for j in range(2):
            denom = max(abs(z[i, j]), abs(z[j, i]), 1e-30)
            assert abs(z[i, j] - z[j, i]) / denom < 1e-6


def test_subsystem_zero_for_shipped_device(default_device):
    sub = subsystem(default_device.circuit, ["Q1", "Cb10", "Cp1A", "Cp1B"])
    parts = assemble(sub)
    bare = BareBasis.from_circuit(sub)
    labels = computational_labels(sub.mode_ids, "Q1", "Cb10")
    zero, residual = locate_zero(parts, bare, labels, channel=1,
                                 search=(0.15, 0.45), n_eigs=30)
    assert 0.2 <= zero <= 0.45
    assert abs(residual) < 1e-10
