"""Device description files: schema, validation, and the shipped default.

A device file is TOML with nested sections:

    schema_version = 1
    name = "..."

    [[modes]]                 # ordered; fixes the Kronecker layout
    id = "Q1"
    kind = "transmon"         # or "harmonic"
    E_C = 0.22                # GHz
    E_J = 13.4                # transmon only (E_L for harmonic), GHz
    dim = 4                   # retained levels

    [[edges]]                 # capacitive couplings J * n_a n_b
    a = "Q1"
    b = "Cp1A"
    J = 0.25                  # GHz

    [[loops]]                 # flux-threaded coupler junctions
    a = "Cp1A"
    b = "Cp1B"
    E_J = 2.0                 # GHz
    flux = 1                  # flux channel (1 or 2)

    [truncations.fast]        # optional named per-mode dim overrides
    Q1 = 3

    [operating]               # nominal bias hints used to seed searches
    idle = 0.3
    work = 0.5
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from dtclink import toml_io
from dtclink.circuit import CircuitSpec, CouplingEdge, LoopJunction
from dtclink.errors import ConfigError
from dtclink.operators import ModeSpec, mode_energies

DEFAULT_DEVICE_NAME = "default"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Device:
    """Parsed device file: circuit plus named truncation profiles and hints."""

    name: str
    circuit: CircuitSpec
    truncations: dict[str, dict[str, int]] = field(default_factory=dict)
    operating: dict[str, float] = field(default_factory=dict)

    def with_truncation(self, profile: str | None) -> CircuitSpec:
        """Circuit with a named truncation profile applied ('device' = as-is)."""
        if profile in (None, "device"):
            return self.circuit
        if profile not in self.truncations:
            raise ConfigError(
                f"unknown truncation profile {profile!r}; "
                f"available: {['device'] + sorted(self.truncations)}"
            )
        return self.circuit.with_dims(self.truncations[profile])


def _require(table: dict, key: str, context: str):
    if key not in table:
        raise ConfigError(f"missing {key!r} in {context}")
    return table[key]


def circuit_from_dict(data: dict) -> CircuitSpec:
    modes = []
    for entry in _require(data, "modes", "device file"):
        mode_id = str(_require(entry, "id", "mode entry"))
        kind = str(_require(entry, "kind", f"mode {mode_id}"))
        try:
            spec = ModeSpec(
                kind=kind,
                E_C=float(_require(entry, "E_C", f"mode {mode_id}")),
                E_J=float(entry["E_J"]) if "E_J" in entry else None,
                E_L=float(entry["E_L"]) if "E_L" in entry else None,
                dim=int(_require(entry, "dim", f"mode {mode_id}")),
            )
        except ValueError as exc:
            raise ConfigError(f"mode {mode_id}: {exc}") from exc
        modes.append((mode_id, spec))
    edges = tuple(
        CouplingEdge(str(_require(e, "a", "edge")), str(_require(e, "b", "edge")),
                     float(_require(e, "J", "edge")))
        for e in data.get("edges", [])
    )
    loops = tuple(
        LoopJunction(str(_require(l, "a", "loop")), str(_require(l, "b", "loop")),
                     float(_require(l, "E_J", "loop")),
                     int(_require(l, "flux", "loop")))
        for l in data.get("loops", [])
    )
    try:
        return CircuitSpec(tuple(modes), edges, loops)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def circuit_to_dict(circuit: CircuitSpec) -> dict:
    modes = []
    for mode_id, spec in circuit.modes:
        entry = {"id": mode_id, "kind": spec.kind, "E_C": spec.E_C}
        if spec.E_J is not None:
            entry["E_J"] = spec.E_J
        if spec.E_L is not None:
            entry["E_L"] = spec.E_L
        entry["dim"] = spec.dim
        modes.append(entry)
    return {
        "modes": modes,
        "edges": [{"a": e.node_a, "b": e.node_b, "J": e.J} for e in circuit.edges],
        "loops": [{"a": l.node_a, "b": l.node_b, "E_J": l.E_J_loop,
                   "flux": l.flux_channel} for l in circuit.loops],
    }


def device_from_dict(data: dict) -> Device:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported device schema_version {version!r}")
    circuit = circuit_from_dict(data)
    truncations = {}
    for profile, table in data.get("truncations", {}).items():
        truncations[str(profile)] = {str(k): int(v) for k, v in table.items()}
        try:
            circuit.with_dims(truncations[str(profile)])
        except ValueError as exc:
            raise ConfigError(f"truncation profile {profile!r}: {exc}") from exc
    operating = {str(k): float(v) for k, v in data.get("operating", {}).items()}
    return Device(name=str(data.get("name", "unnamed")), circuit=circuit,
                  truncations=truncations, operating=operating)


def device_to_dict(device: Device) -> dict:
    data: dict = {"schema_version": SCHEMA_VERSION, "name": device.name}
    data.update(circuit_to_dict(device.circuit))
    if device.truncations:
        data["truncations"] = {k: dict(v) for k, v in device.truncations.items()}
    if device.operating:
        data["operating"] = dict(device.operating)
    return data


def load_device(path_or_name: str) -> Device:
    """Load a device file; the name 'default' loads the packaged device."""
    if path_or_name == DEFAULT_DEVICE_NAME:
        text = resources.files("dtclink.data").joinpath("default_device.toml").read_text()
        data = toml_io.loads(text)
    else:
        try:
            data = toml_io.load(path_or_name)
        except FileNotFoundError as exc:
            raise ConfigError(f"device file not found: {path_or_name}") from exc
        except Exception as exc:
            raise ConfigError(f"cannot parse device file {path_or_name}: {exc}") from exc
    return device_from_dict(data)


def save_device(device: Device, path) -> None:
    toml_io.dump(device_to_dict(device), path)


def derived_mode_table(circuit: CircuitSpec) -> list[dict]:
    """Per-mode derived quantities printed by the validate command."""
    rows = []
    for mode_id, spec in circuit.modes:
        levels = mode_energies(spec, n_levels=3)
        row = {
            "id": mode_id,
            "kind": spec.kind,
            "dim": spec.dim,
            "freq_01_GHz": float(levels[1] - levels[0]),
            "anharmonicity_GHz": float((levels[2] - levels[1]) - (levels[1] - levels[0])),
            "phi_zpf": spec.phi_zpf,
            "n_zpf": spec.n_zpf,
        }
        rows.append(row)
    return rows
