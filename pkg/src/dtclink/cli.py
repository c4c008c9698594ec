"""Command-line interface: configuration ingestion, sweep execution, gate
calibration, and CSV/TOML/SVG result emission.

Subcommands: validate, spectrum, zz, pulse-preview, evolve, calibrate,
fidelity-report. Exit codes: 0 success, 2 configuration error, 3 numerical or
state-tracking failure, 4 calibration did not reach its target cost.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

import dtclink
from dtclink import svg, toml_io
from dtclink.circuit import CircuitSpec, assemble, subsystem
from dtclink.device import Device, derived_mode_table, load_device
from dtclink.dynamics import PropagationConfig, propagate
from dtclink.errors import AccuracyError, ConfigError, DtcLinkError, TrackingError
from dtclink.gate import (
    CalibrationConfig,
    GateResult,
    calibrate,
    evaluate_gate,
    prepare_gate_frame,
)
from dtclink.pulse import PulseParams, normalize, waveform
from dtclink.spectrum import (
    BareBasis,
    computational_labels,
    sweep_1d,
    sweep_2d,
)

DEFAULT_CONFIG: dict = {
    "run": {
        "device": "default",
        "out": "dtclink-out",
        "workers": 1,
        "seed": 2026,
        "truncation": "fast",
    },
    "spectrum": {
        "channel": 1,
        "fixed_flux": 0.0,
        "labels": ["computational", "single"],
        "qubits": ["Q1", "Q2"],
        "n_eigs": 40,
        "overlap_floor": 0.25,
        "subsystem": [],
        "grid": {"start": 0.0, "stop": 0.5, "num": 51},
    },
    "zz": {
        "mode": "1d",
        "channel": 1,
        "fixed_flux": 0.0,
        "qubits": ["Q1", "Q2"],
        "n_eigs": 40,
        "overlap_floor": 0.25,
        "subsystem": [],
        "grid1": {"start": 0.05, "stop": 0.5, "num": 46},
        "grid2": {"start": 0.05, "stop": 0.5, "num": 46},
    },
    "pulse": {
        "file": "",
        "idle": "auto",
        "amplitude": "auto",
        "lambdas": [1.0, 0.0, 0.0],
        "duration": 350.0,
        "sample_dt": 0.5,
    },
    "dynamics": {
        "dt": 0.02,
        "stride": 25,
        "method": "midpoint",
        "reduction": 448,
        "initial": "11",
        "n_eigs": 40,
        "overlap_floor": 0.25,
    },
    "calibrate": {
        "order": 3,
        "restarts": 1,
        "max_evals": 90,
        "weight_leak": 1.0,
        "weight_phase": 1.0 / np.pi**2,
        "dt_cost": 1.0,
        "dt_polish": 1.0,
        "dt_final": 0.25,
        "reduction_cost": 448,
        "reduction_polish": 927,
        "reduction_final": 1216,
        "polish_evals": 22,
        "stride": 50,
        "success_cost": 3e-3,
        "duration": 350.0,
        "n_eigs": 40,
        "overlap_floor": 0.25,
    },
}


def merge_config(user: dict) -> dict:
    merged = {}
    unknown_sections = set(user) - set(DEFAULT_CONFIG)
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")
    for section, defaults in DEFAULT_CONFIG.items():
        table = dict(defaults)
        overrides = user.get(section, {})
        if not isinstance(overrides, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        unknown = set(overrides) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        table.update(overrides)
        merged[section] = table
    return merged


@dataclass
class RunContext:
    config: dict
    config_text: str          # canonical serialized merged config
    device: Device
    device_text: str
    out_dir: str
    workers: int
    seed: int
    want_svg: bool
    dry_run: bool
    command: str

    @property
    def config_hash(self) -> str:
        # Execution details (worker count, output directory) must not change
        # the hash: results are contractually identical across them.
        scientific = {k: dict(v) for k, v in self.config.items()}
        scientific["run"].pop("workers", None)
        scientific["run"].pop("out", None)
        digest = hashlib.sha256()
        digest.update(toml_io.dumps(scientific).encode())
        digest.update(self.device_text.encode())
        return digest.hexdigest()[:16]

    @property
    def header(self) -> str:
        return (f"dtclink {dtclink.__version__}; config sha256:{self.config_hash}; "
                f"command: {self.command}")

    def circuit(self) -> CircuitSpec:
        return self.device.with_truncation(self.config["run"]["truncation"])

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_text(self, name: str, text: str) -> None:
        os.makedirs(self.out_dir, exist_ok=True)
        with open(self.path(name), "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {self.path(name)}")

    def write_csv(self, name: str, columns: list[tuple[str, np.ndarray]],
                  extra_header: list[str] | None = None) -> None:
        lines = [f"# {self.header}"]
        for entry in extra_header or []:
            lines.append(f"# {entry}")
        lines.append(",".join(key for key, _ in columns))
        rows = len(columns[0][1])
        for i in range(rows):
            lines.append(",".join(_fmt_cell(values[i]) for _, values in columns))
        self.write_text(name, "\n".join(lines) + "\n")

    def write_toml(self, name: str, data: dict) -> None:
        text = f"# {self.header}\n" + toml_io.dumps(data)
        self.write_text(name, text)

    def write_manifest(self, wall_time: float, extra: dict | None = None) -> None:
        manifest = {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "wall_time_s": round(wall_time, 3),
            "versions": {
                "dtclink": dtclink.__version__,
                "python": sys.version.split()[0],
                "numpy": np.__version__,
            },
        }
        if extra:
            manifest.update(extra)
        self.write_toml(f"manifest_{self.command.replace('-', '_')}.toml", manifest)


def _fmt_cell(value) -> str:
    if isinstance(value, str):
        return value
    v = float(value)
    if np.isnan(v):
        return "nan"
    return f"{v:.17g}"


def _load_context(args, command: str) -> RunContext:
    user = {}
    if args.config:
        try:
            user = toml_io.load(args.config)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}")
        except Exception as exc:
            raise ConfigError(f"cannot parse config {args.config}: {exc}")
    merged = merge_config(user)

    run = merged["run"]
    if args.out:
        run["out"] = args.out
    if args.workers is not None:
        run["workers"] = args.workers
    if args.seed is not None:
        run["seed"] = args.seed
    if int(run["workers"]) < 1:
        raise ConfigError("worker count must be at least 1")

    device_ref = str(run["device"])
    if device_ref != "default" and args.config:
        base = os.path.dirname(os.path.abspath(args.config))
        if not os.path.isabs(device_ref):
            device_ref = os.path.join(base, device_ref)
    device = load_device(device_ref)
    if device_ref == "default":
        from importlib import resources
        device_text = resources.files("dtclink.data").joinpath(
            "default_device.toml").read_text()
    else:
        with open(device_ref, "r", encoding="utf-8") as fh:
            device_text = fh.read()

    return RunContext(
        config=merged,
        config_text=toml_io.dumps(merged),
        device=device,
        device_text=device_text,
        out_dir=str(run["out"]),
        workers=int(run["workers"]),
        seed=int(run["seed"]),
        want_svg=bool(args.svg),
        dry_run=bool(args.dry_run),
        command=command,
    )


def _grid(spec, name: str) -> np.ndarray:
    if isinstance(spec, dict):
        try:
            num = int(spec["num"])
            start, stop = float(spec["start"]), float(spec["stop"])
        except KeyError as exc:
            raise ConfigError(f"grid {name} must define start/stop/num") from exc
        if num < 1:
            raise ConfigError(f"grid {name} must be nonempty")
        return np.linspace(start, stop, num)
    values = np.asarray(spec, dtype=float)
    if values.size == 0:
        raise ConfigError(f"grid {name} must be nonempty")
    return values


def _resolve_labels(names, circuit: CircuitSpec, qubits) -> list[tuple[int, ...]]:
    labels: list[tuple[int, ...]] = []
    for item in names:
        if item == "computational":
            comp = computational_labels(circuit.mode_ids, *qubits)
            labels.extend(comp.values())
        elif item == "single":
            for i in range(len(circuit.mode_ids)):
                label = [0] * len(circuit.mode_ids)
                label[i] = 1
                labels.append(tuple(label))
        else:
            try:
                label = tuple(int(x) for x in str(item).split(","))
            except ValueError:
                raise ConfigError(f"cannot parse label {item!r}")
            if len(label) != len(circuit.mode_ids):
                raise ConfigError(
                    f"label {item!r} has {len(label)} entries for "
                    f"{len(circuit.mode_ids)} modes"
                )
            labels.append(label)
    seen = []
    for lb in labels:
        if lb not in seen:
            seen.append(lb)
    return seen


def _sweep_circuit(ctx: RunContext, section: dict) -> tuple[CircuitSpec, tuple[str, str]]:
    circuit = ctx.circuit()
    subset = [str(s) for s in section["subsystem"]]
    if subset:
        circuit = subsystem(circuit, subset)
    qubits = tuple(str(q) for q in section["qubits"])
    if len(qubits) != 2:
        raise ConfigError("qubits must name exactly two modes")
    for q in qubits:
        if q not in circuit.mode_ids:
            raise ConfigError(f"qubit {q!r} not in circuit modes {circuit.mode_ids}")
    return circuit, qubits


def _resolve_bias(ctx: RunContext, value, key: str) -> float:
    if value == "auto":
        operating = ctx.device.operating
        if key not in operating:
            raise ConfigError(
                f"pulse {key} is 'auto' but the device file has no operating.{key}"
            )
        return float(operating[key])
    return float(value)


def load_pulse_file(ref: str) -> dict:
    """Read a stored pulse file; 'builtin:t350' loads the packaged pulse."""
    if ref.startswith("builtin:"):
        from importlib import resources
        name = f"calibrated_pulse_{ref.split(':', 1)[1]}.toml"
        try:
            text = resources.files("dtclink.data").joinpath(name).read_text()
        except FileNotFoundError:
            raise ConfigError(f"no builtin pulse {ref!r}")
        return toml_io.loads(text)
    try:
        return toml_io.load(ref)
    except FileNotFoundError:
        raise ConfigError(f"pulse file not found: {ref}")


def _pulse_from_file(data: dict, ref: str) -> PulseParams:
    try:
        p = data["pulse"]
        return PulseParams(phi_idle=float(p["phi_idle"]),
                           phi_amp=float(p["phi_amp"]),
                           lambdas=tuple(float(x) for x in p["lambdas"]),
                           duration=float(p["duration"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed pulse file {ref}: {exc}")


def _build_pulse(ctx: RunContext, duration=None) -> PulseParams:
    sec = ctx.config["pulse"]
    if sec["file"]:
        return _pulse_from_file(load_pulse_file(str(sec["file"])), str(sec["file"]))
    idle = _resolve_bias(ctx, sec["idle"], "idle")
    if sec["amplitude"] == "auto":
        work = _resolve_bias(ctx, "auto", "work")
        amp = work - idle
    else:
        amp = float(sec["amplitude"])
    lambdas = normalize([float(x) for x in sec["lambdas"]])
    return PulseParams(phi_idle=idle, phi_amp=amp, lambdas=lambdas,
                       duration=float(duration or sec["duration"]))


def _label_name(label) -> str:
    return "".join(str(x) for x in label)


# --- commands ----------------------------------------------------------------

def cmd_validate(ctx: RunContext) -> int:
    circuit = ctx.circuit()
    print(f"device: {ctx.device.name} (schema ok, {len(circuit.modes)} modes, "
          f"{len(circuit.edges)} edges, {len(circuit.loops)} loops)")
    print(f"truncation profile: {ctx.config['run']['truncation']}  "
          f"dims: {circuit.dims}  composite dimension: {circuit.dim}")
    if ctx.dry_run:
        print("dry-run: validation only, nothing executed")
        return 0
    print(f"{'mode':6s} {'kind':10s} {'dim':>3s} {'f01/GHz':>9s} "
          f"{'anh/GHz':>9s} {'phi_zpf':>8s} {'n_zpf':>8s}")
    for row in derived_mode_table(circuit):
        print(f"{row['id']:6s} {row['kind']:10s} {row['dim']:3d} "
              f"{row['freq_01_GHz']:9.4f} {row['anharmonicity_GHz']:+9.4f} "
              f"{row['phi_zpf']:8.4f} {row['n_zpf']:8.4f}")
    for key, value in sorted(ctx.device.operating.items()):
        print(f"operating.{key} = {value}")
    return 0


def cmd_spectrum(ctx: RunContext) -> int:
    sec = ctx.config["spectrum"]
    circuit, qubits = _sweep_circuit(ctx, sec)
    grid = _grid(sec["grid"], "spectrum.grid")
    labels = _resolve_labels(sec["labels"], circuit, qubits)
    if not labels:
        raise ConfigError("no labels requested")
    if ctx.dry_run:
        print(f"plan: spectrum sweep on channel {sec['channel']}, "
              f"{len(grid)} points x dim {circuit.dim}, {len(labels)} labels")
        return 0
    start = time.time()
    parts = assemble(circuit)
    bare = BareBasis.from_circuit(circuit)
    points = sweep_1d(parts, bare, channel=int(sec["channel"]), grid=grid,
                      wanted=labels, fixed_flux=float(sec["fixed_flux"]),
                      n_eigs=int(sec["n_eigs"]),
                      overlap_floor=float(sec["overlap_floor"]),
                      workers=ctx.workers)
    columns: list[tuple[str, list]] = [
        ("flux1", [p.flux[0] for p in points]),
        ("flux2", [p.flux[1] for p in points]),
    ]
    for lb in labels:
        name = _label_name(lb)
        columns.append((f"E_{name}", [
            p.spectrum.energy(lb) if p.spectrum and p.spectrum.has(lb) else np.nan
            for p in points]))
    columns.append(("min_overlap", [
        p.spectrum.min_overlap if p.spectrum and p.spectrum.states else np.nan
        for p in points]))
    errors = [f"point {i}: {p.error}" for i, p in enumerate(points) if p.error]
    ctx.write_csv("spectrum.csv", columns, extra_header=errors[:20])
    if ctx.want_svg:
        flux = [p.flux[0] if int(sec["channel"]) == 1 else p.flux[1] for p in points]
        series = [(f"E_{_label_name(lb)}", flux, dict(columns)[f"E_{_label_name(lb)}"])
                  for lb in labels]
        ctx.write_text("spectrum.svg", svg.line_plot(
            series, xlabel="flux (Phi0)", ylabel="energy (GHz)",
            title="Labeled spectrum", header_comment=ctx.header))
    ctx.write_manifest(time.time() - start, {"points": len(points),
                                             "errors": len(errors)})
    return 0


def cmd_zz(ctx: RunContext) -> int:
    sec = ctx.config["zz"]
    circuit, qubits = _sweep_circuit(ctx, sec)
    mode = str(sec["mode"])
    if mode not in ("1d", "2d"):
        raise ConfigError("zz.mode must be '1d' or '2d'")
    grid1 = _grid(sec["grid1"], "zz.grid1")
    if ctx.dry_run:
        n = len(grid1) if mode == "1d" else len(grid1) * len(_grid(sec["grid2"], "zz.grid2"))
        print(f"plan: zz {mode} sweep, {n} points x dim {circuit.dim}, "
              f"workers {ctx.workers}")
        return 0
    start = time.time()
    parts = assemble(circuit)
    bare = BareBasis.from_circuit(circuit)
    zz_labels = computational_labels(circuit.mode_ids, *qubits)

    if mode == "1d":
        points = sweep_1d(parts, bare, channel=int(sec["channel"]), grid=grid1,
                          wanted=list(zz_labels.values()), zz_labels=zz_labels,
                          fixed_flux=float(sec["fixed_flux"]),
                          n_eigs=int(sec["n_eigs"]),
                          overlap_floor=float(sec["overlap_floor"]),
                          workers=ctx.workers)
        flux1 = [p.flux[0] for p in points]
        flux2 = [p.flux[1] for p in points]
        zeta = np.array([p.zz.zeta if p.zz else np.nan for p in points])
        energies = {k: [p.zz.energies[k] if p.zz else np.nan for p in points]
                    for k in ("00", "01", "10", "11")}
        overlap = [p.spectrum.min_overlap if p.spectrum and p.spectrum.states
                   else np.nan for p in points]
        errors = [f"point {i}: {p.error}" for i, p in enumerate(points) if p.error]
    else:
        grid2 = _grid(sec["grid2"], "zz.grid2")
        grid = sweep_2d(parts, bare, grid1, grid2, zz_labels,
                        n_eigs=int(sec["n_eigs"]),
                        overlap_floor=float(sec["overlap_floor"]),
                        workers=ctx.workers)
        f1m, f2m = np.meshgrid(grid.grid1, grid.grid2, indexing="ij")
        flux1, flux2 = f1m.ravel(), f2m.ravel()
        zeta = grid.zeta.ravel()
        energies = {k: v.ravel() for k, v in grid.energies.items()}
        overlap = grid.min_overlap.ravel()
        errors = [f"({i},{j}): {msg}" for i, j, msg in grid.errors]

    with np.errstate(divide="ignore"):
        log10 = np.log10(np.abs(zeta))
    columns = [
        ("flux1", flux1), ("flux2", flux2), ("zeta_GHz", zeta),
        ("log10_abs_zeta", log10),
        ("E00", energies["00"]), ("E01", energies["01"]),
        ("E10", energies["10"]), ("E11", energies["11"]),
        ("min_overlap", overlap),
    ]
    name = f"zz_{mode}.csv"
    ctx.write_csv(name, columns, extra_header=errors[:20])
    if mode == "2d":
        lines = [f"# {ctx.header}", "# dense grid of zeta_GHz; rows = flux1, columns = flux2",
                 "flux1\\flux2," + ",".join(_fmt_cell(g) for g in grid.grid2)]
        for i, g1 in enumerate(grid.grid1):
            lines.append(_fmt_cell(g1) + "," +
                         ",".join(_fmt_cell(z) for z in grid.zeta[i]))
        ctx.write_text("zz_2d_grid.csv", "\n".join(lines) + "\n")
        if ctx.want_svg:
            ctx.write_text("zz_2d.svg", svg.heatmap(
                grid.grid1, grid.grid2, grid.log10_abs_zeta,
                xlabel="flux 1 (Phi0)", ylabel="flux 2 (Phi0)",
                title="log10 |zeta| landscape", zlabel="log10|zeta/GHz|",
                header_comment=ctx.header))
    elif ctx.want_svg:
        flux = flux1 if int(sec["channel"]) == 1 else flux2
        ctx.write_text("zz_1d.svg", svg.line_plot(
            [("|zeta|", flux, np.abs(zeta))], xlabel="flux (Phi0)",
            ylabel="log10 |zeta/GHz|", title="ZZ strength", logy=True,
            header_comment=ctx.header))
    ctx.write_manifest(time.time() - start, {"points": len(zeta),
                                             "errors": len(errors)})
    return 0


def cmd_pulse_preview(ctx: RunContext) -> int:
    pulse = _build_pulse(ctx)
    if ctx.dry_run:
        print(f"plan: preview pulse idle={pulse.phi_idle} amp={pulse.phi_amp} "
              f"T={pulse.duration}")
        return 0
    start = time.time()
    sec = ctx.config["pulse"]
    t = np.arange(0.0, pulse.duration + 1e-9, float(sec["sample_dt"]))
    t[-1] = pulse.duration
    phi = waveform(pulse, t)
    ctx.write_csv("pulse.csv", [("t_ns", t), ("flux1", phi), ("flux2", phi)])
    if ctx.want_svg:
        ctx.write_text("pulse.svg", svg.line_plot(
            [("flux1", t, phi), ("flux2", t, phi)], xlabel="t (ns)",
            ylabel="flux (Phi0)", title="Gate flux pulses",
            header_comment=ctx.header))
    ctx.write_manifest(time.time() - start)
    return 0


def _gate_frame(ctx: RunContext, reduction: int | None, n_eigs: int,
                overlap_floor: float):
    circuit = ctx.circuit()
    qubits = tuple(str(q) for q in ctx.config["zz"]["qubits"])
    parts = assemble(circuit)
    bare = BareBasis.from_circuit(circuit)
    idle = _resolve_bias(ctx, ctx.config["pulse"]["idle"], "idle")
    frame = prepare_gate_frame(parts, bare, qubits, (idle, idle),
                               reduction=reduction, n_eigs=n_eigs,
                               overlap_floor=overlap_floor)
    return frame, parts, bare, qubits, idle


def cmd_evolve(ctx: RunContext) -> int:
    sec = ctx.config["dynamics"]
    pulse = _build_pulse(ctx)
    if ctx.dry_run:
        steps = int(np.ceil(pulse.duration / float(sec["dt"])))
        print(f"plan: evolve initial |{sec['initial']}> for {pulse.duration} ns, "
              f"{steps} steps, reduction {sec['reduction'] or 'none'}")
        return 0
    start = time.time()
    reduction = int(sec["reduction"]) or None
    frame, *_ = _gate_frame(ctx, reduction, int(sec["n_eigs"]),
                            float(sec["overlap_floor"]))
    initial = str(sec["initial"])
    if initial not in frame.keys:
        raise ConfigError(f"initial state {initial!r} not in {frame.keys}")
    cfg = PropagationConfig(dt=float(sec["dt"]), stride=int(sec["stride"]),
                            method=str(sec["method"]))
    record = {key: frame.vector(key) for key in frame.keys}
    traj = propagate(frame.parts, (pulse, pulse), frame.vector(initial), cfg,
                     record_states=record)
    columns: list[tuple[str, np.ndarray]] = [("t_ns", traj.times)]
    for key in frame.keys:
        columns.append((f"P_{key}", traj.populations[key]))
    columns.append(("norm", traj.norms))
    ctx.write_csv("evolve.csv", columns,
                  extra_header=[f"initial state |{initial}>, "
                                f"idle flux {frame.idle_flux[0]:.9g}"])
    if ctx.want_svg:
        series = []
        own = traj.populations[initial]
        series.append((f"1-P_{initial}", traj.times, np.clip(1.0 - own, 1e-16, None)))
        for key in frame.keys[4:]:
            series.append((f"P_{key}", traj.times,
                           np.clip(traj.populations[key], 1e-16, None)))
        ctx.write_text("evolve.svg", svg.line_plot(
            series, xlabel="t (ns)", ylabel="log10 population",
            title=f"Evolution from |{initial}>", logy=True,
            header_comment=ctx.header))
    ctx.write_manifest(time.time() - start)
    return 0


def _gate_result_dict(result: GateResult) -> dict:
    return {
        "fidelity": result.fidelity,
        "delta_phi_rad": result.delta_phi,
        "swap_error_01": result.swap_error_01,
        "swap_error_10": result.swap_error_10,
        "leak_error_11": result.leak_error_11,
        "phases_rad": {k: result.phases[k] for k in ("00", "01", "10", "11")},
        "leakage": dict(result.leakage),
    }


def _print_gate_result(result: GateResult) -> None:
    print(f"  fidelity          : {result.fidelity:.6f}")
    print(f"  delta_phi (rad)   : {result.delta_phi:+.3e}")
    print(f"  swap error 01     : {result.swap_error_01:.3e}")
    print(f"  swap error 10     : {result.swap_error_10:.3e}")
    print(f"  leak error 11     : {result.leak_error_11:.3e}")
    for key, value in result.leakage.items():
        print(f"  leakage from |{key}> : {value:.3e}")


def cmd_calibrate(ctx: RunContext, args) -> int:
    sec = dict(ctx.config["calibrate"])
    if args.duration is not None:
        sec["duration"] = args.duration
    if args.order is not None:
        sec["order"] = args.order
    if args.restarts is not None:
        sec["restarts"] = args.restarts
    idle = _resolve_bias(ctx, ctx.config["pulse"]["idle"], "idle")
    work = _resolve_bias(ctx, "auto", "work")
    if ctx.dry_run:
        print(f"plan: calibrate T={sec['duration']} ns, order {sec['order']}, "
              f"{sec['restarts']} restarts x {sec['max_evals']} evals, "
              f"idle {idle:.6g}, work {work:.6g}")
        return 0
    start = time.time()
    circuit = ctx.circuit()
    qubits = tuple(str(q) for q in ctx.config["zz"]["qubits"])
    parts = assemble(circuit)
    bare = BareBasis.from_circuit(circuit)
    cfg = CalibrationConfig(
        order=int(sec["order"]), restarts=int(sec["restarts"]),
        max_evals=int(sec["max_evals"]),
        weight_leak=float(sec["weight_leak"]),
        weight_phase=float(sec["weight_phase"]),
        dt_cost=float(sec["dt_cost"]), dt_polish=float(sec["dt_polish"]),
        dt_final=float(sec["dt_final"]),
        reduction_cost=int(sec["reduction_cost"]) or None,
        reduction_polish=int(sec["reduction_polish"]) or None,
        reduction_final=int(sec["reduction_final"]) or None,
        polish_evals=int(sec["polish_evals"]),
        stride=int(sec["stride"]), success_cost=float(sec["success_cost"]),
        n_eigs=int(sec["n_eigs"]), overlap_floor=float(sec["overlap_floor"]),
    )
    report = calibrate(parts, bare, qubits, (idle, idle), work,
                       float(sec["duration"]), cfg, seed=ctx.seed,
                       workers=ctx.workers)

    pulse_data = {
        "pulse": {
            "phi_idle": report.pulse.phi_idle,
            "phi_amp": report.pulse.phi_amp,
            "lambdas": list(report.pulse.lambdas),
            "duration": report.pulse.duration,
        },
        "evaluation": {
            "qubits": list(qubits),
            "truncation": str(ctx.config["run"]["truncation"]),
            "idle_flux": report.pulse.phi_idle,
            "dt": cfg.dt_final,
            "stride": cfg.stride,
            "reduction": cfg.reduction_final or 0,
            "n_eigs": cfg.n_eigs,
            "overlap_floor": cfg.overlap_floor,
        },
    }
    ctx.write_toml("calibrated_pulse.toml", pulse_data)

    report_data = {
        "calibration": {
            "success": report.success,
            "best_cost": report.best_cost,
            "evaluations": report.evaluations,
            "restarts": report.restarts,
            "seed": report.seed,
            "duration_ns": report.duration,
            "idle_flux": report.idle_flux[0],
            "work_flux": report.work_flux,
            "restart_costs": list(report.restart_costs),
        },
        "result": _gate_result_dict(report.final),
    }
    report_data.update(pulse_data)
    ctx.write_toml("calibration_report.toml", report_data)
    ctx.write_csv("cost_history.csv",
                  [("evaluation", np.array([h[0] for h in report.history])),
                   ("best_cost", np.array([h[1] for h in report.history]))])
    print(f"calibration {'succeeded' if report.success else 'FAILED'}: "
          f"best cost {report.best_cost:.3e} after {report.evaluations} evaluations")
    _print_gate_result(report.final)
    ctx.write_manifest(time.time() - start, {"success": report.success})
    return 0 if report.success else 4


def cmd_fidelity_report(ctx: RunContext, args) -> int:
    pulse_path = args.pulse or ctx.path("calibrated_pulse.toml")
    data = load_pulse_file(pulse_path)
    pulse = _pulse_from_file(data, pulse_path)
    try:
        ev = data["evaluation"]
    except KeyError as exc:
        raise ConfigError(f"pulse file {pulse_path} lacks [evaluation]") from exc
    if ctx.dry_run:
        print(f"plan: re-evaluate stored pulse amp={pulse.phi_amp:.6g} "
              f"T={pulse.duration}")
        return 0
    start = time.time()
    circuit = ctx.device.with_truncation(str(ev["truncation"]))
    parts = assemble(circuit)
    bare = BareBasis.from_circuit(circuit)
    qubits = tuple(str(q) for q in ev["qubits"])
    idle = float(ev["idle_flux"])
    frame = prepare_gate_frame(parts, bare, qubits, (idle, idle),
                               reduction=int(ev["reduction"]) or None,
                               n_eigs=int(ev["n_eigs"]),
                               overlap_floor=float(ev["overlap_floor"]))
    cfg = PropagationConfig(dt=float(ev["dt"]), stride=int(ev["stride"]))
    result = evaluate_gate(frame, (pulse, pulse), cfg)
    print(f"gate evaluation for stored pulse ({pulse_path}):")
    _print_gate_result(result)
    ctx.write_toml("fidelity_report.toml", {
        "pulse_file": os.path.basename(pulse_path),
        "result": _gate_result_dict(result),
    })
    ctx.write_manifest(time.time() - start)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtclink",
        description="Simulate and calibrate remote CZ gates between transmons "
                    "linked by double-transmon couplers and a multimode cable.",
    )
    parser.add_argument("--version", action="version",
                        version=f"dtclink {dtclink.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run configuration TOML")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel workers")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--svg", action="store_true", help="also write SVG plots")
        p.add_argument("--dry-run", action="store_true",
                       help="validate configuration and print the plan")

    for name, help_text in [
        ("validate", "check the device file and print derived mode frequencies"),
        ("spectrum", "labeled energy spectrum over a flux grid"),
        ("zz", "ZZ interaction sweep (1d or 2d per config)"),
        ("pulse-preview", "sample the configured flux pulse"),
        ("evolve", "propagate a computational state under the pulse"),
        ("calibrate", "optimize the pulse for a CZ gate"),
        ("fidelity-report", "re-evaluate a stored calibrated pulse"),
    ]:
        p = sub.add_parser(name, help=help_text)
        common(p)
        if name == "calibrate":
            p.add_argument("--duration", type=float, help="gate duration (ns)")
            p.add_argument("--order", type=int, help="pulse Fourier order")
            p.add_argument("--restarts", type=int, help="optimizer restarts")
        if name == "fidelity-report":
            p.add_argument("--pulse", help="path to calibrated_pulse.toml")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ctx = _load_context(args, args.command)
        if args.command == "validate":
            return cmd_validate(ctx)
        if args.command == "spectrum":
            return cmd_spectrum(ctx)
        if args.command == "zz":
            return cmd_zz(ctx)
        if args.command == "pulse-preview":
            return cmd_pulse_preview(ctx)
        if args.command == "evolve":
            return cmd_evolve(ctx)
        if args.command == "calibrate":
            return cmd_calibrate(ctx, args)
        if args.command == "fidelity-report":
            return cmd_fidelity_report(ctx, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (TrackingError, AccuracyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except DtcLinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
