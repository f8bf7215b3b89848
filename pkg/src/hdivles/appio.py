"""Run configuration, CSV time series, field snapshots and manifests.

Config files are flat `key = value` text (UTF-8, `#` comments).  Unknown keys
are rejected with their line number; every parse error names the offending
field.  A parsed config round-trips losslessly through `format_config`.

Snapshot files carry the magic string HDIVILES1, one JSON header line, then
raw little-endian float64 blocks in C order, one per field named in the
header.  Sampled values sit at cell-centered grid points
x_j = lo + (j + 1/2) (hi - lo) / M along each axis.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import diagnostics
from .diagnostics import DiagnosticsRecord

SNAPSHOT_MAGIC = b"HDIVILES1\n"

CSV_HEADER = "t,ke,enstrophy,palinstrophy,eps_visc,eps_upw,dke_dt,budget_residual,div_max,err_l2,err_h1"


class ConfigError(ValueError):
    """Invalid run configuration; carries the offending field and line."""

    def __init__(self, message, field=None, line=None):
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field {field!r}: "
        super().__init__(prefix + message)
        self.field = field
        self.line = line


@dataclass
class RunConfig:
    """Everything needed to reproduce one run."""

    case: str
    k: int
    cells: tuple
    dt: float
    t_end: float
    scheme: str = "bdf2"
    sigma: Optional[float] = None          # None = 4 (k+1)^2
    nu: Optional[float] = None
    re: Optional[float] = None
    re_tau: Optional[float] = None
    H: Optional[float] = None
    F: Optional[float] = None
    U: Optional[float] = None
    L: Optional[float] = None
    dim: Optional[int] = None
    gamma: Optional[float] = None
    trip_amplitude: Optional[float] = None
    velocity: Optional[str] = None
    extra_pressure: Optional[str] = None
    record_every: int = 1
    snapshot_every: int = 0
    spectrum_every: int = 0
    spectrum_samples: int = 0              # 0 = N (k+1) per axis
    out_dir: str = "out"
    seed: int = 0

    def resolved_sigma(self) -> float:
        return 4.0 * (self.k + 1) ** 2 if self.sigma is None else self.sigma

    def case_params(self) -> dict:
        keys = ("nu", "re", "re_tau", "H", "F", "U", "L", "dim", "gamma",
                "trip_amplitude", "velocity", "extra_pressure")
        out = {k: getattr(self, k) for k in keys if getattr(self, k) is not None}
        out["seed"] = self.seed
        return out

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["cells"] = list(self.cells)
        d["sigma"] = self.resolved_sigma()
        return d


_SCHEMA = {
    "case": str, "k": int, "N": "cells", "dt": float, "t_end": float,
    "scheme": str, "sigma": float, "nu": float, "re": float, "re_tau": float,
    "H": float, "F": float, "U": float, "L": float, "dim": int,
    "gamma": float, "trip_amplitude": float,
    "velocity": str, "extra_pressure": str,
    "record_every": int, "snapshot_every": int, "spectrum_every": int,
    "spectrum_samples": int, "out_dir": str, "seed": int,
}
_REQUIRED = ("case", "k", "N", "dt", "t_end")
_KNOWN_CASES = ("lattice2d", "lattice3d", "tgv3d", "channel_laminar",
                "channel_turbulent", "manufactured")


def parse_config(text: str) -> RunConfig:
    """Parse `key = value` config text into a validated RunConfig."""
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, val = stripped.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", field=key, line=lineno)
        if key in values:
            raise ConfigError("duplicate key", field=key, line=lineno)
        kind = _SCHEMA[key]
        try:
            if kind == "cells":
                parsed = tuple(int(tok) for tok in val.split(","))
            elif kind is int:
                parsed = int(val)
            elif kind is float:
                parsed = float(val)
            else:
                parsed = val
        except ValueError:
            raise ConfigError(f"cannot parse value {val!r} as {getattr(kind, '__name__', kind)}",
                              field=key, line=lineno) from None
        values[key] = parsed
        lines[key] = lineno

    for key in _REQUIRED:
        if key not in values:
            raise ConfigError("required field missing", field=key)

    cells = values.pop("N")
    if np.isscalar(cells) or len(cells) == 1:
        cells = (int(cells[0]),) if not np.isscalar(cells) else (int(cells),)
    cfg = RunConfig(case=values.pop("case"), k=values.pop("k"),
                    cells=tuple(cells), dt=values.pop("dt"),
                    t_end=values.pop("t_end"), **values)

    def bad(fieldname, msg):
        raise ConfigError(msg, field=fieldname, line=lines.get(
            "N" if fieldname == "cells" else fieldname))

    if cfg.case not in _KNOWN_CASES:
        bad("case", f"unknown case {cfg.case!r}; expected one of {_KNOWN_CASES}")
    if cfg.k < 0:
        bad("k", f"polynomial order must be >= 0, got {cfg.k}")
    if any(n < 1 for n in cfg.cells):
        bad("N", f"cell counts must be >= 1, got {cfg.cells}")
    if cfg.dt <= 0:
        bad("dt", f"time step must be positive, got {cfg.dt}")
    if cfg.t_end < 0:
        bad("t_end", f"end time must be nonnegative, got {cfg.t_end}")
    if cfg.scheme not in ("be", "bdf2"):
        bad("scheme", f"scheme must be 'be' or 'bdf2', got {cfg.scheme!r}")
    if cfg.sigma is not None and cfg.sigma <= 0:
        bad("sigma", f"penalty must be positive, got {cfg.sigma}")
    for name in ("record_every", "snapshot_every", "spectrum_every",
                 "spectrum_samples", "seed"):
        if getattr(cfg, name) < 0:
            bad(name, "must be nonnegative")
    return cfg


def format_config(cfg: RunConfig) -> str:
    """Render a RunConfig as config text; parse(format(cfg)) == cfg."""
    out = [f"case = {cfg.case}", f"k = {cfg.k}",
           "N = " + ",".join(str(n) for n in cfg.cells),
           f"dt = {cfg.dt!r}", f"t_end = {cfg.t_end!r}",
           f"scheme = {cfg.scheme}"]
    for name in ("sigma", "nu", "re", "re_tau", "H", "F", "U", "L", "dim",
                 "gamma", "trip_amplitude", "velocity", "extra_pressure"):
        val = getattr(cfg, name)
        if val is not None:
            out.append(f"{name} = {val!r}" if isinstance(val, float)
                       else f"{name} = {val}")
    for name in ("record_every", "snapshot_every", "spectrum_every",
                 "spectrum_samples", "seed"):
        out.append(f"{name} = {getattr(cfg, name)}")
    out.append(f"out_dir = {cfg.out_dir}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# CSV time series
# ---------------------------------------------------------------------------

def _format_row(rec: DiagnosticsRecord) -> str:
    return ",".join(repr(float(x)) for x in rec.astuple())


def write_timeseries(records, path):
    """Write diagnostics records as CSV with the fixed 11-column header."""
    records = list(records)
    if not records:
        raise ValueError("refusing to write an empty time series")
    with open(path, "w", encoding="utf-8") as f:
        f.write(CSV_HEADER + "\n")
        for rec in records:
            f.write(_format_row(rec) + "\n")


def read_timeseries(path):
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected time-series header {header!r}")
        out = []
        for line in f:
            vals = [float(tok) for tok in line.strip().split(",")]
            out.append(DiagnosticsRecord(*vals))
    return out


# ---------------------------------------------------------------------------
# snapshots and states
# ---------------------------------------------------------------------------

def write_snapshot(vel, state, m_per_axis, path):
    """Sampled velocity, vorticity and (3D) Q-criterion in HDIVILES1 format."""
    from .fespace import sample_velocity

    mesh = vel.mesh
    d = mesh.dim
    m = tuple(int(x) for x in m_per_axis)
    _, vals, grads = sample_velocity(vel, state.u, m, deriv=True)

    fields = {}
    for c in range(d):
        fields[f"u{c + 1}"] = vals[..., c]
    if d == 2:
        fields["omega"] = grads[..., 1, 0] - grads[..., 0, 1]
    else:
        omega = np.stack([
            grads[..., 2, 1] - grads[..., 1, 2],
            grads[..., 0, 2] - grads[..., 2, 0],
            grads[..., 1, 0] - grads[..., 0, 1],
        ], axis=-1)
        for c in range(3):
            fields[f"omega{c + 1}"] = omega[..., c]
        S = 0.5 * (grads + np.swapaxes(grads, -1, -2))
        W = 0.5 * (grads - np.swapaxes(grads, -1, -2))
        fields["q"] = 0.5 * (np.sum(W ** 2, axis=(-2, -1)) - np.sum(S ** 2, axis=(-2, -1)))

    header = {
        "dim": d,
        "box": [[lo, hi] for lo, hi in mesh.domain_box],
        "m": list(m),
        "t": float(state.t),
        "fields": list(fields.keys()),
        "dtype": "<f8",
        "order": "C",
    }
    with open(path, "wb") as f:
        f.write(SNAPSHOT_MAGIC)
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        for name in header["fields"]:
            f.write(np.ascontiguousarray(fields[name], dtype="<f8").tobytes())
    return header


def read_snapshot(path):
    with open(path, "rb") as f:
        magic = f.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not an HDIVILES1 snapshot")
        header = json.loads(f.readline().decode("utf-8"))
        shape = tuple(header["m"])
        count = int(np.prod(shape))
        fields = {}
        for name in header["fields"]:
            buf = f.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path}: truncated block for field {name!r}")
            fields[name] = np.frombuffer(buf, dtype="<f8").reshape(shape)
    return header, fields


def write_state(state, path):
    """Coefficient-level state for post-processing (channel statistics)."""
    np.savez(path, t=state.t, u=state.u, p=state.p)


def read_state(path):
    from .timestepping import FieldState
    with np.load(path) as data:
        return FieldState(t=float(data["t"]), u=data["u"], p=data["p"])


# ---------------------------------------------------------------------------
# run orchestration
# ---------------------------------------------------------------------------

class RunSink:
    """Streams records/snapshots to disk as they are produced."""

    def __init__(self, out_dir, vel, m_snapshot):
        self.out_dir = out_dir
        self.vel = vel
        self.m_snapshot = m_snapshot
        os.makedirs(out_dir, exist_ok=True)
        os.makedirs(os.path.join(out_dir, "snapshots"), exist_ok=True)
        os.makedirs(os.path.join(out_dir, "states"), exist_ok=True)
        self._csv = open(os.path.join(out_dir, "timeseries.csv"), "w",
                         encoding="utf-8")
        self._csv.write(CSV_HEADER + "\n")
        self._csv.flush()
        self.files = {"timeseries": "timeseries.csv", "snapshots": [],
                      "states": [], "spectra": []}
        self._snap_index = 0

    def record(self, rec):
        self._csv.write(_format_row(rec) + "\n")
        self._csv.flush()

    def snapshot(self, t, state):
        name = f"snapshots/snap_{self._snap_index:06d}.hdiv"
        write_snapshot(self.vel, state, self.m_snapshot,
                       os.path.join(self.out_dir, name))
        sname = f"states/state_{self._snap_index:06d}.npz"
        write_state(state, os.path.join(self.out_dir, sname))
        self.files["snapshots"].append(name)
        self.files["states"].append(sname)
        self._snap_index += 1

    def spectrum(self, t, state):
        rec = diagnostics.spectrum(self.vel, state.u, t=t)
        name = f"spectrum_{len(self.files['spectra']):06d}.csv"
        write_spectrum(rec, os.path.join(self.out_dir, name))
        self.files["spectra"].append(name)

    def close(self):
        self._csv.close()


def write_spectrum(rec, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("kappa,energy\n")
        f.write(f"# t = {float(rec.t)!r}, grid_ke = {float(rec.grid_ke)!r}\n")
        for kap, en in zip(rec.kappa, rec.energy):
            f.write(f"{int(kap)},{float(en)!r}\n")


def read_spectrum(path):
    kappas, energies = [], []
    t = grid_ke = None
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline()
        meta = f.readline()
        parts = meta.lstrip("#").split(",")
        t = float(parts[0].split("=")[1])
        grid_ke = float(parts[1].split("=")[1])
        for line in f:
            k, e = line.strip().split(",")
            kappas.append(int(k))
            energies.append(float(e))
    return diagnostics.SpectrumRecord(t=t, kappa=np.array(kappas),
                                      energy=np.array(energies),
                                      grid_ke=grid_ke)


def write_manifest(cfg: RunConfig, out_dir, files, extra=None):
    """Echo the fully resolved configuration next to the run outputs."""
    manifest = {
        "format": "hdivles-run-manifest-1",
        "config": cfg.as_dict(),
        "files": files,
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_manifest(run_dir):
    with open(os.path.join(run_dir, "manifest.json"), "r", encoding="utf-8") as f:
        return json.load(f)


def execute_run(cfg: RunConfig, out_dir=None):
    """Run a config end to end: case, discretization, march, files, manifest."""
    from . import timestepping as ts
    from .cases import make_case

    out_dir = cfg.out_dir if out_dir is None else out_dir
    case = make_case(cfg.case, **cfg.case_params())
    problem = ts.discretize(case, cfg.k, cfg.cells, sigma=cfg.sigma)
    scheme = ts.SchemeConfig(scheme=cfg.scheme, dt=cfg.dt, t_end=cfg.t_end)

    if cfg.spectrum_samples:
        m_snap = (cfg.spectrum_samples,) * case.dim
    else:
        m_snap = tuple(n * (cfg.k + 1) for n in problem.mesh.cells_per_axis)

    sink = RunSink(out_dir, problem.vel, m_snap)
    try:
        result = ts.run(problem, scheme, record_every=cfg.record_every,
                        snapshot_every=cfg.snapshot_every,
                        spectrum_every=cfg.spectrum_every, sink=sink)
    finally:
        sink.close()
    write_manifest(cfg, out_dir, sink.files,
                   extra={"n_records": len(result.records)})
    return result
