"""Run configuration, profile checkpoints, and result export.

Configs are plain-text INI files with [model], [grid], [descent],
[scan] and [paths] sections; every value is validated against the
module invariants before any computation starts.  Checkpoints carry a
text header plus the raw little-endian float64 payload so a round trip
is bit exact.  Exports are CSV with 17 significant digits (enough to
round-trip a double) or JSON records.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .descent import DescentConfig
from .errors import CheckpointError, ConfigError
from .grids import Grid, Profile
from .model import ModelParams
from .parabolic import StabilityReport
from .speeds import GridSpec, ScanConfig, SpeedScan

CHECKPOINT_MAGIC = "FHNPULSE-CHECKPOINT"
CHECKPOINT_VERSION = 1
FLOAT_FMT = "%.17g"


@dataclass
class RunConfig:
    """Fully validated inputs for one workflow invocation."""

    model: ModelParams
    grid: GridSpec
    descent: DescentConfig
    scan: ScanConfig
    c_start: Optional[float] = None
    c_end: Optional[float] = None
    dc: float = 0.05
    output_dir: Path = field(default_factory=lambda: Path("out"))
    checkpoint_dir: Optional[Path] = None

    def __post_init__(self):
        if self.checkpoint_dir is None:
            self.checkpoint_dir = self.output_dir / "checkpoints"


def _get(section, key, cast, default=None, required=False):
    if section is None or key not in section:
        if required:
            raise ConfigError(f"missing required key '{key}'", key=key)
        return default
    raw = section[key]
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse '{key}' = {raw!r}: {exc}", key=key) from exc


def load_config(path, overrides: Optional[dict] = None) -> RunConfig:
    """Parse and validate a run configuration file.

    ``overrides`` (flat ``key -> value`` with CLI precedence) replace
    file values before validation.  Tolerances default per dimension:
    on the line delta1=1e-8, delta2=1e-14; on a strip delta1=1e-6,
    delta2=1e-12 (coarser grids make the energy noisier there).
    """
    parser = configparser.ConfigParser()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    sections = {name: parser[name] for name in parser.sections()}
    overrides = dict(overrides or {})

    def pick(section, key, cast, default=None, required=False):
        if key in overrides and overrides[key] is not None:
            return cast(overrides[key])
        return _get(sections.get(section), key, cast, default, required)

    dim = pick("model", "dim", int, 1)
    try:
        model = ModelParams(
            d=pick("model", "d", float, required=True),
            gamma=pick("model", "gamma", float, required=True),
            beta=pick("model", "beta", float, required=True),
            c=pick("model", "c", float, 5.0),
            dim=dim,
            L=pick("model", "L", float, 1.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), key=_guess_key(str(exc))) from exc

    grid = GridSpec(
        h=pick("grid", "h", float, 0.01 if dim == 1 else 0.05),
        domain_length=pick("grid", "domain_length", float, None),
        right_margin=pick("grid", "right_margin", float, 25.0),
        n_y=pick("grid", "n_y", int, 80),
    )
    if grid.h <= 0:
        raise ConfigError(f"grid spacing must be positive, got {grid.h}", key="h")

    try:
        descent = DescentConfig(
            theta=pick("descent", "theta", float, 0.5),
            alpha_init=pick("descent", "alpha_init", float, 1e-3),
            delta1=pick("descent", "delta1", float, 1e-8 if dim == 1 else 1e-6),
            delta2=pick("descent", "delta2", float, 1e-14 if dim == 1 else 1e-12),
            delta3=pick("descent", "delta3", float, 1e-3),
            max_iters=pick("descent", "max_iters", int, 200_000),
            max_backtracks=pick("descent", "max_backtracks", int, 60),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), key=_guess_key(str(exc))) from exc

    scan = ScanConfig(
        descent=descent,
        grid=grid,
        tol_c=pick("scan", "tol_c", float, 1e-3),
        tol_j_rel=pick("scan", "tol_j_rel", float, 1e-6),
        adapt=pick("scan", "adapt", lambda s: str(s).lower() in ("1", "true", "yes"), True),
        dc_fine=pick("scan", "dc_fine", float, 0.01),
    )

    return RunConfig(
        model=model,
        grid=grid,
        descent=descent,
        scan=scan,
        c_start=pick("scan", "c_start", float, None),
        c_end=pick("scan", "c_end", float, None),
        dc=pick("scan", "dc", float, 0.05),
        output_dir=Path(pick("paths", "output_dir", str, "out")),
        checkpoint_dir=_opt_path(pick("paths", "checkpoint_dir", str, None)),
    )


def _opt_path(value):
    return Path(value) if value is not None else None


def _guess_key(message: str) -> Optional[str]:
    for key in ("beta", "gamma", "theta", "alpha_init", "delta1", "delta2", "delta3", "c", "d", "L"):
        if key in message:
            return key
    return None


def save_checkpoint(profile: Profile, meta: dict, path) -> Path:
    """Write a profile with provenance metadata; the payload is bit exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = profile.grid
    payload = np.ascontiguousarray(profile.samples, dtype="<f8")
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        f"dim {g.dim}",
        f"origin_a {g.origin!r}",
        f"h {g.h!r}",
        f"n_x {g.n_x}",
        f"half_width {g.half_width!r}",
        f"n_y {g.n_y}",
        f"weight_scale {g.weight_scale!r}",
    ]
    for key in ("c", "d", "gamma", "beta", "J"):
        value = meta.get(key)
        lines.append(f"{key} {'' if value is None else repr(float(value))}".rstrip())
    lines.append(f"payload float64 {payload.size}")
    header = "\n".join(lines) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload.tobytes())
    return path


def load_checkpoint(path) -> Tuple[Profile, dict]:
    """Read a checkpoint; raises :class:`CheckpointError` on any inconsistency."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    try:
        header_end = 0
        lines = []
        while True:
            nl = blob.index(b"\n", header_end)
            line = blob[header_end:nl].decode("ascii")
            lines.append(line)
            header_end = nl + 1
            if line.startswith("payload"):
                break
    except (ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"malformed checkpoint header in {path}") from exc

    first = lines[0].split()
    if len(first) != 2 or first[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a profile checkpoint")
    if int(first[1]) != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {first[1]} not supported (expected {CHECKPOINT_VERSION})"
        )
    fields = {}
    for line in lines[1:-1]:
        key, _, value = line.partition(" ")
        fields[key] = value
    tokens = lines[-1].split()
    if len(tokens) != 3 or tokens[1] != "float64":
        raise CheckpointError(f"malformed payload declaration in {path}")
    count = int(tokens[2])
    payload = blob[header_end:]
    if len(payload) != 8 * count:
        raise CheckpointError(
            f"payload length mismatch in {path}: header says {count} samples, "
            f"file holds {len(payload) // 8}"
        )
    samples = np.frombuffer(payload, dtype="<f8").copy()

    dim = int(fields["dim"])
    grid = Grid(
        origin=float(fields["origin_a"]),
        h=float(fields["h"]),
        n_x=int(fields["n_x"]),
        dim=dim,
        half_width=float(fields["half_width"]),
        n_y=int(fields["n_y"]),
        weight_scale=float(fields["weight_scale"]),
    )
    if samples.size != grid.n_points:
        raise CheckpointError(
            f"sample count {samples.size} does not match grid ({grid.n_points} points)"
        )
    meta = {}
    for key in ("c", "d", "gamma", "beta", "J"):
        raw = fields.get(key, "")
        meta[key] = float(raw) if raw else None
    return Profile(grid, samples.reshape(grid.shape)), meta


def export_scan(scan: SpeedScan, path) -> Path:
    """Write (c, J, converged, checkpoint_path) rows, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("c,J,converged,checkpoint_path\n")
        for s in sorted(scan.samples, key=lambda s: s.c):
            fh.write(
                f"{FLOAT_FMT % s.c},{FLOAT_FMT % s.J},{int(s.converged)},"
                f"{s.checkpoint or ''}\n"
            )
    return path


def export_profile(profile: Profile, path) -> Path:
    """Write (x, w) rows, or (x, y, w) rows for a strip."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = profile.grid
    with open(path, "w", encoding="ascii") as fh:
        if g.dim == 1:
            fh.write("x,w\n")
            for x, w in zip(g.x, profile.samples):
                fh.write(f"{FLOAT_FMT % x},{FLOAT_FMT % w}\n")
        else:
            fh.write("x,y,w\n")
            xs, ys = g.x, g.y
            for j, x in enumerate(xs):
                for k, y in enumerate(ys):
                    fh.write(
                        f"{FLOAT_FMT % x},{FLOAT_FMT % y},{FLOAT_FMT % profile.samples[j, k]}\n"
                    )
    return path


def read_profile_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read back an exported profile as (coordinates, values) arrays."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim == 1:
        data = data[None, :]
    return data[:, :-1], data[:, -1]


def export_report(report, path) -> Path:
    """Write any result dataclass (stability report, roots, ...) as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if dataclasses.is_dataclass(report) and not isinstance(report, type):
        payload = dataclasses.asdict(report)
    else:
        payload = report
    payload = _strip_arrays(payload)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")
    return path


def _strip_arrays(obj):
    if isinstance(obj, dict):
        return {k: _strip_arrays(v) for k, v in obj.items() if not isinstance(v, (np.ndarray, Profile))}
    if isinstance(obj, (list, tuple)):
        return [_strip_arrays(v) for v in obj if not isinstance(v, (np.ndarray, Profile))]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


__all__ = [
    "RunConfig",
    "load_config",
    "save_checkpoint",
    "load_checkpoint",
    "export_scan",
    "export_profile",
    "read_profile_csv",
    "export_report",
    "StabilityReport",
]
