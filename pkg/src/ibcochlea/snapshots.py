"""Snapshot files: instantaneous grid positions plus run metadata.

One snapshot is written at the configured cadence during a run and is the
unit the analysis tools consume. Positions are stored as raw float64, so
a write/read round trip is bit-exact.

Layout (native endian, marker-checked):

    magic    8s  b"IBSNAP01"
    endian   u32, version u32
    step     u64, time f64, dt f64
    fluid    3*u32 dims, f64 h
    u8 has_velocity
    ngrids   u32
    per grid: str name, 2*u32 dims, f64 positions (n1*n2*3)
    velocity f64 (3*n1*n2*n3), only when flagged
"""

import os
import re
from dataclasses import dataclass

import numpy as np

from . import _binio

MAGIC = b"IBSNAP01"
VERSION = 1

_NAME_RE = re.compile(r"snapshot_(\d+)\.snap$")


@dataclass
class Snapshot:
    """Grid positions at one time step."""

    step: int
    time: float
    dt: float
    fluid_dims: tuple
    h: float
    positions: dict
    velocity: np.ndarray = None

    def grid(self, name: str) -> np.ndarray:
        try:
            return self.positions[name]
        except KeyError:
            raise KeyError(f"snapshot at step {self.step} has no grid '{name}'") from None


def snapshot_path(out_dir, step: int) -> str:
    return os.path.join(out_dir, f"snapshot_{step:08d}.snap")


def write_snapshot(path, state, include_velocity: bool = False):
    with open(path, "wb") as fh:
        _binio.write_magic(fh, MAGIC, VERSION)
        _binio.write_values(fh, "Qdd", state.n, state.n * state.dt, state.dt)
        _binio.write_values(fh, "III", *state.fluid.dims)
        _binio.write_values(fh, "d", state.fluid.h)
        _binio.write_values(fh, "B", 1 if include_velocity else 0)
        _binio.write_values(fh, "I", len(state.grids))
        for g in state.grids:
            _binio.write_str(fh, g.id)
            _binio.write_values(fh, "II", *g.dims)
            _binio.write_array(fh, g.X, np.float64)
        if include_velocity:
            _binio.write_array(fh, state.fluid.u, np.float64)


def read_snapshot(path) -> Snapshot:
    path = str(path)
    with open(path, "rb") as fh:
        version = _binio.read_magic(fh, MAGIC, path)
        if version != VERSION:
            raise _binio.FormatError(f"{path}: unsupported snapshot version {version}")
        step, time, dt = _binio.read_values(fh, "Qdd", path)
        dims = _binio.read_values(fh, "III", path)
        (h,) = _binio.read_values(fh, "d", path)
        (has_vel,) = _binio.read_values(fh, "B", path)
        (ngrids,) = _binio.read_values(fh, "I", path)
        positions = {}
        for _ in range(ngrids):
            name = _binio.read_str(fh, path)
            n1, n2 = _binio.read_values(fh, "II", path)
            positions[name] = _binio.read_array(fh, np.float64, (n1, n2, 3), path)
        velocity = None
        if has_vel:
            velocity = _binio.read_array(fh, np.float64, (3, *dims), path)
    return Snapshot(
        step=int(step),
        time=time,
        dt=dt,
        fluid_dims=tuple(int(n) for n in dims),
        h=h,
        positions=positions,
        velocity=velocity,
    )


def list_snapshots(directory):
    """Sorted (step, path) pairs for every snapshot file in a directory."""
    out = []
    for entry in os.listdir(directory):
        m = _NAME_RE.match(entry)
        if m:
            out.append((int(m.group(1)), os.path.join(directory, entry)))
    out.sort()
    return out


def load_window(directory, window=None):
    """Snapshots whose step lies in the inclusive window (or all of them)."""
    picked = []
    for step, path in list_snapshots(directory):
        if window is None or window[0] <= step <= window[1]:
            picked.append(read_snapshot(path))
    return picked
