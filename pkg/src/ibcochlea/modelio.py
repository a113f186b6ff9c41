"""Model container and its self-describing binary file format.

A model file holds everything the engine needs to start a run: the fluid
lattice parameters, every material patch (rest geometry, force law, fixed
mask) and the default drive target. Read and write round-trip bit-exactly.

Layout (native endian, marker-checked):

    magic   8s   b"IBCHMOD1"
    endian  u32  0x01020304
    version u32  1
    fluid   3*u32 dims, f64 h, f64 rho, f64 mu
    drive   str grid name (may be empty), 3*f64 direction
    ngrids  u32
    per grid:
        str name
        2*u32 dims, 2*f64 dq
        u8 law tag (1 membrane, 2 window, 3 wall) + law parameters (f64s:
            membrane k0, lam, anchor_k0; window k_w, r_w, anchor_k;
            wall k_t)
        f64 rest positions (n1*n2*3, C order)
        u8 fixed mask (n1*n2)
"""

from dataclasses import dataclass, field

import numpy as np

from . import _binio
from ._binio import FormatError
from .grid import FluidGrid
from .structures import LagrangianGrid, Membrane, RigidWall, WindowPlate

MAGIC = b"IBCHMOD1"
VERSION = 1

_LAW_TAGS = {Membrane: 1, WindowPlate: 2, RigidWall: 3}


@dataclass
class ChannelModel:
    """Simulation-ready geometry: fluid parameters plus material patches."""

    fluid_dims: tuple
    h: float
    rho: float
    mu: float
    grids: list = field(default_factory=list)
    drive_grid: str = ""
    drive_direction: tuple = (1.0, 0.0, 0.0)

    def make_fluid(self) -> FluidGrid:
        return FluidGrid(dims=self.fluid_dims, h=self.h, rho=self.rho, mu=self.mu)

    def grid(self, name: str) -> LagrangianGrid:
        for g in self.grids:
            if g.id == name:
                return g
        raise KeyError(f"model has no grid named '{name}'")

    @property
    def total_points(self) -> int:
        return sum(g.n_points for g in self.grids)


def _write_law(fh, law):
    tag = _LAW_TAGS[type(law)]
    _binio.write_values(fh, "B", tag)
    if isinstance(law, Membrane):
        _binio.write_values(fh, "ddd", law.k0, law.lam, law.anchor_k0)
    elif isinstance(law, WindowPlate):
        _binio.write_values(fh, "ddd", law.k_w, law.r_w, law.anchor_k)
    else:
        _binio.write_values(fh, "d", law.k_t)


def _read_law(fh, path):
    (tag,) = _binio.read_values(fh, "B", path)
    if tag == 1:
        k0, lam, anchor = _binio.read_values(fh, "ddd", path)
        return Membrane(k0, lam, anchor)
    if tag == 2:
        k_w, r_w, anchor = _binio.read_values(fh, "ddd", path)
        return WindowPlate(k_w, r_w, anchor)
    if tag == 3:
        (k_t,) = _binio.read_values(fh, "d", path)
        return RigidWall(k_t)
    raise FormatError(f"{path}: unknown material law tag {tag}")


def write_model(path, model: ChannelModel):
    """Write a model file; the format round-trips bit-exactly."""
    with open(path, "wb") as fh:
        _binio.write_magic(fh, MAGIC, VERSION)
        _binio.write_values(fh, "III", *model.fluid_dims)
        _binio.write_values(fh, "ddd", model.h, model.rho, model.mu)
        _binio.write_str(fh, model.drive_grid)
        _binio.write_values(fh, "ddd", *model.drive_direction)
        _binio.write_values(fh, "I", len(model.grids))
        for g in model.grids:
            _binio.write_str(fh, g.id)
            _binio.write_values(fh, "II", *g.dims)
            _binio.write_values(fh, "dd", *g.dq)
            _write_law(fh, g.law)
            _binio.write_array(fh, g.X_rest, np.float64)
            _binio.write_array(fh, g.fixed, np.uint8)


def read_model(path) -> ChannelModel:
    """Read a model file written by write_model."""
    path = str(path)
    with open(path, "rb") as fh:
        version = _binio.read_magic(fh, MAGIC, path)
        if version != VERSION:
            raise FormatError(f"{path}: unsupported model version {version}")
        dims = _binio.read_values(fh, "III", path)
        h, rho, mu = _binio.read_values(fh, "ddd", path)
        drive_grid = _binio.read_str(fh, path)
        drive_dir = _binio.read_values(fh, "ddd", path)
        (ngrids,) = _binio.read_values(fh, "I", path)
        grids = []
        for _ in range(ngrids):
            name = _binio.read_str(fh, path)
            n1, n2 = _binio.read_values(fh, "II", path)
            dq = _binio.read_values(fh, "dd", path)
            law = _read_law(fh, path)
            X_rest = _binio.read_array(fh, np.float64, (n1, n2, 3), path)
            fixed = _binio.read_array(fh, np.uint8, (n1, n2), path).astype(bool)
            grids.append(
                LagrangianGrid(id=name, dims=(n1, n2), dq=dq, X_rest=X_rest, law=law, fixed=fixed)
            )
    return ChannelModel(
        fluid_dims=tuple(int(n) for n in dims),
        h=h,
        rho=rho,
        mu=mu,
        grids=grids,
        drive_grid=drive_grid,
        drive_direction=tuple(drive_dir),
    )
