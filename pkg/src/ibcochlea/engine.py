"""The time loop: forces, conflict-free force spreading, fluid solve, advection.

Each step (1) evaluates material forces, (2) spreads them onto the fluid
lattice through a two-phase slab schedule whose write regions are disjoint
within a phase, (3) advances the fluid, and (4) moves the material points
with the interpolated new velocity. Every parallel section either writes
disjoint data or reduces in a fixed order, so positions after any number
of steps are bitwise identical for any thread count, and a run can resume
from a checkpoint bit-exactly.
"""

import os
import time as _time
from dataclasses import dataclass

import numpy as np

from . import _binio, kernel, snapshots
from .fluid import FourierWorkspace
from .grid import FluidGrid
from .modelio import ChannelModel, _read_law, _write_law
from .parallel import WorkerPool, chunk_ranges
from .structures import DriveSignal, LagrangianGrid, total_force

CKPT_MAGIC = b"IBCKPT01"
CKPT_VERSION = 1

SLAB_CELLS = 4  # stencil reach is 2 cells, so width-4 slabs decouple phases


class SimulationError(RuntimeError):
    """A step produced invalid state (non-finite values)."""


@dataclass
class SimState:
    """The single evolving object of the time loop."""

    n: int
    dt: float
    fluid: FluidGrid
    grids: list
    drive: DriveSignal = None
    drive_grid: str = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("step index must be nonnegative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def time(self) -> float:
        return self.n * self.dt


def make_state(model: ChannelModel, dt: float, drive: DriveSignal = None) -> SimState:
    """Fresh simulation state from a model; the model stays untouched."""
    grids = [
        LagrangianGrid(
            id=g.id, dims=g.dims, dq=g.dq, X_rest=g.X_rest.copy(), law=g.law, fixed=g.fixed.copy()
        )
        for g in model.grids
    ]
    return SimState(
        n=0,
        dt=dt,
        fluid=model.make_fluid(),
        grids=grids,
        drive=drive,
        drive_grid=model.drive_grid if drive is not None else None,
    )


class SpreadScheduler:
    """Two-phase slab partition of the spreading writes.

    Points are bucketed by the slab (along fluid axis 1) holding their
    stencil base cell. Slabs are 4 cells wide, so the 4x4x4 supports of any
    two same-parity slabs never touch; even slabs scatter first, then odd.
    Buckets are rebuilt only when some point migrates across a slab
    boundary.
    """

    def __init__(self, dims, h):
        self.dims = dims
        self.h = h
        n1 = dims[0]
        self.nslabs = n1 // SLAB_CELLS if n1 >= 2 * SLAB_CELLS else 1
        self._ids = None
        self.perm = None
        self.slab_bounds = None

    def refresh(self, grids):
        if self.nslabs == 1:
            return
        ids = [
            (np.floor(g.X[..., 0].ravel() / self.h).astype(np.int64) % self.dims[0]) // SLAB_CELLS
            for g in grids
        ]
        if self._ids is not None and all(np.array_equal(a, b) for a, b in zip(ids, self._ids)):
            return
        self._ids = ids
        # permutation of the concatenated point list grouping points by slab
        # (grid order, then point order inside each slab) plus slab bounds
        offsets = np.cumsum([0] + [g.n_points for g in grids])
        parts, counts = [], np.zeros(self.nslabs, dtype=np.int64)
        by_grid = [[np.flatnonzero(gi == s) for s in range(self.nslabs)] for gi in ids]
        for s in range(self.nslabs):
            for gi, buckets in enumerate(by_grid):
                parts.append(buckets[s] + offsets[gi])
                counts[s] += buckets[s].size
        self.perm = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        self.slab_bounds = np.concatenate(([0], np.cumsum(counts)))

    def phase_slabs(self, phase: int):
        return [s for s in range(self.nslabs) if s % 2 == phase]


class Engine:
    """Owns the spectral workspace, the spread schedule and the worker pool."""

    def __init__(self, state: SimState, threads: int = 1):
        self.state = state
        self.threads = max(1, int(threads))
        self.pool = WorkerPool(self.threads)
        f = state.fluid
        self.workspace = FourierWorkspace(f.dims, f.h, f.rho, f.mu, state.dt, self.threads)
        self.scheduler = SpreadScheduler(f.dims, f.h)
        self._gather_cache = None

    @property
    def last_cfl(self) -> float:
        """Advective Courant number of the most recent step."""
        return self.workspace.last_cfl

    def close(self):
        self.pool.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- step 2: partitioned spreading ------------------------------------

    def _point_stencils(self, X):
        """Per-point scatter/gather targets and weights, one big pass.

        X is slab-ordered. Returns (flat_local, flat_global, W), all
        (n, 64): flat_local indexes a slab's 7-row band (the local row is
        (base mod 4) + offset + 1 regardless of which slab owns the point),
        flat_global indexes the whole lattice for interpolation, and W are
        the kernel weights shared by both directions of the coupling.
        """
        n1, n2, n3 = self.state.fluid.dims
        idx, w = kernel.kernel_weights(X, self.state.fluid.h)
        i1g = idx[:, 0] % n1
        i2 = idx[:, 1] % n2
        i3 = idx[:, 2] % n3
        base_in_slab = i1g[:, 1] % SLAB_CELLS  # column 1 holds offset 0
        i1l = base_in_slab[:, None] + np.arange(4, dtype=np.int64)  # offset+1 = 0..3
        i23 = (i2[:, :, None] * n3 + i3[:, None, :]).reshape(len(X), 16)
        flat_local = (i1l[:, :, None] * (n2 * n3) + i23[:, None, :]).reshape(len(X), 64)
        flat_global = (i1g[:, :, None] * (n2 * n3) + i23[:, None, :]).reshape(len(X), 64)
        W = kernel._outer64(w[:, 0], w[:, 1], w[:, 2])
        return flat_local, flat_global, W

    def _scatter_slab(self, slab: int, flat, W, fv):
        """Accumulate one slab's stencil entries into its disjoint row band."""
        fluid = self.state.fluid
        n1, n2, n3 = fluid.dims
        lo, hi = self.scheduler.slab_bounds[slab], self.scheduler.slab_bounds[slab + 1]
        if lo == hi:
            return
        a = slab * SLAB_CELLS
        width = SLAB_CELLS + 3
        rows = np.arange(a - 1, a - 1 + width) % n1
        size = width * n2 * n3
        piece = flat[lo:hi].ravel()
        local = np.empty((3, width, n2, n3))
        for c in range(3):
            vals = (fv[lo:hi, c, None] * W[lo:hi]).ravel()
            local[c] = np.bincount(piece, weights=vals, minlength=size).reshape(width, n2, n3)
        fluid.F[:, rows] += local

    def _spread_forces(self, forces):
        fluid = self.state.fluid
        fluid.F.fill(0.0)
        for g, f in zip(self.state.grids, forces):
            kernel._check_finite(g.X, "position", g.id)
            kernel._check_finite(f, "force", g.id)
        if self.scheduler.nslabs == 1:
            for g, f in zip(self.state.grids, forces):
                kernel.spread(f, g.X, fluid, g.dq_area, name=g.id)
            return
        self.scheduler.refresh(self.state.grids)
        perm = self.scheduler.perm
        h3 = fluid.h ** 3
        allX = np.vstack([g.X.reshape(-1, 3) for g in self.state.grids])[perm]
        allF = np.vstack(
            [f.reshape(-1, 3) * (g.dq_area / h3) for g, f in zip(self.state.grids, forces)]
        )[perm]
        n = len(allX)
        flat = np.empty((n, 64), dtype=np.int64)
        flat_global = np.empty((n, 64), dtype=np.int64)
        W = np.empty((n, 64))

        def weights_task(span):
            lo, hi = span
            flat[lo:hi], flat_global[lo:hi], W[lo:hi] = self._point_stencils(allX[lo:hi])

        self.pool.run(weights_task, chunk_ranges(n, self.threads))
        for phase in (0, 1):
            self.pool.run(
                lambda s: self._scatter_slab(s, flat, W, allF),
                self.scheduler.phase_slabs(phase),
            )
        # the position update interpolates at these same points, so the
        # global stencil and weights carry over to step 4
        self._gather_cache = (flat_global, W)

    # -- step 4: interpolation and position update ------------------------

    def _move_points(self, u_new):
        """Advect all material points with the interpolated new velocity.

        Reuses the stencil computed during spreading when available (same
        positions); each point's update involves only its own stencil, so
        chunking never changes the result.
        """
        state = self.state
        h = state.fluid.h
        if self._gather_cache is None:
            for g in state.grids:
                g.X += state.dt * kernel.interpolate(u_new, g.X, h)
                g.X[g.fixed] = g.X_rest[g.fixed]
            return
        flat_global, W = self._gather_cache
        n = len(flat_global)
        U = np.empty((n, 3))
        uf = u_new.reshape(3, -1)

        def task(span):
            lo, hi = span
            for c in range(3):
                U[lo:hi, c] = np.einsum(
                    "nk,nk->n", uf[c][flat_global[lo:hi]], W[lo:hi]
                )

        self.pool.run(task, chunk_ranges(n, self.threads))
        allU = np.empty_like(U)
        allU[self.scheduler.perm] = U
        offset = 0
        for g in state.grids:
            m = g.n_points
            g.X += state.dt * allU[offset : offset + m].reshape(g.X.shape)
            g.X[g.fixed] = g.X_rest[g.fixed]
            offset += m

    def step(self) -> SimState:
        """Advance one time step; aborts on non-finite state."""
        state = self.state
        self._gather_cache = None
        forces = total_force(
            state.grids, state.time, state.drive, state.drive_grid, pool=self.pool
        )
        self._spread_forces(forces)
        u_new, p = self.workspace.solve(state.fluid.u, state.fluid.F, pool=self.pool)
        state.fluid.u = u_new
        state.fluid.p = p
        self._move_points(u_new)
        for g in state.grids:
            if not np.isfinite(g.X).all():
                bad = tuple(int(i) for i in np.unravel_index(np.argmax(~np.isfinite(g.X)), g.X.shape))
                raise SimulationError(
                    f"non-finite position at step {state.n + 1} in grid '{g.id}' index {bad}"
                )
        state.n += 1
        return state

    def run(self, steps: int, snapshot_every: int = 10, out_dir=None, include_velocity=False):
        """Run `steps` steps, writing snapshots at the cadence plus a final checkpoint.

        Returns the list of snapshot paths written.
        """
        written = []

        def snap():
            if out_dir is None:
                return
            path = snapshots.snapshot_path(out_dir, self.state.n)
            snapshots.write_snapshot(path, self.state, include_velocity)
            written.append(path)

        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
        snap()
        for _ in range(steps):
            self.step()
            if snapshot_every > 0 and self.state.n % snapshot_every == 0:
                snap()
        if out_dir is not None:
            write_checkpoint(os.path.join(out_dir, "checkpoint.ckpt"), self.state)
        return written


def step(state: SimState, threads: int = 1) -> SimState:
    """Single-step convenience; builds and tears down an Engine."""
    with Engine(state, threads) as eng:
        return eng.step()


def run(
    state: SimState,
    steps: int,
    snapshot_every: int = 10,
    out_dir=None,
    threads: int = 1,
    include_velocity: bool = False,
):
    """Run a simulation to completion; returns snapshot paths."""
    with Engine(state, threads) as eng:
        return eng.run(steps, snapshot_every, out_dir, include_velocity)


def bench(model: ChannelModel, dt: float, steps: int, thread_counts, warmup: int = 2,
          repeats: int = 3, drive: DriveSignal = None):
    """Wall-clock seconds per step for each thread count.

    Rounds are interleaved across thread counts and the per-count minimum
    is kept, which suppresses drift from competing load. Returns a list of
    (threads, seconds_per_step) rows in the requested order.
    """
    best = {t: float("inf") for t in thread_counts}
    for _ in range(repeats):
        for t in thread_counts:
            with Engine(make_state(model, dt, drive), threads=t) as eng:
                for _ in range(warmup):
                    eng.step()
                t0 = _time.perf_counter()
                for _ in range(steps):
                    eng.step()
                per_step = (_time.perf_counter() - t0) / max(1, steps)
            best[t] = min(best[t], per_step)
    return [(t, best[t]) for t in thread_counts]


# -- checkpointing ---------------------------------------------------------


def write_checkpoint(path, state: SimState):
    """Full state dump: velocity and positions exact, pressure recomputed."""
    with open(path, "wb") as fh:
        _binio.write_magic(fh, CKPT_MAGIC, CKPT_VERSION)
        _binio.write_values(fh, "Qd", state.n, state.dt)
        f = state.fluid
        _binio.write_values(fh, "III", *f.dims)
        _binio.write_values(fh, "ddd", f.h, f.rho, f.mu)
        _binio.write_array(fh, f.u, np.float64)
        if state.drive is not None:
            _binio.write_values(fh, "B", 1)
            _binio.write_values(fh, "dd", state.drive.amplitude, state.drive.frequency)
            _binio.write_values(fh, "ddd", *state.drive.direction)
            _binio.write_str(fh, state.drive_grid or "")
        else:
            _binio.write_values(fh, "B", 0)
        _binio.write_values(fh, "I", len(state.grids))
        for g in state.grids:
            _binio.write_str(fh, g.id)
            _binio.write_values(fh, "II", *g.dims)
            _binio.write_values(fh, "dd", *g.dq)
            _write_law(fh, g.law)
            _binio.write_array(fh, g.X_rest, np.float64)
            _binio.write_array(fh, g.X, np.float64)
            _binio.write_array(fh, g.fixed, np.uint8)


def read_checkpoint(path) -> SimState:
    path = str(path)
    with open(path, "rb") as fh:
        version = _binio.read_magic(fh, CKPT_MAGIC, path)
        if version != CKPT_VERSION:
            raise _binio.FormatError(f"{path}: unsupported checkpoint version {version}")
        n, dt = _binio.read_values(fh, "Qd", path)
        dims = _binio.read_values(fh, "III", path)
        h, rho, mu = _binio.read_values(fh, "ddd", path)
        u = _binio.read_array(fh, np.float64, (3, *dims), path)
        (has_drive,) = _binio.read_values(fh, "B", path)
        drive = None
        drive_grid = None
        if has_drive:
            amp, freq = _binio.read_values(fh, "dd", path)
            direction = _binio.read_values(fh, "ddd", path)
            drive = DriveSignal(amp, freq, direction)
            drive_grid = _binio.read_str(fh, path) or None
        (ngrids,) = _binio.read_values(fh, "I", path)
        grids = []
        for _ in range(ngrids):
            name = _binio.read_str(fh, path)
            gdims = _binio.read_values(fh, "II", path)
            dq = _binio.read_values(fh, "dd", path)
            law = _read_law(fh, path)
            X_rest = _binio.read_array(fh, np.float64, (*gdims, 3), path)
            X = _binio.read_array(fh, np.float64, (*gdims, 3), path)
            fixed = _binio.read_array(fh, np.uint8, gdims, path).astype(bool)
            grids.append(
                LagrangianGrid(
                    id=name, dims=gdims, dq=dq, X_rest=X_rest, law=law, fixed=fixed, X=X
                )
            )
        fluid = FluidGrid(dims=tuple(int(d) for d in dims), h=h, rho=rho, mu=mu, u=u)
    return SimState(n=int(n), dt=dt, fluid=fluid, grids=grids, drive=drive, drive_grid=drive_grid)
