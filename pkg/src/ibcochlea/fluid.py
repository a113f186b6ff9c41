"""Implicit-viscosity, upwind-advection momentum step on the periodic lattice.

One step solves, in Fourier space, the constant-coefficient linear system
that backward-Euler viscosity and the centered-difference incompressibility
constraint impose on the new velocity and pressure. Advection enters the
right-hand side explicitly, one-sided against the local flow direction.
"""

import warnings

import numpy as np
import scipy.fft as sfft

from .grid import FluidGrid
from .parallel import WorkerPool, chunk_ranges


class CFLWarning(UserWarning):
    """Advective Courant number exceeded the advisory threshold."""


def _advect_rows(u: np.ndarray, h: float, lo: int, hi: int) -> np.ndarray:
    """Upwind tendency sum_k u_k D_k u on lattice-axis-1 rows [lo, hi)."""
    n1 = u.shape[1]
    rows = np.arange(lo - 1, hi + 1) % n1
    loc = u[:, rows]
    c = loc[:, 1:-1]
    out = np.zeros_like(c)
    for k in range(3):
        if k == 0:
            fwd = (loc[:, 2:] - c) / h
            bwd = (c - loc[:, :-2]) / h
        else:
            ax = k + 1
            fwd = (np.roll(c, -1, axis=ax) - c) / h
            bwd = (c - np.roll(c, 1, axis=ax)) / h
        uk = c[k]
        # backward difference when uk > 0; forward when uk < 0; the uk == 0
        # tie multiplies to zero either way and is pinned backward.
        out += uk * np.where(uk < 0.0, fwd, bwd)
    return out


def advect_upwind(u: np.ndarray, h: float, pool: WorkerPool = None) -> np.ndarray:
    """Upwind self-advection tendency [cm/s^2] of a (3, n1, n2, n3) field.

    The one-sided difference direction per point and axis follows the sign
    of the advecting component at that point. Results are identical at any
    worker count.
    """
    n1 = u.shape[1]
    if pool is None or pool.threads <= 1 or n1 < 2 * pool.threads:
        return _advect_rows(u, h, 0, n1)
    out = np.empty_like(u)

    def task(span):
        lo, hi = span
        out[:, lo:hi] = _advect_rows(u, h, lo, hi)

    pool.run(task, chunk_ranges(n1, pool.threads))
    return out


class FourierWorkspace:
    """Spectral symbols and transforms for one (dims, h, rho, mu, dt) tuple.

    The implicit denominator rho/dt + mu*l(k) is strictly positive; the
    centered-gradient symbols vanish identically at k = 0 and at every
    Nyquist component, which is where the pressure is pinned to zero.
    """

    def __init__(self, dims, h: float, rho: float, mu: float, dt: float, threads: int = 1):
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.dims = tuple(dims)
        self.h = h
        self.rho = rho
        self.mu = mu
        self.dt = dt
        self.threads = max(1, int(threads))
        n1, n2, n3 = self.dims
        k1 = np.arange(n1).reshape(n1, 1, 1)
        k2 = np.arange(n2).reshape(1, n2, 1)
        k3 = np.arange(n3 // 2 + 1).reshape(1, 1, n3 // 2 + 1)

        def grad_sym(k, n):
            s = np.sin(2.0 * np.pi * k / n) / h
            s[(k % (n // 2)) == 0] = 0.0  # exact zero at k = 0 and Nyquist
            return s

        self.s1 = grad_sym(k1, n1)
        self.s2 = grad_sym(k2, n2)
        self.s3 = grad_sym(k3, n3)
        self.last_cfl = 0.0
        lap = (
            np.sin(np.pi * k1 / n1) ** 2
            + np.sin(np.pi * k2 / n2) ** 2
            + np.sin(np.pi * k3 / n3) ** 2
        ) * (4.0 / (h * h))
        self.viscous_symbol = lap
        self.denom = rho / dt + mu * lap
        s2sum = (self.s1 ** 2 + self.s2 ** 2 + self.s3 ** 2) + np.zeros(lap.shape)
        live = s2sum > 0.0
        self.inv_s2 = np.zeros(lap.shape)
        self.inv_s2[live] = 1.0 / s2sum[live]

    def matches(self, grid: FluidGrid, dt: float) -> bool:
        return (
            self.dims == grid.dims
            and self.h == grid.h
            and self.rho == grid.rho
            and self.mu == grid.mu
            and self.dt == dt
        )

    def solve(self, u: np.ndarray, F: np.ndarray, advection: bool = True, pool: WorkerPool = None):
        """Advance velocity one step under body force F; returns (u_new, p).

        The returned velocity has centered-difference divergence zero to
        rounding; the pressure is the minimal-norm multiplier enforcing it.
        """
        if not np.isfinite(u).all():
            raise ValueError("non-finite velocity input to fluid step")
        if not np.isfinite(F).all():
            raise ValueError("non-finite body force input to fluid step")
        rho, dt, h = self.rho, self.dt, self.h
        cfl = float(np.abs(u).max()) * dt / h
        self.last_cfl = cfl
        if cfl > 0.5:
            warnings.warn(f"advective CFL number {cfl:.3g} exceeds 0.5", CFLWarning, stacklevel=2)

        rhs = (rho / dt) * u + F
        if advection:
            rhs -= rho * advect_upwind(u, h, pool)

        workers = self.threads
        rhat = sfft.rfftn(rhs, axes=(1, 2, 3), workers=workers)
        that = self.s1 * rhat[0] + self.s2 * rhat[1] + self.s3 * rhat[2]
        that *= self.inv_s2
        uhat = np.empty_like(rhat)
        uhat[0] = (rhat[0] - self.s1 * that) / self.denom
        uhat[1] = (rhat[1] - self.s2 * that) / self.denom
        uhat[2] = (rhat[2] - self.s3 * that) / self.denom
        if not np.isfinite(uhat).all():
            bad = tuple(int(i) for i in np.unravel_index(np.argmax(~np.isfinite(uhat)), uhat.shape))
            raise ArithmeticError(f"non-finite spectrum at mode {bad}")
        phat = -1j * that
        u_new = sfft.irfftn(uhat, s=self.dims, axes=(1, 2, 3), workers=workers)
        p = sfft.irfftn(phat, s=self.dims, workers=workers)
        return u_new, p


def solve_step(
    u: np.ndarray,
    F: np.ndarray,
    dt: float,
    grid: FluidGrid,
    advection: bool = True,
    workspace: FourierWorkspace = None,
    threads: int = 1,
):
    """One momentum step; convenience wrapper building a workspace on demand."""
    if workspace is None or not workspace.matches(grid, dt):
        workspace = FourierWorkspace(grid.dims, grid.h, grid.rho, grid.mu, dt, threads)
    return workspace.solve(u, F, advection=advection)
