"""Periodic fluid lattice and its finite-difference operators.

All fields live on a rectangular lattice of cubic cells (single mesh
width h) with periodic wraparound in every axis. Scalar fields have
shape (n1, n2, n3); vector fields are component-first, (3, n1, n2, n3).
Operators accept either: the last three array axes are always the
lattice axes.
"""

from dataclasses import dataclass, field

import numpy as np


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass
class FluidGrid:
    """Periodic Eulerian lattice with velocity, pressure and body force.

    Attributes
    ----------
    dims : tuple of int
        Lattice points per axis (n1, n2, n3), each a power of two.
    h : float
        Mesh width [cm]; cells are cubic.
    rho : float
        Fluid density [g/cm^3].
    mu : float
        Dynamic viscosity [g/(cm s)].
    u : ndarray, (3, n1, n2, n3)
        Velocity [cm/s].
    p : ndarray, (n1, n2, n3)
        Pressure [dyn/cm^2].
    F : ndarray, (3, n1, n2, n3)
        Body-force density [dyn/cm^3].
    """

    dims: tuple
    h: float
    rho: float = 1.0
    mu: float = 0.0
    u: np.ndarray = field(default=None, repr=False)
    p: np.ndarray = field(default=None, repr=False)
    F: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        if len(self.dims) != 3 or not all(_is_power_of_two(n) for n in self.dims):
            raise ValueError(f"grid dims must be three powers of two, got {self.dims}")
        if not (self.h > 0 and self.rho > 0 and self.mu >= 0):
            raise ValueError(
                f"need h > 0, rho > 0, mu >= 0 (got h={self.h}, rho={self.rho}, mu={self.mu})"
            )
        if self.u is None:
            self.u = np.zeros((3, *self.dims))
        if self.p is None:
            self.p = np.zeros(self.dims)
        if self.F is None:
            self.F = np.zeros((3, *self.dims))
        if self.u.shape != (3, *self.dims) or self.F.shape != (3, *self.dims):
            raise ValueError("velocity/force field shape must be (3, n1, n2, n3)")
        if self.p.shape != self.dims:
            raise ValueError("pressure field shape must match dims")

    @property
    def extent(self):
        """Domain edge lengths L_i = n_i * h [cm]."""
        return tuple(n * self.h for n in self.dims)

    @property
    def cell_volume(self) -> float:
        return self.h ** 3


def _lattice_axis(arr: np.ndarray, axis: int) -> int:
    """Map lattice axis 1..3 onto the trailing array axes."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    return arr.ndim - 4 + axis


def dplus(f: np.ndarray, axis: int, h: float = 1.0) -> np.ndarray:
    """Forward difference (f(x + h e_i) - f(x)) / h, periodic."""
    ax = _lattice_axis(f, axis)
    return (np.roll(f, -1, axis=ax) - f) / h


def dminus(f: np.ndarray, axis: int, h: float = 1.0) -> np.ndarray:
    """Backward difference (f(x) - f(x - h e_i)) / h, periodic."""
    ax = _lattice_axis(f, axis)
    return (f - np.roll(f, 1, axis=ax)) / h


def dzero(f: np.ndarray, axis: int, h: float = 1.0) -> np.ndarray:
    """Centered difference (f(x + h e_i) - f(x - h e_i)) / (2h), periodic.

    Annihilates the lattice Nyquist mode along the chosen axis exactly.
    """
    ax = _lattice_axis(f, axis)
    return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2.0 * h)


def divergence0(v: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Centered divergence of a (3, n1, n2, n3) vector field."""
    if v.shape[0] != 3:
        raise ValueError("vector field must be component-first, shape (3, n1, n2, n3)")
    out = dzero(v[0], 1, h)
    out += dzero(v[1], 2, h)
    out += dzero(v[2], 3, h)
    return out


def laplacian_pm(f: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Seven-point Laplacian, the composition of forward and backward differences.

    Written as a sum of neighbor differences so constants map to exact zero.
    """
    out = np.zeros_like(f)
    for axis in (1, 2, 3):
        ax = _lattice_axis(f, axis)
        out += np.roll(f, -1, axis=ax) - f
        out += np.roll(f, 1, axis=ax) - f
    return out / (h * h)
