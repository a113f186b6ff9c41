"""Lagrangian material patches and their force laws.

Each patch is a rectangular grid of material points carrying one force
model: an elastic membrane with a stiffness profile that falls off
exponentially along the channel (so compliance grows toward the far end),
a window plate whose rim is fixed bone, or a tethered rigid wall. Forces
are returned as densities per unit parameter area, the convention the
spreading operation expects.

A flat, unstressed link network has no linear restoring force normal to
its plane (link extensions are second order in the deflection), so the
membrane and window laws carry an optional anchor stiffness pulling each
point toward its rest position. The anchor is what gives the surface a
linear transverse compliance; it is off by default and enabled by the
model builder.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Membrane:
    """Variable-stiffness elastic strip.

    k0 : link stiffness at arclength 0 [dyn/cm]
    lam : exponential decay rate of stiffness [1/cm]; compliance grows as
        exp(lam * s) along the strip
    anchor_k0 : rest-anchor stiffness at arclength 0 [dyn/cm], same decay
    """

    k0: float
    lam: float
    anchor_k0: float = 0.0

    def __post_init__(self):
        if self.k0 <= 0:
            raise ValueError("membrane stiffness must be positive")
        if self.lam <= 0:
            raise ValueError("stiffness must decrease along the strip (lam > 0)")


@dataclass
class WindowPlate:
    """Uniform elastic disc clamped in a rectangular bone plate.

    k_w : link stiffness [dyn/cm]
    r_w : disc radius [cm]; points farther from the patch center are fixed
    anchor_k : rest-anchor stiffness on the disc [dyn/cm]
    """

    k_w: float
    r_w: float
    anchor_k: float = 0.0

    def __post_init__(self):
        if self.k_w <= 0 or self.r_w <= 0:
            raise ValueError("window stiffness and radius must be positive")


@dataclass
class RigidWall:
    """Immobile bony surface held by stiff tethers to its rest position."""

    k_t: float

    def __post_init__(self):
        if self.k_t <= 0:
            raise ValueError("tether stiffness must be positive")


@dataclass
class DriveSignal:
    """Sinusoidal external forcing of one window.

    amplitude : total force magnitude [dyn]
    frequency : [Hz]
    direction : unit normal of the driven window
    """

    amplitude: float
    frequency: float
    direction: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("drive amplitude must be nonnegative")
        if self.frequency <= 0:
            raise ValueError("drive frequency must be positive")
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if not n > 0:
            raise ValueError("drive direction must be a nonzero vector")
        self.direction = tuple(d / n)


# the four link families of a rectangular patch: along the strip, across
# it, and both diagonals (diagonals give the network its shear stiffness)
_FAMILIES = (
    ((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
    ((slice(None), slice(None, -1)), (slice(None), slice(1, None))),
    ((slice(None, -1), slice(None, -1)), (slice(1, None), slice(1, None))),
    ((slice(1, None), slice(None, -1)), (slice(None, -1), slice(1, None))),
)


@dataclass
class LagrangianGrid:
    """One rectangular patch of immersed material.

    Attributes
    ----------
    id : str
    dims : (n1, n2) point counts
    dq : (dq1, dq2) parameter mesh widths [cm]
    X_rest : (n1, n2, 3) rest positions [cm]
    law : Membrane | WindowPlate | RigidWall
    fixed : (n1, n2) bool, immobile points (always pinned to rest)
    X : (n1, n2, 3) current positions [cm]
    """

    id: str
    dims: tuple
    dq: tuple
    X_rest: np.ndarray
    law: object
    fixed: np.ndarray = None
    X: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.dims = (int(self.dims[0]), int(self.dims[1]))
        n1, n2 = self.dims
        self.X_rest = np.asarray(self.X_rest, dtype=float)
        if self.X_rest.shape != (n1, n2, 3):
            raise ValueError(f"grid '{self.id}': rest positions must be (n1, n2, 3)")
        if self.fixed is None:
            self.fixed = np.zeros((n1, n2), dtype=bool)
        self.fixed = np.asarray(self.fixed, dtype=bool)
        if self.fixed.shape != (n1, n2):
            raise ValueError(f"grid '{self.id}': fixed mask must be (n1, n2)")
        if self.X is None:
            self.X = self.X_rest.copy()
        self.X = np.asarray(self.X, dtype=float)
        if self.X.shape != (n1, n2, 3):
            raise ValueError(f"grid '{self.id}': positions must be (n1, n2, 3)")
        if not np.array_equal(self.X[self.fixed], self.X_rest[self.fixed]):
            raise ValueError(f"grid '{self.id}': fixed points must sit at rest positions")
        self._build_links()

    @property
    def dq_area(self) -> float:
        return float(self.dq[0] * self.dq[1])

    @property
    def n_points(self) -> int:
        return self.dims[0] * self.dims[1]

    def arclength(self) -> np.ndarray:
        """Cumulative rest arclength along axis 0, per node [cm]."""
        seg = np.linalg.norm(np.diff(self.X_rest, axis=0), axis=-1)
        s = np.zeros(self.dims)
        np.cumsum(seg, axis=0, out=s[1:])
        return s

    def _link_stiffness(self, s_mid: np.ndarray) -> np.ndarray:
        law = self.law
        if isinstance(law, Membrane):
            return law.k0 * np.exp(-law.lam * s_mid)
        if isinstance(law, WindowPlate):
            return np.full(s_mid.shape, law.k_w)
        raise TypeError(f"law {type(law).__name__} has no link network")

    def _build_links(self):
        self._links = []
        self._anchor = None
        law = self.law
        if isinstance(law, RigidWall):
            return
        s = self.arclength()
        for a, b in _FAMILIES:
            rest = self.X_rest[b] - self.X_rest[a]
            l0 = np.linalg.norm(rest, axis=-1)
            if (l0 == 0.0).any():
                i = tuple(int(v) for v in np.unravel_index(np.argmax(l0 == 0.0), l0.shape))
                raise ValueError(f"grid '{self.id}': coincident adjacent rest points near {i}")
            k = self._link_stiffness(0.5 * (s[a] + s[b]))
            self._links.append((a, b, l0, k))
        if isinstance(law, Membrane) and law.anchor_k0 > 0.0:
            self._anchor = law.anchor_k0 * np.exp(-law.lam * s)
        elif isinstance(law, WindowPlate) and law.anchor_k > 0.0:
            self._anchor = np.full(self.dims, law.anchor_k)

    def node_stiffness(self) -> np.ndarray:
        """Per-node link-stiffness profile (membrane law), for inspection."""
        law = self.law
        if isinstance(law, Membrane):
            return law.k0 * np.exp(-law.lam * self.arclength())
        raise TypeError("node stiffness profile is defined for membranes only")


def _network_nodal_force(g: LagrangianGrid) -> np.ndarray:
    """Nodal spring forces [dyn], gathered per node in fixed family order."""
    out = np.zeros_like(g.X)
    for a, b, l0, k in g._links:
        d = g.X[b] - g.X[a]
        length = np.linalg.norm(d, axis=-1)
        if (length == 0.0).any():
            i = tuple(int(v) for v in np.unravel_index(np.argmax(length == 0.0), length.shape))
            raise ValueError(f"grid '{g.id}': coincident adjacent points near {i}")
        pull = (k * (length - l0) / length)[..., None] * d
        out[a] += pull
        out[b] -= pull
    if g._anchor is not None:
        out += g._anchor[..., None] * (g.X_rest - g.X)
    return out


def membrane_force(g: LagrangianGrid) -> np.ndarray:
    """Elastic force density [dyn/cm^2] of a variable-stiffness membrane."""
    if not isinstance(g.law, Membrane):
        raise TypeError(f"grid '{g.id}' does not carry a membrane law")
    return _network_nodal_force(g) / g.dq_area


def window_force(g: LagrangianGrid) -> np.ndarray:
    """Elastic force density of a window plate; the fixed rim reacts through links."""
    if not isinstance(g.law, WindowPlate):
        raise TypeError(f"grid '{g.id}' does not carry a window law")
    return _network_nodal_force(g) / g.dq_area


def wall_force(g: LagrangianGrid) -> np.ndarray:
    """Tether force density pulling a rigid wall back to its rest position."""
    if not isinstance(g.law, RigidWall):
        raise TypeError(f"grid '{g.id}' does not carry a wall law")
    return g.law.k_t * (g.X_rest - g.X) / g.dq_area


def elastic_force(g: LagrangianGrid) -> np.ndarray:
    """Force density of a grid under its own law."""
    if isinstance(g.law, Membrane):
        return membrane_force(g)
    if isinstance(g.law, WindowPlate):
        return window_force(g)
    return wall_force(g)


def elastic_energy(g: LagrangianGrid) -> float:
    """Total spring energy [erg]; elastic_force is -grad(E) / dq_area."""
    e = 0.0
    if not isinstance(g.law, RigidWall):
        for a, b, l0, k in g._links:
            length = np.linalg.norm(g.X[b] - g.X[a], axis=-1)
            e += float((0.5 * k * (length - l0) ** 2).sum())
        if g._anchor is not None:
            e += float((0.5 * g._anchor * ((g.X - g.X_rest) ** 2).sum(axis=-1)).sum())
    else:
        e += float(0.5 * g.law.k_t * ((g.X - g.X_rest) ** 2).sum())
    return e


def stapes_drive(g: LagrangianGrid, t: float, sig: DriveSignal) -> np.ndarray:
    """External force density on the driven window at time t.

    The instantaneous total force sig.amplitude * sin(2 pi f t) along the
    window normal is shared uniformly per unit area over the free disc
    points.
    """
    out = np.zeros_like(g.X)
    free = ~g.fixed
    n_free = int(free.sum())
    if n_free == 0:
        return out
    mag = sig.amplitude * np.sin(2.0 * np.pi * sig.frequency * t)
    out[free] = (mag / (n_free * g.dq_area)) * np.asarray(sig.direction)
    return out


def total_force(grids, t: float, drive: DriveSignal = None, drive_grid: str = None, pool=None):
    """Step-1 force computation: per-grid elastic forces plus the drive.

    Returns one (n1, n2, 3) density array per grid, in grid order.
    """

    def one(g):
        f = elastic_force(g)
        if drive is not None and g.id == drive_grid:
            f += stapes_drive(g, t, drive)
        return f

    if pool is None:
        return [one(g) for g in grids]
    return pool.run(one, list(grids))
