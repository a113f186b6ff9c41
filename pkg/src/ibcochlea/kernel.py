"""Smoothed delta kernel and the two Lagrangian-Eulerian coupling operations.

The kernel spreads each material point over a 4x4x4 patch of fluid cells
and, run in the other direction, evaluates the fluid velocity at material
points. Both directions use the same tensor-product weight function, which
makes them adjoint to each other up to the fixed mesh factors: that is what
keeps the momentum exchange between fluid and material conservative.
"""

import numpy as np

from .grid import FluidGrid


def phi(r):
    """Per-axis kernel weight with support (-2, 2).

    Piecewise smooth, continuous, and satisfies sum_j phi(r - j) = 1 for
    every real r, so interpolation reproduces constants exactly. Accepts
    scalars or arrays. Evaluated branch-free on clamped arguments: the
    outer piece is 1/2 minus the inner piece reflected about |r| = 1.
    """
    r = np.abs(np.asarray(r, dtype=float))
    ri = np.minimum(r, 1.0)
    inner = (3.0 - 2.0 * ri + np.sqrt(1.0 + 4.0 * ri - 4.0 * ri * ri)) / 8.0
    rm = 2.0 - np.clip(r, 1.0, 2.0)
    outer = 0.5 - (3.0 - 2.0 * rm + np.sqrt(1.0 + 4.0 * rm - 4.0 * rm * rm)) / 8.0
    out = np.where(r <= 1.0, inner, np.where(r < 2.0, outer, 0.0))
    return out if out.ndim else float(out)


def delta_h(x, h: float):
    """Smoothed three-dimensional delta, h^-3 phi(x1/h) phi(x2/h) phi(x3/h).

    x is a displacement triple or an (..., 3) array; result has the
    leading shape of x. Units cm^-3.
    """
    x = np.asarray(x, dtype=float)
    w = phi(x / h)
    return np.asarray(w).prod(axis=-1) / h ** 3


def kernel_weights(X, h: float):
    """Four-point support of each position, per axis.

    Parameters
    ----------
    X : (..., 3) positions [cm]
    h : fluid mesh width [cm]

    Returns
    -------
    idx : (..., 3, 4) int lattice offsets floor(X/h) - 1 .. floor(X/h) + 2
        (unwrapped; callers reduce modulo the grid dims)
    w : (..., 3, 4) kernel weights, each axis summing to 1
    """
    a = np.asarray(X, dtype=float) / h
    base = np.floor(a).astype(np.int64)
    offsets = np.arange(-1, 3, dtype=np.int64)
    idx = base[..., None] + offsets
    w = phi(a[..., None] - idx)
    return idx, w


def _check_finite(arr, what: str, name: str):
    bad = ~np.isfinite(arr)
    if bad.any():
        where = tuple(int(i) for i in np.unravel_index(np.argmax(bad), arr.shape))
        raise ValueError(f"non-finite {what} in grid '{name}' at index {where}")


def _outer64(a, b, c):
    """Row-wise outer product of three (n, 4) arrays, flattened to (n, 64)."""
    ab = (a[:, :, None] * b[:, None, :]).reshape(len(a), 16)
    return (ab[:, :, None] * c[:, None, :]).reshape(len(a), 64)


def _flat64(i1, i2, i3, dims):
    """Row-wise flat cell index, (n, 4) per-axis indices to (n, 64)."""
    ab = (i1[:, :, None] * (dims[1] * dims[2]) + i2[:, None, :] * dims[2]).reshape(len(i1), 16)
    return (ab[:, :, None] + i3[:, None, :]).reshape(len(i1), 64)


def _stencil(X, dims, h):
    """Flattened 64-cell stencil indices and weights for flat points (n, 3)."""
    idx, w = kernel_weights(X, h)
    flat = _flat64(idx[:, 0] % dims[0], idx[:, 1] % dims[1], idx[:, 2] % dims[2], dims)
    W = _outer64(w[:, 0], w[:, 1], w[:, 2])
    return flat, W


def spread(f, X, target: FluidGrid, dq: float, name: str = "points", out=None):
    """Scatter Lagrangian force density into the fluid body-force field.

    Adds sum_q f(q) delta_h(x - X(q)) dq to the target force field. f and
    X are (..., 3) arrays over the same point set; dq is the parameter
    mesh area dq1*dq2 [cm^2]. Accumulation follows point index order, so
    repeated calls are bitwise reproducible.

    Returns the field written to (target.F unless out is given).
    """
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    f = np.asarray(f, dtype=float).reshape(-1, 3)
    if f.shape != X.shape:
        raise ValueError(f"force and position count mismatch in grid '{name}'")
    _check_finite(X, "position", name)
    _check_finite(f, "force", name)
    if out is None:
        out = target.F
    flat, W = _stencil(X, target.dims, target.h)
    scale = dq / target.h ** 3
    ncells = target.dims[0] * target.dims[1] * target.dims[2]
    flat_r = flat.ravel()
    for c in range(3):
        vals = (f[:, c, None] * W).ravel() * scale
        out[c] += np.bincount(flat_r, weights=vals, minlength=ncells).reshape(target.dims)
    return out


def interpolate(u, X, h: float):
    """Evaluate a grid velocity field at material points.

    u is (3, n1, n2, n3); X is (..., 3). Returns velocities with the shape
    of X. The h^3 quadrature weight cancels the h^-3 in the kernel, so a
    uniform field is reproduced exactly.
    """
    X = np.asarray(X, dtype=float)
    lead = X.shape[:-1]
    Xf = X.reshape(-1, 3)
    dims = u.shape[1:]
    flat, W = _stencil(Xf, dims, h)
    uf = u.reshape(3, -1)
    out = np.empty((len(Xf), 3))
    for c in range(3):
        out[:, c] = (uf[c][flat] * W).sum(axis=1)
    return out.reshape(*lead, 3)
