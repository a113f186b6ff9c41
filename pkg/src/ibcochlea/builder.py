"""Generator for the straight desk-scale cochlea channel.

The model is a sealed rectangular duct inside the periodic fluid box,
divided lengthwise by an elastic partition: a membrane strip of linearly
growing width flanked by two bony shelf strips. One end wall carries two
circular window plates (the upper one is driven); the partition stops
short of the other end, leaving an open gap that connects the two halves
of the duct. All material grids are generated at roughly half the fluid
mesh width.

Geometry conventions: axis 1 (x) runs along the channel, axis 2 (y) across
its width, axis 3 (z) across its height; the partition lies in the mid-z
plane.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .modelio import ChannelModel
from .structures import LagrangianGrid, Membrane, RigidWall, WindowPlate


@dataclass
class ChannelSpec:
    """Input parameters of the channel generator (lengths in cm).

    membrane_lambda defaults to ln(1e4)/length so the end-to-end membrane
    compliance ratio spans four decades; all stiffnesses are per-link
    [dyn/cm] except the anchors, which are per-node rest tethers [dyn/cm].
    """

    dims: tuple = (64, 32, 32)
    h: float = 0.05
    rho: float = 1.0
    mu: float = 0.15
    length: float = 2.8
    width: float = 0.64
    height: float = 0.56
    w_base: float = 0.16
    w_apex: float = 0.40
    membrane_k0: float = 4.0e2
    membrane_lambda: float = None
    membrane_anchor_k0: float = 1.2e3
    window_k: float = 2.0e3
    window_anchor_k: float = 4.0e3
    window_radius: float = 0.1
    wall_k: float = 8.0e3
    heli_gap: float = 0.2

    def __post_init__(self):
        if self.membrane_lambda is None:
            self.membrane_lambda = math.log(1.0e4) / self.length
        self.dims = tuple(int(n) for n in self.dims)

    @property
    def spacing(self) -> float:
        """Target material point spacing, half the fluid mesh width."""
        return 0.5 * self.h

    def validate(self):
        L = tuple(n * self.h for n in self.dims)
        sp = self.spacing
        if not (0 < self.length <= L[0] - 2 * self.h):
            raise ValueError(f"channel length {self.length} does not fit in domain {L[0]}")
        if not (0 < self.width <= L[1] - 2 * self.h):
            raise ValueError(f"channel width {self.width} does not fit in domain {L[1]}")
        if not (0 < self.height <= L[2] - 2 * self.h):
            raise ValueError(f"channel height {self.height} does not fit in domain {L[2]}")
        if not (0 < self.w_base <= self.w_apex):
            raise ValueError("membrane width must be positive and non-decreasing")
        if self.w_apex > self.width - 4 * sp:
            raise ValueError("membrane plus shelves must span the channel width")
        if not (0 < self.heli_gap < 0.5 * self.length):
            raise ValueError("helicotrema gap must be positive and shorter than half the channel")
        if 2 * self.window_radius >= min(self.width, 0.5 * self.height) - 2 * sp:
            raise ValueError("windows must fit inside the end wall")


def _npoints(span: float, spacing: float) -> int:
    return max(2, int(round(span / spacing)) + 1)


def _var_ncols(w_min: float, w_max: float, h: float, what: str) -> int:
    """Column count for a strip whose width varies between w_min and w_max.

    All per-station spacings must stay inside (h/4, h); candidates around
    the geometric-mean width are tried and the one with the largest margin
    wins.
    """
    target = math.sqrt(w_min * w_max) / (0.5 * h)
    best, best_margin = None, 0.0
    for cand in range(max(2, round(target) - 1), round(target) + 3):
        s_min, s_max = w_min / cand, w_max / cand
        margin = min(s_min - 0.25 * h, h - s_max)
        if margin > best_margin:
            best, best_margin = cand + 1, margin
    if best is None:
        raise ValueError(
            f"spacing violation in grid '{what}': width range [{w_min:.4g}, {w_max:.4g}] "
            f"cannot be meshed inside [{0.25 * h:.4g}, {h:.4g}]"
        )
    return best


def _flat_patch(name, law, spacing, plane_axis, plane_at, u_axis, u_lo, u_hi, v_axis, v_lo, v_hi,
                fixed=None):
    """Rectangular patch in a coordinate plane, uniformly spaced."""
    nu = _npoints(u_hi - u_lo, spacing)
    nv = _npoints(v_hi - v_lo, spacing)
    U, V = np.meshgrid(np.linspace(u_lo, u_hi, nu), np.linspace(v_lo, v_hi, nv), indexing="ij")
    X = np.zeros((nu, nv, 3))
    X[..., plane_axis] = plane_at
    X[..., u_axis] = U
    X[..., v_axis] = V
    dq = ((u_hi - u_lo) / (nu - 1), (v_hi - v_lo) / (nv - 1))
    return LagrangianGrid(id=name, dims=(nu, nv), dq=dq, X_rest=X, law=law, fixed=fixed)


def _window_patch(name, spec, y_lo, y_hi, z_lo, z_hi, x_at):
    law = WindowPlate(spec.window_k, spec.window_radius, spec.window_anchor_k)
    g = _flat_patch(name, law, spec.spacing, 0, x_at, 1, y_lo, y_hi, 2, z_lo, z_hi)
    cy, cz = 0.5 * (y_lo + y_hi), 0.5 * (z_lo + z_hi)
    r = np.hypot(g.X_rest[..., 1] - cy, g.X_rest[..., 2] - cz)
    g.fixed[:] = r > spec.window_radius
    if not (~g.fixed).any():
        raise ValueError(f"window '{name}' has no free points inside radius {spec.window_radius}")
    return g


def _membrane_widths(spec, x, x_lo, x_hi):
    return spec.w_base + (spec.w_apex - spec.w_base) * (x - x_lo) / (x_hi - x_lo)


def build_channel(spec: ChannelSpec, check_separation: bool = True) -> ChannelModel:
    """Generate the straight-channel model from a spec.

    Raises ValueError on spec violations, on any generated grid whose point
    spacing leaves the (h/4, h) band, and (when check_separation is on) on
    distinct grids closer than h/4 anywhere but the membrane-shelf seam.
    """
    spec.validate()
    sp = spec.spacing
    L = tuple(n * spec.h for n in spec.dims)
    x0 = 0.5 * (L[0] - spec.length)
    x1 = x0 + spec.length
    y0 = 0.5 * (L[1] - spec.width)
    y1 = y0 + spec.width
    z0 = 0.5 * (L[2] - spec.height)
    z1 = z0 + spec.height
    y_mid = 0.5 * (y0 + y1)
    z_mid = 0.5 * (z0 + z1)

    wall = RigidWall(spec.wall_k)
    grids = [
        _flat_patch("wall_bottom", wall, sp, 2, z0, 0, x0, x1, 1, y0, y1),
        _flat_patch("wall_top", wall, sp, 2, z1, 0, x0, x1, 1, y0, y1),
        _flat_patch("wall_near", wall, sp, 1, y0, 0, x0, x1, 2, z0 + sp, z1 - sp),
        _flat_patch("wall_far", wall, sp, 1, y1, 0, x0, x1, 2, z0 + sp, z1 - sp),
        _flat_patch("wall_apex", wall, sp, 0, x1, 1, y0 + sp, y1 - sp, 2, z0 + sp, z1 - sp),
        _window_patch("oval_window", spec, y0 + sp, y1 - sp, z_mid + sp, z1 - sp, x0),
        _window_patch("round_window", spec, y0 + sp, y1 - sp, z0 + sp, z_mid - sp, x0),
    ]

    # partition: membrane strip plus two shelf strips sharing its x stations
    mx_lo, mx_hi = x0 + sp, x1 - spec.heli_gap
    n1 = _npoints(mx_hi - mx_lo, sp)
    x_sta = np.linspace(mx_lo, mx_hi, n1)
    w = _membrane_widths(spec, x_sta, mx_lo, mx_hi)

    n2m = _var_ncols(spec.w_base, spec.w_apex, spec.h, "membrane")
    frac = np.linspace(-0.5, 0.5, n2m)
    Xm = np.zeros((n1, n2m, 3))
    Xm[..., 0] = x_sta[:, None]
    Xm[..., 1] = y_mid + w[:, None] * frac[None, :]
    Xm[..., 2] = z_mid
    mem_fixed = np.zeros((n1, n2m), dtype=bool)
    mem_fixed[:, 0] = True
    mem_fixed[:, -1] = True
    mem_fixed[0, :] = True
    membrane = LagrangianGrid(
        id="membrane",
        dims=(n1, n2m),
        dq=((mx_hi - mx_lo) / (n1 - 1), float(w.mean()) / (n2m - 1)),
        X_rest=Xm,
        law=Membrane(spec.membrane_k0, spec.membrane_lambda, spec.membrane_anchor_k0),
        fixed=mem_fixed,
    )
    grids.append(membrane)

    shelf_w = 0.5 * (spec.width - w) - sp  # strip width, inset from the side wall
    n2s = _var_ncols(float(shelf_w.min()), float(shelf_w.max()), spec.h, "shelf")
    sfrac = np.linspace(0.0, 1.0, n2s)
    for name, outer, edge_sign in (("shelf_near", y0 + sp, -1.0), ("shelf_far", y1 - sp, 1.0)):
        inner = y_mid + edge_sign * 0.5 * w  # coincides with the membrane edge column
        Xs = np.zeros((n1, n2s, 3))
        Xs[..., 0] = x_sta[:, None]
        Xs[..., 1] = outer + (inner[:, None] - outer) * sfrac[None, :]
        Xs[..., 2] = z_mid
        grids.append(
            LagrangianGrid(
                id=name,
                dims=(n1, n2s),
                dq=((mx_hi - mx_lo) / (n1 - 1), float(np.abs(inner - outer).mean()) / (n2s - 1)),
                X_rest=Xs,
                law=wall,
            )
        )

    _check_spacings(grids, spec.h)
    if check_separation:
        _check_separation(grids, spec.h)

    return ChannelModel(
        fluid_dims=spec.dims,
        h=spec.h,
        rho=spec.rho,
        mu=spec.mu,
        grids=grids,
        drive_grid="oval_window",
        drive_direction=(1.0, 0.0, 0.0),
    )


def _check_spacings(grids, h: float):
    for g in grids:
        for axis in (0, 1):
            if g.dims[axis] < 2:
                continue
            d = np.linalg.norm(np.diff(g.X_rest, axis=axis), axis=-1)
            lo, hi = float(d.min()), float(d.max())
            if hi > h or lo < 0.25 * h:
                raise ValueError(
                    f"spacing violation in grid '{g.id}': axis {axis} spans "
                    f"[{lo:.4g}, {hi:.4g}] outside [{0.25 * h:.4g}, {h:.4g}]"
                )


_SEAM_PAIRS = {("membrane", "shelf_near"), ("membrane", "shelf_far")}


def _check_separation(grids, h: float):
    from scipy.spatial import cKDTree

    trees = [(g, cKDTree(g.X_rest.reshape(-1, 3))) for g in grids]
    floor = 0.25 * h * (1.0 - 1e-9)
    for i, (ga, ta) in enumerate(trees):
        for gb, tb in trees[i + 1 :]:
            pair = tuple(sorted((ga.id, gb.id)))
            if pair in _SEAM_PAIRS or tuple(reversed(pair)) in _SEAM_PAIRS:
                continue
            d = ta.query_ball_tree(tb, floor)
            if any(d):
                raise ValueError(
                    f"grids '{ga.id}' and '{gb.id}' come closer than h/4 outside a declared seam"
                )


def desk_spec(**overrides) -> ChannelSpec:
    """Default desk-scale channel on a 64 x 32 x 32 fluid grid."""
    return replace(ChannelSpec(), **overrides) if overrides else ChannelSpec()


def paper_scale_spec(**overrides) -> ChannelSpec:
    """Full-resolution channel on a 256 x 256 x 128 fluid grid."""
    base = ChannelSpec(
        dims=(256, 256, 128),
        h=1.0 / 256.0,
        length=0.96,
        width=0.45,
        height=0.45,
        w_base=0.015,
        w_apex=0.056,
        window_radius=0.08,
        heli_gap=0.05,
    )
    return replace(base, **overrides) if overrides else base


_SPEC_KEYS = {f for f in ChannelSpec.__dataclass_fields__}


def parse_config(text: str, base: ChannelSpec = None) -> ChannelSpec:
    """Build a spec from "key = value" lines over a base (default desk).

    Keys mirror ChannelSpec fields; dims takes three comma-separated
    integers; '#' starts a comment.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SPEC_KEYS:
            raise ValueError(f"config line {lineno}: unknown key '{key}'")
        if key == "dims":
            values[key] = tuple(int(p) for p in val.replace(",", " ").split())
        else:
            values[key] = float(val)
    if base is None:
        # fresh construction so an unspecified membrane_lambda is derived
        # from the configured length, not from the desk default
        return ChannelSpec(**values)
    return replace(base, **values)
