"""Wave observables extracted from snapshot series.

Everything here works on the membrane centerline: its normal displacement
profile, the pointwise-max envelope over a window of steps, the peak
location, amplitude-scaling checks between two runs, and the peak-versus-
frequency table of a sweep. CSV output is the contract; SVG plots are a
convenience on top.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .snapshots import Snapshot
from .structures import LagrangianGrid


@dataclass
class CenterlineProfile:
    """Normal displacement of the strip centerline at one step."""

    stations: np.ndarray  # arclength along the strip [cm], strictly increasing
    displacement: np.ndarray  # (X - X_rest) . n_rest [cm]
    step: int = 0

    def __post_init__(self):
        if not np.all(np.diff(self.stations) > 0):
            raise ValueError("centerline stations must be strictly increasing")
        if not np.isfinite(self.displacement).all():
            raise ValueError("centerline displacement contains non-finite values")


@dataclass
class Envelope:
    """Pointwise maximum of |displacement| over a step window."""

    stations: np.ndarray
    values: np.ndarray
    window: tuple

    def __post_init__(self):
        if (np.asarray(self.values) < 0).any():
            raise ValueError("envelope values must be nonnegative")


def rest_normals(rest: np.ndarray) -> np.ndarray:
    """Unit normals of a rest surface (n1, n2, 3), from centered tangents.

    The normal is fixed by the rest geometry, which keeps the projection
    deterministic; instantaneous normals would differ only at the scale of
    the displacements themselves.
    """
    t1 = np.empty_like(rest)
    t1[1:-1] = rest[2:] - rest[:-2]
    t1[0] = rest[1] - rest[0]
    t1[-1] = rest[-1] - rest[-2]
    t2 = np.empty_like(rest)
    t2[:, 1:-1] = rest[:, 2:] - rest[:, :-2]
    t2[:, 0] = rest[:, 1] - rest[:, 0]
    t2[:, -1] = rest[:, -1] - rest[:, -2]
    nrm = np.cross(t1, t2)
    mag = np.linalg.norm(nrm, axis=-1, keepdims=True)
    if (mag == 0).any():
        raise ValueError("degenerate rest surface: zero normal")
    return nrm / mag


def centerline(snapshot: Snapshot, grid: LagrangianGrid) -> CenterlineProfile:
    """Centerline displacement profile of one grid in one snapshot.

    The grid supplies rest geometry; the snapshot supplies positions. The
    centerline is the middle column of the patch.
    """
    X = snapshot.grid(grid.id)
    if X.shape != grid.X_rest.shape:
        raise ValueError(
            f"snapshot grid '{grid.id}' shape {X.shape} does not match model {grid.X_rest.shape}"
        )
    j = grid.dims[1] // 2
    rest = grid.X_rest[:, j]
    disp = ((X[:, j] - rest) * rest_normals(grid.X_rest)[:, j]).sum(axis=-1)
    seg = np.linalg.norm(np.diff(rest, axis=0), axis=-1)
    stations = np.concatenate(([0.0], np.cumsum(seg)))
    return CenterlineProfile(stations=stations, displacement=disp, step=snapshot.step)


def envelope(snaps, grid: LagrangianGrid, window=None) -> Envelope:
    """Pointwise max |displacement| over the snapshots inside the window."""
    picked = [s for s in snaps if window is None or window[0] <= s.step <= window[1]]
    if not picked:
        raise ValueError(f"no snapshots in window {window}")
    first = centerline(picked[0], grid)
    values = np.abs(first.displacement)
    for s in picked[1:]:
        values = np.maximum(values, np.abs(centerline(s, grid).displacement))
    if window is None:
        window = (picked[0].step, picked[-1].step)
    return Envelope(stations=first.stations, values=values, window=tuple(window))


def peak_location(env: Envelope) -> float:
    """Station of the envelope's global maximum; ties take the smallest station."""
    return float(env.stations[int(np.argmax(env.values))])


@dataclass
class LinearityReport:
    """Station-wise comparison of two envelopes against an expected scale."""

    stations: np.ndarray
    envelope_a: np.ndarray
    envelope_b: np.ndarray
    scale: float
    mask_fraction: float  # stations enter where envelope_a >= this fraction of its peak
    max_deviation: float  # max |e_b/(scale*e_a) - 1| over masked stations

    def rows(self):
        for s, a, b in zip(self.stations, self.envelope_a, self.envelope_b):
            yield s, a, b, (b / a if a > 0 else math.nan)


def linearity_report(env_a: Envelope, env_b: Envelope, scale: float,
                     mask_fraction: float = 0.01) -> LinearityReport:
    """How closely env_b equals scale * env_a, where env_a is not negligible."""
    if env_a.stations.shape != env_b.stations.shape or not np.allclose(
        env_a.stations, env_b.stations
    ):
        raise ValueError("envelopes to compare must share their stations")
    a, b = env_a.values, env_b.values
    mask = a >= mask_fraction * a.max()
    if not mask.any():
        raise ValueError("baseline envelope is identically zero")
    dev = float(np.abs(b[mask] / (scale * a[mask]) - 1.0).max())
    return LinearityReport(
        stations=env_a.stations,
        envelope_a=a,
        envelope_b=b,
        scale=scale,
        mask_fraction=mask_fraction,
        max_deviation=dev,
    )


@dataclass
class SweepReport:
    """Peak location per drive frequency; the place map of the channel."""

    frequencies: list
    peaks: list
    envelopes: list
    monotone: bool  # strictly decreasing peak station with rising frequency


def frequency_sweep_report(runs) -> SweepReport:
    """Summarize (frequency, Envelope) pairs, sorted by frequency."""
    runs = sorted(runs, key=lambda fe: fe[0])
    freqs = [f for f, _ in runs]
    envs = [e for _, e in runs]
    peaks = [peak_location(e) for e in envs]
    monotone = all(b < a for a, b in zip(peaks[:-1], peaks[1:]))
    return SweepReport(frequencies=freqs, peaks=peaks, envelopes=envs, monotone=monotone)


# -- file output -----------------------------------------------------------


def write_profile_csv(path, profile: CenterlineProfile):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station_cm", "displacement_cm"])
        for s, d in zip(profile.stations, profile.displacement):
            w.writerow([repr(float(s)), repr(float(d))])


def write_envelope_csv(path, env: Envelope):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station_cm", "envelope_cm"])
        for s, v in zip(env.stations, env.values):
            w.writerow([repr(float(s)), repr(float(v))])


def write_linearity_csv(path, rep: LinearityReport):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station_cm", "envelope_a_cm", "envelope_b_cm", "ratio"])
        for s, a, b, r in rep.rows():
            w.writerow([repr(float(s)), repr(float(a)), repr(float(b)), repr(float(r))])


def write_sweep_csv(path, rep: SweepReport):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "peak_station_cm", "monotone"])
        for f, p in zip(rep.frequencies, rep.peaks):
            w.writerow([repr(float(f)), repr(float(p)), str(rep.monotone).lower()])


def _plot(path, draw):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    draw(ax)
    ax.set_xlabel("station along strip [cm]")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_profile_svg(path, profile: CenterlineProfile):
    def draw(ax):
        ax.plot(profile.stations, profile.displacement, lw=1.0)
        ax.set_ylabel("normal displacement [cm]")
        ax.set_title(f"centerline at step {profile.step}")

    _plot(path, draw)


def plot_envelope_svg(path, env: Envelope, profile: CenterlineProfile = None):
    def draw(ax):
        if profile is not None:
            ax.plot(profile.stations, profile.displacement, lw=0.8, label="snapshot")
        ax.plot(env.stations, env.values, lw=1.2, label="envelope")
        ax.plot(env.stations, -env.values, lw=1.2, color="C1")
        ax.set_ylabel("displacement [cm]")
        ax.set_title(f"envelope over steps {env.window[0]} - {env.window[1]}")
        ax.legend(loc="upper right")

    _plot(path, draw)


def plot_sweep_svg(path, rep: SweepReport):
    def draw(ax):
        for f, env in zip(rep.frequencies, rep.envelopes):
            ax.plot(env.stations, env.values, lw=1.0, label=f"{f:g} Hz")
        ax.set_ylabel("envelope [cm]")
        ax.set_title("wave envelopes by drive frequency")
        ax.legend(loc="upper right")

    _plot(path, draw)
