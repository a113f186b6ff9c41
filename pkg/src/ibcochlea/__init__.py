"""Immersed-boundary cochlea channel: a periodic-grid viscous incompressible
fluid solver two-way coupled to Lagrangian elastic structures, a straight
channel model generator, and traveling-wave analysis tools."""

from .analysis import (
    CenterlineProfile,
    Envelope,
    LinearityReport,
    SweepReport,
    centerline,
    envelope,
    frequency_sweep_report,
    linearity_report,
    peak_location,
)
from .builder import ChannelSpec, build_channel, desk_spec, paper_scale_spec, parse_config
from .engine import (
    Engine,
    SimState,
    SimulationError,
    bench,
    make_state,
    read_checkpoint,
    run,
    step,
    write_checkpoint,
)
from .fluid import CFLWarning, FourierWorkspace, advect_upwind, solve_step
from .grid import FluidGrid, divergence0, dminus, dplus, dzero, laplacian_pm
from .kernel import delta_h, interpolate, kernel_weights, phi, spread
from .modelio import ChannelModel, read_model, write_model
from .snapshots import Snapshot, list_snapshots, read_snapshot, write_snapshot
from .structures import (
    DriveSignal,
    LagrangianGrid,
    Membrane,
    RigidWall,
    WindowPlate,
    elastic_energy,
    elastic_force,
    membrane_force,
    stapes_drive,
    total_force,
    wall_force,
    window_force,
)

__version__ = "0.1.0"
