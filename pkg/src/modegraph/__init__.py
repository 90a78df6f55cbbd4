"""Controllability analysis of 1-D multi-mode acoustic particle manipulation."""

from .device import ConfigurationError, DeviceConfig, ParticleSpec, coefficients
from .dynamics import (
    InvalidModeError,
    Trajectory,
    flow_exact,
    integrate,
    mode_velocity,
    reflect,
    rescale_solution,
)
from .equilibria import (
    EquilibriumNode,
    NotAnEquilibriumError,
    Region,
    RoaBox,
    assignable_equilibria,
    canonical_node,
    locate_roa,
    roa_box,
    stable_equilibria,
)
from .graph import (
    CtrlEdge,
    CtrlGraph,
    ModeSchedule,
    SccDecomposition,
    UnreachableError,
    build_basin_graph,
    density_probe,
    discover_transit_edges,
    plan_route,
    scc_decompose,
)
from .localctrl import (
    SweepResult,
    angular_gap_controllable,
    grid_sweep,
    is_locally_controllable,
    sample_sweep,
    velocity_fan,
    wilson_interval,
)
from .relaxation import (
    MixSignal,
    SwitchSchedule,
    approximation_error,
    mixed_velocity,
    simulate_mixed,
    switched_states,
    synthesize_switching,
)

__version__ = "0.1.0"
