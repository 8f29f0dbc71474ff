"""Sum-rate maximization for a multi-UAV downlink assisted by a
beyond-diagonal reconfigurable surface under rate-splitting multiple access.

The solver stack: Rician channel generation -> per-group rate model ->
Riemannian conjugate-gradient phase optimization + WMMSE precoding inside a
block-coordinate primal -> generalized Benders decomposition over the
cluster assignment.
"""

from .baselines import SCHEMES, run_scheme, warm_started_value
from .channel import ChannelRealization, cluster_view, generate_channels
from .experiments import SweepSpec, run_sweep
from .gbd import (
    GlobalInfeasibleError,
    Solution,
    enumerate_assignments,
    gbd_solve,
    solve_primal,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .rates import (
    Assignment,
    CommonRateAlloc,
    PhaseConfig,
    PrecoderSet,
    RateReport,
    constraint_residuals,
    effective_channel,
    overall_rate,
)
from .scenario import ScenarioConfig, ScenarioError, desk_scenario, load_scenario, table_ii_scenario
from .wmmse import allocate_common, wmmse_solve

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "ChannelRealization",
    "CommonRateAlloc",
    "GlobalInfeasibleError",
    "KERNEL_BACKEND",
    "PhaseConfig",
    "PrecoderSet",
    "RateReport",
    "SCHEMES",
    "ScenarioConfig",
    "ScenarioError",
    "Solution",
    "SweepSpec",
    "allocate_common",
    "cluster_view",
    "constraint_residuals",
    "desk_scenario",
    "effective_channel",
    "enumerate_assignments",
    "gbd_solve",
    "generate_channels",
    "load_scenario",
    "overall_rate",
    "run_scheme",
    "run_sweep",
    "solve_primal",
    "table_ii_scenario",
    "warm_started_value",
    "wmmse_solve",
]
