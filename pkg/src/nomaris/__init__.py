"""Joint transmit beamforming, RIS phase and radar filter design for RIS-assisted NOMA-ISAC."""

from .active import P3Linearization, build_p3, solve_p3, taylor_lb_quadratic
from .conic import ConeBlock, ConicProgram, ConicSolution, Status, solve_conic
from .metrics import (Design, Scheme, beampattern, check_feasible, composite_target_matrix,
                      radar_snr_lb, radar_snr_mc, rate_report, sinr_decode, sum_rate)
from .orchestrator import (Baseline, BaselineKind, RunStatus, SolveTrace, ao_solve, emit_beampattern,
                           initialize, run_baseline, run_experiment)
from .passive import (EffectiveChannels, SensingAffinization, build_effective_channels, build_p7,
                      build_sensing_affinization, solve_p7)
from .receive import optimal_filter, update_filters
from .scenario import (ChannelSet, InfeasibleScenario, SystemConfig, generate_channels, load_config,
                       order_users, preset)

__version__ = "0.1.0"

__all__ = [
    "P3Linearization",
    "build_p3",
    "solve_p3",
    "taylor_lb_quadratic",
    "ConeBlock",
    "ConicProgram",
    "ConicSolution",
    "Status",
    "solve_conic",
    "Design",
    "Scheme",
    "beampattern",
    "check_feasible",
    "composite_target_matrix",
    "radar_snr_lb",
    "radar_snr_mc",
    "rate_report",
    "sinr_decode",
    "sum_rate",
    "Baseline",
    "BaselineKind",
    "RunStatus",
    "SolveTrace",
    "ao_solve",
    "emit_beampattern",
    "initialize",
    "run_baseline",
    "run_experiment",
    "EffectiveChannels",
    "SensingAffinization",
    "build_effective_channels",
    "build_p7",
    "build_sensing_affinization",
    "solve_p7",
    "optimal_filter",
    "update_filters",
    "ChannelSet",
    "InfeasibleScenario",
    "SystemConfig",
    "generate_channels",
    "load_config",
    "order_users",
    "preset",
]
