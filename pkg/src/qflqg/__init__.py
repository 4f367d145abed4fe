"""Quantized-feedback LQG toolkit.

Controller synthesis, offline quantizer-selection scheduling under
transmission delays, and seeded closed-loop Monte Carlo validation.
"""

__version__ = "0.1.0"

from .model import ScenarioModel, TrajectoryRecord, load_scenario, stage_cost, validate_scenario
from .synthesis import RiccatiSolution, control_gain_apply, solve_riccati, upsilon_recursion
from .innovation import (
    InnovationStatistics,
    SensorFilterState,
    make_sensor,
    propagate_statistics,
    psi_factor,
    sensor_innovation_step,
)
from .quantizer import (
    CellMomentTable,
    QuadratureConfig,
    QuantizerBank,
    QuantizerSpec,
    build_moment_tables,
    cell_moments,
    compute_delays,
    load_bank,
    quantize,
    reduction_covariance,
)
from .selection import (
    SelectionSchedule,
    arrival_indicator,
    beta_coefficients,
    brute_force_schedule,
    compute_schedule,
    delay_matrix,
    error_second_moment,
    evaluate_C0,
    export_milp,
    n_tilde,
    optimal_schedule,
)
from .estimator import ChannelMessage, EstimatorState, batch_estimate, decode_message, estimator_step, make_estimator
from .simulate import CostReport, SimulationConfig, channel_deliver, cost_breakdown, monte_carlo, run_trial, trial_seed
from .presets import demo_bank, demo_bank_dict, demo_scenario

__all__ = [name for name in dir() if not name.startswith("_")]
