"""Over-the-air resource coordination and power control for femtocell networks."""
from .airlink import CoordinationContext, RrmMessage, collect_context, mix64
from .model import GainMatrix, Node, NodeKind, SystemParams, compute_gains, pathloss_gain
from .powerctrl import (
    Mode,
    PowerDecision,
    brute_force_optimize,
    objective_approx,
    objective_exact,
    objective_product,
    optimize_power,
    priority_control,
)
from .protocol import RoundMetrics, Scheme, run_coordination_round
from .scenario import (
    Scenario,
    baseline_orthogonal,
    compare_schemes,
    generate_random_scenario,
    run_scenario,
)

__version__ = "0.1.0"
