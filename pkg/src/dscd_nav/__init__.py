"""Two-stance debate with arbitration for choosing navigation moves on a 2D grid."""

from .debate import DebateTrace, consensus_indicator, final_alternative, run_debate
from .env import GridConfig, OccupancyGrid, Scenario, geodesic_distance, visible_cells
from .execution import ExecutionConfig, Mode, StepDecision, decide_step, select_mode, soft_compromise
from .geometry import CandidateCard, ContextPacket, PolarAction, Pose, package_candidates, wrap_angle
from .metrics import EpisodeOutcome, MetricsConfig, MetricsReport

__version__ = "0.1.0"
