"""Two-vessel formation path-following simulator.

Line-of-sight guidance for the formation barycenter, composed with
collision-avoidance and formation-keeping tasks through null-space
projections, driving adaptive surge/heading autopilots on a 3-DOF
underactuated vessel model under constant ocean current.
"""

from .autopilots import AdaptiveState, AutopilotGains, AutopilotRefs, BaselineGains
from .nsb import NsbOutput, TaskConfig
from .paths import CirclePath, FilletPolylinePath, PathErrors, SinusoidPath, StraightPath
from .scenario import Scenario, load_scenario
from .simulate import (
    ConditionReport,
    InitialSpec,
    Metrics,
    SimConfig,
    SimLog,
    check_conditions,
    lyapunov_diag,
    metrics,
    run,
)
from .vessel import ControlInput, OceanCurrent, ParamsReport, VesselParams, VesselState

__version__ = "0.1.0"
