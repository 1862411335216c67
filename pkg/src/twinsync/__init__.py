"""twinsync: deterministic comparison of digital-twin synchronization
architectures for a networked ball-and-beam control loop."""

__version__ = "0.1.0"

from .config import load_config, load_model, save_model
from .control import PidGains, PidState, error, pid_step, setpoint
from .metrics import (RunSummary, detect_divergence, mean_abs_error,
                      settling_time, summarize)
from .model import DiscreteStateSpace, discretize_zoh, simulate
from .netsim import Channel, ChannelConfig, Packet
from .observer import (KalmanFilter, estimate_output, measurement_update,
                       time_update)
from .plant import BallBeamParams, NoiseSpec, PlantState, derivative, measure, step
from .sysid import ArxOrders, Excitation, IoDataset, collect, fit_metric, identify_arx
from .twin import (RunTrace, Scenario, run_arch1, run_arch2, run_arch3,
                   run_physical_loop)

__all__ = [
    "__version__",
    "load_config", "load_model", "save_model",
    "PidGains", "PidState", "error", "pid_step", "setpoint",
    "RunSummary", "detect_divergence", "mean_abs_error", "settling_time",
    "summarize",
    "DiscreteStateSpace", "discretize_zoh", "simulate",
    "Channel", "ChannelConfig", "Packet",
    "KalmanFilter", "estimate_output", "measurement_update", "time_update",
    "BallBeamParams", "NoiseSpec", "PlantState", "derivative", "measure",
    "step",
    "ArxOrders", "Excitation", "IoDataset", "collect", "fit_metric",
    "identify_arx",
    "RunTrace", "Scenario", "run_arch1", "run_arch2", "run_arch3",
    "run_physical_loop",
]
