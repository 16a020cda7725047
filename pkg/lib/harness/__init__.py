from .config import RunConfig, ScheduleSpec, DataSpec, ModelSpec, SamplerSpec, load_config, apply_overrides
from .io import MetricsRow, MetricsLog, OutputTracker, write_tensor, read_tensor, read_metrics
from .interpolation import slerp, slerp_line, slerp_grid
from .metrics import energy_distance, per_dim_mse, replicate_band
from .bench import time_sampler, fit_linear
from .verify import CheckResult, VerifySizes, run_checks

__all__ = [
    "RunConfig",
    "ScheduleSpec",
    "DataSpec",
    "ModelSpec",
    "SamplerSpec",
    "load_config",
    "apply_overrides",
    "MetricsRow",
    "MetricsLog",
    "OutputTracker",
    "write_tensor",
    "read_tensor",
    "read_metrics",
    "slerp",
    "slerp_line",
    "slerp_grid",
    "energy_distance",
    "per_dim_mse",
    "replicate_band",
    "time_sampler",
    "fit_linear",
    "CheckResult",
    "VerifySizes",
    "run_checks",
]
