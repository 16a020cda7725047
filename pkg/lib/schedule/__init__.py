from .schedule import NoiseSchedule, make_linear_beta_schedule, stepwise
from .trajectory import Trajectory, SubsequenceMode, select_subsequence

__all__ = [
    "NoiseSchedule",
    "make_linear_beta_schedule",
    "stepwise",
    "Trajectory",
    "SubsequenceMode",
    "select_subsequence",
]
