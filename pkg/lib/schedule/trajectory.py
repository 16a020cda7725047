from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

from lib.utils import ParameterError, unique_in_order

logger = logging.getLogger(__name__)


class SubsequenceMode(Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class Trajectory:
    """Increasing subsequence tau_1 < ... < tau_S = T of [1..T].

    Transitions are indexed 1-based as i = 1..S; ``prev(1)`` is the data level 0.
    """

    indices: tuple[int, ...]
    T: int

    def __post_init__(self) -> None:
        indices = tuple(int(i) for i in self.indices)
        if not indices:
            raise ParameterError("a trajectory needs at least one index")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ParameterError(f"trajectory must be strictly increasing: {indices}")
        if indices[0] < 1 or indices[-1] != self.T:
            raise ParameterError(f"trajectory must lie in [1, {self.T}] and end at T: {indices}")
        object.__setattr__(self, "indices", indices)

    @property
    def S(self) -> int:
        return len(self.indices)

    def at(self, i: int) -> int:
        """tau_i for 0 <= i <= S with tau_0 = 0."""
        if not 0 <= i <= self.S:
            raise ParameterError(f"transition index {i} outside [0, {self.S}]")
        return 0 if i == 0 else self.indices[i - 1]

    def prev(self, i: int) -> int:
        return self.at(i - 1)

    @staticmethod
    def full(T: int) -> Trajectory:
        return Trajectory(indices=tuple(range(1, T + 1)), T=T)


def select_subsequence(T: int, S: int, mode: SubsequenceMode | str = SubsequenceMode.LINEAR) -> Trajectory:
    """Floors c*i (linear, c = T/S) or c*i^2 (quadratic, c = T/S^2), then repairs.

    Repair clamps to [1, T], drops duplicates, keeps T as the last element and fills
    missing slots with the largest unused indices below T.
    """
    mode = SubsequenceMode(mode)
    if T < 1 or S < 1:
        raise ParameterError(f"T and S must be positive, got T={T}, S={S}")
    if S > T:
        raise ParameterError(f"cannot select S={S} steps out of T={T}")

    # integer arithmetic keeps floor(c * i) exact
    if mode is SubsequenceMode.LINEAR:
        raw = [(T * i) // S for i in range(1, S + 1)]
    else:
        raw = [(T * i * i) // (S * S) for i in range(1, S + 1)]

    values = sorted(unique_in_order(min(max(v, 1), T) for v in raw))
    if values[-1] != T:
        values.append(T)

    missing = S - len(values)
    if missing > 0:
        logger.debug("subsequence repair fills %d slots (T=%d, S=%d, %s)", missing, T, S, mode.value)
        used = set(values)
        fill = [v for v in range(T - 1, 0, -1) if v not in used][:missing]
        values = sorted(values + fill)

    return Trajectory(indices=tuple(values), T=T)
