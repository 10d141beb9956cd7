from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k*tau, k = 0..steps, on [0, T]."""

    T: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"need at least one time step, got {self.steps}")
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")

    @property
    def tau(self) -> float:
        return self.T / self.steps

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.tau

    @classmethod
    def for_level(cls, T: float, level: int) -> "TimeGrid":
        """Time step ``T * 2**-level`` matching the spatial mesh size."""
        return cls(T=float(T), steps=2**level)
