from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

RATING_MIN = 0.5
RATING_MAX = 5.0


class FallbackLevel(str, enum.Enum):
    FULL = "full"
    AXIS_MEAN_ONLY = "axis-mean"
    GLOBAL_MEAN = "global-mean"


@dataclass(frozen=True)
class Prediction:
    estimate: float
    fallback_level: FallbackLevel

    def __float__(self) -> float:
        return self.estimate


def clamp(x, clip: bool = True):
    if not clip:
        return x
    if isinstance(x, np.ndarray):
        return np.clip(x, RATING_MIN, RATING_MAX)
    return min(max(x, RATING_MIN), RATING_MAX)
