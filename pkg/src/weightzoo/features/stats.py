"""Summary statistics of weight arrays."""
from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from ..exceptions import ValidationError

QUANTILES = (0, 25, 50, 75, 100)
STAT_NAMES = ("mean", "variance", "q0", "q25", "q50", "q75", "q100")
# recorded in feature-table metadata
PERCENTILE_METHOD = "linear"
VARIANCE_CONVENTION = "population"


@dataclass(frozen=True)
class StatBlock:
    mean: float
    variance: float
    q0: float
    q25: float
    q50: float
    q75: float
    q100: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


assert tuple(f.name for f in fields(StatBlock)) == STAT_NAMES


def stat_block(values) -> StatBlock:
    """Mean, population variance and the 0/25/50/75/100th percentiles.

    Percentiles interpolate linearly between order statistics at index
    ``q / 100 * (n - 1)``, so q0 and q100 are exactly the min and max.
    """
    a = np.asarray(values, dtype=np.float64).ravel()
    if a.size == 0:
        raise ValidationError("statistics of an empty array are undefined")
    mean = a.mean()
    variance = np.mean(np.square(a - mean))
    q = np.percentile(a, QUANTILES, method=PERCENTILE_METHOD)
    return StatBlock(float(mean), float(variance), *(float(v) for v in q))
