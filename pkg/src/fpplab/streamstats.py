"""Mergeable count/mean/variance accumulator, the unit of all estimation.

Uses the parallel pooling form of Welford's update: merging two accumulators
gives exactly the statistics of the concatenated data, so replica results can
be reduced in any grouping (associative and commutative up to float
round-off).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnitMismatchError

__all__ = ["StreamStats", "merge_stats"]

Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass
class StreamStats:
    """Streaming first/second-moment accumulator with confidence intervals."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    units: str = ""

    @classmethod
    def from_values(cls, values, units: str = "") -> "StreamStats":
        s = cls(units=units)
        for v in np.asarray(values, dtype=np.float64).ravel():
            s.push(float(v))
        return s

    def push(self, value: float) -> None:
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)

    def variance(self) -> float:
        """Unbiased sample variance; NaN below two observations."""
        if self.count < 2:
            return math.nan
        return self.m2 / (self.count - 1)

    def std_error(self) -> float:
        if self.count < 2:
            return math.nan
        return math.sqrt(self.variance() / self.count)

    def ci95_halfwidth(self) -> float:
        """Normal-approximation 95% half-width for the mean."""
        return Z95 * self.std_error()

    def variance_std_error(self) -> float:
        """Normal-approximation standard error of the sample variance."""
        if self.count < 2:
            return math.nan
        return self.variance() * math.sqrt(2.0 / (self.count - 1))

    def merge(self, other: "StreamStats") -> "StreamStats":
        """Pooled accumulator equal to processing both data sets in one pass."""
        if self.units != other.units:
            raise UnitMismatchError(f"cannot merge units {self.units!r} and {other.units!r}")
        if other.count == 0:
            return StreamStats(self.count, self.mean, self.m2, self.units)
        if self.count == 0:
            return StreamStats(other.count, other.mean, other.m2, self.units)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return StreamStats(n, mean, m2, self.units)


def merge_stats(a: StreamStats, b: StreamStats) -> StreamStats:
    """Merge two accumulators (exact pooled count/mean/m2)."""
    return a.merge(b)
