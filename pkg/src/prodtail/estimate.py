"""Monte Carlo tail/ruin estimates with binomial error bars."""
from __future__ import annotations

import math
from dataclasses import dataclass

Z95 = 1.959963984540054


@dataclass(frozen=True)
class RuinEstimate:
    x: float
    n: int
    p_hat: float
    std_err: float
    ci95: tuple[float, float]
    paths: int
    hits: int
    trigger_histogram: tuple[int, ...] | None = None

    @classmethod
    def from_counts(cls, x, n, hits, paths, trigger_histogram=None):
        p = hits / paths
        se = math.sqrt(p * (1.0 - p) / paths)
        ci = (max(0.0, p - Z95 * se), min(1.0, p + Z95 * se))
        hist = None if trigger_histogram is None else tuple(int(c) for c in trigger_histogram)
        return cls(float(x), int(n), p, se, ci, int(paths), int(hits), hist)

    def covers(self, value: float) -> bool:
        return self.ci95[0] <= value <= self.ci95[1]

    def z_score(self, value: float) -> float:
        if self.std_err == 0:
            return 0.0 if self.p_hat == value else math.inf
        return (self.p_hat - value) / self.std_err
