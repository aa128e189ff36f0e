"""Numerical probes of the distribution classes L(gamma) and S(gamma).

Class membership is an asymptotic property; the probes below only show
whether ratios settle toward their targets along a finite grid.  Reports say
so explicitly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .dependence import DependenceModel
from .distributions import Distribution
from .errors import DomainError, NumericError
from .product_tail import as_tail_function, h_integral_curve
from .quadrature import _atoms

EVIDENCE_NOTE = "evidence, not proof: only the finite-grid trend is certified"
CONV_POINTS = 1 << 16
QUANTILE_EDGE = 1e-12
MASS_TOL = 1e-6


@dataclass
class RatioRow:
    x: float
    ratio: float
    target: float

    @property
    def deviation(self) -> float:
        if self.target == 0:
            return abs(self.ratio)
        return abs(self.ratio / self.target - 1.0)


@dataclass
class ProbeReport:
    probe: str
    rows: list[RatioRow]
    tol: float = 0.01
    notes: list[str] = field(default_factory=list)

    @property
    def deviations(self) -> np.ndarray:
        return np.array([r.deviation for r in self.rows])

    @property
    def max_dev(self) -> float:
        return float(self.deviations.max()) if self.rows else math.nan

    @property
    def trend(self) -> str:
        d = self.deviations
        if len(d) < 2:
            return "flat"
        steps = np.diff(d)
        scale = 1e-12 * max(1.0, float(np.abs(d).max()))
        if np.all(np.abs(steps) <= scale):
            return "flat"
        if np.all(steps <= scale):
            return "decreasing"
        if np.all(steps >= -scale):
            return "increasing"
        return "mixed"

    @property
    def passed(self) -> bool:
        if not self.rows:
            return False
        return self.trend in ("decreasing", "flat") and self.rows[-1].deviation <= self.tol

    def summary(self) -> dict:
        return {
            "probe": self.probe,
            "pass": self.passed,
            "max_dev": self.max_dev,
            "final_dev": self.rows[-1].deviation if self.rows else None,
            "trend": self.trend,
            "tol": self.tol,
            "note": EVIDENCE_NOTE,
            "notes": self.notes,
        }

    def csv_rows(self):
        for r in self.rows:
            yield [self.probe, repr(r.x), repr(r.ratio), repr(r.target), repr(r.deviation)]


def reports_csv(reports: list[ProbeReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["probe", "x", "ratio", "target", "deviation"])
    for rep in reports:
        w.writerows(rep.csv_rows())
    return buf.getvalue()


# ---------------------------------------------------------------------------


def _require_positive_tail(spec: Distribution, xs: np.ndarray, in_logs: bool = False):
    if in_logs:
        bad = ~np.isfinite(np.asarray(spec.log_tail(xs)))
    else:
        bad = np.asarray(spec.tail(xs)) <= 0
    if np.any(bad):
        raise DomainError(f"the tail vanishes at x={xs[bad].tolist()}; ratios are undefined there")


def long_tail_ratio(spec: Distribution, gamma: float, t: float, x_grid) -> list[RatioRow]:
    """Vbar(x - t) / Vbar(x) against e^{gamma t}, computed in log space."""
    if gamma < 0 or t <= 0:
        raise DomainError("need gamma >= 0 and t > 0")
    span = spec.lattice_span
    if span is not None and gamma > 0:
        k = t / span
        if abs(k - round(k)) > 1e-12 * max(1.0, abs(k)):
            raise DomainError(f"t={t} is not a multiple of the lattice span {span}")
    xs = np.asarray(x_grid, dtype=float)
    _require_positive_tail(spec, xs, in_logs=True)
    ratio = np.exp(np.asarray(spec.log_tail(xs - t)) - np.asarray(spec.log_tail(xs)))
    target = math.exp(gamma * t)
    return [RatioRow(float(x), float(r), target) for x, r in zip(xs, ratio)]


def _tail_coordinate_nodes(u_lo: float, points: int) -> np.ndarray:
    """Nodes on [u_lo, 1 - QUANTILE_EDGE], log-spaced in distance from both ends."""
    u_hi = 1.0 - QUANTILE_EDGE
    width = u_hi - u_lo
    half = points // 2
    near_lo = u_lo + 0.5 * width * np.geomspace(QUANTILE_EDGE, 1.0, half)
    near_hi = u_hi - 0.5 * width * np.geomspace(QUANTILE_EDGE, 1.0, points - half)
    return np.unique(np.concatenate([[u_lo], near_lo, near_hi, [u_hi]]))


def _trapezoid_in_u(spec: Distribution, func, u_lo: float, x: float, points: int) -> float:
    """int of func(x - v) V(dv) over {v : Vbar(v) >= u_lo}, less the last QUANTILE_EDGE of mass."""
    if u_lo >= 1.0 - QUANTILE_EDGE:
        return 0.0
    u = _tail_coordinate_nodes(u_lo, points)
    return float(trapezoid(func(x - spec.isf(u)), u))


def convolution_tail(spec: Distribution, x: float, points: int = CONV_POINTS) -> float:
    """P(V1 + V2 > x) for i.i.d. V1, V2 ~ spec.

    Continuous laws use the split
        P(V1 + V2 > x) = Vbar(x/2)^2 + 2 int_{v <= x/2} Vbar(x - v) V(dv),
    whose first term is exact.  The integral is a trapezoid rule in tail
    coordinates u = Vbar(v) on ``points`` nodes covering [1e-12, 1 - 1e-12];
    the leftover 1e-12 of mass near the left endpoint is added in closed form.
    As a self-check the complementary integral for P(V1 + V2 <= x) is computed
    the same way and the two must sum to 1.  Discrete laws are convolved exactly.
    """
    if spec.is_discrete:
        ys, ps = _atoms(spec)
        sums = ys[:, None] + ys[None, :]
        probs = ps[:, None] * ps[None, :]
        return math.fsum(probs[sums > x])
    edge = float(spec.isf(1.0 - QUANTILE_EDGE))
    tail_half = float(spec.tail(x / 2.0))
    upper = _trapezoid_in_u(spec, spec.tail, tail_half, x, points)
    p_above = tail_half * tail_half + 2.0 * (upper + QUANTILE_EDGE * float(spec.tail(x - edge)))
    lower = _trapezoid_in_u(spec, spec.cdf, float(spec.tail(x - spec.left_endpoint)), x, points)
    p_below = lower + QUANTILE_EDGE * float(spec.cdf(x - edge))
    mass = p_above + p_below
    if abs(mass - 1.0) > MASS_TOL:
        raise NumericError(f"convolution oracle mass {mass!r} at x={x} misses 1 by more than {MASS_TOL}",
                           mass, MASS_TOL)
    return p_above


def convolution_tail_ratio(spec: Distribution, gamma: float, x_grid, points: int = CONV_POINTS,
                           method: str = "quadrature", rng=None, samples: int = 10**6) -> list[RatioRow]:
    """P(V1 + V2 > x) / Vbar(x) against 2c, c = E e^{gamma V}."""
    c = spec.exp_moment(gamma)
    if not math.isfinite(c):
        raise DomainError(f"E exp({gamma} V) is infinite; gamma too large for this family")
    xs = np.asarray(x_grid, dtype=float)
    _require_positive_tail(spec, xs)
    if method == "montecarlo":
        if rng is None:
            raise DomainError("montecarlo convolution needs an explicit rng")
        s = spec.sample(rng, samples) + spec.sample(rng, samples)
        conv = np.array([np.count_nonzero(s > x) / samples for x in xs])
    else:
        conv = np.array([convolution_tail(spec, float(x), points) for x in xs])
    ratio = conv / np.asarray(spec.tail(xs))
    return [RatioRow(float(x), float(r), 2.0 * c) for x, r in zip(xs, ratio)]


def assumption_b_ratio(G: Distribution, h_tail, b: float, x_grid) -> list[RatioRow]:
    """Gbar(b x) / Hbar(x); identically 0 beyond beta_G / b for bounded G."""
    if b <= 0:
        raise DomainError("b must be positive")
    xs = np.asarray(x_grid, dtype=float)
    hbar = np.asarray(as_tail_function(h_tail)(xs), dtype=float)
    if np.any(hbar <= 0):
        raise DomainError("the product tail must be positive on the grid")
    gbar = np.asarray(G.tail(b * xs), dtype=float)
    return [RatioRow(float(x), float(r), 0.0) for x, r in zip(xs, gbar / hbar)]


def classify_product(gamma_F: float, beta_G: float) -> float:
    """Index of the product's class: gamma / beta_G, read as 0 when beta_G is infinite."""
    if gamma_F < 0:
        raise DomainError("gamma must be non-negative")
    if not beta_G > 0:
        raise DomainError("beta_G must be positive")
    if math.isinf(beta_G) or gamma_F == 0:
        return 0.0
    return gamma_F / beta_G


@dataclass
class ProductClassReport(ProbeReport):
    gamma_H: float = 0.0


def verify_product_class(F: Distribution, G: Distribution, model: DependenceModel, gamma_F: float,
                         t: float, x_grid, tol: float = 0.01) -> ProductClassReport:
    """Long-tail ratios of Hbar against exp((gamma / beta_G) t)."""
    xs = np.asarray(x_grid, dtype=float)
    gamma_H = classify_product(gamma_F, G.right_endpoint)
    curve = h_integral_curve(F, G, model, np.unique(np.concatenate([xs - t, xs])))
    vals = dict(zip(curve.grid.tolist(), curve.values.tolist()))
    target = math.exp(gamma_H * t)
    rows = []
    for x in xs:
        num, den = vals[float(x - t)], vals[float(x)]
        rows.append(RatioRow(float(x), num / den if den > 0 else math.inf, target))
    return ProductClassReport("product_class", rows, tol, [f"gamma_H = {gamma_H:g}"], gamma_H)
