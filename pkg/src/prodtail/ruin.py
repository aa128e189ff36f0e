"""Finite-time ruin in the discrete-time model with dependent (X_i, Y_i).

S_m = sum_{i<=m} X_i Y_1 ... Y_i and psi(x; n) = P(max_{m<=n} S_m > x).
Monte Carlo runs in fixed-size blocks; block ``b`` draws from a Philox stream
keyed by ``(seed, b)``, so results do not depend on how blocks are spread over
worker threads.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dependence import DependenceModel, bind, validate
from .distributions import Distribution
from .errors import DomainError, ModelInvalidError, NumericWarning
from .estimate import RuinEstimate
from .product_tail import iterated_tail

BLOCK_PATHS = 1 << 16

COMPARE_COLUMNS = ("x", "n", "psi_hat", "std_err", "ci_lo", "ci_hi", "asym_sum", "ratio", "ratio_se", "paths", "seed")


@dataclass(frozen=True)
class RiskModelSpec:
    F: Distribution
    G: Distribution
    model: DependenceModel
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("horizon n must be a positive integer")
        if self.G.left_endpoint < 0:
            raise DomainError("discount factors must be non-negative")
        for name, d in (("F", self.F), ("G", self.G)):
            if d.is_discrete and d.left_endpoint == 0 and d.right_endpoint == 0:
                raise DomainError(f"{name} is degenerate at zero")
        report = validate(self.model, self.F, self.G)
        if not report.valid:
            failed = [c.name for c in report.conditions if c.required and not c.passed]
            raise ModelInvalidError(f"dependence model fails {failed} for these marginals")

    @property
    def law(self):
        return bind(self.model, self.F, self.G)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based substream for one block of paths."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def partial_sums(spec: RiskModelSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """(size, n) array of S_1..S_n for independent paths."""
    x, y = spec.law.sample(rng, size * spec.n)
    x = x.reshape(size, spec.n)
    y = y.reshape(size, spec.n)
    return np.cumsum(x * np.cumprod(y, axis=1), axis=1)


def reversed_sums(spec: RiskModelSpec, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    """S_n = sum X_i Y_1..Y_i and T_n = sum X_i Y_i..Y_n from the same draws.

    The two are equal in distribution because the pairs are i.i.d.
    """
    x, y = spec.law.sample(rng, size * spec.n)
    x = x.reshape(size, spec.n)
    y = y.reshape(size, spec.n)
    forward = np.cumprod(y, axis=1)
    backward = np.cumprod(y[:, ::-1], axis=1)[:, ::-1]
    return (x * forward).sum(axis=1), (x * backward).sum(axis=1)


def simulate_path(spec: RiskModelSpec, rng: np.random.Generator) -> tuple[float, int]:
    """Running maximum of S_1..S_n along one path and the period attaining it (1-based)."""
    s = partial_sums(spec, rng, 1)[0]
    m = int(np.argmax(s))
    return float(s[m]), m + 1


def _block_counts(spec: RiskModelSpec, xs: np.ndarray, seed: int, block: int, size: int):
    s = partial_sums(spec, block_rng(seed, block), size)
    running_max = s.max(axis=1)
    hits = np.zeros(len(xs), dtype=np.int64)
    hist = np.zeros((len(xs), spec.n), dtype=np.int64)
    for j, x in enumerate(xs):
        ruined = running_max > x
        hits[j] = np.count_nonzero(ruined)
        if hits[j]:
            first = np.argmax(s[ruined] > x, axis=1)
            hist[j] = np.bincount(first, minlength=spec.n)
    return hits, hist


def estimate_ruin(spec: RiskModelSpec, x_grid, N: int, seed: int, chunks: int = 1) -> list[RuinEstimate]:
    """Monte Carlo psi(x; n) for every x in ``x_grid`` from one pass of N paths.

    ``chunks`` is the number of worker threads; it does not affect the result.
    """
    xs = np.asarray(x_grid, dtype=float)
    if N < 1000:
        raise DomainError("N must be at least 1000")
    if np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
        raise DomainError("x_grid must be positive and strictly increasing")
    n_blocks = -(-int(N) // BLOCK_PATHS)
    sizes = [min(BLOCK_PATHS, N - b * BLOCK_PATHS) for b in range(n_blocks)]
    hits = np.zeros(len(xs), dtype=np.int64)
    hist = np.zeros((len(xs), spec.n), dtype=np.int64)

    def run(b):
        return _block_counts(spec, xs, seed, b, sizes[b])

    if chunks <= 1:
        results = map(run, range(n_blocks))
    else:
        pool = ThreadPoolExecutor(max_workers=int(chunks))
        results = pool.map(run, range(n_blocks))
    for h, g in results:
        hits += h
        hist += g
    if chunks > 1:
        pool.shutdown()
    return [RuinEstimate.from_counts(x, spec.n, int(h), int(N), g) for x, h, g in zip(xs, hits, hist)]


def asymptotic_terms(spec: RiskModelSpec, x) -> np.ndarray:
    """H_1-bar(x), ..., H_n-bar(x) as rows (one column per x)."""
    return np.array([np.atleast_1d(iterated_tail(spec.F, spec.G, spec.model, i, x)) for i in range(1, spec.n + 1)])


def asymptotic_ruin(spec: RiskModelSpec, x):
    """sum_{i=1}^n H_i-bar(x).  Not a probability: it may exceed 1 for small x."""
    terms = asymptotic_terms(spec, x)
    total = np.array([math.fsum(col) for col in terms.T])
    if np.any(total > 1):
        warnings.warn(f"asymptotic sum exceeds 1 at x={np.atleast_1d(x)[total > 1].tolist()}", NumericWarning, stacklevel=2)
    return float(total[0]) if np.ndim(x) == 0 else total


@dataclass(frozen=True)
class ComparisonRow:
    x: float
    n: int
    psi_hat: float
    std_err: float
    ci_lo: float
    ci_hi: float
    asym_sum: float
    ratio: float
    ratio_se: float
    paths: int
    seed: int
    trigger_histogram: tuple[int, ...]

    def asym_in_ci(self) -> bool:
        return self.ci_lo <= self.asym_sum <= self.ci_hi


def compare_ruin(spec: RiskModelSpec, x_grid, N: int, seed: int, chunks: int = 1) -> list[ComparisonRow]:
    """Monte Carlo psi-hat next to the asymptotic sum; ratio psi-hat / sum with delta-method s.e."""
    estimates = estimate_ruin(spec, x_grid, N, seed, chunks)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericWarning)
        asym = np.atleast_1d(asymptotic_ruin(spec, np.asarray(x_grid, dtype=float)))
    rows = []
    for e, a in zip(estimates, asym):
        ratio = float(e.p_hat / a) if a > 0 else math.nan
        ratio_se = float(e.std_err / a) if a > 0 else math.nan
        rows.append(ComparisonRow(e.x, e.n, e.p_hat, e.std_err, e.ci95[0], e.ci95[1], float(a),
                                  ratio, ratio_se, e.paths, int(seed), e.trigger_histogram))
    return rows


def comparison_csv(rows: list[ComparisonRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for r in rows:
        w.writerow([repr(r.x), r.n, repr(r.psi_hat), repr(r.std_err), repr(r.ci_lo), repr(r.ci_hi),
                    repr(r.asym_sum), repr(r.ratio), repr(r.ratio_se), r.paths, r.seed])
    return buf.getvalue()
