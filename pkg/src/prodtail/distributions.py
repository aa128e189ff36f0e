"""Parametric univariate laws with exact tails, quantiles and sampling.

Every family is an immutable value object.  Public methods accept scalars or
numpy arrays and return the same shape (a plain ``float`` for scalar input).
Tails are evaluated through ``log_tail`` so that ratios deep in the tail stay
meaningful after the probabilities themselves underflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, DomainError

__all__ = [
    "Distribution",
    "Pareto",
    "Weibull",
    "Lognormal",
    "Exponential",
    "Uniform",
    "DiscreteFinite",
    "LightLongTail",
    "Shifted",
    "from_json",
]


def _scalar_or_array(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


class Distribution:
    """Common interface of all families.

    Subclasses implement ``_log_tail`` (or ``_tail``), ``_isf`` and the two
    endpoints.  Everything else is derived.
    """

    family: str = ""
    is_discrete: bool = False

    # -- hooks -------------------------------------------------------------
    def _log_tail(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self._tail(x))

    def _tail(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self._log_tail(x))

    def _isf(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _quantile(self, p: np.ndarray) -> np.ndarray:
        return self._isf(1.0 - p)

    # -- public API ----------------------------------------------------------
    def tail(self, x):
        """P(X > x)."""
        arr = np.asarray(x, dtype=float)
        return _scalar_or_array(x, self._tail(arr))

    def log_tail(self, x):
        """log P(X > x), finite even where the tail underflows."""
        arr = np.asarray(x, dtype=float)
        return _scalar_or_array(x, self._log_tail(arr))

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        return _scalar_or_array(x, 1.0 - self._tail(arr))

    def cdf_left(self, x):
        """P(X < x), the left limit of the cdf."""
        return self.cdf(x)

    def quantile(self, p):
        """Generalized inverse ``inf{x : cdf(x) >= p}``."""
        arr = np.asarray(p, dtype=float)
        if np.any(~((arr >= 0.0) & (arr <= 1.0))):
            raise DomainError("quantile level must lie in [0, 1]")
        return _scalar_or_array(p, self._quantile(arr))

    def isf(self, v):
        """Inverse survival function, accurate for tiny ``v``."""
        arr = np.asarray(v, dtype=float)
        if np.any(~((arr >= 0.0) & (arr <= 1.0))):
            raise DomainError("tail level must lie in [0, 1]")
        return _scalar_or_array(v, self._isf(arr))

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-transform draw(s) using ``rng.random``."""
        u = rng.random(size)
        return self.quantile(u)

    @property
    def left_endpoint(self) -> float:
        raise NotImplementedError

    @property
    def right_endpoint(self) -> float:
        raise NotImplementedError

    @property
    def lattice_span(self) -> float | None:
        return None

    def in_support(self, y):
        """Membership in the closed support (atoms for discrete laws)."""
        arr = np.asarray(y, dtype=float)
        out = (arr >= self.left_endpoint) & (arr <= self.right_endpoint) & np.isfinite(arr)
        return bool(out) if np.ndim(y) == 0 else out

    def exp_moment(self, gamma: float) -> float:
        """c = E exp(gamma X); ``inf`` when the integral diverges."""
        if gamma < 0:
            raise DomainError("gamma must be non-negative")
        if gamma == 0:
            return 1.0
        return self._exp_moment(gamma)

    def _exp_moment(self, gamma: float) -> float:
        raise NotImplementedError

    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    def to_json(self) -> dict[str, Any]:
        return {"family": self.family, "params": self.params()}


@dataclass(frozen=True)
class Pareto(Distribution):
    alpha: float
    xm: float = 1.0
    family = "pareto"

    def __post_init__(self):
        _check_positive("alpha", self.alpha)
        _check_positive("xm", self.xm)

    def _log_tail(self, x):
        out = self.alpha * (math.log(self.xm) - np.log(np.maximum(x, self.xm)))
        return np.where(x <= self.xm, 0.0, out)

    def _tail(self, x):
        return (self.xm / np.maximum(x, self.xm)) ** self.alpha

    def _isf(self, v):
        with np.errstate(divide="ignore"):
            return self.xm * v ** (-1.0 / self.alpha)

    def _quantile(self, p):
        with np.errstate(divide="ignore"):
            return self.xm * (1.0 - p) ** (-1.0 / self.alpha)

    left_endpoint = property(lambda self: self.xm)
    right_endpoint = property(lambda self: math.inf)

    def _exp_moment(self, gamma):
        return math.inf

    def params(self):
        return {"alpha": self.alpha, "xm": self.xm}


@dataclass(frozen=True)
class Weibull(Distribution):
    """Weibull with shape in (0, 1); heavier-than-exponential tail."""

    shape: float
    scale: float = 1.0
    family = "weibull"

    def __post_init__(self):
        _check_positive("scale", self.scale)
        if not 0 < self.shape < 1:
            raise DomainError("Weibull shape must lie in (0, 1) so the law is subexponential")

    def _log_tail(self, x):
        z = np.maximum(x, 0.0) / self.scale
        return -(z**self.shape)

    def _isf(self, v):
        with np.errstate(divide="ignore"):
            return self.scale * (-np.log(v)) ** (1.0 / self.shape)

    def _quantile(self, p):
        with np.errstate(divide="ignore"):
            return self.scale * (-np.log1p(-p)) ** (1.0 / self.shape)

    left_endpoint = property(lambda self: 0.0)
    right_endpoint = property(lambda self: math.inf)

    def _exp_moment(self, gamma):
        return math.inf

    def params(self):
        return {"shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Lognormal(Distribution):
    mu: float
    sigma: float
    family = "lognormal"

    def __post_init__(self):
        _check_positive("sigma", self.sigma)
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")

    def _log_tail(self, x):
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 0.0)) - self.mu) / self.sigma
        return special.log_ndtr(-z)

    def _isf(self, v):
        return np.exp(self.mu - self.sigma * special.ndtri(v))

    def _quantile(self, p):
        return np.exp(self.mu + self.sigma * special.ndtri(p))

    left_endpoint = property(lambda self: 0.0)
    right_endpoint = property(lambda self: math.inf)

    def _exp_moment(self, gamma):
        return math.inf

    def params(self):
        return {"mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float
    family = "exponential"

    def __post_init__(self):
        _check_positive("rate", self.rate)

    def _log_tail(self, x):
        return -self.rate * np.maximum(x, 0.0)

    def _isf(self, v):
        with np.errstate(divide="ignore"):
            return -np.log(v) / self.rate

    def _quantile(self, p):
        with np.errstate(divide="ignore"):
            return -np.log1p(-p) / self.rate

    left_endpoint = property(lambda self: 0.0)
    right_endpoint = property(lambda self: math.inf)

    def _exp_moment(self, gamma):
        if gamma >= self.rate:
            return math.inf
        return self.rate / (self.rate - gamma)

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class Uniform(Distribution):
    a: float
    b: float
    family = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and 0 <= self.a < self.b):
            raise DomainError("Uniform needs 0 <= a < b")

    def _tail(self, x):
        return np.clip((self.b - x) / (self.b - self.a), 0.0, 1.0)

    def _isf(self, v):
        return self.b - v * (self.b - self.a)

    def _quantile(self, p):
        return self.a + p * (self.b - self.a)

    left_endpoint = property(lambda self: self.a)
    right_endpoint = property(lambda self: self.b)

    def _exp_moment(self, gamma):
        w = gamma * (self.b - self.a)
        return math.exp(gamma * self.a) * math.expm1(w) / w

    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class LightLongTail(Distribution):
    """Tail ``exp(-gamma x) (1 + x)^-2`` on x >= 0; a member of L(gamma).

    The tail equals 1 at the origin and is continuous, so it is already a
    proper survival function.
    """

    gamma: float
    family = "light_long_tail"

    def __post_init__(self):
        _check_positive("gamma", self.gamma)

    def _log_tail(self, x):
        xp = np.maximum(x, 0.0)
        return -self.gamma * xp - 2.0 * np.log1p(xp)

    def _isf(self, v):
        with np.errstate(divide="ignore"):
            target = -np.log(v)
        x = np.zeros_like(target)
        finite = np.isfinite(target)
        t = np.where(finite, target, 0.0)
        # g(x) = gamma x + 2 log1p(x) is concave increasing, so Newton from
        # x = 0 climbs monotonically to the root.
        for _ in range(200):
            g = self.gamma * x + 2.0 * np.log1p(x)
            step = (t - g) / (self.gamma + 2.0 / (1.0 + x))
            x = x + step
            if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, x)):
                break
        return np.where(finite, x, math.inf)

    left_endpoint = property(lambda self: 0.0)
    right_endpoint = property(lambda self: math.inf)

    def _exp_moment(self, gamma):
        if gamma > self.gamma:
            return math.inf
        if gamma == self.gamma:
            return 1.0 + gamma
        # E e^{gX} = 1 + g * int_0^inf e^{g y} tail(y) dy
        k = self.gamma - gamma
        val, _ = integrate.quad(lambda y: math.exp(-k * y) / (1.0 + y) ** 2, 0, math.inf, epsabs=1e-14, epsrel=1e-12)
        return 1.0 + gamma * val

    def params(self):
        return {"gamma": self.gamma}


@dataclass(frozen=True)
class DiscreteFinite(Distribution):
    """Finitely many atoms; tails use the strict ``>`` convention."""

    atoms: tuple[float, ...]
    probs: tuple[float, ...]
    family = "discrete"
    is_discrete = True
    _atoms: np.ndarray = field(init=False, repr=False, compare=False)
    _probs: np.ndarray = field(init=False, repr=False, compare=False)
    _suffix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple(float(a) for a in self.atoms)
        probs = tuple(float(p) for p in self.probs)
        if not atoms or len(atoms) != len(probs):
            raise DomainError("atoms and probs must be non-empty and of equal length")
        if any(not math.isfinite(a) for a in atoms):
            raise DomainError("atoms must be finite")
        if any(b <= a for a, b in zip(atoms, atoms[1:])):
            raise DomainError("atoms must be strictly increasing")
        if any(not (p > 0) for p in probs):
            raise DomainError("atom probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise DomainError("atom probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_atoms", np.array(atoms))
        object.__setattr__(self, "_probs", np.array(probs))
        # _suffix[j] = P(Y >= atoms[j]); pinned to exactly 1 and 0 at the ends
        suffix = [math.fsum(probs[j:]) for j in range(len(probs))] + [0.0]
        suffix[0] = 1.0
        object.__setattr__(self, "_suffix", np.array(suffix))

    def _tail(self, x):
        return self._suffix[np.searchsorted(self._atoms, x, side="right")]

    def cdf_left(self, x):
        arr = np.asarray(x, dtype=float)
        return _scalar_or_array(x, 1.0 - self._suffix[np.searchsorted(self._atoms, arr, side="left")])

    def _quantile(self, p):
        cum = 1.0 - self._suffix[1:]
        idx = np.searchsorted(cum, p, side="left")
        return self._atoms[np.minimum(idx, len(self.atoms) - 1)]

    def _isf(self, v):
        return self._quantile(1.0 - v)

    left_endpoint = property(lambda self: self.atoms[0])
    right_endpoint = property(lambda self: self.atoms[-1])

    @property
    def lattice_span(self):
        if len(self.atoms) < 2:
            return None
        gaps = {b - a for a, b in zip(self.atoms, self.atoms[1:])}
        return gaps.pop() if len(gaps) == 1 else None

    def in_support(self, y):
        arr = np.asarray(y, dtype=float)
        out = np.isin(arr, self._atoms)
        return bool(out) if np.ndim(y) == 0 else out

    def _exp_moment(self, gamma):
        with np.errstate(over="ignore"):
            return math.fsum(p * math.exp(gamma * a) for a, p in zip(self.atoms, self.probs))

    def params(self):
        return {"atoms": list(self.atoms), "probs": list(self.probs)}


@dataclass(frozen=True)
class Shifted(Distribution):
    """Law of ``inner + shift``."""

    inner: Distribution
    shift: float

    def __post_init__(self):
        if isinstance(self.inner, Shifted):
            raise DomainError("nested shifts are not supported; combine the offsets")
        if not math.isfinite(self.shift):
            raise DomainError("shift must be finite")

    @property
    def family(self):
        return self.inner.family

    @property
    def is_discrete(self):
        return self.inner.is_discrete

    def _log_tail(self, x):
        return self.inner._log_tail(x - self.shift)

    def _tail(self, x):
        return self.inner._tail(x - self.shift)

    def cdf_left(self, x):
        arr = np.asarray(x, dtype=float)
        return _scalar_or_array(x, np.asarray(self.inner.cdf_left(arr - self.shift)))

    def _isf(self, v):
        return self.inner._isf(v) + self.shift

    def _quantile(self, p):
        return self.inner._quantile(p) + self.shift

    left_endpoint = property(lambda self: self.inner.left_endpoint + self.shift)
    right_endpoint = property(lambda self: self.inner.right_endpoint + self.shift)

    @property
    def lattice_span(self):
        return self.inner.lattice_span

    def in_support(self, y):
        return self.inner.in_support(np.asarray(y, dtype=float) - self.shift)

    def _exp_moment(self, gamma):
        inner = self.inner.exp_moment(gamma)
        return inner * math.exp(gamma * self.shift) if math.isfinite(inner) else math.inf

    def params(self):
        return self.inner.params()

    def to_json(self):
        out = self.inner.to_json()
        out["shift"] = self.shift
        return out


_FAMILIES = {
    "pareto": lambda p: Pareto(float(p["alpha"]), float(p.get("xm", 1.0))),
    "weibull": lambda p: Weibull(float(p["shape"]), float(p.get("scale", 1.0))),
    "lognormal": lambda p: Lognormal(float(p["mu"]), float(p["sigma"])),
    "exponential": lambda p: Exponential(float(p["rate"])),
    "uniform": lambda p: Uniform(float(p["a"]), float(p["b"])),
    "discrete": lambda p: DiscreteFinite(tuple(p["atoms"]), tuple(p["probs"])),
    "light_long_tail": lambda p: LightLongTail(float(p["gamma"])),
}


def from_json(obj: dict[str, Any]) -> Distribution:
    """Build a distribution from ``{"family", "params", "shift"?}``."""
    try:
        family = obj["family"]
        build = _FAMILIES[family]
    except KeyError as exc:
        raise ConfigError(f"unknown or missing distribution family in {obj!r}") from exc
    try:
        dist = build(obj.get("params", {}))
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc} for family {family!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for family {family!r}: {exc}") from exc
    if obj.get("shift") is not None:
        dist = Shifted(dist, float(obj["shift"]))
    return dist
