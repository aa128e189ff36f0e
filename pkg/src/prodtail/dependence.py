"""Bivariate dependence between a loss X ~ F and a discount factor Y ~ G.

Three structures are supported: independence, FGM(theta) and Sarmanov
(theta, phi1, phi2).  Each one, combined with its marginals, yields the
function h with P(X > x | Y = y) ~ h(y) P(X > x), a conditional tail, a joint
sampler and a validity report.

FGM uses the mid-distribution function ``G(y) + G(y-) - 1`` so that atoms of
G are handled exactly; for continuous marginals this is ``2G(y) - 1``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
from scipy import optimize

from .distributions import DiscreteFinite, Distribution
from .errors import ConfigError, DomainError, ModelInvalidError, SamplerStuckError
from .quadrature import _atoms, stieltjes

KERNEL_FORMS = ("exp_x", "exp_y", "fgm_x", "fgm_y")
MAX_REJECTION_ATTEMPTS = 10**6


@dataclass(frozen=True)
class KernelSpec:
    """A Sarmanov kernel form; constants are fixed once bound to a marginal.

    ``exp_x``: (e^{-x} - a) 1{x > 0}, a = E[e^{-X}; X >= 0] / P(X >= 0)
    ``exp_y``: e^{-y} - E e^{-Y}
    ``fgm_x`` / ``fgm_y``: F(x) + F(x-) - 1 (mid-distribution, centred)
    """

    form: str

    def __post_init__(self):
        if self.form not in KERNEL_FORMS:
            raise ConfigError(f"unknown kernel form {self.form!r}; expected one of {KERNEL_FORMS}")

    def to_json(self):
        return {"form": self.form}


@dataclass(frozen=True)
class Independent:
    kind = "independent"
    theta = 0.0

    def to_json(self):
        return {"kind": "independent"}


@dataclass(frozen=True)
class FGM:
    theta: float
    kind = "fgm"

    def __post_init__(self):
        if not -1.0 <= self.theta <= 1.0:
            raise ModelInvalidError(f"FGM theta must lie in [-1, 1], got {self.theta}")

    def to_json(self):
        return {"kind": "fgm", "theta": self.theta}


@dataclass(frozen=True)
class Sarmanov:
    theta: float
    kernel_x: KernelSpec
    kernel_y: KernelSpec
    kind = "sarmanov"

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ModelInvalidError("Sarmanov theta must be finite")

    def to_json(self):
        return {
            "kind": "sarmanov",
            "theta": self.theta,
            "kernel_x": self.kernel_x.to_json(),
            "kernel_y": self.kernel_y.to_json(),
        }


DependenceModel = Union[Independent, FGM, Sarmanov]


def model_from_json(obj: dict[str, Any]) -> DependenceModel:
    kind = obj.get("kind")
    try:
        if kind == "independent":
            return Independent()
        if kind == "fgm":
            return FGM(float(obj["theta"]))
        if kind == "sarmanov":
            return Sarmanov(
                float(obj["theta"]),
                KernelSpec(obj["kernel_x"]["form"]),
                KernelSpec(obj["kernel_y"]["form"]),
            )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed dependence model {obj!r}") from exc
    raise ConfigError(f"unknown dependence kind {kind!r}")


# ---------------------------------------------------------------------------
# kernels bound to a marginal


def _mid_cdf(dist: Distribution, y):
    y = np.asarray(y, dtype=float)
    return np.asarray(dist.cdf(y)) + np.asarray(dist.cdf_left(y)) - 1.0


def lambda_fgm(G: Distribution, y):
    """G(y) + G(y-) - 1; equals 2G(y) - 1 for continuous G."""
    out = _mid_cdf(G, y)
    return float(out) if np.ndim(y) == 0 else out


@dataclass(frozen=True)
class BoundKernel:
    """A kernel with its centring constant, range and limit resolved."""

    form: str
    dist: Distribution
    const: float  # a for exp_x, E e^{-Y} for exp_y, 0 for fgm forms
    lo: float  # infimum of phi over the support
    hi: float  # supremum of phi over the support
    d1: float | None  # lim phi(x) as x -> inf, when the support is unbounded

    @property
    def sup_abs(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.form == "exp_x":
            with np.errstate(over="ignore"):
                return np.where(x > 0, np.exp(-np.maximum(x, 0.0)) - self.const, 0.0)
        if self.form == "exp_y":
            with np.errstate(over="ignore"):
                return np.exp(-x) - self.const
        return _mid_cdf(self.dist, x)

    def tail_integral(self, x: float) -> float:
        """int_{(x, inf)} phi(u) dist(du)."""
        d = self.dist
        if self.form in ("fgm_x", "fgm_y"):
            t = float(d.tail(x))
            return (1.0 - t) * t
        if self.form == "exp_x":
            x = max(x, 0.0)
        val, _ = stieltjes(lambda u: np.exp(-u), d, lo=x, epsrel=1e-13)
        return val - self.const * float(d.tail(x))

    def mean(self) -> float:
        """E phi under the bound marginal (centring residual)."""
        val, _ = stieltjes(self.phi, self.dist, epsrel=1e-13, epsabs=1e-15)
        return val


@functools.lru_cache(maxsize=256)
def bind_kernel(kernel: KernelSpec, dist: Distribution) -> BoundKernel:
    form = kernel.form
    a, b = dist.left_endpoint, dist.right_endpoint
    if form == "exp_x":
        zero_left = np.nextafter(0.0, -1.0)
        p_nonneg = float(dist.tail(zero_left))
        if p_nonneg <= 0:
            raise ModelInvalidError("exp_x kernel needs P(X >= 0) > 0")
        num, _ = stieltjes(lambda u: np.exp(-u), dist, lo=zero_left, epsrel=1e-13)
        const = num / p_nonneg
        if dist.is_discrete:
            vals = _kernel_values_at_atoms(dist, lambda u: np.where(u > 0, np.exp(-np.maximum(u, 0)) - const, 0.0))
            lo, hi = float(vals.min()), float(vals.max())
        else:
            top = math.exp(-max(a, 0.0)) - const
            bottom = math.exp(-b) - const if b < math.inf else -const
            lo, hi = bottom, top
            if a < 0:
                lo, hi = min(lo, 0.0), max(hi, 0.0)
        d1 = -const if b == math.inf else None
    elif form == "exp_y":
        const, _ = stieltjes(lambda u: np.exp(-u), dist, epsrel=1e-13)
        if dist.is_discrete:
            vals = _kernel_values_at_atoms(dist, lambda u: np.exp(-u) - const)
            lo, hi = float(vals.min()), float(vals.max())
        else:
            lo = (math.exp(-b) if b < math.inf else 0.0) - const
            hi = math.exp(-a) - const
        d1 = -const if b == math.inf else None
    else:
        const = 0.0
        if dist.is_discrete:
            vals = _kernel_values_at_atoms(dist, lambda u: _mid_cdf(dist, u))
            lo, hi = float(vals.min()), float(vals.max())
        else:
            lo, hi = -1.0, 1.0
        d1 = 1.0 if b == math.inf else None
    return BoundKernel(form, dist, float(const), lo, hi, d1)


def _kernel_values_at_atoms(dist, fn):
    ys, _ = _atoms(dist)
    return np.asarray(fn(ys), dtype=float)


def psi_sarmanov(kernel_y: KernelSpec, G: Distribution, y):
    """psi(y) = phi2(y) at isolated atoms and continuity points of phi2."""
    if not np.all(G.in_support(y)):
        raise DomainError(f"y={y!r} is outside the support of G")
    out = bind_kernel(kernel_y, G).phi(y)
    return float(out) if np.ndim(y) == 0 else out


# ---------------------------------------------------------------------------
# the bound joint law


class BivariateLaw:
    """A dependence model together with its marginals F (of X) and G (of Y)."""

    def __init__(self, model: DependenceModel, F: Distribution, G: Distribution):
        self.model = model
        self.F = F
        self.G = G
        if isinstance(model, Sarmanov):
            self.kx = bind_kernel(model.kernel_x, F)
            self.ky = bind_kernel(model.kernel_y, G)
        else:
            self.kx = self.ky = None

    @property
    def theta(self) -> float:
        return float(getattr(self.model, "theta", 0.0))

    @property
    def d1(self) -> float | None:
        if isinstance(self.model, Sarmanov):
            return self.kx.d1
        if isinstance(self.model, FGM):
            return 1.0
        return None

    # -- h ----------------------------------------------------------------
    def _h_raw(self, y):
        y = np.asarray(y, dtype=float)
        m = self.model
        if isinstance(m, Independent):
            return np.ones_like(y)
        if isinstance(m, FGM):
            return 1.0 + m.theta * _mid_cdf(self.G, y)
        if m.theta == 0:
            return np.ones_like(y)
        if self.kx.d1 is None:
            raise ModelInvalidError("Sarmanov h needs d1 = lim phi1(x), but F is bounded above")
        return 1.0 + m.theta * self.kx.d1 * self.ky.phi(y)

    def h(self, y):
        """h(y); equal to 1 off the support of G, where conditioning is void."""
        arr = np.asarray(y, dtype=float)
        inside = np.asarray(self.G.in_support(arr))
        out = np.where(inside, self._h_raw(arr), 1.0)
        if np.any(out <= 0):
            bad = arr[out <= 0] if arr.ndim else arr
            raise ModelInvalidError(f"h is not positive at y={bad!r}")
        return float(out) if np.ndim(y) == 0 else out

    def h_range(self) -> tuple[float, float]:
        """(inf, sup) of h over the support of G."""
        m = self.model
        if isinstance(m, Independent) or m.theta == 0:
            return 1.0, 1.0
        if isinstance(m, FGM):
            if self.G.is_discrete:
                vals = 1.0 + m.theta * _kernel_values_at_atoms(self.G, lambda u: _mid_cdf(self.G, u))
                return float(vals.min()), float(vals.max())
            return 1.0 - abs(m.theta), 1.0 + abs(m.theta)
        if self.kx.d1 is None:
            return math.nan, math.nan
        scale = m.theta * self.kx.d1
        ends = (1.0 + scale * self.ky.lo, 1.0 + scale * self.ky.hi)
        return min(ends), max(ends)

    def mean_h(self) -> float:
        val, _ = stieltjes(self._h_raw, self.G, epsrel=1e-13, epsabs=1e-15)
        return val

    # -- conditional law of X given Y = y ----------------------------------
    def conditional_tail(self, x: float, y: float) -> float:
        """P(X > x | Y = y)."""
        if not self.G.in_support(y):
            raise DomainError(f"y={y!r} is outside the support of G")
        m = self.model
        fbar = float(self.F.tail(x))
        if isinstance(m, Independent) or m.theta == 0:
            return fbar
        if isinstance(m, FGM):
            out = fbar * (1.0 + m.theta * (1.0 - fbar) * float(_mid_cdf(self.G, y)))
        else:
            out = fbar + m.theta * float(self.ky.phi(y)) * self.kx.tail_integral(x)
        if out < -1e-12 or out > 1 + 1e-12:
            raise ModelInvalidError(f"conditional tail {out!r} outside [0, 1] at x={x}, y={y}")
        return min(max(out, 0.0), 1.0)

    # -- sampling ----------------------------------------------------------
    def sample(self, rng: np.random.Generator, size: int):
        """``size`` i.i.d. draws of (X, Y) as two arrays."""
        m = self.model
        if isinstance(m, Sarmanov) and m.theta != 0:
            return self._sample_rejection(rng, size)
        y = self.G.sample(rng, size)
        w = rng.random(size)
        if isinstance(m, FGM) and m.theta != 0:
            w = fgm_conditional_inverse(m.theta * _mid_cdf(self.G, y), w)
        return self.F.quantile(w), y

    def _sample_rejection(self, rng, size):
        x, y, _, _ = self.sample_counted(rng, size)
        return x, y

    def sample_counted(self, rng: np.random.Generator, size: int):
        """Rejection draws plus (accepted, attempted) proposal counts (Sarmanov only)."""
        if not isinstance(self.model, Sarmanov):
            raise TypeError("only the Sarmanov sampler uses rejection")
        theta = self.model.theta
        envelope = self.envelope
        xs, ys = [], []
        have = 0
        attempts = 0
        while have < size:
            need = size - have
            batch = int(math.ceil(need * envelope * 1.1)) + 16
            x = self.F.sample(rng, batch)
            y = self.G.sample(rng, batch)
            u = rng.random(batch)
            accept = u * envelope <= 1.0 + theta * self.kx.phi(x) * self.ky.phi(y)
            xs.append(x[accept])
            ys.append(y[accept])
            have += int(accept.sum())
            attempts += batch
            if attempts > MAX_REJECTION_ATTEMPTS * size:
                raise SamplerStuckError(
                    f"rejection sampler accepted {have} of {size} draws in {attempts} attempts; "
                    "the kernel bounds are probably wrong"
                )
        return np.concatenate(xs)[:size], np.concatenate(ys)[:size], have, attempts

    @property
    def envelope(self) -> float:
        """Rejection envelope 1 + |theta| sup|phi1| sup|phi2| (Sarmanov only)."""
        return 1.0 + abs(self.theta) * self.kx.sup_abs * self.ky.sup_abs

    # -- tilting -------------------------------------------------------------
    def tilted_g(self) -> Distribution:
        """The law G_h(dy) = h(y) G(dy)."""
        m = self.model
        if isinstance(m, Independent) or m.theta == 0:
            return self.G
        if self.G.is_discrete:
            ys, ps = _atoms(self.G)
            return DiscreteFinite(tuple(ys), tuple(ps * self._h_raw(ys)))
        return TiltedDistribution(self)


@functools.lru_cache(maxsize=256)
def bind(model: DependenceModel, F: Distribution, G: Distribution) -> BivariateLaw:
    return BivariateLaw(model, F, G)


def fgm_conditional_inverse(a, w):
    """Root p in [0, 1] of p (1 - a (1 - p)) = w, with a = theta * lambda(y).

    Written in the cancellation-free form 2w / (b + sqrt(b^2 + 4aw)), b = 1 - a,
    which returns exactly ``w`` when ``a == 0``.
    """
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    b = 1.0 - a
    return 2.0 * w / (b + np.sqrt(np.maximum(b * b + 4.0 * a * w, 0.0)))


class TiltedDistribution(Distribution):
    """Continuous G reweighted by h.

    The tail is ``Gbar(y) + theta d1 int_{(y, inf)} phi2 dG``; its inverse is
    closed-form for FGM weights and found by root search otherwise.
    """

    is_discrete = False

    def __init__(self, law: BivariateLaw):
        self.law = law
        self.G = law.G
        m = law.model
        if isinstance(m, FGM):
            self._scale = m.theta
            self._ky = None
        else:
            self._scale = m.theta * law.kx.d1
            self._ky = law.ky

    @property
    def family(self):
        return "tilted"

    @property
    def left_endpoint(self):
        return self.G.left_endpoint

    @property
    def right_endpoint(self):
        return self.G.right_endpoint

    def _tail_scalar(self, y):
        s = float(self.G.tail(y))
        if self._ky is None:
            return s * (1.0 + self._scale * (1.0 - s))
        return s + self._scale * self._ky.tail_integral(y)

    def _tail(self, x):
        flat = np.atleast_1d(x).ravel()
        out = np.array([self._tail_scalar(v) for v in flat])
        return np.clip(out.reshape(np.shape(x)), 0.0, 1.0)

    def _isf(self, v):
        if self._ky is None:
            k = self._scale
            s = 2.0 * v / ((1.0 + k) + np.sqrt(np.maximum((1.0 + k) ** 2 - 4.0 * k * v, 0.0)))
            return self.G.isf(np.clip(s, 0.0, 1.0))
        flat = np.atleast_1d(v).ravel()
        out = np.empty_like(flat)
        for i, t in enumerate(flat):
            if t <= 0:
                out[i] = self.G.right_endpoint
            elif t >= 1:
                out[i] = self.G.left_endpoint
            else:
                s = optimize.brentq(lambda s: self._tail_scalar(float(self.G.isf(s))) - t, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps)
                out[i] = self.G.isf(s)
        return out.reshape(np.shape(v))

    def _exp_moment(self, gamma):
        val, _ = stieltjes(lambda y: np.exp(gamma * y) * self.law._h_raw(y), self.G)
        return val

    def params(self):
        raise TypeError("tilted laws are derived objects and are not serialized")


# ---------------------------------------------------------------------------
# validity report


@dataclass
class Condition:
    name: str
    passed: bool
    detail: str
    value: float | None = None
    required: bool = True
    conclusive: bool = True


@dataclass
class ValidityReport:
    kind: str
    theta: float
    conditions: list[Condition] = field(default_factory=list)
    c: float | None = None
    d1: float | None = None
    h_inf: float | None = None
    h_sup: float | None = None

    @property
    def valid(self) -> bool:
        return all(c.passed for c in self.conditions if c.required)

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "theta": self.theta,
            "valid": self.valid,
            "c": self.c,
            "d1": self.d1,
            "h_inf": self.h_inf,
            "h_sup": self.h_sup,
            "conditions": [vars(c) for c in self.conditions],
        }


CENTERING_TOL = 1e-8


def validate(model: DependenceModel, F: Distribution, G: Distribution) -> ValidityReport:
    """Check the model against its marginals; failures are reported, not raised."""
    report = ValidityReport(kind=model.kind, theta=float(getattr(model, "theta", 0.0)))
    add = report.conditions.append
    law = BivariateLaw(model, F, G)

    if isinstance(model, Sarmanov):
        kx, ky = law.kx, law.ky
        for label, k in (("x", kx), ("y", ky)):
            resid = k.mean()
            add(Condition(f"centering_{label}", abs(resid) <= CENTERING_TOL,
                          f"|E phi_{label}| = {abs(resid):.3e}", resid))
            add(Condition(f"bounded_{label}", math.isfinite(k.sup_abs),
                          f"sup|phi_{label}| = {k.sup_abs:.6g}", k.sup_abs))
        corners = [1.0 + model.theta * p * q for p in (kx.lo, kx.hi) for q in (ky.lo, ky.hi)]
        grid_min = _grid_min_density_factor(law)
        worst = min(min(corners), grid_min)
        add(Condition("nonnegativity", worst >= 0.0,
                      f"min 1 + theta phi1 phi2 = {worst:.6g} (corners and support grid)", worst))
        d1 = kx.d1
        report.d1 = d1
        if model.theta == 0:
            add(Condition("d1_exists", True, "theta = 0: d1 not needed"))
            add(Condition("d1_positive", True, "theta = 0: sign irrelevant", required=False))
        else:
            add(Condition("d1_exists", d1 is not None and d1 != 0,
                          f"lim phi1 = {d1!r}", d1))
            add(Condition("d1_positive", d1 is not None and d1 > 0,
                          f"d1 = {d1!r}; the positive-limit requirement is flagged, not enforced",
                          d1, required=False))
        if d1 is not None or model.theta == 0:
            h_inf, h_sup = law.h_range()
            report.c, report.h_inf, report.h_sup = h_inf, h_inf, h_sup
            add(Condition("c_positive", h_inf > 0, f"inf h = 1 + theta d1 psi = {h_inf:.6g}", h_inf))
    elif isinstance(model, FGM):
        theta = model.theta
        add(Condition("theta_range", abs(theta) <= 1.0, f"theta = {theta}", theta))
        if abs(theta) < 1:
            add(Condition("endpoint_atom", True, "|theta| < 1: no atom needed"))
        elif theta == 1:
            mass = float(G.cdf(G.left_endpoint)) - float(G.cdf_left(G.left_endpoint))
            add(Condition("endpoint_atom", mass > 0,
                          f"theta = 1 needs P(Y = alpha_G) > 0; got {mass:.3g}", mass))
        else:
            beta = G.right_endpoint
            mass = 0.0 if not math.isfinite(beta) else float(G.cdf(beta)) - float(G.cdf_left(beta))
            add(Condition("endpoint_atom", mass > 0,
                          f"theta = -1 needs P(Y = beta_G) > 0; got {mass:.3g}", mass))
        h_inf, h_sup = law.h_range()
        report.h_inf, report.h_sup, report.d1 = h_inf, h_sup, 1.0
        report.c = 1.0 - abs(theta) if abs(theta) < 1 else h_inf
        add(Condition("c_positive", h_inf > 0 and report.c > 0,
                      f"inf h = {h_inf:.6g}; c = {report.c:.6g}", report.c))
        add(Condition("nonnegativity", abs(theta) <= 1.0, "FGM density factor is non-negative for |theta| <= 1"))
    else:
        report.c = report.h_inf = report.h_sup = 1.0
        add(Condition("independent", True, "h = 1"))

    if report.valid:
        eh = law.mean_h()
        add(Condition("mean_h", abs(eh - 1.0) <= CENTERING_TOL, f"|E h(Y) - 1| = {abs(eh - 1.0):.3e}", eh))
        add(_uniformity_probe(law))
    return report


def _grid_min_density_factor(law: BivariateLaw) -> float:
    u = np.linspace(0.0005, 0.9995, 400)
    x = law.F.quantile(u)
    y = law.G.quantile(u)
    vals = 1.0 + law.theta * np.outer(law.kx.phi(x), law.ky.phi(y))
    return float(vals.min())


def _uniformity_probe(law: BivariateLaw) -> Condition:
    """Finite-x sup_y |P(X>x|Y=y) / (h(y) Fbar(x)) - 1|; evidence only."""
    if law.G.is_discrete:
        ys, _ = _atoms(law.G)
    else:
        ys = law.G.quantile(np.linspace(0.01, 0.99, 25))
    devs = []
    for level in (1e-2, 1e-4, 1e-6):
        x = float(law.F.isf(level))
        fbar = float(law.F.tail(x))
        if fbar <= 0:
            continue
        dev = max(abs(law.conditional_tail(x, float(y)) / (float(law.h(float(y))) * fbar) - 1.0) for y in ys)
        devs.append(dev)
    shrinking = all(b <= a + 1e-15 for a, b in zip(devs, devs[1:]))
    return Condition(
        "uniformity_probe", shrinking,
        "sup deviations at tail levels 1e-2, 1e-4, 1e-6: " + ", ".join(f"{d:.3e}" for d in devs)
        + " (finite-x evidence, not a certificate)",
        devs[-1] if devs else None, required=False, conclusive=False,
    )


# ---------------------------------------------------------------------------
# functional front end mirroring the operations list


def h_value(model: DependenceModel, F: Distribution, G: Distribution, y):
    return bind(model, F, G).h(y)


def conditional_tail_given_y(model: DependenceModel, F: Distribution, G: Distribution, x: float, y: float) -> float:
    return bind(model, F, G).conditional_tail(x, y)


def sample_pair(model: DependenceModel, F: Distribution, G: Distribution, rng: np.random.Generator,
                size: int | None = None):
    """One (x, y) pair, or two arrays of ``size`` pairs."""
    x, y = bind(model, F, G).sample(rng, 1 if size is None else size)
    if size is None:
        return float(x[0]), float(y[0])
    return x, y


def tilted_g(model: DependenceModel, F: Distribution, G: Distribution) -> Distribution:
    return bind(model, F, G).tilted_g()
