import math

import numpy as np
import pytest
from scipy import integrate

from prodtail.dependence import FGM, Independent
from prodtail.distributions import DiscreteFinite, Exponential, LightLongTail, Lognormal, Pareto, Weibull
from prodtail.diagnostics import (
    EVIDENCE_NOTE,
    ProbeReport,
    RatioRow,
    assumption_b_ratio,
    classify_product,
    convolution_tail,
    convolution_tail_ratio,
    long_tail_ratio,
    reports_csv,
    verify_product_class,
)
from prodtail.errors import DomainError
from prodtail.product_tail import h_integral_tail

TWO_POINT = DiscreteFinite((1.0, 2.0), (0.5, 0.5))


def test_long_tail_examples():
    (r,) = long_tail_ratio(Pareto(2, 1), 0.0, 1.0, [1000.0])
    assert r.ratio == pytest.approx((1000 / 999) ** 2, rel=1e-13)
    assert r.deviation < 0.01
    (r,) = long_tail_ratio(LightLongTail(1.0), 1.0, 1.0, [2000.0])
    assert r.ratio == pytest.approx(math.e * (2001 / 2000) ** 2, rel=1e-12)
    assert r.target == pytest.approx(math.e)
    assert r.deviation < 0.002
    for r in long_tail_ratio(Exponential(1.0), 1.0, 1.0, [3.0, 30.0, 3000.0]):
        assert r.ratio == pytest.approx(math.e, rel=1e-13)


def test_long_tail_deviation_strictly_decreasing():
    xs = np.geomspace(10, 1e5, 9)
    for dist, gamma in ((Pareto(2, 1), 0.0), (Lognormal(0, 1), 0.0), (Weibull(0.5, 1), 0.0)):
        rep = ProbeReport("long_tail", long_tail_ratio(dist, gamma, 1.0, xs))
        assert rep.trend == "decreasing"
        assert np.all(np.diff(rep.deviations) < 0)


def test_exponential_fails_gamma_zero_probe():
    rep = ProbeReport("long_tail", long_tail_ratio(Exponential(1.0), 0.0, 1.0, [10, 100, 1000]))
    assert not rep.passed
    assert rep.rows[-1].ratio == pytest.approx(math.e)


def test_lattice_precondition():
    d = DiscreteFinite((1.0, 2.0, 3.0), (0.5, 0.3, 0.2))
    with pytest.raises(DomainError, match="lattice"):
        long_tail_ratio(d, 0.5, 0.5, [2.0])
    long_tail_ratio(d, 0.5, 1.0, [2.0])
    long_tail_ratio(d, 0.0, 0.5, [2.0])


def test_convolution_against_scipy():
    P = Pareto(2, 1)
    for x in (10.0, 1000.0):
        f = lambda v: P.tail(x - v) * 2 / v**3
        ref = 2 * integrate.quad(f, 1, x / 2, limit=500, epsabs=0, epsrel=1e-12)[0] + P.tail(x / 2) ** 2
        assert convolution_tail(P, x) == pytest.approx(ref, rel=1e-7)
    # exponential: P(E1 + E2 > x) = (1 + x) e^{-x}
    assert convolution_tail(Exponential(1.0), 5.0) == pytest.approx(6 * math.exp(-5), rel=1e-7)


def test_convolution_pareto_ratio_trend():
    rows = convolution_tail_ratio(Pareto(2, 1), 0.0, [100, 300, 1000])
    assert all(r.target == 2.0 for r in rows)
    assert abs(rows[-1].ratio / 2 - 1) < 0.1
    assert rows[0].ratio > rows[1].ratio > rows[2].ratio > 2


def test_convolution_discrete_exact():
    d = DiscreteFinite((1.0, 2.0), (0.5, 0.5))
    assert convolution_tail(d, 3.0) == 0.25
    assert convolution_tail(d, 2.5) == 0.75


def test_convolution_negative_control_drifts():
    rows = convolution_tail_ratio(Exponential(1.0), 0.5, [5, 20, 50])
    assert rows[0].target == pytest.approx(4.0)
    dev = [r.deviation for r in rows]
    assert dev[0] < dev[1] < dev[2]
    with pytest.raises(DomainError):
        convolution_tail_ratio(Exponential(1.0), 1.0, [5.0])


def test_convolution_montecarlo_route():
    rng = np.random.Generator(np.random.Philox(2))
    mc = convolution_tail_ratio(Pareto(2, 1), 0.0, [10.0], method="montecarlo", rng=rng, samples=10**6)[0]
    quad = convolution_tail_ratio(Pareto(2, 1), 0.0, [10.0])[0]
    assert mc.ratio == pytest.approx(quad.ratio, rel=0.02)


def test_assumption_b():
    P = Pareto(2, 1)
    rows = assumption_b_ratio(TWO_POINT, lambda x: h_integral_tail(P, TWO_POINT, Independent(), x), 1.0, [2.5, 10, 100])
    assert all(r.ratio == 0.0 for r in rows)
    G = Lognormal(0, 1)
    htail = lambda x: h_integral_tail(P, G, Independent(), x)
    one = [r.ratio for r in assumption_b_ratio(G, htail, 1.0, [10, 100, 1000])]
    two = [r.ratio for r in assumption_b_ratio(G, htail, 2.0, [10, 100, 1000])]
    assert one[0] > one[1] > one[2]
    assert all(b <= a for a, b in zip(one, two))


def test_classify_product():
    assert classify_product(1.0, 2.0) == 0.5
    assert classify_product(1.0, math.inf) == 0.0
    assert classify_product(0.0, 3.0) == 0.0
    for k in (0.1, 3.0, 17.0):
        assert classify_product(1.3 * k, 2.0 * k) == pytest.approx(classify_product(1.3, 2.0), rel=1e-15)
    with pytest.raises(DomainError):
        classify_product(1.0, 0.0)


def test_verify_product_class():
    rep = verify_product_class(Pareto(2, 1), TWO_POINT, FGM(0.5), 0.0, 1.0, [10, 100, 1000])
    assert rep.rows[-1].deviation < 0.01 and rep.passed
    light = verify_product_class(LightLongTail(1.0), TWO_POINT, Independent(), 1.0, 1.0, [10, 30, 100, 300])
    assert light.gamma_H == 0.5
    assert light.rows[0].target == pytest.approx(math.exp(0.5))
    assert light.trend == "decreasing"
    unit = DiscreteFinite((1.0,), (1.0,))
    a = verify_product_class(Pareto(2, 1), unit, Independent(), 0.0, 1.0, [5, 50])
    b = long_tail_ratio(Pareto(2, 1), 0.0, 1.0, [5, 50])
    assert [r.ratio for r in a.rows] == pytest.approx([r.ratio for r in b], rel=1e-14)


def test_report_outputs():
    rep = ProbeReport("long_tail", [RatioRow(1.0, 2.0, 2.0), RatioRow(2.0, 2.5, 2.0)])
    s = rep.summary()
    assert s["note"] == EVIDENCE_NOTE
    assert set(s) >= {"pass", "max_dev", "trend"}
    assert rep.trend == "increasing" and not rep.passed
    text = reports_csv([rep])
    assert text.splitlines()[0] == "probe,x,ratio,target,deviation"
