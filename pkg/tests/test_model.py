import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from stochdecay.errors import ConfigurationError
from stochdecay.model import (ModelSpec, classify_regime, eval_f, eval_g, general_rate_integral,
                              predict_general_rate)


def test_eval_f_examples():
    m = ModelSpec(a_f=1, mu_f=1, cap=1)
    assert eval_f(m, 0.5) == -0.5
    assert eval_f(m, 4.0) == -1.0
    assert eval_f(m, 0.0) == 0.0


def test_eval_g_examples():
    assert eval_g(ModelSpec(a_g=1, mu_g=2, cap=1), 0.25) == 0.25
    assert eval_g(ModelSpec(a_g=4, mu_g=2, cap=1), 0.9) == 1.0
    assert eval_g(ModelSpec(), 0.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(a_f=st.floats(-5, 5).filter(lambda v: abs(v) > 1e-6), mu_f=st.floats(0.1, 5),
       a_g=st.floats(0, 5), mu_g=st.floats(0.1, 5), cap=st.floats(0.01, 1),
       u=st.floats(-1e6, 1e6).filter(lambda v: abs(v) > 1e-100))
def test_bounded_and_signed(a_f, mu_f, a_g, mu_g, cap, u):
    m = ModelSpec(a_f=a_f, mu_f=mu_f, a_g=a_g, mu_g=mu_g, cap=cap)
    f, g = eval_f(m, u), eval_g(m, u)
    assert abs(f) <= cap and 0 <= g <= cap
    if abs(u) ** mu_f * abs(a_f) > 0:
        assert (f < 0) if a_f > 0 else (f > 0)


@pytest.mark.parametrize("field,value", [("h", 0.0), ("mu_f", -1.0), ("mu_g", 0.0),
                                         ("a_g", -0.1), ("cap", 1.5), ("cap", 0.0),
                                         ("x0", math.nan)])
def test_model_validation_names_field(field, value):
    with pytest.raises(ConfigurationError, match=field):
        ModelSpec(**{field: value})


def test_case_iii_example():
    r = classify_regime(ModelSpec(a_f=1, mu_f=1, a_g=1, mu_g=2, h=0.01))
    assert r.case_tag == "case_iii" and r.lam == 1 and not r.oscillatory
    assert r.exact_constant == pytest.approx(100.0, rel=1e-14)
    assert any("Theorem 6.2" in c for c in r.citations)


def test_case_i_example():
    r = classify_regime(ModelSpec(a_f=1, mu_f=3, a_g=1, mu_g=2))
    assert (r.case_tag, r.L, r.lam, r.oscillatory) == ("case_i", 0.0, 2.0, True)
    assert r.exact_constant is None


def test_case_ii_example():
    r = classify_regime(ModelSpec(a_f=-0.3, mu_f=2, a_g=1, mu_g=2, h=0.01))
    assert r.case_tag == "case_ii" and r.lam == 2 and r.oscillatory
    assert r.L == pytest.approx(0.3)
    assert r.comparison_limit == pytest.approx(-0.2 * 0.01)
    assert r.comparison_sum == "g2"


def test_case_ii_clamps_break_global_stability():
    # below the clamps 2f/g^2 = 0.6, but with |f|, |g| capped at 1 the ratio reaches 2
    r = classify_regime(ModelSpec(a_f=-0.3, mu_f=2, a_g=1, mu_g=2))
    assert r.beta == pytest.approx(2.0)
    assert not r.stability_guaranteed


def test_unstable_example():
    r = classify_regime(ModelSpec(a_f=-1, mu_f=1, a_g=1, mu_g=2))
    assert r.case_tag == "unstable" and r.beta == math.inf and r.lam is None
    assert any("Theorem 4.2" in c for c in r.citations)
    r2 = classify_regime(ModelSpec(a_f=-1, mu_f=2, a_g=1, mu_g=2))
    assert r2.case_tag == "unstable"


def test_degenerate_rejected():
    with pytest.raises(ConfigurationError):
        classify_regime(ModelSpec(a_f=0, a_g=0))


def test_f_zero_is_noise_dominated():
    r = classify_regime(ModelSpec(a_f=0, mu_g=2))
    assert (r.case_tag, r.L, r.lam, r.comparison_limit) == ("case_i", 0.0, 2.0, -0.005)


def test_destabilising_drift_dominated_by_noise_noted():
    r = classify_regime(ModelSpec(a_f=-1, mu_f=3, a_g=1, mu_g=2))
    assert r.case_tag == "case_i" and r.notes


def test_beta_nonpositive_for_dissipative_drift():
    for mu_f, mu_g in [(1, 2), (2, 2), (3, 2), (0.5, 4)]:
        r = classify_regime(ModelSpec(a_f=1, mu_f=mu_f, a_g=1, mu_g=mu_g))
        assert r.beta <= 0


def test_beta_matches_dense_scan():
    m = ModelSpec(a_f=-0.3, mu_f=3, a_g=0.5, mu_g=2, cap=0.7)
    r = classify_regime(m)
    u = np.logspace(-6, 4, 200001)
    scan = max(2 * eval_f(m, v) / eval_g(m, v) ** 2 for v in u)
    assert scan <= r.beta + 1e-9
    assert scan == pytest.approx(r.beta, rel=1e-3)
    assert r.beta == pytest.approx(2 * 0.7 / 0.49, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(a_f=st.just(0.0) | st.floats(-3, 3).filter(lambda v: abs(v) > 1e-6),
       a_g=st.floats(0.01, 3), mu=st.floats(0.2, 4), s=st.floats(0.1, 10))
def test_scaling_invariance_equal_exponents(a_f, a_g, mu, s):
    assume(abs(2 * a_f + a_g) > 1e-6)
    m1 = ModelSpec(a_f=a_f, mu_f=mu, a_g=a_g, mu_g=mu)
    m2 = ModelSpec(a_f=s * a_f, mu_f=mu, a_g=s * a_g, mu_g=mu)
    r1, r2 = classify_regime(m1), classify_regime(m2)
    assert (r1.case_tag, r1.lam) == (r2.case_tag, r2.lam)


@settings(max_examples=150, deadline=None)
@given(a_f=st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3), mu_f=st.floats(0.2, 4),
       a_g=st.floats(0.01, 3), mu_g=st.floats(0.2, 4))
def test_regime_invariants(a_f, mu_f, a_g, mu_g):
    r = classify_regime(ModelSpec(a_f=a_f, mu_f=mu_f, a_g=a_g, mu_g=mu_g))
    if r.case_tag == "case_iii":
        assert r.exact_constant > 0 and not r.oscillatory and r.lam == mu_f and r.L == -math.inf
    if r.case_tag in ("case_i", "case_ii"):
        assert r.oscillatory and r.exact_constant is None and r.lam == mu_g and r.L < 0.5
    if r.L == -math.inf:
        assert r.lam == mu_f
    elif math.isfinite(r.L) and r.L < 0.5:
        assert r.lam == mu_g


def test_report_serialises_infinities():
    d = classify_regime(ModelSpec(a_f=-1, mu_f=1)).to_dict()
    assert d["beta"] == "inf" and d["L"] == "inf"


def test_general_rate_closed_forms():
    assert predict_general_rate(lambda u: u * u, 1e4) == pytest.approx((1 + 2e4) ** -0.5, rel=1e-8)
    assert predict_general_rate(lambda u: u, 100) == pytest.approx(1 / 101, rel=1e-8)


def test_general_rate_against_tabulated_inverse():
    # a(u) = u (1 + u): tabulate A on a dense log grid by trapezoid, invert by interpolation
    a = lambda u: u * (1 + u)
    t = np.linspace(math.log(1e-7), 0.0, 2_000_001)
    integrand = 1.0 / a(np.exp(t))
    seg = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t)
    A = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    for n in (1.0, 10.0, 1e3, 1e5):
        z_tab = math.exp(np.interp(n, A[::-1], t[::-1]))
        assert predict_general_rate(a, n) == pytest.approx(z_tab, abs=1e-6)


def test_general_rate_integral_closed_form():
    a = lambda u: u * (1 + u)
    for z in (1e-4, 0.01, 0.5):
        exact = 1 / z + math.log(z) - math.log(1 + z) - 1 + math.log(2)
        assert general_rate_integral(a, z) == pytest.approx(exact, rel=1e-10)


def test_general_rate_exponent_lambda_one():
    z = predict_general_rate(lambda u: u, 1e8)
    assert abs(math.log(z) / math.log(1e8) + 1.0) < 1e-3


@pytest.mark.parametrize("lam", [0.5, 2.0, 3.0])
def test_general_rate_exponent_closed_form(lam):
    # A^{-1}(n) = (1 + lam n)^(-1/lam); the log ratio reaches -1/lam only as ln n -> inf
    n = 1e8
    z = predict_general_rate(lambda u: u ** lam, n)
    expected = -math.log1p(lam * n) / (lam * math.log(n))
    assert math.log(z) / math.log(n) == pytest.approx(expected, abs=1e-9)


def test_general_rate_rejects_non_monotone():
    with pytest.raises(ConfigurationError):
        predict_general_rate(lambda u: math.sin(20 * u) + 2, 10)
