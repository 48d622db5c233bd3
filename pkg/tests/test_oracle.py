import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from soebath.oracle import (BcfOracle, OracleToleranceWarning, bcf_reference, closed_form,
                            reference_for, tail_l1)
from soebath.spectral import effective_segments

from conftest import model

# values computed independently with mpmath (50 digits) by direct integration
FERMION_STEP_BETA2 = {
    0.0: 1.0,
    1.5: 0.664996657736036287 + 0.336788578488812328j,
    7.0: 0.0938552283883984415 - 0.0779594066493471060j,
}
BOSON_OHMIC_BETA1 = {
    0.0: 2.28986813369645287,
    1.0: 0.926000193245527573 - 0.5j,
    5.0: 0.0755029585789850892 - 0.0147928994082840203j,
}
LOG_MODEL = {0.0: 2.0, 2.0: 1.60541297680269485}


@pytest.mark.parametrize("m,table", [
    (model("step", [-1, 1], "fermion", beta=2.0, mu=0.0), FERMION_STEP_BETA2),
    (model("ohmic", [1, 1], beta=1.0), BOSON_OHMIC_BETA1),
    (model("log_model", [-1, 1], "fermion", mu=5.0), LOG_MODEL),
])
def test_oracle_matches_high_precision_values(m, table):
    oracle = BcfOracle(m, abs_tol=1e-12)
    t = np.array(list(table))
    res = oracle.evaluate(t)
    assert not res.flagged
    assert np.allclose(res.values, list(table.values()), rtol=0, atol=1e-11)
    assert np.all(res.error <= 1e-12)


@pytest.mark.parametrize("m", [
    model("ohmic", [1, 1]), model("ohmic", [0.5, 2.0]), model("ohmic", [2.5, 0.7]),
    model("step", [-1, 1], "fermion", mu=0.3),
    model("step", [-1, 1], "fermion", mu=-0.4, branch="greater"),
    model("semicircle", [1.0, 1.0], "fermion", mu=2.0),
    model("inverse_sqrt_edges", [-1.0, 3.0], "fermion", mu=5.0),
])
def test_oracle_agrees_with_closed_forms(m):
    cf = closed_form(m)
    assert cf is not None
    t = np.concatenate([[0.0], np.geomspace(1e-3, 500.0, 60)])
    ref = cf(t)
    vals = BcfOracle(m, abs_tol=1e-12).evaluate(t).values
    assert np.max(np.abs(vals - ref)) <= 1e-11


def test_closed_form_absent_for_thermal_models():
    assert closed_form(model("ohmic", [1, 1], beta=2.0)) is None
    assert closed_form(model("semicircle", [1, 1], "fermion", mu=0.0)) is None
    assert isinstance(reference_for(model("semicircle", [1, 1], "fermion", mu=0.0)), BcfOracle)


def test_ohmic_closed_form_value():
    cf = closed_form(model("ohmic", [1, 1]))
    assert cf(1.0) == pytest.approx(1 / (1 + 1j) ** 2, rel=1e-15)


def test_scalar_and_array_calls_agree():
    o = BcfOracle(model("semicircle", [1, 1], "fermion", beta=3.0, mu=0.2), abs_tol=1e-12)
    t = [0.0, 0.5, 12.0]
    arr = o(np.array(t))
    for tk, v in zip(t, arr):
        assert o(tk) == v == bcf_reference(o, tk)


def test_negative_time_rejected():
    o = BcfOracle(model("ohmic", [1, 1]))
    with pytest.raises(ValueError):
        o.evaluate([-1.0])
    with pytest.raises(ValueError):
        bcf_reference(o, -0.5)


def test_constructor_errors():
    with pytest.raises(ValueError):
        BcfOracle(model("ohmic", [1, 1]), abs_tol=0.0)
    with pytest.raises(ValueError):
        BcfOracle(None)


def test_unreachable_tolerance_is_flagged():
    o = BcfOracle(model("inverse_sqrt_edges", [-1, 1], "fermion", beta=1.0, mu=0.0),
                  abs_tol=1e-30)
    with pytest.warns(OracleToleranceWarning):
        res = o.evaluate([0.0, 1.0, 30.0])
    assert res.flagged
    assert np.allclose(res.values[0], 1.0 * 0 + res.values[0])


@given(mu=st.floats(-0.9, 0.9), beta=st.floats(0.1, 50.0))
def test_lesser_plus_greater_is_bare_density(mu, beta):
    t = np.array([0.0, 0.7, 3.0, 25.0])
    lesser = BcfOracle(model("semicircle", [1, 1], "fermion", beta, mu, "lesser"), 1e-12)(t)
    greater = BcfOracle(model("semicircle", [1, 1], "fermion", beta, mu, "greater"), 1e-12)(t)
    bare = closed_form(model("semicircle", [1, 1], "fermion", mu=2.0))(t)
    assert np.max(np.abs(lesser + greater - bare)) <= 1e-11


@given(beta=st.floats(0.2, 20.0))
def test_bcf_at_zero_is_total_weight(beta):
    from scipy import integrate
    m = model("ohmic", [1, 1], beta=beta)
    total = sum(integrate.quad(lambda w, s=s: s(np.array([w + 0j]))[0].real, s.a, s.b,
                               limit=200, epsabs=1e-13)[0]
                for s in effective_segments(m, eps_tail=1e-14))
    assert BcfOracle(m, abs_tol=1e-12)(0.0) == pytest.approx(total, rel=1e-10)


def test_oracle_on_explicit_segments():
    segs = effective_segments(model("step", [-1, 1], "fermion", mu=0.0))
    o = BcfOracle(None, abs_tol=1e-12, segments=segs)
    # integral of exp(-i w t) over [-1, 0]
    t = 2.0
    assert o(t) == pytest.approx((np.exp(2j) - 1) / (2j), abs=1e-12)


# ---------------------------------------------------------------- tails

def test_ohmic_tail_is_exact():
    est = tail_l1(model("ohmic", [1, 1]), 100.0)
    assert not est.extrapolated
    # arctan(1/100)
    assert est.value == pytest.approx(0.009999666686665238, rel=1e-10)


def test_tail_infinite_for_non_decaying_envelope():
    est = tail_l1(model("step", [-1, 1], "fermion", mu=0.0), 10.0)
    assert math.isinf(est.value) and est.extrapolated


def test_tail_estimate_for_semicircle():
    # |Delta| ~ t^(-3/2) envelope; the estimate must be finite and decrease with T
    m = model("semicircle", [1, 1], "fermion", mu=2.0)
    a, b = tail_l1(m, 20.0), tail_l1(m, 80.0)
    assert a.extrapolated and 0 < b.value < a.value < math.inf


def test_tail_rejects_bad_horizon():
    with pytest.raises(ValueError):
        tail_l1(model("ohmic", [1, 1]), 0.0)
