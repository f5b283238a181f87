import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CIR, CIR_SURVIVAL
from fairbasis.models import (
    BondSpec,
    CdsSpec,
    IntensityModel,
    MarketEnv,
    UnsupportedModelError,
    drift,
    survival_closed_form,
    vol,
)


def test_drift_examples():
    assert drift(IntensityModel.constant(0.02), 1.0, 0.02) == 0.0
    assert drift(IntensityModel.arithmetic(0.05, 0.001, 0.01), 0.0, 0.05) == pytest.approx(0.001)
    assert drift(IntensityModel.square_root(0.04, **CIR), 3.0, 0.04) == 0.0


def test_vol_examples():
    assert vol(IntensityModel.constant(0.02), 0.0, 0.3) == 0.0
    assert vol(IntensityModel.arithmetic(0.1, 0.0, 0.01), 0.0, 0.10) == 0.01
    assert vol(IntensityModel.square_root(0.04, **CIR), 0.0, 0.04) == pytest.approx(0.02, abs=1e-15)


def test_negative_state_rejected_for_square_root():
    m = IntensityModel.square_root(0.04, **CIR)
    with pytest.raises(ValueError):
        drift(m, 0.0, -0.01)
    with pytest.raises(ValueError):
        vol(m, 0.0, -0.01)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        IntensityModel.constant(-0.01)
    with pytest.raises(ValueError):
        IntensityModel.square_root(0.02, -0.5, 0.04, 0.1)
    with pytest.raises(ValueError):
        IntensityModel.arithmetic(0.02, 0.0, -0.1)


def test_feller_flag_reported_not_enforced():
    assert IntensityModel.square_root(0.02, 0.5, 0.04, 0.1).feller is True
    m = IntensityModel.square_root(0.02, 0.1, 0.01, 0.5)
    assert m.feller is False


def test_constant_survival():
    assert survival_closed_form(IntensityModel.constant(0.02), 0.0, 10.0) == pytest.approx(math.exp(-0.2), abs=1e-15)


@pytest.mark.parametrize(
    "model",
    [
        IntensityModel.constant(0.02),
        IntensityModel.curve([1.0, 3.0, 5.0], [0.01, 0.02, 0.05]),
        IntensityModel.square_root(0.02, **CIR),
    ],
)
def test_survival_identity_at_t_equals_T(model):
    assert survival_closed_form(model, 2.5, 2.5) == 1.0


@pytest.mark.parametrize("key", sorted(CIR_SURVIVAL))
def test_square_root_survival_matches_oracle(key):
    lam0, T = key
    m = IntensityModel.square_root(lam0, **CIR)
    assert survival_closed_form(m, 0.0, T) == pytest.approx(CIR_SURVIVAL[key], abs=1e-10)


def test_square_root_survival_example_six_digits():
    m = IntensityModel.square_root(0.02, **CIR)
    assert round(survival_closed_form(m, 0.0, 5.0), 4) == 0.8505


def test_curve_survival_piecewise_exact():
    m = IntensityModel.curve([1.0, 3.0, 5.0], [0.01, 0.02, 0.05])
    expected = math.exp(-(0.01 * 1 + 0.02 * 2 + 0.05 * 1.5))
    assert survival_closed_form(m, 0.0, 4.5) == pytest.approx(expected, rel=1e-14)
    expected_mid = math.exp(-(0.01 * 0.5 + 0.02 * 1.0))
    assert survival_closed_form(m, 0.5, 2.0) == pytest.approx(expected_mid, rel=1e-14)


def test_arithmetic_has_no_closed_form():
    with pytest.raises(UnsupportedModelError):
        survival_closed_form(IntensityModel.arithmetic(0.02, 0.0, 0.01), 0.0, 1.0)


def test_t_after_T_rejected():
    with pytest.raises(ValueError):
        survival_closed_form(IntensityModel.constant(0.02), 2.0, 1.0)


def test_vanishing_vol_matches_deterministic_path():
    kappa, theta, lam0, T = 0.5, 0.04, 0.02, 5.0
    m = IntensityModel.square_root(lam0, kappa, theta, 1e-6)
    # integral of the mean path lam(t) = theta + (lam0 - theta) e^{-kappa t}
    integral = theta * T + (lam0 - theta) * (1 - math.exp(-kappa * T)) / kappa
    assert survival_closed_form(m, 0.0, T) == pytest.approx(math.exp(-integral), abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(
    lam0=st.floats(0.0, 0.5),
    kappa=st.floats(0.0, 3.0),
    theta=st.floats(0.0, 0.3),
    sigma=st.floats(0.0, 0.6),
    t1=st.floats(0.0, 30.0),
    dt=st.floats(0.0, 10.0),
)
def test_square_root_survival_monotone_in_unit_interval(lam0, kappa, theta, sigma, t1, dt):
    m = IntensityModel.square_root(lam0, kappa, theta, sigma)
    q1 = survival_closed_form(m, 0.0, t1)
    q2 = survival_closed_form(m, 0.0, t1 + dt)
    assert 0.0 < q2 <= q1 <= 1.0 or (q2 == 0.0 and q1 >= 0.0)
    assert q2 <= q1 + 1e-15


def test_derived_rates_bit_for_bit():
    env = MarketEnv(r=0.02, r_p=0.0215, r_b=0.034, r_k=0.12, h=0.1, epsilon=0.05, r1=0.03)
    assert env.r2 == 0.05 * 0.12 + (1 - 0.05) * 0.034
    assert env.rbar_p == (1 - 0.1) * 0.0215 + 0.1 * 0.03
    assert env.rbar_k == 0.12 - 0.02


def test_haircut_debt_rate_defaults_to_unsecured():
    env = MarketEnv(r=0.02, r_p=0.0215, r_b=0.034, r_k=0.1, h=0.1)
    assert env.rbar_p == pytest.approx(0.9 * 0.0215 + 0.1 * 0.034, abs=1e-16)


@pytest.mark.parametrize(
    "kwargs",
    [dict(h=1.0), dict(h=-0.1), dict(epsilon=1.5), dict(r_L=0.03)],
)
def test_market_validation(kwargs):
    with pytest.raises(ValueError):
        MarketEnv(r=0.02, r_p=0.02, r_b=0.02, r_k=0.02, **kwargs)


def test_instrument_validation():
    with pytest.raises(ValueError):
        BondSpec(0.05, 0.0, 0.4)
    with pytest.raises(ValueError):
        BondSpec(-0.01, 5.0, 0.4)
    with pytest.raises(ValueError):
        CdsSpec(0.01, 5.0, 1.2)
    with pytest.raises(ValueError):
        CdsSpec(-0.01, 5.0, 0.4)


def test_hazard_clamps_negative_state():
    m = IntensityModel.arithmetic(0.0, 0.0, 0.05)
    assert np.all(m.hazard(0.0, np.array([-0.1, 0.0, 0.1])) == np.array([0.0, 0.0, 0.1]))
