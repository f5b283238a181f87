import math

import numpy as np
import pytest

from conftest import CIR, CIR_SURVIVAL
from fairbasis.models import BondSpec, CdsSpec, IntensityModel, MarketEnv
from fairbasis.montecarlo import (
    EconomyMode,
    McConfig,
    WealthStats,
    price_bond_mc,
    price_cds_mc,
    price_instruments_mc,
    simulate_hedged_economy,
    simulate_paths,
    var_estimate,
    write_losses_csv,
)
from fairbasis.pricing import Numerics, bond_value_rn, cds_value

ZERO = MarketEnv.riskfree(0.0)
COARSE = Numerics(n_lambda=101, n_steps=200)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(n_paths=99)
    with pytest.raises(ValueError):
        McConfig(seed=-1)
    with pytest.raises(ValueError):
        McConfig(n_paths=1001, antithetic=True)
    assert sum(n for _, n in McConfig(n_paths=5000).blocks()) == 5000


def test_survival_fraction_constant():
    # zero-coupon, zero-recovery bond at r=0 pays the survival indicator
    est = price_bond_mc(IntensityModel.constant(0.02), ZERO, BondSpec(0.0, 10.0, 0.0), McConfig(n_paths=80_000, seed=1))
    q = math.exp(-0.2)
    assert abs(est.value - q) <= 3 * math.sqrt(q * (1 - q) / 80_000)


def test_zero_intensity_never_defaults():
    paths = simulate_paths(IntensityModel.constant(0.0), 5.0, McConfig(n_paths=1000, n_steps_per_year=10))
    assert np.all(np.isinf(paths.default_time))
    assert paths.survival_fraction() == 1.0
    assert paths.discount[0] == 1.0


def test_cir_survival_fraction():
    model = IntensityModel.square_root(0.02, **CIR)
    est = price_bond_mc(model, ZERO, BondSpec(0.0, 5.0, 0.0), McConfig(n_paths=40_000, n_steps_per_year=50, seed=3))
    assert abs(est.value - CIR_SURVIVAL[(0.02, 5.0)]) <= 3 * est.std_error


def test_bond_and_cds_constant_examples():
    model = IntensityModel.constant(0.05)
    est = price_bond_mc(model, ZERO, BondSpec(0.0, 10.0, 0.0), McConfig(n_paths=20_000, n_steps_per_year=20, seed=5))
    assert abs(est.value - math.exp(-0.5)) <= 3 * est.std_error
    cds = price_cds_mc(model, ZERO, CdsSpec(0.0, 10.0, 0.0), McConfig(n_paths=20_000, n_steps_per_year=20, seed=5))
    assert abs(cds.value - (1 - math.exp(-0.5))) <= 3 * cds.std_error
    par = price_cds_mc(model, ZERO, CdsSpec(0.6 * 0.05, 10.0, 0.4), McConfig(n_paths=20_000, n_steps_per_year=20, seed=6))
    assert abs(par.value) <= 3 * par.std_error


def test_riskless_bond_is_exact():
    env = MarketEnv.riskfree(0.03)
    est = price_bond_mc(IntensityModel.constant(0.0), env, BondSpec(0.03, 7.0, 0.4), McConfig(n_paths=200, n_steps_per_year=4))
    assert est.value == pytest.approx(1.0, abs=1e-6)
    assert est.std_error == pytest.approx(0.0, abs=1e-12)


def test_cir_matches_fd():
    model = IntensityModel.square_root(0.02, **CIR)
    env = MarketEnv.riskfree(0.02)
    bond, cds = BondSpec(0.04, 5.0, 0.4), CdsSpec(0.012, 5.0, 0.4)
    mc = price_instruments_mc(model, env, bond, cds, McConfig(n_paths=40_000, n_steps_per_year=50, seed=11))
    assert abs(mc["bond"].value - bond_value_rn(model, env, bond).value) <= 3 * mc["bond"].std_error
    assert abs(mc["cds"].value - cds_value(model, env, cds).value) <= 3 * mc["cds"].std_error


def test_reproducible_and_thread_independent(monkeypatch):
    model = IntensityModel.square_root(0.02, **CIR)
    cfg = McConfig(n_paths=6000, n_steps_per_year=20, seed=42)
    bond = BondSpec(0.03, 3.0, 0.4)
    monkeypatch.setenv("FAIRBASIS_THREADS", "1")
    one = price_bond_mc(model, ZERO, bond, cfg)
    monkeypatch.setenv("FAIRBASIS_THREADS", "4")
    four = price_bond_mc(model, ZERO, bond, cfg)
    assert one == four
    other = price_bond_mc(model, ZERO, bond, McConfig(n_paths=6000, n_steps_per_year=20, seed=43))
    assert other.value != one.value


def test_antithetic_reduces_error():
    model, bond = IntensityModel.constant(0.05), BondSpec(0.0, 10.0, 0.0)
    plain = price_bond_mc(model, ZERO, bond, McConfig(n_paths=20_000, n_steps_per_year=10, seed=9))
    anti = price_bond_mc(model, ZERO, bond, McConfig(n_paths=20_000, n_steps_per_year=10, seed=9, antithetic=True))
    assert anti.std_error <= plain.std_error
    assert abs(anti.value - math.exp(-0.5)) <= 3 * anti.std_error


def test_cds_economy_is_martingale():
    model = IntensityModel.square_root(0.02, **CIR)
    env = MarketEnv.riskfree(0.02)
    stats = simulate_hedged_economy(
        model, env, None, CdsSpec(0.01, 5.0, 0.4), EconomyMode.CDS_ONLY_UNHEDGED, McConfig(n_paths=40_000, n_steps_per_year=50, seed=2)
    )
    assert abs(stats.mean) <= 3 * stats.std_error


def test_perfect_hedge_has_no_loss():
    env = MarketEnv.riskfree(0.02)
    stats = simulate_hedged_economy(
        IntensityModel.constant(0.03), env, BondSpec(0.02, 5.0, 0.4), CdsSpec(0.0, 5.0, 0.4),
        EconomyMode.DETERMINISTIC_JTD, McConfig(n_paths=2000, n_steps_per_year=50, seed=4), COARSE,
    )
    assert np.max(np.abs(stats.losses)) <= 1e-6
    assert var_estimate(stats).amount == pytest.approx(0.0, abs=1e-6)


def test_diffusion_hedge_residual():
    model = IntensityModel.square_root(0.02, **CIR)
    env = MarketEnv.riskfree(0.02)
    stats = simulate_hedged_economy(
        model, env, BondSpec(0.04, 5.0, 0.4), CdsSpec(0.012, 5.0, 0.4),
        EconomyMode.DIFFUSION_HEDGE, McConfig(n_paths=20_000, n_steps_per_year=50, seed=8), COARSE,
    )
    assert abs(stats.mean) <= 3 * stats.std_error
    assert np.var(stats.losses) > 0
    assert stats.accumulation_slope == pytest.approx(1.0, abs=0.05)


def test_var_examples():
    assert var_estimate(WealthStats.from_losses(np.zeros(5000))).amount == 0.0
    normal = np.random.default_rng(0).standard_normal(1_000_000)
    assert var_estimate(WealthStats.from_losses(normal)).amount == pytest.approx(3.090, abs=0.05)
    small = var_estimate(WealthStats.from_losses(np.arange(1000.0)))
    assert small.small_sample
    assert small.amount == 998.0
    with pytest.raises(ValueError):
        var_estimate(WealthStats.from_losses(normal[:10]), 0.4)


def test_losses_csv(tmp_path):
    path = tmp_path / "losses.csv"
    write_losses_csv(WealthStats.from_losses([0.5, -0.25]), path)
    assert path.read_text().splitlines() == ["loss", "0.5", "-0.25"]
