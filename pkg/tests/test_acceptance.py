"""End-to-end acceptance checks, one test per criterion.

Each test records a ``criterion N: PASS|FAIL`` line with its runtime; the
lines are printed in the terminal summary (see ``conftest.py``).
"""

import math
import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, APV_CONST, CIR, CIR_SURVIVAL, K_001
from fairbasis.analytics import SYNTHETIC_TRUTH, ols, regress_basis, synthetic_table
from fairbasis.basis import BasisNumerics, fair_basis_formula, jtd_profile, solve_basis_pde
from fairbasis.capital import CapitalMode, CapitalSpec, capital_ratio, correlation
from fairbasis.cli import shipped_config
from fairbasis.config import ScenarioConfig
from fairbasis.models import BondSpec, CdsSpec, IntensityModel, MarketEnv, survival_closed_form
from fairbasis.montecarlo import EconomyMode, McConfig, price_instruments_mc, simulate_hedged_economy
from fairbasis.pricing import Numerics, bond_value_rn, cds_value, survival_fd


@contextmanager
def criterion(number: int, title: str, budget: float):
    """Time the block, require it to finish within ``budget`` seconds and record the outcome."""
    start = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget:.0f}s"
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} ({elapsed:.2f}s, budget {budget:.0f}s)")


STOCHASTIC = [IntensityModel.square_root(0.02, **CIR), IntensityModel.arithmetic(0.02, 0.001, 0.005)]


def test_criterion_01_par_identity():
    with criterion(1, "zero-coupon bond + zero-premium CDS is par", 5):
        env = MarketEnv.riskfree(0.0)
        for model in (IntensityModel.constant(0.03), IntensityModel.square_root(0.02, **CIR)):
            grids = Numerics().grids(model, 10.0)
            b = bond_value_rn(model, env, BondSpec(0.0, 10.0, 0.4), grids=grids)
            v = cds_value(model, env, CdsSpec(0.0, 10.0, 0.4), grids=grids)
            assert b.value + v.value == pytest.approx(1.0, abs=1e-4)
            assert b.delta + v.delta == pytest.approx(0.0, abs=1e-3)


def test_criterion_02_fd_matches_mc():
    with criterion(2, "FD within 3 SE of 80,000-path MC", 60):
        env = MarketEnv.riskfree(0.02)
        bond, cds = BondSpec(0.04, 5.0, 0.4), CdsSpec(0.012, 5.0, 0.4)
        cfg = McConfig(n_paths=80_000, n_steps_per_year=100, seed=2018)
        for model in (IntensityModel.constant(0.03), IntensityModel.square_root(0.02, **CIR)):
            mc = price_instruments_mc(model, env, bond, cds, cfg)
            assert abs(bond_value_rn(model, env, bond).value - mc["bond"].value) <= 3 * mc["bond"].std_error
            assert abs(cds_value(model, env, cds).value - mc["cds"].value) <= 3 * mc["cds"].std_error


def test_criterion_03_survival_closed_form():
    with criterion(3, "FD survival vs affine closed form", 10):
        for lam0 in (0.01, 0.02, 0.05):
            model = IntensityModel.square_root(lam0, **CIR)
            for T in (1.0, 5.0, 10.0):
                fd = survival_fd(model, 0.0, T).value
                assert fd == pytest.approx(survival_closed_form(model, 0.0, T), abs=1e-4)
                assert fd == pytest.approx(CIR_SURVIVAL[(lam0, T)], abs=1e-4)


def test_criterion_04_deterministic_limit():
    with criterion(4, "near-zero vol 2-D solver matches apv * carry", 30):
        env = MarketEnv(r=0.02, r_p=0.02, r_b=0.03, r_k=0.12)
        n_c = 0.005
        model = IntensityModel.square_root(0.03, 0.5, 0.03, 1e-6)
        rep = solve_basis_pde(model, env, BondSpec(0.032, 5.0, 0.4), CdsSpec(0.010, 5.0, 0.4), CapitalSpec(CapitalMode.MC_VAR, var_amount=n_c))
        expected = APV_CONST * (0.032 - 0.010 - 0.02 - env.rbar_k * n_c)
        assert rep.package_value == pytest.approx(expected, abs=1e-4)


def test_criterion_05_par_floater():
    with criterion(5, "par floater B + V = 1 for stochastic intensities", 30):
        env = MarketEnv.riskfree(0.02)
        for model in STOCHASTIC:
            rep = solve_basis_pde(model, env, BondSpec(0.02, 5.0, 0.4), CdsSpec(0.0, 5.0, 0.4))
            assert rep.b_fair + rep.cds_value == pytest.approx(1.0, abs=1e-4)


def test_criterion_06_fair_basis_formula():
    with criterion(6, "fair basis formula by substitution", 1):
        assert fair_basis_formula(MarketEnv.riskfree(0.02), 0.0) == 0.0
        env = MarketEnv(r=0.02, r_p=0.0215, r_b=0.02, r_k=0.10)
        assert fair_basis_formula(env, 0.025) == pytest.approx(0.0015 + 0.08 * 0.025, abs=1e-12)
        ig = MarketEnv(r=0.02, r_p=0.0215, r_b=0.034, r_k=0.02, h=0.1)
        assert fair_basis_formula(ig, 0.0) == pytest.approx(0.9 * 0.0215 + 0.1 * 0.034 - 0.02, abs=1e-12)


def test_criterion_07_basel_formulas():
    with criterion(7, "IRB correlation limits and capital ratio", 1):
        assert correlation(1e-12, 1.0) == pytest.approx(0.24, abs=1e-9)
        assert correlation(1.0, 1.0) == pytest.approx(0.12, abs=1e-9)
        assert correlation(1e-12, 1.25) == pytest.approx(0.30, abs=1e-9)
        assert capital_ratio(0.01, 0.45, 2.5, 1.0) == pytest.approx(K_001, abs=5e-4)


def test_criterion_08_martingale():
    with criterion(8, "discounted CDS-economy wealth is a martingale", 60):
        for model in [IntensityModel.constant(0.03), *STOCHASTIC]:
            stats = simulate_hedged_economy(
                model, MarketEnv.riskfree(0.02), None, CdsSpec(0.012, 5.0, 0.4),
                EconomyMode.CDS_ONLY_UNHEDGED, McConfig(n_paths=80_000, n_steps_per_year=100, seed=10),
            )
            assert abs(stats.mean) <= 3 * stats.std_error


def test_criterion_09_scenario_bands():
    with criterion(9, "IG/HY fair basis bands and r_b bump", 300):
        reports = {}
        for name in ("ig", "hy"):
            cfg = ScenarioConfig.load(shipped_config(name))
            args = (cfg.model(), cfg.market(), cfg.bond(), cfg.cds(), cfg.capital(), cfg.numerics())
            reports[name] = (cfg, solve_basis_pde(*args))
        ig, hy = reports["ig"][1], reports["hy"][1]
        assert 40 <= ig.fair_basis_bp <= 160
        assert hy.fair_basis_bp > ig.fair_basis_bp

        cfg = reports["hy"][0]
        model, env, bond, cds, cap, num = cfg.model(), cfg.market(), cfg.bond(), cfg.cds(), cfg.capital(), cfg.numerics()
        bumped = replace(env, r_b=env.r_b + 0.01)
        assert solve_basis_pde(model, bumped, bond, cds, cap, num).xva > hy.xva
        # capital-only component: repo financed at the riskless rate with no haircut
        base_k = solve_basis_pde(model, replace(env, h=0.0, r_p=env.r), bond, cds, cap, num).xva
        bump_k = solve_basis_pde(model, replace(bumped, h=0.0, r_p=env.r), bond, cds, cap, num).xva
        assert abs(bump_k - base_k) < 0.05 * abs(base_k)


def test_criterion_10_jtd_profile():
    with criterion(10, "jump-to-default profile shape", 10):
        env = MarketEnv.riskfree(0.0)
        lambdas = np.linspace(0.0005, 0.2, 60)
        model = IntensityModel.constant(0.02)
        _, l5 = jtd_profile(model, env, BondSpec(0.05, 10.0, 0.0), 0.0, lambdas)
        _, l2 = jtd_profile(model, env, BondSpec(0.02, 10.0, 0.0), 0.0, lambdas)
        assert np.all(np.diff(l5) < 0)
        assert np.all(l2 < l5)
        assert l5[0] == pytest.approx(0.05 * 10.0, rel=0.02)


def test_criterion_11_regression():
    with criterion(11, "synthetic regression recovery and pseudoinverse oracle", 5):
        table = synthetic_table(3000, seed=11)
        res = regress_basis(table)
        for term, truth in SYNTHETIC_TRUTH.items():
            assert abs(res.coefficient(term) - truth) <= 3 * res.std_error(term)
        X = np.column_stack([np.ones(len(table)), table.lois, table.vix])
        np.testing.assert_allclose(ols(table.basis, X).coefficients, np.linalg.pinv(X) @ table.basis, atol=1e-8)


def test_criterion_12_mbar_slice():
    with criterion(12, "xva non-increasing along the funding-balance slice", 300):
        cfg = ScenarioConfig.load(shipped_config("ig")).with_values(
            **{"capital.mode": "fixed_exposure", "capital.fixed_exposure": 1.0}
        )
        rep = solve_basis_pde(cfg.model(), cfg.market(), cfg.bond(), cfg.cds(), cfg.capital(), cfg.numerics())
        assert np.all(np.diff(rep.mbar_xva) <= 1e-12)
