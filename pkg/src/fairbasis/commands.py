"""Command implementations shared by the HTTP service and the CLI.

Each command takes a parsed scenario and returns named CSV tables whose
cells are already formatted, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytics
from .basis import jtd_profile, solve_basis_pde
from .capital import CapitalMode, capital_balance, capital_ratio, effective_maturity, local_pd
from .config import ConfigError, ScenarioConfig
from .montecarlo import EconomyMode, price_instruments_mc, simulate_hedged_economy, var_estimate
from .pricing import annuity_pv, bond_value_rn, cds_value, default_pv, survival_fd

INSTRUMENTS = ("cds", "bond", "floating-bond", "survival")
SE_FLAG = 3.0


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.9g}"


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list[str]] = field(default_factory=list)

    def add(self, *cells) -> None:
        self.rows.append([fmt(c) for c in cells])

    def to_csv(self) -> str:
        lines = [",".join(self.header)] + [",".join(r) for r in self.rows]
        return "\n".join(lines) + "\n"


@dataclass
class CommandResult:
    tables: list[Table]
    warnings: list[str] = field(default_factory=list)


def _maturity(cfg: ScenarioConfig) -> float:
    if cfg.has("bond"):
        return cfg.bond().maturity
    if cfg.has("cds"):
        return cfg.cds().maturity
    raise ConfigError("a bond or cds section is needed to fix the horizon", "bond.maturity")


def price(cfg: ScenarioConfig, instrument: str) -> CommandResult:
    if instrument not in INSTRUMENTS:
        raise ConfigError(f"unknown instrument {instrument!r}; choose from {', '.join(INSTRUMENTS)}", "instrument")
    model, numerics = cfg.model(), cfg.numerics().pricing
    table = Table("price_" + instrument.replace("-", "_"), ["instrument", "value", "delta", "gamma"])
    if instrument == "survival":
        res = survival_fd(model, 0.0, _maturity(cfg), numerics)
    elif instrument == "cds":
        res = cds_value(model, cfg.market(), cfg.cds(), 0.0, numerics)
    elif instrument == "bond":
        res = bond_value_rn(model, cfg.market(), cfg.bond(), 0.0, numerics)
    else:
        env, bond = cfg.market(), cfg.bond()
        spread = bond.coupon - env.libor
        if spread < 0:
            raise ConfigError("floating spread bond.coupon - market.r must be >= 0", "bond.coupon")
        grids = numerics.grids(model, bond.maturity)
        dpv = default_pv(model, env, bond.recovery, 0.0, bond.maturity, numerics, grids)
        apv = annuity_pv(model, env, 0.0, bond.maturity, numerics, grids)
        value = 1.0 - dpv.value + spread * apv.value
        table.add(instrument, value, spread * apv.delta - dpv.delta, spread * apv.gamma - dpv.gamma)
        return CommandResult([table])
    table.add(instrument, res.value, res.delta, res.gamma)
    return CommandResult([table])


def fair_basis(cfg: ScenarioConfig) -> CommandResult:
    model, env, bond, cds = cfg.model(), cfg.market(), cfg.bond(), cfg.cds()
    report = solve_basis_pde(model, env, bond, cds, cfg.capital(), cfg.numerics())
    summary = Table("fair_basis", ["quantity", "value"])
    for key, value in report.summary().items():
        summary.add(key, value)
    summary.add("cds_premium", cds.premium)
    summary.add("max_picard_iterations", report.diagnostics["max_picard_iterations"])
    profiles = []
    for name, values in (
        ("hedge_ratio", report.hedge_ratio_profile),
        ("jtd_loss", report.jtd_profile),
        ("capital_balance", report.capital_profile),
    ):
        table = Table(f"fair_basis_{name}", ["lambda", "value"])
        for row in zip(report.lambdas, values):
            table.add(*row)
        profiles.append(table)
    mbar = Table("fair_basis_mbar", ["mbar", "xva", "fair_basis_bp"])
    for m, x in zip(report.mbar_nodes, report.mbar_xva):
        mbar.add(m, x, 1e4 * x / report.apv)
    lambdas, losses = _jtd(cfg)
    jtd = Table("fair_basis_jtd_profile", ["lambda", "value"])
    for row in zip(lambdas, losses):
        jtd.add(*row)
    return CommandResult([summary, *profiles, mbar, jtd])


def _jtd(cfg: ScenarioConfig, n: int = 51):
    model, env, bond = cfg.model(), cfg.market(), cfg.bond()
    premium = cfg.cds().premium if cfg.has("cds") else 0.0
    hi = max(4.0 * max(model.lambda0, 0.0), 0.2)
    return jtd_profile(model, env, bond, premium, np.linspace(0.0, hi, n), 1.0, cfg.numerics().pricing)


def jtd(cfg: ScenarioConfig) -> CommandResult:
    lambdas, losses = _jtd(cfg)
    table = Table("jtd_profile", ["lambda", "value"])
    for row in zip(lambdas, losses):
        table.add(*row)
    return CommandResult([table])


def mc_verify(cfg: ScenarioConfig, seed: int | None = None) -> CommandResult:
    model, env, bond, cds = cfg.model(), cfg.market(), cfg.bond(), cfg.cds()
    numerics = cfg.numerics().pricing
    mc_cfg = cfg.mc(seed)
    T = max(bond.maturity, cds.maturity)
    grids = numerics.grids(model, T) if math.isclose(bond.maturity, cds.maturity) else None
    fd = {
        "bond": bond_value_rn(model, env, bond, 0.0, numerics, grids).value,
        "cds": cds_value(model, env, cds, 0.0, numerics, grids).value,
    }
    mc = price_instruments_mc(model, env, bond, cds, mc_cfg)
    table = Table("mc_verify", ["instrument", "fd_value", "mc_value", "mc_se", "se_ratio", "flag"])
    warnings = []
    for name in ("bond", "cds"):
        est = mc[name]
        ratio = abs(fd[name] - est.value) / est.std_error if est.std_error > 0 else (0.0 if fd[name] == est.value else math.inf)
        flagged = ratio > SE_FLAG
        if flagged:
            warnings.append(f"{name}: |FD - MC| is {ratio:.2f} standard errors")
        table.add(name, fd[name], est.value, est.std_error, ratio, flagged)
    total = Table("mc_verify_package", ["quantity", "value"])
    total.add("fd_bond_plus_cds", fd["bond"] + fd["cds"])
    total.add("mc_bond_plus_cds", mc["bond"].value + mc["cds"].value)
    total.add("n_paths", mc_cfg.n_paths)
    total.add("seed", mc_cfg.seed)
    return CommandResult([table, total], warnings)


def capital(cfg: ScenarioConfig, seed: int | None = None) -> CommandResult:
    """Basel capital profile across intensities at t=0; in mc_var mode also the simulated VaR."""
    model, spec = cfg.model(), cfg.capital()
    T = _maturity(cfg)
    M = effective_maturity(T, spec)
    hi = max(4.0 * max(model.lambda0, 0.0), 0.2)
    lambdas = np.linspace(0.0, hi, 41)
    pds = np.asarray(local_pd(model, 0.0, lambdas, T), dtype=float)
    profile = Table("capital_profile", ["lambda", "local_pd", "capital_ratio"])
    for lam, pd in zip(lambdas, pds):
        k = capital_ratio(min(pd, 1.0), spec.lgd, M, spec.avc) if pd > 0 else 0.0
        profile.add(lam, pd, k)
    pd0 = float(local_pd(model, 0.0, model.lambda0, T))
    k0 = capital_ratio(min(pd0, 1.0), spec.lgd, M, spec.avc) if pd0 > 0 else 0.0
    summary = Table("capital", ["quantity", "value"])
    summary.add("mode", spec.mode.value)
    summary.add("local_pd", pd0)
    summary.add("maturity_M", M)
    summary.add("capital_ratio", k0)
    if spec.mode is CapitalMode.FIXED_EXPOSURE:
        summary.add("capital_balance", capital_balance(spec, pd0, M=M) if pd0 > 0 else 0.0)
    warnings = []
    tables = [summary, profile]
    if spec.mode is CapitalMode.MC_VAR:
        summary.add("capital_balance", spec.var_amount)
        stats = simulate_hedged_economy(
            model, cfg.market(), cfg.bond(), cfg.cds(), EconomyMode.DIFFUSION_HEDGE, cfg.mc(seed), cfg.numerics().pricing
        )
        var = var_estimate(stats)
        summary.add("mc_var", var.amount)
        summary.add("mc_mean_wealth", stats.mean)
        summary.add("mc_wealth_se", stats.std_error)
        if var.small_sample:
            warnings.append("VaR sample has fewer than 5 tail observations")
        losses = Table("capital_losses", ["loss"])
        for x in stats.losses:
            losses.add(x)
        tables.append(losses)
    return CommandResult(tables, warnings)


def regress(csv_text: str) -> CommandResult:
    result = analytics.regress_basis(analytics.parse_table(csv_text))
    table = Table("regression", ["term", "coefficient", "std_error"])
    table.rows = result.rows()
    return CommandResult([table])
