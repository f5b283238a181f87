"""Defaultable bond and CDS valuation with funding and capital costs.

The core modules are plain numpy/scipy: ``models`` (intensity processes and
market data), ``pde`` (Crank-Nicolson solver), ``pricing`` (risk-neutral
legs), ``capital`` (IRB capital), ``basis`` (fair value of the CDS-hedged
bond), ``montecarlo`` and ``analytics``. ``service`` wraps them in a FastAPI
app and ``cli`` is a thin client of that app.
"""

__version__ = "0.1.0"

from .basis import BasisNumerics, BasisReport, HedgeMode, fair_basis_formula, jtd_profile, solve_basis_pde, solve_deterministic
from .capital import CapitalMode, CapitalSpec, capital_ratio
from .models import BondSpec, CdsSpec, IntensityModel, MarketEnv, ModelKind, survival_closed_form
from .pricing import Numerics, annuity_pv, bond_value_rn, cds_value, default_pv, floating_bond_value, par_spread, survival_fd

__all__ = [
    "BasisNumerics",
    "BasisReport",
    "BondSpec",
    "CapitalMode",
    "CapitalSpec",
    "CdsSpec",
    "HedgeMode",
    "IntensityModel",
    "MarketEnv",
    "ModelKind",
    "Numerics",
    "annuity_pv",
    "bond_value_rn",
    "capital_ratio",
    "cds_value",
    "default_pv",
    "fair_basis_formula",
    "floating_bond_value",
    "jtd_profile",
    "par_spread",
    "solve_basis_pde",
    "solve_deterministic",
    "survival_closed_form",
    "survival_fd",
]
