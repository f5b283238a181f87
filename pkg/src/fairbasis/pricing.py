"""Risk-neutral pricing of survival, CDS legs, CDS and defaultable bonds by finite differences.

Every leg is a solution of

    du/dt + A u - c u + f = 0

on the same intensity grid and time schedule, so linear identities between
legs (``V = dpv - S * apv``, bond plus protection equals par) hold on the grid
up to rounding, not only in the limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import BondSpec, CdsSpec, IntensityModel, MarketEnv, ModelKind, drift, vol
from .pde import GeneratorCoefficients, LambdaGrid, Surface, TimeGrid, build_grid, solve_backward


@dataclass(frozen=True)
class PricingResult:
    """Value at lambda0 with central-difference sensitivities on the solve grid."""

    value: float
    delta: float
    gamma: float
    grid_values: np.ndarray | None = None
    nodes: np.ndarray | None = None
    surface: Surface | None = None


@dataclass(frozen=True)
class Numerics:
    """Grid choices for the finite-difference solves."""

    n_lambda: int = 201
    width_sigmas: float = 6.0
    n_steps: int | None = None

    def grids(self, model: IntensityModel, T: float, t: float = 0.0) -> tuple[LambdaGrid, TimeGrid]:
        horizon = T - t
        grid = build_grid(model, horizon, self.n_lambda, self.width_sigmas)
        steps = self.n_steps if self.n_steps is not None else TimeGrid.default(horizon).n_steps
        return grid, TimeGrid(horizon, steps)


DEFAULT_NUMERICS = Numerics()


def _coefficient_fn(model: IntensityModel, grid: LambdaGrid, t0: float, discount_rate: float, source):
    """Build ``tau -> GeneratorCoefficients`` (``tau`` measured from ``t0``).

    ``source(hazard)`` gives the running payoff. Coefficients of
    time-homogeneous models are computed once.
    """
    nodes = grid.nodes

    def coeffs(tau: float) -> GeneratorCoefficients:
        t = t0 + tau
        hz = model.hazard(t, nodes)
        b = vol(model, t, nodes)
        return GeneratorCoefficients(drift(model, t, nodes), 0.5 * b * b, discount_rate + hz, source(hz))

    if model.kind is ModelKind.DETERMINISTIC_CURVE:
        return coeffs
    fixed = coeffs(0.0)
    return lambda tau: fixed


def _result(grid: LambdaGrid, values: np.ndarray, surface: Surface | None, lam0: float) -> PricingResult:
    nodes = grid.nodes
    if grid.anchor is not None and 0 < grid.anchor < nodes.size - 1:
        k = grid.anchor
        h = grid.spacing
        value = float(values[k])
        delta = float((values[k + 1] - values[k - 1]) / (2 * h))
        gamma = float((values[k + 1] - 2 * values[k] + values[k - 1]) / h**2)
    else:
        value = float(np.interp(lam0, nodes, values))
        d1 = np.gradient(values, nodes)
        delta = float(np.interp(lam0, nodes, d1))
        gamma = float(np.interp(lam0, nodes, np.gradient(d1, nodes)))
    return PricingResult(value, delta, gamma, values.copy(), nodes, surface)


def price_leg(
    model: IntensityModel,
    T: float,
    discount_rate: float,
    source,
    terminal: float,
    t: float = 0.0,
    numerics: Numerics = DEFAULT_NUMERICS,
    grids: tuple[LambdaGrid, TimeGrid] | None = None,
    keep_surface: bool = False,
) -> PricingResult:
    """Generic backward solve with discounting ``discount_rate + hazard`` and running payoff ``source(hazard)``."""
    if t > T:
        raise ValueError(f"valuation time t={t} is after maturity T={T}")
    grid, time_grid = grids if grids is not None else numerics.grids(model, T, t)
    coeffs = _coefficient_fn(model, grid, t, discount_rate, source)
    knots = tuple(k - t for k in model.curve_times) if model.kind is ModelKind.DETERMINISTIC_CURVE else ()
    values, surface = solve_backward(grid, time_grid, coeffs, terminal, keep_surface=keep_surface, knots=knots)
    if surface is not None:
        surface = Surface(surface.times + t, surface.nodes, surface.values)
    return _result(grid, values, surface, model.lambda0)


def survival_fd(model: IntensityModel, t: float, T: float, numerics: Numerics = DEFAULT_NUMERICS, grids=None) -> PricingResult:
    """Survival probability from the Feynman-Kac PDE with terminal value 1 (no interest discounting)."""
    return price_leg(model, T, 0.0, np.zeros_like, 1.0, t, numerics, grids)


def annuity_pv(
    model: IntensityModel, env: MarketEnv, t: float, T: float, numerics: Numerics = DEFAULT_NUMERICS, grids=None,
    keep_surface: bool = False,
) -> PricingResult:
    """Risky annuity: value of a unit premium paid continuously until default or ``T``."""
    return price_leg(model, T, env.r, np.ones_like, 0.0, t, numerics, grids, keep_surface)


def default_pv(
    model: IntensityModel, env: MarketEnv, recovery: float, t: float, T: float,
    numerics: Numerics = DEFAULT_NUMERICS, grids=None,
) -> PricingResult:
    """Present value of the default loss ``1 - R`` paid at default."""
    if not 0.0 <= recovery <= 1.0:
        raise ValueError("recovery must lie in [0, 1]")
    return price_leg(model, T, env.r, lambda hz: (1.0 - recovery) * hz, 0.0, t, numerics, grids)


def cds_value(
    model: IntensityModel, env: MarketEnv, cds: CdsSpec, t: float = 0.0,
    numerics: Numerics = DEFAULT_NUMERICS, grids=None, keep_surface: bool = False,
) -> PricingResult:
    """Protection-buyer value of the CDS (pre-default)."""
    loss, premium = 1.0 - cds.recovery, cds.premium
    return price_leg(model, cds.maturity, env.r, lambda hz: loss * hz - premium, 0.0, t, numerics, grids, keep_surface)


def bond_value_rn(
    model: IntensityModel, env: MarketEnv, bond: BondSpec, t: float = 0.0,
    numerics: Numerics = DEFAULT_NUMERICS, grids=None, keep_surface: bool = False,
) -> PricingResult:
    """Risk-neutral (OIS-discounted) pre-default bond price."""
    coupon, recovery = bond.coupon, bond.recovery
    return price_leg(
        model, bond.maturity, env.r, lambda hz: coupon + recovery * hz, 1.0, t, numerics, grids, keep_surface
    )


def floating_bond_value(
    model: IntensityModel, env: MarketEnv, spread: float, T: float, recovery: float,
    numerics: Numerics = DEFAULT_NUMERICS, grids=None,
) -> float:
    """Floating-rate bond paying index plus ``spread``: ``1 - dpv + spread * apv``."""
    if spread < 0:
        raise ValueError("floating spread must be >= 0")
    grids = grids if grids is not None else numerics.grids(model, T)
    dpv = default_pv(model, env, recovery, 0.0, T, numerics, grids).value
    apv = annuity_pv(model, env, 0.0, T, numerics, grids).value
    return 1.0 - dpv + spread * apv


def par_spread(model: IntensityModel, env: MarketEnv, recovery: float, T: float, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """Running premium that makes the CDS worth zero at inception."""
    grids = numerics.grids(model, T)
    return default_pv(model, env, recovery, 0.0, T, numerics, grids).value / annuity_pv(model, env, 0.0, T, numerics, grids).value
