"""Bond valuation inside a CDS-hedged economy with repo funding and capital costs.

The fair bond value ``B(t, lam, mbar)`` solves the quasi-linear problem

    (d/dt + A) B + dB/dmbar * (r mbar + lam l) - rbar_p B + r_c + lam (R - B)
        - (r_k - r) N_c - (r2 - r) mbar^- = 0,          B(T) = 1,

    l = B - R + Delta (V - (1 - R)),   Delta = -dB*/dlam / dV/dlam,

where ``mbar`` is the accumulated funding balance and ``V`` the risk-neutral
CDS value. ``xva = B* - B`` against the risk-neutral price ``B*``; dividing by
the risky annuity gives the fair basis as a running spread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp

from .capital import CapitalMode, CapitalSpec, capital_ratio_nodes, effective_maturity, local_pd
from .models import BondSpec, CdsSpec, IntensityModel, MarketEnv, ModelKind, drift, vol
from .pde import (
    GeneratorCoefficients,
    LambdaGrid,
    NumericalError,
    Surface,
    TimeGrid,
    cn_step,
    solve_backward,
)
from .pricing import Numerics, annuity_pv, bond_value_rn, cds_value, price_leg

DELTA_MAX = 10.0
MIN_CDS_SENSITIVITY = 1e-12


class HedgeMode(str, Enum):
    DIFFUSION = "diffusion"
    DETERMINISTIC_JTD = "deterministic_jtd"


class DegenerateHedgeError(ValueError):
    """The hedge ratio denominator vanishes."""


class PicardError(NumericalError):
    """The nonlinear iteration of a time step did not converge."""


# -- hedge ratio and jump-to-default loss ------------------------------------


def hedge_ratio_values(mode: HedgeMode, bond, cds, recovery: float, bond_slope=None, cds_slope=None):
    """Hedge ratio from values (and lambda-slopes in diffusion mode).

    Diffusion mode returns ``-dB/dlam / dV/dlam`` clamped to ``[0, DELTA_MAX]``;
    deterministic mode returns ``(B - R) / (1 - R - V)``, which zeroes the
    jump-to-default loss.

    Raises:
        DegenerateHedgeError: if the relevant denominator vanishes.
    """
    if HedgeMode(mode) is HedgeMode.DIFFUSION:
        cds_slope = np.asarray(cds_slope, dtype=float)
        if np.any(np.abs(cds_slope) < MIN_CDS_SENSITIVITY):
            raise DegenerateHedgeError("CDS lambda-sensitivity below 1e-12; diffusion hedge undefined")
        ratio = np.clip(-np.asarray(bond_slope, dtype=float) / cds_slope, 0.0, DELTA_MAX)
    else:
        denom = 1.0 - recovery - np.asarray(cds, dtype=float)
        if np.any(denom == 0.0):
            raise DegenerateHedgeError("1 - R - V vanishes; jump-to-default hedge undefined")
        ratio = (np.asarray(bond, dtype=float) - recovery) / denom
    return float(ratio) if np.ndim(ratio) == 0 else ratio


def hedge_ratio(bond_surface: Surface, cds_surface: Surface, t: float, lam: float, mode: HedgeMode, recovery: float) -> float:
    """Hedge ratio read off FD surfaces at ``(t, lam)``."""
    mode = HedgeMode(mode)
    b = bond_surface.interpolate(t, lam)
    v = cds_surface.interpolate(t, lam)
    if mode is HedgeMode.DETERMINISTIC_JTD:
        try:
            return hedge_ratio_values(mode, b, v, recovery)
        except DegenerateHedgeError as exc:
            raise DegenerateHedgeError(f"{exc} at t={t}, lambda={lam}") from None
    db = bond_surface.derivative().interpolate(t, lam)
    dv = cds_surface.derivative().interpolate(t, lam)
    try:
        return hedge_ratio_values(mode, b, v, recovery, db, dv)
    except DegenerateHedgeError as exc:
        raise DegenerateHedgeError(f"{exc} at t={t}, lambda={lam}") from None


def jtd_loss(bond, cds, delta, recovery: float):
    """Jump-to-default exposure ``B - R + Delta (V - (1 - R))`` of the hedged bond."""
    return np.asarray(bond) - recovery + np.asarray(delta) * (np.asarray(cds) - (1.0 - recovery))


def _solver_hedge_ratio(b, v, db, dv, recovery):
    """Diffusion hedge with a jump-to-default fallback where dV/dlam vanishes (e.g. at expiry)."""
    safe = np.abs(dv) >= MIN_CDS_SENSITIVITY
    ratio = np.empty(np.broadcast(b, dv).shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        diffusion = -db / np.where(safe, dv, 1.0)
        denom = 1.0 - recovery - v
        fallback = np.where(denom != 0.0, (b - recovery) / np.where(denom != 0.0, denom, 1.0), 1.0)
    ratio[...] = np.where(safe, diffusion, fallback)
    return np.clip(ratio, 0.0, DELTA_MAX)


def jtd_profile(
    model: IntensityModel,
    env: MarketEnv,
    bond: BondSpec,
    cds_premium: float,
    lambdas,
    hedge: float = 1.0,
    numerics: Numerics = Numerics(),
):
    """Jump-to-default loss at t=0 across initial intensities, risk-neutral B and V, fixed hedge ``hedge``.

    Returns ``(lambdas, losses)``.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    base = numerics.grids(model, bond.maturity)
    lo = min(base[0].lambda_min, lambdas.min())
    hi = max(base[0].lambda_max, lambdas.max())
    if model.kind is not ModelKind.ARITHMETIC:
        lo = max(lo, 0.0)
    grid = LambdaGrid.uniform(lo, hi, max(numerics.n_lambda, 401))
    grids = (grid, base[1])
    cds = CdsSpec(cds_premium, bond.maturity, bond.recovery)
    b = bond_value_rn(model, env, bond, 0.0, numerics, grids)
    v = cds_value(model, env, cds, 0.0, numerics, grids)
    loss = jtd_loss(b.grid_values, v.grid_values, hedge, bond.recovery)
    return lambdas, np.interp(lambdas, grid.nodes, loss)


# -- reports -----------------------------------------------------------------


@dataclass
class BasisReport:
    """Risk-neutral and fair bond values, xva and fair basis with t=0 profiles."""

    b_star: float
    b_fair: float
    xva: float
    apv: float
    fair_basis_bp: float
    cds_value: float
    package_value: float
    lambdas: np.ndarray
    hedge_ratio_profile: np.ndarray
    jtd_profile: np.ndarray
    capital_profile: np.ndarray
    mbar_nodes: np.ndarray = field(default_factory=lambda: np.zeros(1))
    mbar_xva: np.ndarray = field(default_factory=lambda: np.zeros(1))
    diagnostics: dict = field(default_factory=dict)

    def summary(self) -> dict[str, float]:
        return {
            "b_star": self.b_star,
            "b_fair": self.b_fair,
            "xva": self.xva,
            "apv": self.apv,
            "fair_basis_bp": self.fair_basis_bp,
            "cds_value": self.cds_value,
            "package_value": self.package_value,
        }


def fair_basis_bp(xva: float, apv: float) -> float:
    return 1e4 * xva / apv


def fair_basis_formula(env: MarketEnv, capital_balance: float) -> float:
    """Break-even ``(r_c - S - z)`` as a rate: effective funding over Libor plus cost of capital."""
    return (env.rbar_p - env.libor) + env.rbar_k * capital_balance


def carry_value(apv: float, carry: float) -> float:
    """Package value ``apv * carry`` of a basis trade earning a constant net carry."""
    return apv * carry


# -- deterministic intensity --------------------------------------------------


def solve_deterministic(
    env: MarketEnv, bond: BondSpec, cds: CdsSpec, model: IntensityModel, capital: CapitalSpec = CapitalSpec.none()
) -> BasisReport:
    """Fair value when the intensity is deterministic and the hedge zeroes the jump loss.

    The funding balance stays at zero, so the bond, CDS, risk-neutral bond and
    annuity follow linear ODEs integrated backward from maturity.
    """
    if model.kind not in (ModelKind.CONSTANT, ModelKind.DETERMINISTIC_CURVE):
        raise ValueError("solve_deterministic needs a constant or deterministic-curve intensity")
    _check_maturities(bond, cds)
    T, R = bond.maturity, bond.recovery
    lam0 = model.lambda0

    def capital_at(t):
        if capital.mode is CapitalMode.MC_VAR:
            return capital.var_amount
        if capital.mode is CapitalMode.VARIABLE_EXPOSURE:
            return 0.0  # jump loss is hedged to zero
        pd = local_pd(model, t, lam0, T)
        k = capital_ratio_nodes(np.atleast_1d(pd), capital.lgd, effective_maturity(T - t, capital), capital.avc)[0]
        return k * capital.fixed_exposure

    def rhs(t, y):
        b, v, b_star, annuity = y
        hz = float(model.hazard(t, lam0))
        return [
            env.rbar_p * b - bond.coupon - hz * (R - b) + env.rbar_k * capital_at(t),
            (env.r + hz) * v + cds.premium - hz * (1.0 - R),
            (env.r + hz) * b_star - bond.coupon - hz * R,
            (env.r + hz) * annuity - 1.0,
        ]

    knots = [T]
    if model.kind is ModelKind.DETERMINISTIC_CURVE:
        knots += [t for t in reversed(model.curve_times) if 0.0 < t < T]
    knots.append(0.0)
    y = np.array([1.0, 0.0, 1.0, 0.0])
    for hi, lo in zip(knots[:-1], knots[1:]):
        sol = solve_ivp(rhs, (hi, lo), y, method="DOP853", rtol=1e-11, atol=1e-13)
        if not sol.success:
            raise NumericalError(f"ODE integration failed: {sol.message}")
        y = sol.y[:, -1]
    b, v, b_star, annuity = (float(x) for x in y)
    xva = b_star - b
    delta = hedge_ratio_values(HedgeMode.DETERMINISTIC_JTD, b, v, R)
    return BasisReport(
        b_star=b_star,
        b_fair=b,
        xva=xva,
        apv=annuity,
        fair_basis_bp=fair_basis_bp(xva, annuity),
        cds_value=v,
        package_value=b + v - 1.0,
        lambdas=np.array([lam0]),
        hedge_ratio_profile=np.array([delta]),
        jtd_profile=np.array([float(jtd_loss(b, v, delta, R))]),
        capital_profile=np.array([capital_at(0.0)]),
        diagnostics={"solver": "deterministic_ode"},
    )


def _check_maturities(bond: BondSpec, cds: CdsSpec):
    if not math.isclose(bond.maturity, cds.maturity, rel_tol=0, abs_tol=1e-12):
        raise ValueError("the hedging CDS must mature with the bond")
    if not math.isclose(bond.recovery, cds.recovery, rel_tol=0, abs_tol=1e-12):
        raise ValueError("bond and CDS must share the recovery rate")


# -- stochastic intensity: 2-D solver -----------------------------------------


@dataclass(frozen=True)
class BasisNumerics:
    """Grid and iteration settings for the (lambda, mbar) solve."""

    n_lambda: int = 201
    width_sigmas: float = 6.0
    n_steps: int | None = None
    n_mbar: int = 41
    mbar_max: float = 0.5
    picard_tol: float = 1e-8
    picard_max_iter: int = 20
    max_substeps: int = 10_000

    def __post_init__(self):
        if self.n_mbar < 3 or self.n_mbar % 2 == 0:
            raise ValueError("n_mbar must be odd and >= 3 so that mbar = 0 is a node")

    @property
    def pricing(self) -> Numerics:
        return Numerics(self.n_lambda, self.width_sigmas, self.n_steps)

    def mbar_nodes(self) -> np.ndarray:
        return np.linspace(-self.mbar_max, self.mbar_max, self.n_mbar)


def _pd_table(model: IntensityModel, grid: LambdaGrid, T: float):
    """``t -> one-year local PD on every node``, cached by horizon for time-homogeneous models."""
    nodes = grid.nodes
    if model.kind is ModelKind.ARITHMETIC:
        # survival over horizon h is the slice at time 1 - h of a one-year solve
        surf = _survival_surface(model, grid)

        def table(t):
            h = max(min(1.0, T - t), 0.0)
            if h == 0.0:
                return np.zeros_like(nodes)
            return 1.0 - surf.interpolate(np.full_like(nodes, 1.0 - h), nodes)

        return table
    if model.kind is ModelKind.DETERMINISTIC_CURVE:
        return lambda t: np.asarray(local_pd(model, t, nodes, T), dtype=float)
    cache: dict[float, np.ndarray] = {}

    def table(t):
        h = round(max(min(1.0, T - t), 0.0), 12)
        if h not in cache:
            cache[h] = np.asarray(local_pd(model, T - h, nodes, T), dtype=float)
        return cache[h]

    return table


def _survival_surface(model: IntensityModel, grid: LambdaGrid) -> Surface:
    return price_leg(model, 1.0, 0.0, np.zeros_like, 1.0, 0.0, grids=(grid, TimeGrid(1.0, 200)), keep_surface=True).surface


def _advect(values: np.ndarray, mbar: np.ndarray, velocity: np.ndarray, dt: float, max_substeps: int) -> np.ndarray:
    """Upwind (semi-Lagrangian, linear interpolation) transport along the mbar axis.

    Backward in time the solution at ``mbar`` picks up the later value at
    ``mbar + velocity dt``; beyond the grid ends the value is held flat.
    """
    dm = mbar[1] - mbar[0]
    courant = float(np.max(np.abs(velocity))) * dt / dm
    n_sub = max(1, math.ceil(courant - 1e-12))
    if n_sub > max_substeps:
        raise NumericalError(f"mbar advection needs {n_sub} sub-steps (limit {max_substeps})")
    h = dt / n_sub
    out = values
    n = mbar.size
    rows = np.arange(values.shape[0])[:, None]
    for _ in range(n_sub):
        pos = np.clip((mbar[None, :] + velocity * h - mbar[0]) / dm, 0.0, n - 1.0)
        j = np.minimum(pos.astype(int), n - 2)
        w = pos - j
        out = (1.0 - w) * out[rows, j] + w * out[rows, j + 1]
    return out


def solve_basis_pde(
    model: IntensityModel,
    env: MarketEnv,
    bond: BondSpec,
    cds: CdsSpec,
    capital: CapitalSpec = CapitalSpec.none(),
    numerics: BasisNumerics = BasisNumerics(),
) -> BasisReport:
    """Fair value of the CDS-hedged bond on a (lambda, mbar) grid.

    Each time step splits into an upwind advection along mbar and an implicit
    Crank-Nicolson sweep along lambda per mbar slice; the pair is repeated
    (Picard) with the jump loss recomputed from the latest iterate until the
    update falls below ``picard_tol``. The hedge ratio is the diffusion hedge
    of the risk-neutral bond, so it does not depend on the iterate.

    Raises:
        PicardError: if a time step does not converge.
        NumericalError: on advection sub-step overflow or non-finite values.
    """
    _check_maturities(bond, cds)
    T, R = bond.maturity, bond.recovery
    pricing = numerics.pricing
    grid, time_grid = pricing.grids(model, T)
    grids = (grid, time_grid)
    nodes = grid.nodes
    mbar = numerics.mbar_nodes()
    j0 = numerics.n_mbar // 2

    b_star = bond_value_rn(model, env, bond, 0.0, pricing, grids, keep_surface=True)
    b_surf = b_star.surface
    db_surf = b_surf.derivative()
    cds_res = cds_value(model, env, cds, 0.0, pricing, grids, keep_surface=True)
    annuity = annuity_pv(model, env, 0.0, T, pricing, grids)
    v_surf = cds_res.surface
    dv_surf = v_surf.derivative()
    levels = v_surf.times
    _, thetas = time_grid.schedule()

    pd_at = _pd_table(model, grid, T) if capital.mode is not CapitalMode.MC_VAR else None
    short_mbar = np.maximum(-mbar, 0.0)[None, :]
    funding_spread = env.r2 - env.r

    def capital_at(t, lagged_loss):
        if capital.mode is CapitalMode.MC_VAR:
            return np.full((nodes.size, 1), capital.var_amount)
        k = capital_ratio_nodes(pd_at(t), capital.lgd, effective_maturity(T - t, capital), capital.avc)[:, None]
        if capital.mode is CapitalMode.FIXED_EXPOSURE:
            return k * capital.fixed_exposure
        return k * np.maximum(lagged_loss, 0.0)

    def coefficients(t, n_c):
        hz = model.hazard(t, nodes)
        b = vol(model, t, nodes)
        source = bond.coupon + (hz * R)[:, None] - env.rbar_k * n_c - funding_spread * short_mbar
        return GeneratorCoefficients(drift(model, t, nodes), 0.5 * b * b, env.rbar_p + hz, source), hz

    def loss_of(values, i):
        # hedge ratio from the risk-neutral surfaces: the fair-value slope along
        # lambda picks up upwind noise from mbar and is ill-conditioned near expiry
        v = v_surf.values[i][:, None]
        b = b_surf.values[i][:, None]
        delta = _solver_hedge_ratio(b, v, db_surf.values[i][:, None], dv_surf.values[i][:, None], R)
        return jtd_loss(values, v, delta, R), np.broadcast_to(delta, values.shape)

    B = np.ones((nodes.size, mbar.size))
    iterations = []
    final_change = 0.0
    for i in range(levels.size - 2, -1, -1):
        t_hi, t_lo = float(levels[i + 1]), float(levels[i])
        dt = t_hi - t_lo
        lagged_loss, _ = loss_of(B, i + 1)
        n_c_hi = capital_at(t_hi, lagged_loss)
        n_c_lo = capital_at(t_lo, lagged_loss)
        coeff_hi, _ = coefficients(t_hi, n_c_hi)
        coeff_lo, hz_lo = coefficients(t_lo, n_c_lo)
        current = B
        for it in range(1, numerics.picard_max_iter + 1):
            loss, _ = loss_of(current, i)
            velocity = env.r * mbar[None, :] + hz_lo[:, None] * loss
            moved = _advect(B, mbar, velocity, dt, numerics.max_substeps)
            updated = cn_step(moved, coeff_hi, coeff_lo, dt, grid, float(thetas[i]))
            change = float(np.max(np.abs(updated - current)))
            current = updated
            if change < numerics.picard_tol:
                break
        else:
            raise PicardError(
                f"Picard iteration did not converge at t={t_lo:.6g}: "
                f"last change {change:.3e} after {numerics.picard_max_iter} iterations"
            )
        iterations.append(it)
        final_change = max(final_change, change)
        B = current

    loss0, delta0 = loss_of(B, 0)
    n_c0 = capital_at(0.0, loss0)
    k = grid.anchor if grid.anchor is not None else int(np.argmin(np.abs(nodes - model.lambda0)))
    b_fair = float(B[k, j0])
    xva = b_star.value - b_fair
    return BasisReport(
        b_star=b_star.value,
        b_fair=b_fair,
        xva=xva,
        apv=annuity.value,
        fair_basis_bp=fair_basis_bp(xva, annuity.value),
        cds_value=cds_res.value,
        package_value=b_fair + cds_res.value - 1.0,
        lambdas=nodes.copy(),
        hedge_ratio_profile=delta0[:, j0].copy(),
        jtd_profile=loss0[:, j0].copy(),
        capital_profile=np.broadcast_to(n_c0, B.shape)[:, j0].copy(),
        mbar_nodes=mbar,
        mbar_xva=b_star.value - B[k, :],
        diagnostics={
            "solver": "basis_pde",
            "n_lambda": nodes.size,
            "n_mbar": mbar.size,
            "n_steps": time_grid.n_steps,
            "max_picard_iterations": max(iterations),
            "max_final_change": final_change,
            "grid_values": B,
        },
    )


# -- funding balance along a path -------------------------------------------------


def mbar_path(times, intensity, loss, r: float) -> np.ndarray:
    """Funding balance ``mbar_t = beta_t^-1 int_0^t lam l beta du`` by trapezoid quadrature, ``mbar_0 = 0``."""
    times = np.asarray(times, dtype=float)
    integrand = np.asarray(intensity, dtype=float) * np.asarray(loss, dtype=float) * np.exp(-r * times)
    integrand = np.broadcast_to(integrand, times.shape)
    accumulated = np.concatenate(([0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times))))
    return accumulated * np.exp(r * times)
