"""Monte Carlo oracle: intensity paths, Cox default times, pathwise pricing and the hedged economy.

Paths are generated in fixed-size blocks. Block ``i`` draws from its own
Philox stream keyed by ``(seed, i)``, so results do not depend on how many
threads run the blocks or in which order.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .basis import HedgeMode, hedge_ratio_values, jtd_loss
from .models import BondSpec, CdsSpec, IntensityModel, MarketEnv, ModelKind
from .pricing import DEFAULT_NUMERICS, Numerics, bond_value_rn, cds_value

BLOCK_SIZE = 2048


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 80_000
    n_steps_per_year: int = 250
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths < 100:
            raise ValueError("n_paths must be >= 100")
        if self.n_steps_per_year < 1:
            raise ValueError("n_steps_per_year must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even path count")

    def time_grid(self, T: float) -> np.ndarray:
        n = max(1, math.ceil(T * self.n_steps_per_year - 1e-9))
        return np.linspace(0.0, T, n + 1)

    def blocks(self) -> list[tuple[int, int]]:
        """(block index, paths in block)."""
        full, rest = divmod(self.n_paths, BLOCK_SIZE)
        sizes = [BLOCK_SIZE] * full + ([rest] if rest else [])
        return list(enumerate(sizes))


@dataclass
class PathBundle:
    """Simulated intensity paths and default times.

    ``intensity`` holds the raw state (may go negative for the arithmetic
    diffusion); ``hazard`` is the clamped default intensity used in integrals.
    ``default_time`` is ``inf`` on paths surviving past the horizon.
    """

    times: np.ndarray
    intensity: np.ndarray
    hazard: np.ndarray
    default_time: np.ndarray
    discount: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.default_time.size

    def survival_fraction(self) -> float:
        return float(np.mean(np.isinf(self.default_time)))


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_paths: int


@dataclass
class WealthStats:
    """Discounted terminal wealth statistics and the t=0 economic-loss sample."""

    mean: float
    std_error: float
    losses: np.ndarray
    accumulation_slope: float | None = None
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_losses(cls, losses) -> WealthStats:
        losses = np.asarray(losses, dtype=float)
        wealth = -losses
        return cls(float(wealth.mean()), float(wealth.std(ddof=1) / math.sqrt(wealth.size)), losses)


@dataclass(frozen=True)
class VarEstimate:
    amount: float
    small_sample: bool


class EconomyMode(str, Enum):
    CDS_ONLY_UNHEDGED = "cds_only_unhedged"
    DETERMINISTIC_JTD = "deterministic_jtd"
    DIFFUSION_HEDGE = "diffusion_hedge"


def _threads() -> int:
    try:
        n = int(os.environ.get("FAIRBASIS_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _simulate_block(model: IntensityModel, times: np.ndarray, n: int, rng: np.random.Generator, antithetic: bool):
    n_steps = times.size - 1
    dt = np.diff(times)
    half = n // 2 if antithetic else n
    uniforms = rng.random(half)
    if antithetic:
        uniforms = np.concatenate((uniforms, 1.0 - uniforms))
    thresholds = -np.log1p(-uniforms)  # standard exponential
    lam = np.empty((n_steps + 1, n))
    lam[0] = model.lambda0
    stochastic = model.kind in (ModelKind.ARITHMETIC, ModelKind.SQUARE_ROOT)
    if stochastic:
        shocks = rng.standard_normal((n_steps, half))
        if antithetic:
            shocks = np.concatenate((shocks, -shocks), axis=1)
        for k in range(n_steps):
            x = lam[k]
            if model.kind is ModelKind.SQUARE_ROOT:
                xp = np.maximum(x, 0.0)  # full truncation
                lam[k + 1] = x + model.kappa * (model.theta - xp) * dt[k] + model.sigma * np.sqrt(xp * dt[k]) * shocks[k]
            else:
                lam[k + 1] = x + model.a * dt[k] + model.b * math.sqrt(dt[k]) * shocks[k]
    else:
        lam[1:] = model.lambda0
    hazard = model.hazard(times[:, None], lam)
    cum = np.concatenate((np.zeros((1, n)), np.cumsum(0.5 * (hazard[1:] + hazard[:-1]) * dt[:, None], axis=0)))
    crossed = cum >= thresholds[None, :]
    hit = crossed.any(axis=0)
    k_hit = np.where(hit, np.argmax(crossed, axis=0), 0)
    tau = np.full(n, np.inf)
    idx = np.nonzero(hit)[0]
    k = k_hit[idx]
    lo, hi = cum[k - 1, idx], cum[k, idx]
    frac = np.where(hi > lo, (thresholds[idx] - lo) / np.where(hi > lo, hi - lo, 1.0), 1.0)
    tau[idx] = times[k - 1] + frac * (times[k] - times[k - 1])
    return lam.T.copy(), hazard.T.copy(), tau


def _map_blocks(fn, cfg: McConfig):
    blocks = cfg.blocks()
    workers = min(_threads(), len(blocks))
    if workers <= 1:
        return [fn(i, n) for i, n in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def simulate_paths(model: IntensityModel, T: float, cfg: McConfig, r: float = 0.0) -> PathBundle:
    """Euler paths of the intensity and Cox default times by exponential thresholding.

    Memory grows with ``n_paths * T * n_steps_per_year``; the pricing functions
    below stream blocks instead of materialising every path.
    """
    times = cfg.time_grid(T)
    parts = _map_blocks(lambda i, n: _simulate_block(model, times, n, _rng(cfg.seed, i), cfg.antithetic), cfg)
    return PathBundle(
        times=times,
        intensity=np.concatenate([p[0] for p in parts]),
        hazard=np.concatenate([p[1] for p in parts]),
        default_time=np.concatenate([p[2] for p in parts]),
        discount=np.exp(-r * times),
    )


def _discounted_annuity(r: float, horizon):
    """``int_0^horizon exp(-r s) ds`` evaluated exactly."""
    horizon = np.asarray(horizon, dtype=float)
    if r == 0.0:
        return horizon
    return -np.expm1(-r * horizon) / r


def _estimate(samples: np.ndarray, antithetic: bool, n_blocks_sizes) -> McEstimate:
    if antithetic:
        pairs = []
        start = 0
        for n in n_blocks_sizes:
            block = samples[start:start + n]
            pairs.append(0.5 * (block[: n // 2] + block[n // 2:]))
            start += n
        effective = np.concatenate(pairs)
    else:
        effective = samples
    return McEstimate(float(effective.mean()), float(effective.std(ddof=1) / math.sqrt(effective.size)), samples.size)


def price_instruments_mc(
    model: IntensityModel, env: MarketEnv, bond: BondSpec | None, cds: CdsSpec | None, cfg: McConfig
) -> dict[str, McEstimate]:
    """Pathwise discounted payoffs of the bond and the CDS on one set of paths."""
    T = max(x.maturity for x in (bond, cds) if x is not None)
    times = cfg.time_grid(T)
    r = env.r

    def block(i, n):
        _, _, tau = _simulate_block(model, times, n, _rng(cfg.seed, i), cfg.antithetic)
        out = {}
        if bond is not None:
            stop = np.minimum(tau, bond.maturity)
            defaulted = tau <= bond.maturity
            out["bond"] = (
                np.where(defaulted, bond.recovery * np.exp(-r * np.where(defaulted, tau, 0.0)), math.exp(-r * bond.maturity))
                + bond.coupon * _discounted_annuity(r, stop)
            )
        if cds is not None:
            stop = np.minimum(tau, cds.maturity)
            defaulted = tau <= cds.maturity
            out["cds"] = (
                np.where(defaulted, (1.0 - cds.recovery) * np.exp(-r * np.where(defaulted, tau, 0.0)), 0.0)
                - cds.premium * _discounted_annuity(r, stop)
            )
        return out

    parts = _map_blocks(block, cfg)
    sizes = [n for _, n in cfg.blocks()]
    return {key: _estimate(np.concatenate([p[key] for p in parts]), cfg.antithetic, sizes) for key in parts[0]}


def price_bond_mc(model: IntensityModel, env: MarketEnv, bond: BondSpec, cfg: McConfig) -> McEstimate:
    return price_instruments_mc(model, env, bond, None, cfg)["bond"]


def price_cds_mc(model: IntensityModel, env: MarketEnv, cds: CdsSpec, cfg: McConfig) -> McEstimate:
    return price_instruments_mc(model, env, None, cds, cfg)["cds"]


def simulate_hedged_economy(
    model: IntensityModel,
    env: MarketEnv,
    bond: BondSpec | None,
    cds: CdsSpec,
    mode: EconomyMode,
    cfg: McConfig,
    numerics: Numerics = DEFAULT_NUMERICS,
    capital_balance: float = 0.0,
) -> WealthStats:
    """Simulate the self-financing economy and collect discounted terminal wealth.

    ``CDS_ONLY_UNHEDGED`` holds one unit of protection bought at its FD value
    and funded from the bank account. The hedged modes hold the bond at its
    risk-neutral FD price, financed through repo (haircut debt at ``r1``),
    hedged with ``Delta`` units of CDS and with the residual balance in the
    bank account or the ``r2`` debt account; on default the position settles
    its jump-to-default loss ``l``.

    The economy starts from zero wealth, so the t=0 economic loss is
    ``-beta_T pi_T`` per path.
    """
    mode = EconomyMode(mode)
    T, R = cds.maturity, cds.recovery
    times = cfg.time_grid(T)
    dt = np.diff(times)
    beta = np.exp(-env.r * times)
    grids = numerics.grids(model, T)
    v_res = cds_value(model, env, cds, 0.0, numerics, grids, keep_surface=True)

    if mode is EconomyMode.CDS_ONLY_UNHEDGED:
        v0 = v_res.value

        def block(i, n):
            _, _, tau = _simulate_block(model, times, n, _rng(cfg.seed, i), cfg.antithetic)
            stop = np.minimum(tau, T)
            defaulted = tau <= T
            protection = np.where(defaulted, (1.0 - R) * np.exp(-env.r * np.where(defaulted, tau, 0.0)), 0.0)
            return -v0 - cds.premium * _discounted_annuity(env.r, stop) + protection, None

    else:
        if bond is None:
            raise ValueError("hedged economies need a bond")
        if not math.isclose(bond.maturity, T):
            raise ValueError("the hedging CDS must mature with the bond")
        b_surf = bond_value_rn(model, env, bond, 0.0, numerics, grids, keep_surface=True).surface
        v_surf = v_res.surface
        db_surf, dv_surf = b_surf.derivative(), v_surf.derivative()
        hedge_mode = HedgeMode.DIFFUSION if mode is EconomyMode.DIFFUSION_HEDGE else HedgeMode.DETERMINISTIC_JTD
        funding_spread = env.r2 - env.r

        def block(i, n):
            lam, hazard, tau = _simulate_block(model, times, n, _rng(cfg.seed, i), cfg.antithetic)
            wealth = np.zeros(n)  # discounted
            alive = np.ones(n, dtype=bool)
            xs, ys = [], []
            b_now = b_surf.interpolate(np.full(n, times[0]), lam[:, 0])
            v_now = v_surf.interpolate(np.full(n, times[0]), lam[:, 0])
            for k in range(times.size - 1):
                t0, t1 = times[k], times[k + 1]
                x0 = lam[:, k]
                if hedge_mode is HedgeMode.DIFFUSION:
                    delta = hedge_ratio_values(
                        hedge_mode, b_now, v_now, R,
                        db_surf.interpolate(np.full(n, t0), x0), dv_surf.interpolate(np.full(n, t0), x0),
                    )
                else:
                    delta = hedge_ratio_values(hedge_mode, b_now, v_now, R)
                loss = jtd_loss(b_now, v_now, delta, R)
                b_next = b_surf.interpolate(np.full(n, t1), lam[:, k + 1])
                v_next = v_surf.interpolate(np.full(n, t1), lam[:, k + 1])
                mbar = wealth / beta[k]
                flow = (
                    bond.coupon * dt[k]
                    + (b_next - b_now)
                    - env.rbar_p * b_now * dt[k]
                    - funding_spread * np.maximum(-mbar, 0.0) * dt[k]
                    - env.rbar_k * capital_balance * dt[k]
                    + delta * ((v_next - v_now) - env.r * v_now * dt[k] - cds.premium * dt[k])
                )
                defaults_now = alive & (tau <= t1)
                survives = alive & ~defaults_now
                increment = beta[k] * flow
                xs.append((beta[k] * hazard[:, k] * loss * dt[k])[survives])
                ys.append(increment[survives])
                wealth = np.where(survives, wealth + increment, wealth)
                jump_at = np.where(defaults_now, tau, t1)
                wealth = np.where(defaults_now, wealth - np.exp(-env.r * jump_at) * loss, wealth)
                alive = survives
                b_now, v_now = b_next, v_next
            x = np.concatenate(xs)
            y = np.concatenate(ys)
            return wealth, (float(x @ y), float(x @ x))

    parts = _map_blocks(block, cfg)
    terminal = np.concatenate([p[0] for p in parts])
    sizes = [n for _, n in cfg.blocks()]
    est = _estimate(terminal, cfg.antithetic, sizes)
    slope = None
    if parts[0][1] is not None:
        sxy = sum(p[1][0] for p in parts)
        sxx = sum(p[1][1] for p in parts)
        slope = sxy / sxx if sxx > 0 else None
    return WealthStats(est.value, est.std_error, -terminal, slope, {"cds_value": v_res.value, "mode": mode.value})


def var_estimate(stats: WealthStats, q: float = 0.999) -> VarEstimate:
    """Smallest x with empirical P(loss > x) <= 1 - q."""
    if not 0.5 < q < 1.0:
        raise ValueError("confidence q must lie in (0.5, 1)")
    losses = np.sort(stats.losses)
    n = losses.size
    k = max(math.ceil(n * q - 1e-9) - 1, 0)
    return VarEstimate(float(losses[k]), n * (1.0 - q) < 5)


def write_losses_csv(stats: WealthStats, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["loss"])
        writer.writerows([f"{x:.9g}"] for x in stats.losses)
