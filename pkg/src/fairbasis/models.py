"""Intensity dynamics, market environment and instrument descriptions.

The default intensity follows ``d lambda = a dt + b dW``. Four concrete kinds
are supported: a constant level, a piecewise-constant deterministic curve, an
arithmetic (Bachelier-type) diffusion and a square-root (CIR) diffusion.

All rates and intensities are per annum, times in years, continuous
compounding throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ModelKind(str, Enum):
    CONSTANT = "constant"
    DETERMINISTIC_CURVE = "deterministic_curve"
    ARITHMETIC = "arithmetic"
    SQUARE_ROOT = "square_root"


class UnsupportedModelError(ValueError):
    """Raised when an operation has no implementation for a model kind."""


@dataclass(frozen=True)
class IntensityModel:
    """Default-intensity process specification.

    Use the ``constant``, ``curve``, ``arithmetic`` and ``square_root``
    constructors rather than building instances field by field.

    For a deterministic curve the PDE state is a parallel shift of the curve:
    the hazard at state ``lam`` and time ``t`` is ``curve(t) + lam - lambda0``
    with ``lambda0 = curve(0)``. The node at ``lambda0`` therefore follows the
    curve exactly while sensitivities are parallel-shift sensitivities.
    """

    kind: ModelKind
    lambda0: float
    a: float = 0.0
    b: float = 0.0
    kappa: float = 0.0
    theta: float = 0.0
    sigma: float = 0.0
    curve_times: tuple[float, ...] = ()
    curve_levels: tuple[float, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.lambda0):
            raise ValueError("lambda0 must be finite")
        if self.kind is not ModelKind.ARITHMETIC and self.lambda0 < 0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")
        for name in ("b", "kappa", "theta", "sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.kind is ModelKind.DETERMINISTIC_CURVE:
            times, levels = self.curve_times, self.curve_levels
            if len(levels) == 0 or len(times) != len(levels):
                raise ValueError("curve needs one level per segment end time")
            if any(t1 <= t0 for t0, t1 in zip((0.0,) + times[:-1], times)):
                raise ValueError("curve segment end times must be strictly increasing and positive")
            if any(level < 0 for level in levels):
                raise ValueError("curve levels must be >= 0")

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, level: float) -> IntensityModel:
        return cls(ModelKind.CONSTANT, float(level))

    @classmethod
    def curve(cls, times, levels) -> IntensityModel:
        """Piecewise-constant curve: ``levels[i]`` applies on ``(times[i-1], times[i]]``.

        The last level is extended flat beyond the last time.
        """
        times = tuple(float(t) for t in times)
        levels = tuple(float(v) for v in levels)
        return cls(
            ModelKind.DETERMINISTIC_CURVE,
            levels[0] if levels else 0.0,
            curve_times=times,
            curve_levels=levels,
        )

    @classmethod
    def arithmetic(cls, lambda0: float, a: float, b: float) -> IntensityModel:
        return cls(ModelKind.ARITHMETIC, float(lambda0), a=float(a), b=float(b))

    @classmethod
    def square_root(cls, lambda0: float, kappa: float, theta: float, sigma: float) -> IntensityModel:
        return cls(
            ModelKind.SQUARE_ROOT, float(lambda0), kappa=float(kappa), theta=float(theta), sigma=float(sigma)
        )

    # -- properties ---------------------------------------------------------

    @property
    def feller(self) -> bool | None:
        """``2 kappa theta >= sigma^2`` for square-root models, else None. Reported, not enforced."""
        if self.kind is not ModelKind.SQUARE_ROOT:
            return None
        return 2.0 * self.kappa * self.theta >= self.sigma**2

    @property
    def is_stochastic(self) -> bool:
        return self.kind in (ModelKind.ARITHMETIC, ModelKind.SQUARE_ROOT) and self.volatility_scale > 0

    @property
    def volatility_scale(self) -> float:
        if self.kind is ModelKind.ARITHMETIC:
            return self.b
        if self.kind is ModelKind.SQUARE_ROOT:
            return self.sigma
        return 0.0

    def rerooted(self, lam: float) -> IntensityModel:
        """Same dynamics started from ``lam``.

        Curves are shifted in parallel so that ``curve(0)`` becomes ``lam``.
        """
        if self.kind is ModelKind.DETERMINISTIC_CURVE:
            shift = lam - self.lambda0
            return IntensityModel.curve(self.curve_times, [v + shift for v in self.curve_levels])
        return IntensityModel(
            self.kind, float(lam), a=self.a, b=self.b, kappa=self.kappa, theta=self.theta, sigma=self.sigma
        )

    def curve_level(self, t):
        """Curve value at ``t`` (right-continuous between knots, flat extension)."""
        idx = np.searchsorted(np.asarray(self.curve_times), t, side="left")
        idx = np.minimum(idx, len(self.curve_levels) - 1)
        return np.asarray(self.curve_levels)[idx]

    def hazard(self, t, lam):
        """Default intensity used in hazard integrals: nonnegative by construction."""
        lam = np.asarray(lam, dtype=float)
        if self.kind is ModelKind.DETERMINISTIC_CURVE:
            return np.maximum(self.curve_level(t) + (lam - self.lambda0), 0.0)
        return np.maximum(lam, 0.0)

    def integrated_curve(self, t: float, T: float) -> float:
        """Exact integral of the curve over ``[t, T]``."""
        knots = np.concatenate(([0.0], self.curve_times, [np.inf]))
        levels = np.concatenate((self.curve_levels, [self.curve_levels[-1]]))
        total = 0.0
        for lo, hi, level in zip(knots[:-1], knots[1:], levels):
            seg = min(hi, T) - max(lo, t)
            if seg > 0:
                total += seg * level
        return total


def drift(model: IntensityModel, t: float, lam):
    """Drift of the intensity diffusion at ``(t, lam)``."""
    lam = np.asarray(lam, dtype=float)
    if model.kind is ModelKind.ARITHMETIC:
        return np.full_like(lam, model.a)
    if model.kind is ModelKind.SQUARE_ROOT:
        _check_nonneg(lam)
        return model.kappa * (model.theta - lam)
    return np.zeros_like(lam)


def vol(model: IntensityModel, t: float, lam):
    """Volatility of the intensity diffusion at ``(t, lam)``."""
    lam = np.asarray(lam, dtype=float)
    if model.kind is ModelKind.ARITHMETIC:
        return np.full_like(lam, model.b)
    if model.kind is ModelKind.SQUARE_ROOT:
        _check_nonneg(lam)
        return model.sigma * np.sqrt(lam)
    return np.zeros_like(lam)


def _check_nonneg(lam):
    if np.any(lam < 0):
        raise ValueError("square-root diffusion is undefined for negative intensity")


def cir_affine_coefficients(kappa: float, theta: float, sigma: float, tau):
    """Return ``(ln A(tau), B(tau))`` so that survival is ``exp(ln A - B lam)``.

    Written with ``expm1``/``log1p`` so the small-sigma limit is reached
    without cancellation.
    """
    tau = np.asarray(tau, dtype=float)
    if sigma * sigma == 0.0:
        if kappa == 0.0:
            return np.zeros_like(tau), tau.copy()
        decay = -np.expm1(-kappa * tau) / kappa
        return -theta * (tau - decay), decay
    gamma = math.sqrt(kappa * kappa + 2.0 * sigma * sigma)
    gk = gamma + kappa
    delta = 2.0 * sigma * sigma / gk  # gamma - kappa without cancellation
    with np.errstate(divide="ignore", over="ignore"):
        em = np.expm1(gamma * tau)
        b_coef = 2.0 / (gk + 2.0 * gamma / em)  # tends to 2 / (gamma + kappa) for long horizons
        if kappa * theta == 0.0:
            return np.zeros_like(tau), b_coef
        excess = (gk * np.expm1(0.5 * delta * tau) + delta * np.expm1(-0.5 * gk * tau)) / (2.0 * gamma)
        ln_a = -(2.0 * kappa * theta / (sigma * sigma)) * np.log1p(excess)
    return ln_a, b_coef


def survival_closed_form(model: IntensityModel, t: float, T, lam=None):
    """Survival probability ``q_t(T)`` given intensity ``lam`` at ``t`` (default ``lambda0``).

    Raises:
        UnsupportedModelError: for the arithmetic diffusion (no closed form
            consistent with the nonnegative hazard).
        ValueError: if ``t > T``.
    """
    T_arr = np.asarray(T, dtype=float)
    if np.any(T_arr < t):
        raise ValueError(f"survival horizon T={T} precedes t={t}")
    lam = model.lambda0 if lam is None else lam
    lam = np.asarray(lam, dtype=float)
    tau = T_arr - t
    if model.kind is ModelKind.CONSTANT:
        out = np.exp(-np.maximum(lam, 0.0) * tau)
    elif model.kind is ModelKind.DETERMINISTIC_CURVE:
        shift = lam - model.lambda0
        integ = np.vectorize(lambda hi: model.integrated_curve(t, hi))(T_arr)
        out = np.exp(-np.maximum(integ + shift * tau, 0.0))
    elif model.kind is ModelKind.SQUARE_ROOT:
        _check_nonneg(lam)
        ln_a, b_coef = cir_affine_coefficients(model.kappa, model.theta, model.sigma, tau)
        out = np.exp(ln_a - b_coef * lam)
    else:
        raise UnsupportedModelError("no closed-form survival for the arithmetic intensity diffusion")
    out = np.where(tau == 0.0, 1.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MarketEnv:
    """Flat short rates and financing parameters.

    ``r1`` (haircut-debt rate) defaults to the bank's unsecured rate ``r_b``;
    ``z`` (Libor short rate) defaults to ``r``.
    """

    r: float
    r_p: float
    r_b: float
    r_k: float
    h: float = 0.0
    epsilon: float = 0.0
    r1: float | None = None
    r_L: float | None = None
    z: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.h < 1.0:
            raise ValueError(f"haircut h must satisfy 0 <= h < 1, got {self.h}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.r_L is not None and self.r_L != self.r:
            raise ValueError("collateral rate r_L must equal r")

    @classmethod
    def riskfree(cls, r: float) -> MarketEnv:
        """Every financing rate equal to ``r``: no funding or capital cost."""
        return cls(r=r, r_p=r, r_b=r, r_k=r)

    @property
    def haircut_rate(self) -> float:
        return self.r_b if self.r1 is None else self.r1

    @property
    def libor(self) -> float:
        return self.r if self.z is None else self.z

    @property
    def r2(self) -> float:
        return self.epsilon * self.r_k + (1.0 - self.epsilon) * self.r_b

    @property
    def rbar_p(self) -> float:
        """Effective bond financing rate."""
        return (1.0 - self.h) * self.r_p + self.h * self.haircut_rate

    @property
    def rbar_k(self) -> float:
        """Excess return on capital."""
        return self.r_k - self.r


@dataclass(frozen=True)
class BondSpec:
    """Unit-notional bond paying a continuous coupon ``coupon`` until ``maturity``."""

    coupon: float
    maturity: float
    recovery: float
    notional: float = field(default=1.0, repr=False)

    def __post_init__(self):
        _check_instrument(self.maturity, self.recovery)
        if self.coupon < 0:
            raise ValueError("bond coupon must be >= 0")


@dataclass(frozen=True)
class CdsSpec:
    """CDS with continuously paid premium ``premium`` and protection ``1 - recovery``."""

    premium: float
    maturity: float
    recovery: float

    def __post_init__(self):
        _check_instrument(self.maturity, self.recovery)
        if self.premium < 0:
            raise ValueError("CDS premium must be >= 0")


def _check_instrument(maturity, recovery):
    if not maturity > 0:
        raise ValueError(f"maturity must be > 0, got {maturity}")
    if not 0.0 <= recovery <= 1.0:
        raise ValueError(f"recovery must lie in [0, 1], got {recovery}")
