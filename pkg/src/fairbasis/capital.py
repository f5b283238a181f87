"""Economic capital: Basel IRB capital ratio, one-year local PD, and the capital balance N_c."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr, ndtri

from .models import IntensityModel, ModelKind, survival_closed_form

CONFIDENCE = 0.999
PD_FLOOR = 3e-4  # IRB corporate PD floor; keeps 1 - 1.5 b > 0


class CapitalMode(str, Enum):
    FIXED_EXPOSURE = "fixed_exposure"
    VARIABLE_EXPOSURE = "variable_exposure"
    MC_VAR = "mc_var"


@dataclass(frozen=True)
class CapitalSpec:
    """How the capital balance is determined.

    ``maturity`` of None applies ``min(max(remaining, 1), 5)`` at each time.
    ``var_amount`` is the capital balance used in ``MC_VAR`` mode.
    """

    mode: CapitalMode = CapitalMode.FIXED_EXPOSURE
    fixed_exposure: float = 0.0
    lgd: float = 0.45
    avc: float = 1.0
    maturity: float | None = None
    var_amount: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.lgd <= 1.0:
            raise ValueError("lgd must lie in [0, 1]")
        if self.avc not in (1.0, 1.25):
            raise ValueError("avc must be 1 or 1.25")
        if self.fixed_exposure < 0:
            raise ValueError("fixed_exposure must be >= 0")
        if self.var_amount < 0:
            raise ValueError("var_amount must be >= 0")
        if self.maturity is not None and not self.maturity > 0:
            raise ValueError("maturity must be > 0")

    @classmethod
    def none(cls) -> CapitalSpec:
        """No capital requirement."""
        return cls(CapitalMode.FIXED_EXPOSURE, 0.0)

    @property
    def confidence(self) -> float:
        return CONFIDENCE


def _check_pd(pd):
    pd = np.asarray(pd, dtype=float)
    if np.any(pd <= 0) or np.any(pd > 1):
        raise ValueError("pd must lie in (0, 1]")
    return pd


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def correlation(pd, avc: float = 1.0):
    """Asset correlation of the IRB corporate formula."""
    pd = _check_pd(pd)
    w = -np.expm1(-50.0 * pd) / -math.expm1(-50.0)
    return _scalar(avc * (0.12 * w + 0.24 * (1.0 - w)))


def maturity_adjustment(pd, M):
    """``(1 + (M - 2.5) b) / (1 - 1.5 b)`` with ``b = (0.11852 - 0.05478 ln pd)^2``.

    ``pd`` is floored at ``PD_FLOOR`` inside the logarithm.
    """
    pd = _check_pd(pd)
    if np.any(np.asarray(M) <= 0):
        raise ValueError("maturity must be > 0")
    b = (0.11852 - 0.05478 * np.log(np.maximum(pd, PD_FLOOR))) ** 2
    return _scalar((1.0 + (np.asarray(M) - 2.5) * b) / (1.0 - 1.5 * b))


def pd_floored(pd) -> bool:
    """True if the maturity adjustment clamps this pd."""
    return bool(np.any(np.asarray(pd) < PD_FLOOR))


def capital_ratio(pd, lgd: float, M, avc: float = 1.0):
    """Capital requirement per unit exposure at 99.9% confidence."""
    pd = _check_pd(pd)
    if not 0.0 <= lgd <= 1.0:
        raise ValueError("lgd must lie in [0, 1]")
    rho = np.asarray(correlation(pd, avc))
    conditional = ndtr((ndtri(pd) + np.sqrt(rho) * ndtri(CONFIDENCE)) / np.sqrt(1.0 - rho))
    k = lgd * np.maximum(conditional - pd, 0.0) * np.asarray(maturity_adjustment(pd, M))
    return _scalar(k)


def capital_ratio_nodes(pd: np.ndarray, lgd: float, M, avc: float = 1.0) -> np.ndarray:
    """Vectorised capital ratio that maps pd <= 0 to zero capital."""
    pd = np.asarray(pd, dtype=float)
    out = np.zeros_like(pd)
    live = pd > 0
    if np.any(live):
        out[live] = capital_ratio(np.minimum(pd[live], 1.0), lgd, M, avc)
    return out


def effective_maturity(remaining: float, spec: CapitalSpec | None = None) -> float:
    if spec is not None and spec.maturity is not None:
        return spec.maturity
    return min(max(remaining, 1.0), 5.0)


def local_pd(model: IntensityModel, t: float, lam, T: float | None = None):
    """One-year default probability from ``t`` with the intensity at ``lam``.

    The horizon is truncated at ``T`` when given.
    """
    horizon = 1.0 if T is None else max(min(1.0, T - t), 0.0)
    lam = np.asarray(lam, dtype=float)
    if horizon == 0.0:
        return _scalar(np.zeros_like(lam))
    if model.kind is ModelKind.ARITHMETIC:
        return _scalar(1.0 - _arithmetic_survival(model, lam, horizon))
    if model.kind is ModelKind.SQUARE_ROOT:
        lam = np.maximum(lam, 0.0)
    q = survival_closed_form(model, t, t + horizon, lam)
    return _scalar(1.0 - np.asarray(q))


def _arithmetic_survival(model: IntensityModel, lam: np.ndarray, horizon: float) -> np.ndarray:
    # no closed form with the clamped hazard: solve the survival PDE once on a covering grid
    from .pricing import Numerics, survival_fd
    from .pde import LambdaGrid, TimeGrid

    lam_flat = np.atleast_1d(lam)
    base = Numerics(n_lambda=201).grids(model, horizon)[0]
    lo = min(base.lambda_min, lam_flat.min()) - 1e-3
    hi = max(base.lambda_max, lam_flat.max()) + 1e-3
    grid = LambdaGrid.uniform(lo, hi, 401)
    res = survival_fd(model, 0.0, horizon, grids=(grid, TimeGrid(horizon, 100)))
    return np.interp(lam, res.nodes, res.grid_values)


def local_pd_table(model: IntensityModel, t: float, nodes: np.ndarray, T: float) -> np.ndarray:
    """``local_pd`` on every grid node (helper for the PDE solver)."""
    return np.asarray(local_pd(model, t, nodes, T), dtype=float)


def capital_balance(spec: CapitalSpec, pd=None, exposure=None, M: float | None = None):
    """Capital balance N_c for the given mode.

    FIXED_EXPOSURE uses ``spec.fixed_exposure``; VARIABLE_EXPOSURE uses the
    caller's exposure floored at zero; MC_VAR returns the VaR amount
    (``exposure`` if given, else ``spec.var_amount``).
    """
    if spec.mode is CapitalMode.MC_VAR:
        return spec.var_amount if exposure is None else _scalar(np.maximum(np.asarray(exposure, dtype=float), 0.0))
    if spec.mode is CapitalMode.FIXED_EXPOSURE:
        amount = spec.fixed_exposure
    else:
        if exposure is None:
            raise ValueError("variable-exposure capital needs an exposure")
        amount = np.maximum(np.asarray(exposure, dtype=float), 0.0)
    if spec.maturity is not None:
        maturity = spec.maturity
    else:
        maturity = 2.5 if M is None else M
    k = capital_ratio_nodes(np.atleast_1d(pd), spec.lgd, maturity, spec.avc)
    out = k * amount if np.ndim(pd) else k[0] * amount
    return _scalar(out)
