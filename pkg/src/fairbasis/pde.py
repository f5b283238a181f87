"""One-dimensional Crank-Nicolson machinery on a uniform intensity grid.

Solves backward parabolic problems of the form

    du/dt + a du/dlam + D d2u/dlam2 - c u + f = 0,   D = b^2 / 2

from a terminal condition. The boundary closure at both ends of the grid sets
the second derivative to zero and uses one-sided first differences (forward at
the lower end, backward at the upper end), which keeps the system tridiagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import IntensityModel, ModelKind

MIN_GRID_WIDTH = 1e-4


class NumericalError(RuntimeError):
    """A solve produced non-finite values or failed to converge."""


class SingularSystemError(NumericalError):
    """Zero pivot met while eliminating a tridiagonal system."""


@dataclass(frozen=True)
class LambdaGrid:
    """Uniform grid on the intensity axis. ``anchor`` is the index of lambda0 when it is a node."""

    nodes: np.ndarray
    anchor: int | None = None

    def __post_init__(self):
        if self.nodes.ndim != 1 or self.nodes.size < 3:
            raise ValueError("an intensity grid needs at least 3 nodes")
        steps = np.diff(self.nodes)
        if np.any(steps <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if np.max(np.abs(steps - steps.mean())) > 1e-12 * max(1.0, np.max(np.abs(self.nodes))):
            raise ValueError("grid nodes must be uniformly spaced")

    @classmethod
    def uniform(cls, lambda_min: float, lambda_max: float, n_lambda: int, anchor: int | None = None) -> LambdaGrid:
        return cls(np.linspace(lambda_min, lambda_max, n_lambda), anchor)

    @property
    def lambda_min(self) -> float:
        return float(self.nodes[0])

    @property
    def lambda_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_lambda(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        return float(self.nodes[1] - self.nodes[0])


@dataclass(frozen=True)
class TimeGrid:
    """``n_steps`` equal steps over ``[0, T]``."""

    T: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.T >= 0:
            raise ValueError("horizon must be >= 0")

    @classmethod
    def default(cls, T: float) -> TimeGrid:
        return cls(T, default_steps(T))

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    def schedule(self, rannacher: bool = True, knots=()) -> tuple[np.ndarray, np.ndarray]:
        """Time levels in ascending order and the implicitness of each step.

        ``thetas[i]`` applies to the step from ``levels[i + 1]`` down to
        ``levels[i]``. With Rannacher startup the first backward step is
        replaced by two fully implicit half steps. ``knots`` inside ``(0, T)``
        are added as extra levels (coefficient discontinuities).
        """
        levels = np.linspace(0.0, self.T, self.n_steps + 1)
        startup = self.T - self.dt
        if rannacher and self.T > 0:
            levels = np.insert(levels, self.n_steps, self.T - 0.5 * self.dt)
        inner = [k for k in knots if 0.0 < k < self.T]
        if inner:
            levels = np.unique(np.concatenate((levels, inner)))
        thetas = np.full(levels.size - 1, 0.5)
        if rannacher and self.T > 0:
            thetas[levels[:-1] >= startup - 1e-12 * max(self.T, 1.0)] = 1.0
        return levels, thetas


def default_steps(T: float) -> int:
    return max(200, int(math.ceil(100.0 * T)))


@dataclass(frozen=True)
class GeneratorCoefficients:
    """Per-node coefficients of ``du/dt + a u' + D u'' - c u + f = 0``.

    ``source`` may carry a trailing column axis when several right-hand sides
    share one operator.
    """

    drift: np.ndarray
    diffusion: np.ndarray
    discount: np.ndarray
    source: np.ndarray

    def __post_init__(self):
        if np.any(self.diffusion < 0):
            raise ValueError("diffusion coefficient must be nonnegative")


def _horizon_std(model: IntensityModel, T: float) -> tuple[float, float, float]:
    """(lowest mean-path value, highest mean-path value, T-horizon std)."""
    lam0 = model.lambda0
    if model.kind is ModelKind.ARITHMETIC:
        end = lam0 + model.a * T
        return min(lam0, end), max(lam0, end), model.b * math.sqrt(T)
    if model.kind is ModelKind.SQUARE_ROOT:
        k, th, s = model.kappa, model.theta, model.sigma
        if k > 0:
            decay = math.exp(-k * T)
            end = th + (lam0 - th) * decay
            var = lam0 * s * s * decay * (1 - decay) / k + th * s * s * (1 - decay) ** 2 / (2 * k)
        else:
            end = lam0
            var = lam0 * s * s * T
        return min(lam0, end), max(lam0, end), math.sqrt(max(var, 0.0))
    return lam0, lam0, 0.0


def build_grid(model: IntensityModel, T: float, n_lambda: int = 201, width_sigmas: float = 6.0) -> LambdaGrid:
    """Uniform grid around the mean path, ``width_sigmas`` horizon std devs wide on each side.

    The lower bound is clamped at zero except for the arithmetic diffusion.
    Spacing is adjusted so that lambda0 falls exactly on a node.
    """
    if n_lambda < 3:
        raise ValueError("n_lambda must be >= 3")
    if not width_sigmas > 0:
        raise ValueError("width_sigmas must be > 0")
    lam0 = model.lambda0
    low_path, high_path, std = _horizon_std(model, T)
    if std > 0.0:
        lo, hi = low_path - width_sigmas * std, high_path + width_sigmas * std
    else:
        # no diffusion: nodes never interact, so only keep the spacing well above round-off
        pad = max(0.25 * max(abs(low_path), abs(high_path)), 0.5 * MIN_GRID_WIDTH)
        lo, hi = low_path - pad, high_path + pad
    if hi - lo < MIN_GRID_WIDTH:
        mid = 0.5 * (lo + hi)
        lo, hi = mid - 0.5 * MIN_GRID_WIDTH, mid + 0.5 * MIN_GRID_WIDTH
    nonneg = model.kind is not ModelKind.ARITHMETIC
    h = (hi - lo) / (n_lambda - 1)
    if nonneg and lo <= 0.0:
        if lam0 <= 0.0:
            return LambdaGrid.uniform(0.0, hi, n_lambda, anchor=0)
        k = min(max(int(lam0 / h), 1), n_lambda - 2)
        h = lam0 / k
        return LambdaGrid.uniform(0.0, (n_lambda - 1) * h, n_lambda, anchor=k)
    k = min(max(int(round((lam0 - lo) / h)), 1), n_lambda - 2)
    lo = lam0 - k * h
    nodes = lo + h * np.arange(n_lambda)
    nodes[k] = lam0
    return LambdaGrid(nodes, anchor=k)


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Thomas algorithm. ``lower[0]`` and ``upper[-1]`` are ignored.

    ``rhs`` may be 2-D with one column per right-hand side.

    Raises:
        SingularSystemError: on a zero pivot.
    """
    lower = np.asarray(lower, dtype=float)
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = diag.size
    if rhs.shape[0] != n:
        raise ValueError("rhs length does not match the system size")
    c_prime = np.empty(n)
    d_prime = np.empty_like(rhs)
    pivot = diag[0]
    if pivot == 0.0:
        raise SingularSystemError("zero pivot at row 0")
    c_prime[0] = upper[0] / pivot if n > 1 else 0.0
    d_prime[0] = rhs[0] / pivot
    for i in range(1, n):
        pivot = diag[i] - lower[i] * c_prime[i - 1]
        if pivot == 0.0:
            raise SingularSystemError(f"zero pivot at row {i}")
        c_prime[i] = upper[i] / pivot if i < n - 1 else 0.0
        d_prime[i] = (rhs[i] - lower[i] * d_prime[i - 1]) / pivot
    x = d_prime
    for i in range(n - 2, -1, -1):
        x[i] = x[i] - c_prime[i] * x[i + 1]
    return x


def operator_bands(coeffs: GeneratorCoefficients, h: float):
    """Bands (lower, diag, upper) of the spatial operator ``a d/dlam + D d2/dlam2 - c``."""
    a = np.asarray(coeffs.drift, dtype=float)
    d = np.asarray(coeffs.diffusion, dtype=float)
    c = np.asarray(coeffs.discount, dtype=float)
    lower = d / h**2 - a / (2 * h)
    diag = -2 * d / h**2 - c
    upper = d / h**2 + a / (2 * h)
    # linearity closure: u'' = 0 and one-sided u' at the ends
    lower[0] = 0.0
    diag[0] = -a[0] / h - c[0]
    upper[0] = a[0] / h
    lower[-1] = -a[-1] / h
    diag[-1] = a[-1] / h - c[-1]
    upper[-1] = 0.0
    return lower, diag, upper


def _apply_bands(lower, diag, upper, u):
    out = diag.reshape(diag.shape + (1,) * (u.ndim - 1)) * u
    lo = lower.reshape(lower.shape + (1,) * (u.ndim - 1))
    up = upper.reshape(upper.shape + (1,) * (u.ndim - 1))
    out[1:] += lo[1:] * u[:-1]
    out[:-1] += up[:-1] * u[1:]
    return out


def cn_step(
    u,
    coeffs_old: GeneratorCoefficients,
    coeffs_new: GeneratorCoefficients,
    dt: float,
    grid: LambdaGrid,
    theta: float = 0.5,
) -> np.ndarray:
    """Advance ``u`` from time ``t`` to ``t - dt``.

    ``coeffs_old`` are the coefficients at ``t`` (where ``u`` is known),
    ``coeffs_new`` those at ``t - dt``. ``theta = 0.5`` is Crank-Nicolson,
    ``theta = 1`` fully implicit Euler.

    Raises:
        NumericalError: if the result contains NaN or infinities.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    u = np.asarray(u, dtype=float)
    h = grid.spacing
    lo_old, di_old, up_old = operator_bands(coeffs_old, h)
    rhs = u + (1.0 - theta) * dt * _apply_bands(lo_old, di_old, up_old, u)
    f_old = np.asarray(coeffs_old.source, dtype=float)
    f_new = np.asarray(coeffs_new.source, dtype=float)
    rhs = rhs + dt * (theta * _expand(f_new, u) + (1.0 - theta) * _expand(f_old, u))
    lo_new, di_new, up_new = operator_bands(coeffs_new, h)
    out = solve_tridiagonal(-theta * dt * lo_new, 1.0 - theta * dt * di_new, -theta * dt * up_new, rhs)
    if not np.all(np.isfinite(out)):
        raise NumericalError("Crank-Nicolson step produced non-finite values")
    return out


def _expand(f, u):
    f = np.asarray(f, dtype=float)
    if f.ndim < u.ndim:
        f = f.reshape(f.shape + (1,) * (u.ndim - f.ndim))
    return f


@dataclass(frozen=True)
class Surface:
    """Solution values on (time level, node), times ascending."""

    times: np.ndarray
    nodes: np.ndarray
    values: np.ndarray

    def at_time_index(self, i: int) -> np.ndarray:
        return self.values[i]

    def derivative(self) -> Surface:
        """Central-difference d/dlam (one-sided at the grid ends)."""
        return Surface(self.times, self.nodes, np.gradient(self.values, self.nodes, axis=1))

    def interpolate(self, t, lam) -> np.ndarray:
        """Bilinear interpolation; points outside the grid are clamped to it."""
        t = np.clip(np.asarray(t, dtype=float), self.times[0], self.times[-1])
        lam = np.clip(np.asarray(lam, dtype=float), self.nodes[0], self.nodes[-1])
        it = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        il = np.clip(np.searchsorted(self.nodes, lam, side="right") - 1, 0, self.nodes.size - 2)
        wt = (t - self.times[it]) / (self.times[it + 1] - self.times[it])
        wl = (lam - self.nodes[il]) / (self.nodes[il + 1] - self.nodes[il])
        v = self.values
        return (
            (1 - wt) * ((1 - wl) * v[it, il] + wl * v[it, il + 1])
            + wt * ((1 - wl) * v[it + 1, il] + wl * v[it + 1, il + 1])
        )


def solve_backward(
    grid: LambdaGrid,
    time_grid: TimeGrid,
    coefficients: Callable[[float], GeneratorCoefficients],
    terminal,
    keep_surface: bool = False,
    rannacher: bool = True,
    knots=(),
):
    """March from ``T`` down to 0.

    Coefficients are evaluated once per step at its midpoint, so piecewise
    constant coefficients with jumps at ``knots`` are integrated exactly in
    time.

    Returns the solution at ``t = 0`` and, when ``keep_surface`` is set, a
    :class:`Surface` holding every time level.
    """
    u = np.broadcast_to(np.asarray(terminal, dtype=float), grid.nodes.shape).copy()
    if time_grid.T == 0:
        surface = Surface(np.array([0.0]), grid.nodes, u[None, :]) if keep_surface else None
        return u, surface
    levels, thetas = time_grid.schedule(rannacher, knots)
    values = np.empty((levels.size, grid.n_lambda)) if keep_surface else None
    if keep_surface:
        values[-1] = u
    for i in range(levels.size - 2, -1, -1):
        coeff = coefficients(0.5 * float(levels[i] + levels[i + 1]))
        u = cn_step(u, coeff, coeff, float(levels[i + 1] - levels[i]), grid, float(thetas[i]))
        if keep_surface:
            values[i] = u
    surface = Surface(levels, grid.nodes, values) if keep_surface else None
    return u, surface
