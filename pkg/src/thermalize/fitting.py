"""Exponential relaxation fits and bath-temperature estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InfiniteTemperature, InsufficientData
from .thermal import temperature_from_populations

RATE_BOUNDS = (1e-5, 1.0)
_GRID_POINTS = 241
_MAX_NEWTON = 20


@dataclass(frozen=True)
class RelaxationFit:
    """Least-squares fit of ``amplitude * exp(-rate * t) + p00_eq``."""

    p00_eq: float
    rate: float
    amplitude: float
    residual_rms: float
    covariance_diag: tuple
    no_decay: bool = False

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.covariance_diag))

    def predict(self, t) -> np.ndarray:
        return self.amplitude * np.exp(-self.rate * np.asarray(t, dtype=float)) + self.p00_eq


def _design(t: np.ndarray, rate: float, offset: bool) -> np.ndarray:
    cols = [np.exp(-rate * t)]
    if offset:
        cols.append(np.ones_like(t))
    return np.stack(cols, axis=1)


def _linear_part(t, y, w, rate, offset):
    x = _design(t, rate, offset) * w[:, None]
    coef, *_ = np.linalg.lstsq(x, y * w, rcond=None)
    resid = x @ coef - y * w
    return coef, float(resid @ resid)


def _fit(t, y, sigma, offset, rate_bounds, initial_rate, fixed_rate):
    n_par = 3 if offset else 2
    if t.size < n_par + 1:
        raise InsufficientData(f"need at least {n_par + 1} points, got {t.size}")
    if np.any(np.diff(t) <= 0):
        raise InsufficientData("times must be strictly ascending")
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    lo, hi = (math.log(b) for b in rate_bounds)

    def sse(log_rate: float) -> float:
        return _linear_part(t, y, w, math.exp(log_rate), offset)[1]

    no_decay = False
    if fixed_rate is not None:
        rate = float(fixed_rate)
    else:
        if initial_rate is not None:
            centre = math.log(initial_rate)
            grid = np.linspace(max(lo, centre - 2.0), min(hi, centre + 2.0), 41)
        else:
            grid = np.linspace(lo, hi, _GRID_POINTS)
        values = np.array([sse(g) for g in grid])
        k = int(np.argmin(values))
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        res = minimize_scalar(sse, bounds=(a, b), method="bounded", options={"xatol": 1e-13, "maxiter": 500})
        log_rate = float(res.x)
        rate = math.exp(log_rate)
        edge = 1e-6 * (hi - lo)
        flat = np.ptp(values) <= 1e-20 * max(1.0, float(np.max(values)))
        no_decay = bool(flat or log_rate - lo < edge or hi - log_rate < edge)

    coef, _ = _linear_part(t, y, w, rate, offset)
    amp = float(coef[0])
    c = float(coef[1]) if offset else 0.0
    if abs(amp) <= 1e-12 * (1.0 + abs(c)):
        no_decay = True

    if not no_decay and fixed_rate is None:
        # Gauss-Newton refinement on the full model
        params = np.array([amp, rate, c][:n_par] if offset else [amp, rate])
        for _ in range(_MAX_NEWTON):
            jac = _jacobian(t, params, offset) * w[:, None]
            resid = (_model(t, params, offset) - y) * w
            step, *_ = np.linalg.lstsq(jac, -resid, rcond=None)
            params = params + step
            if np.all(np.abs(step) <= 1e-10 * np.maximum(np.abs(params), 1e-300)):
                break
        amp, rate = float(params[0]), float(params[1])
        c = float(params[2]) if offset else 0.0

    params = np.array([amp, rate, c] if offset else [amp, rate])
    resid = (_model(t, params, offset) - y) * w
    rss = float(resid @ resid)
    dof = max(t.size - n_par, 1)
    if fixed_rate is not None or no_decay:
        jac = _design(t, rate, offset) * w[:, None]
        cov_lin = np.linalg.pinv(jac.T @ jac) * rss / dof
        cov = np.zeros(3)
        cov[0] = cov_lin[0, 0]
        if offset:
            cov[2] = cov_lin[1, 1]
    else:
        jac = _jacobian(t, params, offset) * w[:, None]
        cov_full = np.diag(np.linalg.pinv(jac.T @ jac)) * rss / dof
        cov = np.zeros(3)
        cov[: cov_full.size] = cov_full
    rms = math.sqrt(float(np.mean((_model(t, params, offset) - y) ** 2)))
    return amp, rate, c, rms, tuple(float(v) for v in cov), no_decay


def _model(t, params, offset):
    out = params[0] * np.exp(-params[1] * t)
    return out + params[2] if offset else out


def _jacobian(t, params, offset):
    e = np.exp(-params[1] * t)
    cols = [e, -params[0] * t * e]
    if offset:
        cols.append(np.ones_like(t))
    return np.stack(cols, axis=1)


def fit_relaxation(
    times,
    p00,
    initial_guess: float | None = None,
    sigma=None,
    rate_bounds=RATE_BOUNDS,
    fixed_rate: float | None = None,
) -> RelaxationFit:
    """Fit ``A exp(-r t) + c`` to a population time series by separable least squares.

    For each trial rate the linear parameters ``(A, c)`` are solved exactly,
    leaving a one-dimensional search over ``log r`` (grid scan, then bounded
    Brent). The optimum is polished with Gauss-Newton steps on all three
    parameters, which also provide the covariance.

    ``initial_guess`` narrows the rate scan around a known rate;
    ``fixed_rate`` pins the rate entirely (only ``A`` and ``c`` are fitted);
    ``sigma`` gives per-point standard deviations for weighting.
    A best rate on a search boundary, or a flat series, sets ``no_decay``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(p00, dtype=float)
    amp, rate, c, rms, cov, no_decay = _fit(t, y, sigma, True, rate_bounds, initial_guess, fixed_rate)
    return RelaxationFit(c, rate, amp, rms, cov, no_decay)


def fit_coherence(times, coherence_abs, sigma=None, rate_bounds=RATE_BOUNDS) -> RelaxationFit:
    """Fit ``A exp(-r t)`` (no offset) to ``|ρ01(t)|``; ``1/rate`` estimates T2."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(coherence_abs, dtype=float)
    amp, rate, _, rms, cov, no_decay = _fit(t, y, sigma, False, rate_bounds, None, None)
    return RelaxationFit(0.0, rate, amp, rms, cov, no_decay)


def binomial_sigma(p, shots: int) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=float), 0.5 / shots, 1 - 0.5 / shots)
    return np.sqrt(p * (1 - p) / shots)


@dataclass(frozen=True)
class TemperatureEstimate:
    value: float
    stderr: float

    def __float__(self) -> float:
        return self.value


def estimate_equilibrium_temperature(fit: RelaxationFit, gap: float) -> TemperatureEstimate:
    """Bath temperature implied by the fitted ground population, with delta-method error."""
    c = fit.p00_eq
    if not 0.5 < c < 1:
        raise InfiniteTemperature(f"fitted ground population {c!r} is outside (0.5, 1)")
    temperature = temperature_from_populations((c, 1.0 - c), gap)
    log_ratio = math.log(c / (1.0 - c))
    dtdc = gap / log_ratio**2 * (1.0 / c + 1.0 / (1.0 - c))
    stderr = abs(dtdc) * math.sqrt(max(fit.covariance_diag[2], 0.0))
    return TemperatureEstimate(temperature, stderr)
