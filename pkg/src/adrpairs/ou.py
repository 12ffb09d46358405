"""Ornstein-Uhlenbeck model for return spreads.

    dX = mu (theta - X) dt + sigma dW

Observed at a fixed step ``dt`` the process is a Gaussian AR(1):

    x(i) = b x(i-1) + theta (1 - b) + e(i),   b = exp(-mu dt),
    Var e(i) = sigma^2 (1 - exp(-2 mu dt)) / (2 mu)

``fit_mle`` maximises the average conditional log-likelihood of the
transitions (the first observation is conditioned on, not modelled).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date
from typing import NamedTuple

import numpy as np
from scipy import optimize, signal

from .errors import EvaluationError, ValidationError
from .returns import SpreadSeries

__all__ = [
    "OUParams",
    "Transition",
    "FitResult",
    "transition_params",
    "avg_log_likelihood",
    "fd_gradient",
    "fit_mle",
    "simulate",
    "fit_yearly",
    "simulate_refit",
    "MIN_YEARLY_OBS",
]

log = logging.getLogger(__name__)

MIN_YEARLY_OBS = 30
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class OUParams:
    theta: float  # long-term mean
    mu: float  # reversion rate, per unit dt
    sigma: float  # volatility, per sqrt(unit dt)

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValidationError(f"theta must be finite, got {self.theta!r}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValidationError(f"mu must be positive, got {self.mu!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma!r}")


class Transition(NamedTuple):
    coef: float  # exp(-mu dt)
    intercept: float  # theta (1 - exp(-mu dt))
    variance: float  # conditional variance of one step


def _variance_factor(mu: float, dt: float) -> float:
    # (1 - exp(-2 mu dt)) / (2 mu), accurate as mu -> 0
    return -math.expm1(-2.0 * mu * dt) / (2.0 * mu)


def transition_params(params: OUParams, dt: float = 1.0) -> Transition:
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt!r}")
    coef = math.exp(-params.mu * dt)
    intercept = -params.theta * math.expm1(-params.mu * dt)
    return Transition(coef, intercept, params.sigma**2 * _variance_factor(params.mu, dt))


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=float)


def _avg_ll(theta: float, mu: float, sigma: float, prev: np.ndarray, nxt: np.ndarray, dt: float) -> float:
    coef = math.exp(-mu * dt)
    sd = sigma * math.sqrt(_variance_factor(mu, dt))
    resid = (nxt - prev * coef + theta * math.expm1(-mu * dt)) / sd
    return -_HALF_LOG_2PI - math.log(sd) - 0.5 * float(resid @ resid) / len(resid)


def avg_log_likelihood(params: OUParams, x, dt: float = 1.0) -> float:
    """Average log transition density over the ``len(x) - 1`` transitions of ``x``."""
    v = _values(x)
    if v.ndim != 1 or len(v) < 2:
        raise ValidationError("log-likelihood needs at least 2 observations")
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt!r}")
    with np.errstate(all="ignore"):
        try:
            ll = _avg_ll(params.theta, params.mu, params.sigma, v[:-1], v[1:], dt)
        except (OverflowError, ValueError, ZeroDivisionError) as exc:
            raise EvaluationError(f"log-likelihood evaluation failed: {exc}") from None
    if not math.isfinite(ll):
        raise EvaluationError(f"non-finite log-likelihood for {params}")
    return ll


def fd_gradient(params: OUParams, x, dt: float = 1.0, rel_step: float = 1e-6) -> tuple[float, float, float]:
    """Central-difference gradient of the average log-likelihood in (theta, mu, sigma).

    Steps are ``rel_step * max(|p|, 1e-3)`` so a near-zero theta still gets a
    usable step.
    """
    v = _values(x)
    prev, nxt = v[:-1], v[1:]
    p = [params.theta, params.mu, params.sigma]
    grad = []
    for i in range(3):
        h = rel_step * max(abs(p[i]), 1e-3)
        up, dn = list(p), list(p)
        up[i] += h
        dn[i] -= h
        grad.append((_avg_ll(*up, prev, nxt, dt) - _avg_ll(*dn, prev, nxt, dt)) / (2 * h))
    return tuple(grad)


@dataclass(frozen=True)
class FitResult:
    params: OUParams | None
    avg_log_likelihood: float | None
    n: int  # observations in the fitted window (transitions + 1)
    start: date | None = None
    end: date | None = None
    dt: float = 1.0
    converged: bool = True
    message: str = ""
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "theta": p.theta if p else None,
            "mu": p.mu if p else None,
            "sigma": p.sigma if p else None,
            "avg_ll": self.avg_log_likelihood,
            "n": self.n,
            "start": self.start.isoformat() if self.start else None,
            "end": self.end.isoformat() if self.end else None,
            "dt": self.dt,
            "converged": self.converged,
        }


def _ar1(prev: np.ndarray, nxt: np.ndarray):
    xm, ym = prev.mean(), nxt.mean()
    dx = prev - xm
    sxx = float(dx @ dx)
    slope = float(dx @ (nxt - ym)) / sxx
    intercept = float(ym - slope * xm)
    resid = nxt - intercept - slope * prev
    return slope, intercept, float(resid @ resid) / len(resid)


def fit_mle(x, dt: float = 1.0) -> FitResult:
    """Maximum-likelihood (theta, mu, sigma) for a discretely observed OU path.

    The AR(1) least-squares solution is mapped to OU parameters and used as
    the starting point; a quasi-Newton pass over (theta, ln mu, ln sigma)
    then polishes it, keeping whichever point has the higher likelihood.

    If the fitted AR(1) slope is not in (0, 1) the likelihood has no interior
    maximum with mu > 0; the result is returned with ``converged=False`` and
    the AR(1) estimates in ``diagnostics``.
    """
    v = _values(x)
    dates = getattr(x, "dates", None)
    if v.ndim != 1 or len(v) < 4:
        raise ValidationError(f"OU fit needs at least 4 observations, got {len(v)}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("OU fit input contains non-finite values")
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt!r}")
    window = dict(
        n=len(v),
        start=dates[0] if dates else None,
        end=dates[-1] if dates else None,
        dt=dt,
    )
    prev, nxt = v[:-1], v[1:]
    if np.all(prev == prev[0]):
        raise ValidationError("OU fit undefined for a constant series")

    slope, intercept, resid_var = _ar1(prev, nxt)
    diag = {"ar1_slope": slope, "ar1_intercept": intercept, "ar1_resid_var": resid_var}
    if not (0.0 < slope < 1.0) or not resid_var > 0:
        msg = f"AR(1) slope {slope:.6g} outside (0, 1): no mean reversion in sample"
        if resid_var <= 0:
            msg = "zero residual variance"
        return FitResult(None, None, converged=False, message=msg, diagnostics=diag, **window)

    mu0 = -math.log(slope) / dt
    theta0 = intercept / (1.0 - slope)
    sigma0 = math.sqrt(resid_var / _variance_factor(mu0, dt))
    ll0 = _avg_ll(theta0, mu0, sigma0, prev, nxt, dt)

    scale = math.sqrt(resid_var)

    def neg_ll(z):
        th, lmu, lsig = z
        with np.errstate(all="ignore"):
            try:
                val = _avg_ll(th * scale, math.exp(lmu), math.exp(lsig), prev, nxt, dt)
            except (OverflowError, ValueError, ZeroDivisionError):
                return math.inf
        return -val if math.isfinite(val) else math.inf

    res = optimize.minimize(
        neg_ll,
        np.array([theta0 / scale, math.log(mu0), math.log(sigma0)]),
        method="BFGS",
        options={"gtol": 1e-10, "maxiter": 200},
    )
    theta, mu, sigma, ll = theta0, mu0, sigma0, ll0
    if math.isfinite(res.fun) and -res.fun > ll0:
        theta, mu, sigma, ll = res.x[0] * scale, math.exp(res.x[1]), math.exp(res.x[2]), -res.fun
    params = OUParams(float(theta), float(mu), float(sigma))
    diag["gradient"] = fd_gradient(params, v, dt)
    diag["refined"] = (theta, mu, sigma) != (theta0, mu0, sigma0)
    return FitResult(params, float(ll), diagnostics=diag, **window)


def simulate(
    params: OUParams,
    x0: float,
    n: int,
    dt: float = 1.0,
    seed: int = 0,
    dates=None,
) -> SpreadSeries:
    """Sample ``n`` steps after ``x0`` using the exact Gaussian transition.

    The returned series holds x(1)..x(n); x0 itself is not included. Normal
    draws come from ``numpy.random.default_rng(seed)`` (PCG64).
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    coef, intercept, _ = transition_params(params, dt)
    sd = params.sigma * math.sqrt(_variance_factor(params.mu, dt))
    z = np.random.default_rng(seed).standard_normal(n)
    noise = sd * z if sd > 0 else np.zeros(n)
    path = signal.lfilter([1.0], [1.0, -coef], intercept + noise, zi=[coef * x0])[0]
    return SpreadSeries(path, dates)


def fit_yearly(x: SpreadSeries, dt: float = 1.0, min_obs: int = MIN_YEARLY_OBS) -> list[tuple[int, FitResult]]:
    """One fit per calendar year of the observation dates.

    A year's window holds every observation dated in that year, preceded by
    the last observation of the previous year when one exists, so each
    transition is assigned to the year of its later day. Years with fewer
    than ``min_obs`` dated observations are skipped with a logged warning.
    """
    dates = getattr(x, "dates", None)
    if not dates:
        raise ValidationError("yearly fits need a dated series")
    v = _values(x)
    years = np.array([d.year for d in dates])
    out = []
    for year in sorted(set(years.tolist())):
        idx = np.flatnonzero(years == year)
        count = len(idx)
        if count < min_obs:
            log.warning("skipping %d: %d observations (< %d)", year, count, min_obs)
            continue
        lo = max(int(idx[0]) - 1, 0)
        hi = int(idx[-1]) + 1
        window = SpreadSeries(v[lo:hi], dates[lo:hi], getattr(x, "component", None))
        out.append((year, fit_mle(window, dt)))
    if not out:
        raise ValidationError(f"no calendar year has at least {min_obs} observations")
    return out


def simulate_refit(fit: FitResult, seed: int) -> FitResult:
    """Simulate a path of ``fit.n`` points from the fitted parameters (x0 = theta) and refit it."""
    if not fit.converged or fit.params is None:
        raise ValidationError("simulate_refit needs a converged fit")
    path = simulate(fit.params, fit.params.theta, fit.n, fit.dt, seed)
    refit = fit_mle(path, fit.dt)
    return FitResult(
        refit.params,
        refit.avg_log_likelihood,
        refit.n,
        fit.start,
        fit.end,
        refit.dt,
        refit.converged,
        refit.message,
        refit.diagnostics,
    )
