"""Vasicek parameter estimation.

Three routes:

* AR(1) regression on a short-rate history mapped back through the exact
  discretisation (maximum likelihood for Vasicek);
* *ad hoc* least squares on a zero-coupon curve, in prices or in rates;
* indirect inference with an Euler/Milstein auxiliary model, for series
  (such as CIR) whose naive discretised estimates are biased.

Rates are per year; ``delta`` is the observation step in years.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .dist_transforms import NormalSource
from .rng_core import LcgSource
from .sde import VasicekParams

__all__ = [
    "Ar1Fit",
    "VasicekEstimate",
    "ZeroCouponCurve",
    "CalibrationError",
    "PARAM_BOUNDS",
    "fit_ar1",
    "ar1_to_vasicek",
    "vasicek_ar1_coefficients",
    "vasicek_zc_price",
    "vasicek_zc_rate",
    "adhoc_objective",
    "fit_adhoc",
    "auxiliary_estimate",
    "simulate_short_rate",
    "indirect_distance",
    "fit_indirect",
]

PARAM_BOUNDS = {"a": (1e-4, 5.0), "b": (-0.05, 0.25), "sigma": (0.0, 0.5)}
_NAMES = ("a", "b", "sigma")
# documented start grid for the ad hoc restarts: (a, b, sigma)
_START_GRID = (
    (0.1, 0.04, 0.02),
    (0.3, 0.06, 0.05),
    (0.6, 0.05, 0.10),
    (1.2, 0.08, 0.01),
    (2.5, 0.03, 0.20),
)


class CalibrationError(RuntimeError):
    """Optimiser failure; ``best`` holds the best point found."""

    def __init__(self, message: str, best: "VasicekEstimate | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True, slots=True)
class Ar1Fit:
    alpha: float
    beta: float
    sigma1: float
    n: int


@dataclass(frozen=True)
class VasicekEstimate:
    a: float
    b: float
    sigma: float
    method: str
    r0: float | None = None
    fixed: Mapping[str, float] = field(default_factory=dict)
    objective_value: float | None = None
    iterations: int | None = None
    model: str = "vasicek"

    @property
    def fixed_sigma(self) -> float | None:
        return self.fixed.get("sigma")

    def params(self, r0: float | None = None) -> VasicekParams:
        return VasicekParams(self.a, self.b, self.r0 if r0 is None else r0, self.sigma)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "model": self.model,
            "a": self.a,
            "b": self.b,
            "sigma": self.sigma,
            "r0": self.r0,
            "fixed": dict(self.fixed),
            "objective_value": self.objective_value,
            "iterations": self.iterations,
        }


# ---------------------------------------------------------------------------
# AR(1) route


def fit_ar1(rates, delta: float = 1.0) -> Ar1Fit:
    """OLS of r_{k+1} on r_k; residual deviation uses divisor n (ML convention)."""
    r = np.asarray(rates, dtype=np.float64)
    if r.ndim != 1 or r.size < 3:
        raise ValueError("fit_ar1 needs a 1-D series of length >= 3")
    x, y = r[:-1], r[1:]
    if np.ptp(x) == 0.0:
        raise ValueError("fit_ar1: regressor series is constant")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    beta = float(xc @ (y - y.mean())) / sxx
    alpha = float(y.mean() - beta * x.mean())
    res = y - alpha - beta * x
    return Ar1Fit(alpha, beta, float(math.sqrt(np.mean(res * res))), x.size)


def ar1_to_vasicek(fit: Ar1Fit, delta: float = 1.0, *, r0: float | None = None) -> VasicekEstimate:
    """a = -ln(beta)/delta, b = alpha/(1-beta), sigma^2 = sigma1^2 2 ln(beta) / (delta (beta^2 - 1))."""
    if not 0.0 < fit.beta < 1.0:
        raise ValueError(f"AR(1) slope must lie in (0, 1) for the Vasicek map, got {fit.beta}")
    if not delta > 0:
        raise ValueError("delta must be > 0")
    log_beta = math.log(fit.beta)
    a = -log_beta / delta
    b = fit.alpha / (1.0 - fit.beta)
    # beta^2 - 1 = expm1(2 ln beta) keeps precision when beta is near one
    var = fit.sigma1**2 * 2.0 * log_beta / (delta * math.expm1(2.0 * log_beta))
    return VasicekEstimate(a, b, math.sqrt(var), "mle_exact", r0=r0)


def vasicek_ar1_coefficients(p: VasicekParams, delta: float = 1.0) -> Ar1Fit:
    """(alpha, beta, sigma1) of the exact AR(1) representation at step ``delta``."""
    beta = math.exp(-p.a * delta)
    sigma1 = p.sigma * math.sqrt(-math.expm1(-2.0 * p.a * delta) / (2.0 * p.a))
    return Ar1Fit(p.b * (1.0 - beta), beta, sigma1, 0)


# ---------------------------------------------------------------------------
# zero-coupon curve


@dataclass(frozen=True)
class ZeroCouponCurve:
    """Continuously compounded zero rates R(0, T); prices P = exp(-T R)."""

    maturities: np.ndarray
    rates: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.maturities, dtype=np.float64)
        r = np.asarray(self.rates, dtype=np.float64)
        if t.ndim != 1 or t.shape != r.shape or t.size == 0:
            raise ValueError("maturities and rates must be equal-length 1-D arrays")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("maturities must be positive and strictly increasing")
        object.__setattr__(self, "maturities", t)
        object.__setattr__(self, "rates", r)

    @classmethod
    def from_prices(cls, maturities, prices) -> "ZeroCouponCurve":
        t = np.asarray(maturities, dtype=np.float64)
        return cls(t, -np.log(np.asarray(prices, dtype=np.float64)) / t)

    @classmethod
    def from_csv(cls, path: str | Path) -> "ZeroCouponCurve":
        """Read ``maturity_years,zero_rate`` rows (decimal rates)."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty curve file")
        header = [h.strip() for h in rows[0]]
        if header != ["maturity_years", "zero_rate"]:
            raise ValueError(f"{path}:1: expected header 'maturity_years,zero_rate', got {rows[0]}")
        t, r = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                t.append(float(row[0]))
                r.append(float(row[1]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field in {row}") from None
        if not t:
            raise ValueError(f"{path}: curve has no data rows")
        return cls(np.array(t), np.array(r))

    @property
    def prices(self) -> np.ndarray:
        return np.exp(-self.maturities * self.rates)

    def __len__(self) -> int:
        return self.maturities.size


def vasicek_zc_price(p: VasicekParams, t):
    """Zero-coupon price P(0, t) under Vasicek with long-run level ``p.b``.

    -ln P / t = R_inf - [(R_inf - r0)(1 - e^{-at}) - sigma^2/(4a^2) (1 - e^{-at})^2] / (a t),
    R_inf = b - sigma^2 / (2 a^2).
    """
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0):
        raise ValueError("maturity must be > 0")
    a, s2 = p.a, p.sigma**2
    r_inf = p.b - s2 / (2.0 * a * a)
    g = -np.expm1(-a * t_arr)
    # t * R(t), kept in product form so short maturities do not divide by ~0
    tr = r_inf * t_arr - ((r_inf - p.r0) * g - s2 / (4.0 * a * a) * g * g) / a
    out = np.exp(-tr)
    return out if out.ndim else float(out)


def vasicek_zc_rate(p: VasicekParams, t):
    t_arr = np.asarray(t, dtype=np.float64)
    out = -np.log(vasicek_zc_price(p, t_arr)) / t_arr
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# ad hoc least squares


def _to_box(theta, names):
    out = {}
    for th, name in zip(theta, names):
        lo, hi = PARAM_BOUNDS[name]
        out[name] = lo + (hi - lo) * math.sin(th) ** 2
    return out


def _from_box(values: Mapping[str, float], names):
    theta = []
    for name in names:
        lo, hi = PARAM_BOUNDS[name]
        frac = min(1.0, max(0.0, (values[name] - lo) / (hi - lo)))
        theta.append(math.asin(math.sqrt(frac)))
    return np.array(theta)


def adhoc_objective(p: VasicekParams, curve: ZeroCouponCurve, objective: str) -> float:
    """Sum of squared price (or zero-rate) errors over the curve."""
    if objective == "prices":
        diff = vasicek_zc_price(p, curve.maturities) - curve.prices
    elif objective == "rates":
        diff = vasicek_zc_rate(p, curve.maturities) - curve.rates
    else:
        raise ValueError(f"objective must be 'prices' or 'rates', got {objective!r}")
    return float(diff @ diff)


def fit_adhoc(curve: ZeroCouponCurve, objective: str = "prices",
              free: Sequence[str] = ("a", "b", "sigma"), fixed: Mapping[str, float] | None = None,
              r0: float | None = None, *, max_iter: int = 20_000) -> VasicekEstimate:
    """Least-squares fit of Vasicek prices (or implied rates) to a curve.

    ``r0`` defaults to the shortest-maturity rate.  Free parameters are
    searched inside ``PARAM_BOUNDS`` by a sin^2 box transform; Nelder-Mead
    runs from each point of a fixed five-point start grid, then once more
    from the best point found.
    """
    fixed = dict(fixed or {})
    free = tuple(free)
    if set(free) & set(fixed):
        raise ValueError("a parameter cannot be both free and fixed")
    if set(free) | set(fixed) != set(_NAMES) or not set(free) <= set(_NAMES):
        raise ValueError("free and fixed must partition {a, b, sigma}")
    if not free:
        raise ValueError("nothing to estimate")
    if len(curve) < len(free):
        raise ValueError("curve has fewer points than free parameters")
    if objective not in ("prices", "rates"):
        raise ValueError(f"objective must be 'prices' or 'rates', got {objective!r}")
    r0 = float(curve.rates[0]) if r0 is None else float(r0)

    # objective scaled so the simplex tolerances act on comparable magnitudes
    scale = 1.0 / len(curve)

    def f(theta):
        vals = {**fixed, **_to_box(theta, free)}
        return scale * adhoc_objective(VasicekParams(vals["a"], vals["b"], r0, vals["sigma"]),
                                       curve, objective)

    opts = {"xatol": 1e-10, "fatol": 1e-10, "maxiter": max_iter, "maxfev": 2 * max_iter}
    best, iterations = None, 0
    for start in _START_GRID:
        theta0 = _from_box(dict(zip(_NAMES, start)), free)
        res = minimize(f, theta0, method="Nelder-Mead", options=opts)
        iterations += res.nit
        if best is None or res.fun < best.fun:
            best = res
    polish = minimize(f, best.x, method="Nelder-Mead", options=opts)
    iterations += polish.nit
    if polish.fun <= best.fun:
        best = polish

    vals = {**fixed, **_to_box(best.x, free)}
    est = VasicekEstimate(vals["a"], vals["b"], vals["sigma"], f"adhoc_{objective}", r0=r0,
                          fixed=fixed, objective_value=float(best.fun / scale),
                          iterations=iterations)
    if not polish.success:
        raise CalibrationError(f"ad hoc fit did not converge: {polish.message}", est)
    return est


# ---------------------------------------------------------------------------
# indirect inference


def auxiliary_estimate(series, delta: float, model: str = "vasicek", scheme: str = "euler") -> np.ndarray:
    """Auxiliary (a, b, sigma) of the Euler or Milstein discretisation.

    ``series`` may be 2-D (one series per row); the estimate is per row.
    Vasicek: OLS of r_{k+1} - r_k on r_k.  CIR: weighted least squares with
    weights 1/r_k for (a, b), then sigma by matching the mean squared
    residual to the scheme's conditional variance (Milstein adds
    sigma^4 delta^2 / 8).
    """
    r = np.atleast_2d(np.asarray(series, dtype=np.float64))
    x, y = r[:, :-1], r[:, 1:]
    if model == "vasicek":
        mx = x.mean(axis=1, keepdims=True)
        my = y.mean(axis=1, keepdims=True)
        beta = ((x - mx) * (y - my)).sum(axis=1) / ((x - mx) ** 2).sum(axis=1)
        alpha = my[:, 0] - beta * mx[:, 0]
        res = y - alpha[:, None] - beta[:, None] * x
        a = (1.0 - beta) / delta
        b = alpha / (1.0 - beta)
        sigma = np.sqrt((res * res).mean(axis=1) / delta)
    elif model == "cir":
        xs = np.maximum(x, 1e-12)
        w = 1.0 / np.sqrt(xs)
        z = (y - x) * w
        # z = c1 / sqrt(x) + c2 sqrt(x) + noise, c1 = a b delta, c2 = -a delta
        s11 = (w * w).sum(axis=1)
        s12 = np.full(s11.shape, float(x.shape[1]))
        s22 = xs.sum(axis=1)
        t1 = (w * z).sum(axis=1)
        t2 = (z / w).sum(axis=1)
        det = s11 * s22 - s12 * s12
        c1 = (s22 * t1 - s12 * t2) / det
        c2 = (s11 * t2 - s12 * t1) / det
        a = -c2 / delta
        b = -c1 / c2
        raw = y - x - (c1[:, None] + c2[:, None] * x)
        if scheme == "euler":
            sigma = np.sqrt(((raw * raw) / xs).mean(axis=1) / delta)
        elif scheme == "milstein":
            v = (raw * raw).mean(axis=1)
            m = x.mean(axis=1)
            s2 = (-delta * m + np.sqrt((delta * m) ** 2 + 0.5 * delta * delta * v)) / (0.25 * delta * delta)
            sigma = np.sqrt(np.maximum(s2, 0.0))
        else:
            raise ValueError(f"unknown auxiliary scheme {scheme!r}")
    else:
        raise ValueError(f"unknown model {model!r}")
    if scheme not in ("euler", "milstein"):
        raise ValueError(f"unknown auxiliary scheme {scheme!r}")
    return np.stack([a, b, sigma], axis=-1)


@numba.njit(cache=True)
def _cir_milstein_paths(r0, a, b, sigma, dt, substeps, eps):  # pragma: no cover - jitted
    n_series, n_fine = eps.shape
    n_obs = n_fine // substeps
    out = np.empty((n_series, n_obs + 1))
    sq = math.sqrt(dt)
    for i in range(n_series):
        x = r0
        out[i, 0] = x
        for k in range(n_obs):
            for j in range(substeps):
                e = eps[i, k * substeps + j]
                xp = x if x > 0.0 else 0.0
                x = x + a * (b - xp) * dt + sigma * math.sqrt(xp) * sq * e
                if xp > 0.0:
                    x += 0.25 * sigma * sigma * dt * (e * e - 1.0)
            out[i, k + 1] = x
    return out


def simulate_short_rate(model: str, a: float, b: float, sigma: float, r0: float,
                        delta: float, eps: np.ndarray, substeps: int = 1) -> np.ndarray:
    """Rate series sampled every ``delta`` from fixed normals ``eps``.

    Vasicek uses the exact AR(1) transition (``eps`` has one column per
    observation); CIR uses Milstein with full truncation on ``substeps``
    sub-intervals per observation.
    """
    eps = np.atleast_2d(eps)
    if model == "vasicek":
        beta = math.exp(-a * delta)
        sd = sigma * math.sqrt(-math.expm1(-2.0 * a * delta) / (2.0 * a))
        drive = b * (1.0 - beta) + sd * eps
        zi = np.full((eps.shape[0], 1), beta * r0)
        body = lfilter([1.0], [1.0, -beta], drive, axis=1, zi=zi)[0]
        return np.concatenate([np.full((eps.shape[0], 1), r0), body], axis=1)
    if model == "cir":
        return _cir_milstein_paths(float(r0), float(a), float(b), float(sigma),
                                   delta / substeps, int(substeps), np.ascontiguousarray(eps))
    raise ValueError(f"unknown model {model!r}")


def indirect_distance(theta, observed_aux: np.ndarray, model: str, aux_scheme: str, r0: float,
                      delta: float, eps: np.ndarray, substeps: int) -> float:
    """||aux(observed) - mean_h aux(simulated_h(theta))||^2 with identity weight."""
    a, b, sigma = theta
    sims = simulate_short_rate(model, a, b, sigma, r0, delta, eps, substeps)
    sim_aux = auxiliary_estimate(sims, delta, model, aux_scheme).mean(axis=0)
    if not np.all(np.isfinite(sim_aux)):
        return 1e6
    diff = sim_aux - observed_aux
    return float(diff @ diff)


def fit_indirect(observations, delta: float, model: str = "vasicek", aux_scheme: str = "euler",
                 H: int = 10, seed: int = 1, *, substeps: int = 10,
                 max_iter: int = 4000) -> VasicekEstimate:
    """Indirect-inference estimate of (a, b, sigma).

    The auxiliary estimate on ``observations`` is matched to the average
    auxiliary estimate over ``H`` series simulated at theta from the first
    observation.  The normals behind the simulated series are drawn once
    (common random numbers) from an LCG stream derived from ``seed``.
    """
    r = np.asarray(observations, dtype=np.float64)
    if r.ndim != 1 or r.size < 100:
        raise ValueError("fit_indirect needs a 1-D series of length >= 100")
    if H < 1:
        raise ValueError("H must be >= 1")
    if model not in ("vasicek", "cir"):
        raise ValueError(f"unknown model {model!r}")
    substeps = 1 if model == "vasicek" else int(substeps)
    n_obs = r.size - 1
    normals = NormalSource(LcgSource(1).derive(seed))
    eps = normals.normals(H * n_obs * substeps).reshape(H, n_obs * substeps)
    observed_aux = auxiliary_estimate(r, delta, model, aux_scheme)[0]

    bounds = dict(PARAM_BOUNDS)
    if model == "cir":
        bounds["b"] = (0.0, PARAM_BOUNDS["b"][1])

    def to_params(theta):
        return [lo + (hi - lo) * math.sin(th) ** 2
                for th, (lo, hi) in zip(theta, (bounds[n] for n in _NAMES))]

    def f(theta):
        return indirect_distance(to_params(theta), observed_aux, model, aux_scheme, r[0],
                                 delta, eps, substeps)

    start = {}
    for name, v in zip(_NAMES, observed_aux):
        lo, hi = bounds[name]
        start[name] = min(hi, max(lo, v if np.isfinite(v) else 0.5 * (lo + hi)))
    theta0 = np.array([math.asin(math.sqrt((start[n] - bounds[n][0]) / (bounds[n][1] - bounds[n][0])))
                       for n in _NAMES])
    opts = {"xatol": 1e-10, "fatol": 1e-20, "maxiter": max_iter, "maxfev": 2 * max_iter}
    res = minimize(f, theta0, method="Nelder-Mead", options=opts)
    res2 = minimize(f, res.x, method="Nelder-Mead", options=opts)
    if res2.fun <= res.fun:
        res = res2
    a, b, sigma = to_params(res.x)
    est = VasicekEstimate(a, b, sigma, "indirect", r0=float(r[0]), objective_value=float(res.fun),
                          iterations=int(res.nit), model=model)
    if not res.success:
        raise CalibrationError(f"indirect inference did not converge: {res.message}", est)
    return est


def naive_estimate(observations, delta: float, model: str = "vasicek",
                   aux_scheme: str = "euler") -> VasicekEstimate:
    """Auxiliary-model estimate read directly as the model parameters."""
    a, b, sigma = auxiliary_estimate(observations, delta, model, aux_scheme)[0]
    return VasicekEstimate(float(a), float(b), float(sigma), f"naive_{aux_scheme}",
                           r0=float(np.asarray(observations)[0]), model=model)


__all__.append("naive_estimate")
