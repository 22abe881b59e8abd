"""Scalar diffusions dX = mu(X, t) dt + sigma(X, t) dB and their discretisations.

Models: Vasicek (Ornstein-Uhlenbeck), CIR (square root), geometric Brownian
motion.  Schemes: exact transition (Vasicek, GBM), Euler and Milstein.
Time is carried as an integer step index times ``delta``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .dist_transforms import NormalSource

__all__ = [
    "SdeModel",
    "VasicekParams",
    "CirParams",
    "GbmParams",
    "PathEnsemble",
    "ConvergenceReport",
    "vasicek_model",
    "cir_model",
    "gbm_model",
    "euler_step",
    "milstein_step",
    "vasicek_exact_step",
    "gbm_exact_step",
    "vasicek_mean",
    "vasicek_variance",
    "steps_for",
    "simulate_ensemble",
    "capitalization_bond",
    "measure_strong_order",
    "SCHEMES",
]

SCHEMES = ("exact", "euler", "milstein")


@dataclass(frozen=True, slots=True)
class VasicekParams:
    a: float
    b: float
    r0: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError(f"Vasicek mean-reversion speed a must be > 0, got {self.a}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True, slots=True)
class CirParams:
    a: float
    b: float
    r0: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError(f"CIR mean-reversion speed a must be > 0, got {self.a}")
        if self.b < 0 or self.r0 < 0 or self.sigma < 0:
            raise ValueError("CIR requires b, r0, sigma >= 0")

    @property
    def feller(self) -> bool:
        """2ab >= sigma^2: the origin is not attainable."""
        return 2 * self.a * self.b >= self.sigma**2


@dataclass(frozen=True, slots=True)
class GbmParams:
    s0: float
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.s0 > 0:
            raise ValueError(f"GBM initial price must be > 0, got {self.s0}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SdeModel:
    """Drift, diffusion and d(diffusion)/dx, all vectorised in ``x``.

    ``exact_step(x, delta, eps)`` is the closed-form transition when one
    exists.
    """

    name: str
    drift: Callable
    diffusion: Callable
    diffusion_x: Callable
    x0: float
    params: Mapping[str, float] = field(default_factory=dict)
    exact_step: Callable | None = None


def vasicek_exact_step(p: VasicekParams, r, delta: float, eps):
    """r' = r e^{-a d} + b (1 - e^{-a d}) + sigma sqrt((1 - e^{-2 a d}) / (2a)) eps."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    decay = math.exp(-p.a * delta)
    sd = p.sigma * math.sqrt(-math.expm1(-2.0 * p.a * delta) / (2.0 * p.a))
    return r * decay + p.b * (1.0 - decay) + sd * eps


def vasicek_mean(p: VasicekParams, r, t: float):
    """E[r_t | r_0 = r]."""
    decay = np.exp(-p.a * t)
    return r * decay + p.b * (1.0 - decay)


def vasicek_variance(p: VasicekParams, t: float):
    """Var[r_t | r_0]."""
    return p.sigma**2 * -np.expm1(-2.0 * p.a * t) / (2.0 * p.a)


def gbm_exact_step(p: GbmParams, s, delta: float, eps):
    """s exp((mu - sigma^2/2) d + sigma sqrt(d) eps)."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    return s * np.exp((p.mu - 0.5 * p.sigma**2) * delta + p.sigma * math.sqrt(delta) * eps)


def vasicek_model(p: VasicekParams) -> SdeModel:
    return SdeModel(
        "vasicek",
        drift=lambda x, t: p.a * (p.b - x),
        diffusion=lambda x, t: np.full_like(np.asarray(x, dtype=float), p.sigma),
        diffusion_x=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
        x0=p.r0,
        params={"a": p.a, "b": p.b, "r0": p.r0, "sigma": p.sigma},
        exact_step=lambda x, d, e: vasicek_exact_step(p, x, d, e),
    )


def cir_model(p: CirParams) -> SdeModel:
    """CIR with full truncation: coefficients are evaluated at max(x, 0)."""

    def diffusion_x(x, t):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        return np.where(pos, p.sigma / (2.0 * np.sqrt(np.where(pos, x, 1.0))), 0.0)

    return SdeModel(
        "cir",
        drift=lambda x, t: p.a * (p.b - np.maximum(x, 0.0)),
        diffusion=lambda x, t: p.sigma * np.sqrt(np.maximum(x, 0.0)),
        diffusion_x=diffusion_x,
        x0=p.r0,
        params={"a": p.a, "b": p.b, "r0": p.r0, "sigma": p.sigma, "feller": float(p.feller)},
    )


def gbm_model(p: GbmParams) -> SdeModel:
    return SdeModel(
        "gbm",
        drift=lambda x, t: p.mu * x,
        diffusion=lambda x, t: p.sigma * x,
        diffusion_x=lambda x, t: np.full_like(np.asarray(x, dtype=float), p.sigma),
        x0=p.s0,
        params={"s0": p.s0, "mu": p.mu, "sigma": p.sigma},
        exact_step=lambda x, d, e: gbm_exact_step(p, x, d, e),
    )


def euler_step(model: SdeModel, x, t: float, delta: float, eps):
    """X + mu(X, t) d + sigma(X, t) sqrt(d) eps."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    return x + model.drift(x, t) * delta + model.diffusion(x, t) * math.sqrt(delta) * eps


def milstein_step(model: SdeModel, x, t: float, delta: float, eps):
    """Euler step plus sigma_x sigma d (eps^2 - 1) / 2."""
    base = euler_step(model, x, t, delta, eps)
    return base + 0.5 * model.diffusion_x(x, t) * model.diffusion(x, t) * delta * (eps * eps - 1.0)


def steps_for(T: float, delta: float) -> int:
    """Number of steps of size ``delta`` in ``T``; raises unless T/delta is integral."""
    if not (delta > 0 and T > 0):
        raise ValueError("T and delta must be positive")
    n = round(T / delta)
    if n < 1 or abs(n * delta - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of delta={delta}")
    return n


@dataclass(frozen=True)
class PathEnsemble:
    """``values[i, k]`` is path i at time k * delta."""

    delta: float
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError("values must be (n_paths, n_steps + 1)")

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1] - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.delta

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.delta


def _stepper(model: SdeModel, scheme: str):
    if scheme == "exact":
        if model.exact_step is None:
            raise ValueError(f"model {model.name!r} has no exact discretisation")
        return lambda x, t, d, e: model.exact_step(x, d, e)
    if scheme == "euler":
        return lambda x, t, d, e: euler_step(model, x, t, d, e)
    if scheme == "milstein":
        return lambda x, t, d, e: milstein_step(model, x, t, d, e)
    raise ValueError(f"unknown scheme {scheme!r}")


def _draw(normals, n_paths: int, n_steps: int) -> np.ndarray:
    if isinstance(normals, NormalSource):
        # trajectory-major: all steps of path 0, then path 1, ...
        return normals.normals(n_paths * n_steps).reshape(n_paths, n_steps)
    eps = np.asarray(normals, dtype=np.float64)
    if eps.shape != (n_paths, n_steps):
        raise ValueError(f"normal array must have shape {(n_paths, n_steps)}, got {eps.shape}")
    return eps


def _integrate(model: SdeModel, scheme: str, x0, delta: float, eps: np.ndarray) -> np.ndarray:
    step = _stepper(model, scheme)
    n_paths, n_steps = eps.shape
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = x0
    for k in range(n_steps):
        out[:, k + 1] = step(out[:, k], k * delta, delta, eps[:, k])
    return out


def simulate_ensemble(model: SdeModel, scheme: str, delta: float, T: float, n_paths: int,
                      normals) -> PathEnsemble:
    """Simulate ``n_paths`` trajectories on the grid t_k = k delta, k <= T/delta.

    ``normals`` is a :class:`NormalSource` (consumed trajectory-major) or a
    pre-drawn ``(n_paths, T/delta)`` array.
    """
    n_steps = steps_for(T, delta)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    _stepper(model, scheme)
    eps = _draw(normals, n_paths, n_steps)
    return PathEnsemble(delta, _integrate(model, scheme, model.x0, delta, eps))


def capitalization_bond(paths: PathEnsemble, bc0: float = 1.0) -> PathEnsemble:
    """BC_{k+1} = BC_k exp(delta r_k) along each rate path."""
    r = paths.values
    growth = np.cumsum(paths.delta * r[:, :-1], axis=1)
    bc = np.empty_like(r)
    bc[:, 0] = bc0
    bc[:, 1:] = bc0 * np.exp(growth)
    return PathEnsemble(paths.delta, bc)


@dataclass(frozen=True)
class ConvergenceReport:
    scheme: str
    deltas: tuple[float, ...]
    mean_abs_terminal_errors: tuple[float, ...]
    standard_errors: tuple[float, ...]
    order: float
    constant: float
    degenerate: bool = False

    def inversions(self) -> int:
        """Times the mean error increases as delta shrinks."""
        e = self.mean_abs_terminal_errors
        return sum(1 for i in range(len(e) - 1) if e[i + 1] > e[i])

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "deltas": list(self.deltas),
            "mean_abs_terminal_errors": list(self.mean_abs_terminal_errors),
            "standard_errors": list(self.standard_errors),
            "fitted_order": self.order,
            "constant": self.constant,
            "degenerate": self.degenerate,
        }


def measure_strong_order(model: SdeModel, scheme: str, deltas: Sequence[float], n_paths: int,
                         T: float, normals, *, degenerate_tol: float = 1e-13) -> ConvergenceReport:
    """Estimate gamma in E|X^delta_T - X_T| <= K delta^gamma.

    Brownian increments are drawn once on the finest grid; coarse schemes
    use their block sums, and the reference X_T is the exact transition
    applied on the finest grid with the same increments.
    """
    if len(deltas) < 3:
        raise ValueError("need at least three step sizes to fit an order")
    if model.exact_step is None:
        raise ValueError("strong-order measurement needs a model with an exact step")
    ds = sorted((float(d) for d in deltas), reverse=True)
    if len(set(ds)) != len(ds):
        raise ValueError("step sizes must be distinct")
    fine = ds[-1]
    n_fine = steps_for(T, fine)
    ratios = []
    for d in ds:
        m = round(d / fine)
        if abs(m * fine - d) > 1e-12 * d:
            raise ValueError(f"delta={d} is not a multiple of the finest step {fine}")
        steps_for(T, d)
        ratios.append(m)

    eps = _draw(normals, n_paths, n_fine)
    x_ref = _integrate(model, "exact", model.x0, fine, eps)[:, -1]

    errors, ses = [], []
    for d, m in zip(ds, ratios):
        coarse = eps.reshape(n_paths, n_fine // m, m).sum(axis=2) / math.sqrt(m)
        x_T = _integrate(model, scheme, model.x0, d, coarse)[:, -1]
        dev = np.abs(x_T - x_ref)
        errors.append(float(dev.mean()))
        ses.append(float(dev.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0)

    err = np.array(errors)
    if np.all(err <= degenerate_tol * max(1.0, abs(model.x0))):
        return ConvergenceReport(scheme, tuple(ds), tuple(errors), tuple(ses),
                                 float("nan"), float("nan"), degenerate=True)
    slope, intercept = np.polyfit(np.log(ds), np.log(err), 1)
    return ConvergenceReport(scheme, tuple(ds), tuple(errors), tuple(ses),
                             float(slope), float(math.exp(intercept)))
