"""European call under Black-Scholes: closed form and Monte-Carlo estimate."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .dist_transforms import NormalSource, norm_cdf
from .sde import GbmParams, PathEnsemble, gbm_exact_step

__all__ = [
    "CallSpec",
    "PricingErrorReport",
    "bs_call_price",
    "mc_call_price",
    "mc_call_from_terminal",
    "mean_path",
    "gbm_expected_path",
    "max_relative_gap",
]


@dataclass(frozen=True, slots=True)
class CallSpec:
    s: float
    k: float
    r: float
    sigma: float
    t_expiry: float
    t_now: float = 0.0

    def __post_init__(self) -> None:
        if not self.s > 0:
            raise ValueError(f"spot must be > 0, got {self.s}")
        if not self.k > 0:
            raise ValueError(f"strike must be > 0, got {self.k}")
        if self.sigma < 0:
            raise ValueError(f"volatility must be >= 0, got {self.sigma}")
        if self.tau < 0:
            raise ValueError("expiry precedes valuation date")

    @property
    def tau(self) -> float:
        return self.t_expiry - self.t_now


@dataclass(frozen=True)
class PricingErrorReport:
    n_sims: tuple[int, ...]
    estimates: tuple[float, ...]
    rho: tuple[float, ...]
    closed_form: float

    def rows(self):
        return zip(self.n_sims, self.estimates, self.rho)


def bs_call_price(spec: CallSpec) -> float:
    """C = S N(d1) - K e^{-r tau} N(d2)."""
    tau = spec.tau
    discounted_k = spec.k * math.exp(-spec.r * tau)
    vol = spec.sigma * math.sqrt(tau)
    if vol == 0.0:
        return max(spec.s - discounted_k, 0.0)
    d1 = (math.log(spec.s / spec.k) + (spec.r + 0.5 * spec.sigma**2) * tau) / vol
    d2 = d1 - vol
    return spec.s * norm_cdf(d1) - discounted_k * norm_cdf(d2)


def _checkpoints(n: int, checkpoints: Sequence[int] | None) -> np.ndarray:
    if checkpoints is None:
        step = max(1, n // 100)
        pts = list(range(step, n + 1, step))
        if pts[-1] != n:
            pts.append(n)
        return np.array(pts)
    pts = np.array(sorted(set(int(c) for c in checkpoints if 1 <= c <= n)))
    return pts if pts.size and pts[-1] == n else np.append(pts, n)


def mc_call_from_terminal(spec: CallSpec, s_T, checkpoints: Sequence[int] | None = None):
    """Discounted payoff average over supplied terminal prices."""
    s_T = np.asarray(s_T, dtype=np.float64)
    n = s_T.size
    if n < 1:
        raise ValueError("need at least one simulation")
    disc = math.exp(-spec.r * spec.tau)
    running = disc * np.cumsum(np.maximum(s_T - spec.k, 0.0))
    pts = _checkpoints(n, checkpoints)
    est = running[pts - 1] / pts
    closed = bs_call_price(spec)
    rho = (est - closed) / closed if closed > 0 else np.full(est.shape, np.nan)
    report = PricingErrorReport(tuple(int(p) for p in pts), tuple(float(e) for e in est),
                                tuple(float(x) for x in rho), closed)
    return float(est[-1]), report


def mc_call_price(spec: CallSpec, n: int, normals: NormalSource,
                  checkpoints: Sequence[int] | None = None):
    """Monte-Carlo call price from one exact GBM step of length tau per draw.

    Returns the estimate over all ``n`` draws and the running relative
    errors against the closed form at ``checkpoints``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    eps = normals.normals(n)
    if spec.tau > 0:
        s_T = gbm_exact_step(GbmParams(spec.s, spec.r, spec.sigma), spec.s, spec.tau, eps)
    else:
        s_T = np.full(n, spec.s)
    return mc_call_from_terminal(spec, s_T, checkpoints)


def mean_path(paths: PathEnsemble) -> PathEnsemble:
    """Per-date cross-sectional mean as a one-path ensemble."""
    if paths.n_paths < 1:
        raise ValueError("empty ensemble")
    return PathEnsemble(paths.delta, paths.values.mean(axis=0, keepdims=True))


def gbm_expected_path(p: GbmParams, times) -> np.ndarray:
    return p.s0 * np.exp(p.mu * np.asarray(times, dtype=np.float64))


def max_relative_gap(path, reference) -> float:
    path = np.asarray(path, dtype=np.float64).ravel()
    reference = np.asarray(reference, dtype=np.float64).ravel()
    return float(np.max(np.abs(path / reference - 1.0)))
