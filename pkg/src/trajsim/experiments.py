"""Reproduction recipes for the figure and table experiments.

Each recipe returns ``(header, rows)`` ready for CSV output; the lower-level
helpers return arrays so tests can assert on them directly.
"""

from __future__ import annotations

import numpy as np

from .dist_transforms import NormalSource
from .pricing import CallSpec, gbm_expected_path, mc_call_price, mean_path
from .rng_core import LcgSource, MixedTorusSource, TorusSource, UniformSource, make_source
from .rng_tests import (
    POKER_CATEGORIES,
    anderson_darling_test,
    correlogram,
    ks_test,
    poker_test,
    poker_theoretical,
    uniform_chi_square,
)
from .sde import (
    GbmParams,
    VasicekParams,
    capitalization_bond,
    gbm_model,
    simulate_ensemble,
    steps_for,
    vasicek_model,
)

__all__ = ["RECIPES", "run_recipe", "vasicek_scheme_means", "gbm_mean_path",
           "torus_correlogram", "poker_table", "pricing_errors", "uniformity_tests",
           "FIG1_PARAMS", "FIG7_SPEC", "TORUS_PRIMES"]

FIG1_PARAMS = VasicekParams(a=0.5, b=0.05, r0=0.04, sigma=0.10)
# spot, strike and rate are not given for the call benchmark: at the money, 4%
FIG7_SPEC = CallSpec(s=100.0, k=100.0, r=0.04, sigma=0.20, t_expiry=0.5)
TORUS_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def vasicek_scheme_means(n_paths: int = 10_000, delta: float = 1 / 12, T: float = 10.0,
                         seed: int = 1, p: VasicekParams = FIG1_PARAMS,
                         source: str = "mixed") -> dict[str, np.ndarray]:
    """Mean rate and mean capitalisation-bond paths per scheme, shared normals."""
    n_steps = steps_for(T, delta)
    src = make_source(source, seed=seed, count=n_paths * n_steps)
    eps = NormalSource(src).normals(n_paths * n_steps).reshape(n_paths, n_steps)
    model = vasicek_model(p)
    out = {"t": np.arange(n_steps + 1) * delta}
    for scheme in ("exact", "euler", "milstein"):
        ens = simulate_ensemble(model, scheme, delta, T, n_paths, eps)
        out[scheme] = mean_path(ens).values[0]
        out[f"bond_{scheme}"] = mean_path(capitalization_bond(ens)).values[0]
    return out


def gbm_mean_path(source: UniformSource, n_paths: int = 10_000, years: int = 20,
                  s0: float = 100.0, r: float = 0.04, sigma: float = 0.20):
    """Annual-step GBM paths built trajectory-major from ``source``.

    Returns ``(times, simulated mean path, expected path s0 e^{rt})``.
    """
    p = GbmParams(s0, r, sigma)
    ens = simulate_ensemble(gbm_model(p), "exact", 1.0, float(years), n_paths, NormalSource(source))
    times = ens.times
    return times, mean_path(ens).values[0], gbm_expected_path(p, times)


def torus_correlogram(prime: int = 5, n: int = 10_000, max_lag: int = 50, mixer: str | None = None,
                      mixer_prime: int = 19, seed: int = 1) -> np.ndarray:
    """rho_1..rho_max_lag of a raw torus, or a torus mixed by ``lcg``/``torus``."""
    if mixer is None:
        src: UniformSource = TorusSource(prime)
    elif mixer == "lcg":
        src = MixedTorusSource(prime, capacity=n, mixer=LcgSource(seed))
    elif mixer == "torus":
        src = MixedTorusSource(prime, capacity=n, mixer=TorusSource(mixer_prime))
    else:
        raise ValueError(f"unknown mixer {mixer!r}")
    return correlogram(src.uniforms(n), max_lag).rho


def poker_table(source_factory, n: int) -> tuple[dict[str, float], float]:
    freq, report = poker_test(source_factory().uniforms(n))
    return freq.frequencies, report.p_value


def pricing_errors(source: UniformSource, spec: CallSpec = FIG7_SPEC, n: int = 10_000,
                   step: int = 100):
    _, report = mc_call_price(spec, n, NormalSource(source), checkpoints=range(step, n + 1, step))
    return report


def uniformity_tests(u, bins: int = 20) -> dict[str, float]:
    """chi2 / KS / AD p-values of a uniform sample."""
    cdf = lambda x: np.clip(x, 0.0, 1.0)  # noqa: E731
    return {
        "chi2": uniform_chi_square(u, bins).p_value,
        "ks": ks_test(u, cdf).p_value,
        "ad": anderson_darling_test(u, cdf).p_value,
    }


# ---------------------------------------------------------------------------
# CSV recipes


def _figure1(n=10_000, seed=1, delta=1 / 12, **_):
    m = vasicek_scheme_means(n, delta, seed=seed)
    rows = zip(m["t"], m["exact"], m["euler"], m["milstein"])
    return ["t", "exact", "euler", "milstein"], rows


def _figure2(n=10_000, seed=1, delta=1 / 12, **_):
    m = vasicek_scheme_means(n, delta, seed=seed)
    rows = zip(m["t"], m["bond_exact"], m["bond_euler"], m["bond_milstein"])
    return ["t", "exact", "euler", "milstein"], rows


def _histogram(source, n=10_000, seed=1, prime=2, **_):
    u = make_source(source, prime=prime, seed=seed, count=n).uniforms(n)
    counts, edges = np.histogram(u, bins=20, range=(0.0, 1.0))
    tests = uniformity_tests(u)
    rows = [(edges[i], edges[i + 1], counts[i], tests["chi2"], tests["ks"], tests["ad"])
            for i in range(20)]
    return ["bin_low", "bin_high", "count", "chi2_p", "ks_p", "ad_p"], rows


def _figure7(n=10_000, seed=1, prime=2, **_):
    cols = {}
    for name, src in (("lcg", LcgSource(seed)), ("spreadsheet", LcgSource.spreadsheet()),
                      ("torus", TorusSource(prime))):
        rep = pricing_errors(src, n=n)
        cols[name] = rep.rho
    rows = zip(rep.n_sims, cols["lcg"], cols["spreadsheet"], cols["torus"])
    return ["n", "rho_lcg", "rho_spreadsheet", "rho_torus"], rows


def _gbm_figure(mixed: bool, n=10_000, seed=1, prime=2, **_):
    years = 20
    if mixed:
        src: UniformSource = MixedTorusSource(prime, capacity=n * years, mixer=LcgSource(seed))
    else:
        src = TorusSource(prime)
    t, sim, expected = gbm_mean_path(src, n, years)
    return ["t", "expected", "simulated_mean"], zip(t, expected, sim)


def _correlogram_figure(mixer, n=10_000, seed=1, prime=5, **_):
    rho = torus_correlogram(prime, n, mixer=mixer, seed=seed)
    return ["h", "rho"], zip(range(1, rho.size + 1), rho)


def _table2(n=4_000, **_):
    theory = poker_theoretical()
    cols = {p: poker_table(lambda p=p: TorusSource(p), n) for p in TORUS_PRIMES}
    header = ["category", "theoretical"] + [f"p{p}" for p in TORUS_PRIMES]
    rows = [[cat, float(theory[cat])] + [cols[p][0][cat] for p in TORUS_PRIMES]
            for cat in POKER_CATEGORIES]
    rows.append(["chi2_p_value", 1.0] + [cols[p][1] for p in TORUS_PRIMES])
    return header, rows


def _table3(n=40_000, seed=1, prime=2, **_):
    theory = poker_theoretical()
    freq, p = poker_table(lambda: MixedTorusSource(prime, capacity=n, mixer=LcgSource(seed)), n)
    rows = [[cat, float(theory[cat]), freq[cat]] for cat in POKER_CATEGORIES]
    rows.append(["chi2_p_value", 1.0, p])
    return ["category", "theoretical", "mixed_torus"], rows


RECIPES = {
    "figure1": _figure1,
    "figure2": _figure2,
    "figure5": lambda **kw: _histogram("spreadsheet", **kw),
    "figure6": lambda **kw: _histogram("torus", **kw),
    "figure7": _figure7,
    "figure8": lambda **kw: _gbm_figure(False, **kw),
    "figure9": lambda **kw: _correlogram_figure(None, **kw),
    "figure10": lambda **kw: _correlogram_figure("torus", **kw),
    "figure11": lambda **kw: _correlogram_figure("lcg", **kw),
    "figure12": lambda **kw: _gbm_figure(True, **kw),
    "table2": _table2,
    "table3": _table3,
}


def run_recipe(name: str, **kwargs):
    """Run a named recipe; ``n`` is the path or draw count, ``None`` keeps defaults."""
    try:
        recipe = RECIPES[name]
    except KeyError:
        raise ValueError(f"unknown recipe {name!r}; choose from {sorted(RECIPES)}") from None
    header, rows = recipe(**{k: v for k, v in kwargs.items() if v is not None})
    return header, [list(r) for r in rows]
