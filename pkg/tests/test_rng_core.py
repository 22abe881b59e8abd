from __future__ import annotations

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajsim.rng_core import (
    TORUS_MAX_INDEX,
    LcgSource,
    LcgState,
    MixedTorusConfig,
    MixedTorusSource,
    TorusPrecisionError,
    TorusSource,
    TorusState,
    lcg_next,
    make_source,
    mixed_torus_index,
    mixed_torus_next,
    nth_prime,
    prime_index,
    torus_next,
    torus_value,
    torus_values,
)
from trajsim.rng_tests import ks_test, uniform_chi_square

mpmath.mp.dps = 60


def frac_oracle(n: int, p: int) -> float:
    x = n * mpmath.sqrt(p)
    return float(x - mpmath.floor(x))


# --- LCG -------------------------------------------------------------------


def test_lcg_first_step():
    s, u = lcg_next(LcgState(1))
    assert s.state == 48271
    assert u == 48271 / 2147483647
    assert u == pytest.approx(2.2477e-5, rel=1e-4)


def test_lcg_second_step_matches_integer_arithmetic():
    s, _ = lcg_next(LcgState(1))
    s, _ = lcg_next(s)
    assert s.state == (48271 * 48271) % (2**31 - 1) == 182605794


def test_lcg_full_period_at_reduced_modulus():
    # 3 is a primitive root mod 31, so the cycle through 1 has length 30
    s = LcgState(1, multiplier=3, increment=0, modulus=31)
    seen = []
    for _ in range(40):
        s, _ = lcg_next(s)
        seen.append(s.state)
        if s.state == 1:
            break
    assert len(seen) == 30
    assert sorted(seen) == list(range(1, 31))


def test_lcg_rejects_zero_seed_with_zero_increment():
    with pytest.raises(ValueError):
        LcgState(0)
    with pytest.raises(ValueError):
        LcgSource(0)
    LcgState(0, increment=1)


def test_lcg_source_matches_scalar_recurrence():
    s = LcgState(12345)
    expected = []
    for _ in range(1000):
        s, u = lcg_next(s)
        expected.append(u)
    np.testing.assert_array_equal(LcgSource(12345).uniforms(1000), expected)


def test_lcg_source_chunking_is_seamless():
    a = LcgSource(7)
    chunks = np.concatenate([a.uniforms(3), a.uniforms(500), a.uniforms(1)])
    np.testing.assert_array_equal(chunks, LcgSource(7).uniforms(504))


def test_spreadsheet_mode_constants():
    src = LcgSource.spreadsheet(seed=5)
    s = LcgState(5, 1140671485, 12820163, 2**24)
    for expected in src.uniforms(50):
        s, u = lcg_next(s)
        assert u == expected


def test_lcg_determinism():
    np.testing.assert_array_equal(LcgSource(99).uniforms(5000), LcgSource(99).uniforms(5000))


def test_lcg_zero_is_remapped():
    # multiplier 1, increment 1, modulus 4: states 1,2,3,0 -> zero hits after three steps
    s = LcgState(0, multiplier=1, increment=1, modulus=4)
    vals = []
    for _ in range(4):
        s, u = lcg_next(s)
        vals.append(u)
    assert vals[-1] == 0.25  # 1/m stands in for 0
    assert min(vals) > 0


def test_derived_streams_differ_and_repeat():
    base = LcgSource(1)
    a, b = base.derive(0).uniforms(10), base.derive(1).uniforms(10)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, LcgSource(1).derive(0).uniforms(10))


# --- torus -----------------------------------------------------------------


@pytest.mark.parametrize(
    "p,n,expected",
    [(2, 1, 0.41421356), (2, 2, 0.82842712), (5, 3, 0.70820393)],
)
def test_torus_examples(p, n, expected):
    assert torus_value(p, n) == pytest.approx(expected, abs=1e-8)


def test_torus_next_increments_counter():
    t = TorusState.from_prime(2)
    t, u1 = torus_next(t)
    t, u2 = torus_next(t)
    assert t.counter == 2
    assert u1 == pytest.approx(0.41421356237, abs=1e-11)
    assert u2 == pytest.approx(0.82842712474, abs=1e-11)


@pytest.mark.parametrize("p", [2, 3, 5, 7, 11, 19, 29])
def test_torus_accuracy_against_multiprecision(p):
    idx = [1, 2, 999, 123_456, 9_999_999, 54_321_987, TORUS_MAX_INDEX]
    got = torus_values(p, idx)
    for n, g in zip(idx, got):
        assert abs(g - frac_oracle(n, p)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=1, max_value=TORUS_MAX_INDEX), st.sampled_from([2, 3, 5, 7, 13, 23]))
def test_torus_accuracy_property(n, p):
    assert abs(torus_value(p, n) - frac_oracle(n, p)) <= 1e-12


def test_torus_index_addressable():
    t = TorusState.from_prime(3)
    for _ in range(2500):
        t, u = torus_next(t)
    assert abs(u - torus_value(3, 2500)) <= 1e-12
    np.testing.assert_array_equal(TorusSource(3).uniforms(2500), torus_values(3, np.arange(1, 2501)))


def test_torus_source_reproducible_and_resumable():
    a, b = TorusSource(7), TorusSource(7)
    np.testing.assert_array_equal(a.uniforms(1000), b.uniforms(1000))
    np.testing.assert_array_equal(a.uniforms(10), TorusSource(7, start=1000).uniforms(10))


def test_torus_precision_bound_raises():
    with pytest.raises(TorusPrecisionError):
        torus_value(2, TORUS_MAX_INDEX + 1)
    src = TorusSource(2, start=TORUS_MAX_INDEX - 5)
    src.uniforms(5)
    with pytest.raises(TorusPrecisionError):
        src.uniforms(1)


def test_torus_rejects_non_prime():
    with pytest.raises(ValueError):
        TorusSource(4)
    with pytest.raises(ValueError):
        TorusState(prime_index=1, prime=3)


def test_prime_indexing():
    assert [nth_prime(d) for d in range(1, 11)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert prime_index(29) == 10


# --- mixed torus -----------------------------------------------------------


def test_mixed_index_examples():
    assert mixed_torus_index(0.5, 10, 1000) == 5001
    assert mixed_torus_index(0.0, 10, 1000) == 1


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
       st.floats(min_value=1.0, max_value=50.0), st.integers(min_value=1, max_value=100_000))
def test_mixed_index_range(u, alpha, n):
    idx = mixed_torus_index(u, alpha, n)
    assert 1 <= idx <= max(1, int(np.ceil(alpha * n)))


def test_mixed_torus_next_uses_mixer_draw():
    cfg = MixedTorusConfig(TorusState.from_prime(5), LcgState(1), capacity=1000)
    cfg2, u = mixed_torus_next(cfg)
    _, u_mix = lcg_next(LcgState(1))
    assert cfg2.mixer.state == 48271
    assert u == torus_value(5, int(np.floor(10 * 1000 * u_mix)) + 1)


def test_mixed_source_matches_scalar_path():
    src = MixedTorusSource(3, capacity=200, mixer=LcgSource(11))
    cfg = MixedTorusConfig(TorusState.from_prime(3), LcgState(11), capacity=200)
    for expected in src.uniforms(200):
        cfg, u = mixed_torus_next(cfg)
        assert u == expected


def test_mixed_config_validation():
    with pytest.raises(ValueError):
        MixedTorusConfig(TorusState.from_prime(2), LcgState(1), capacity=10, alpha=0.5)
    with pytest.raises(TorusPrecisionError):
        MixedTorusConfig(TorusState.from_prime(2), LcgState(1), capacity=10**8)


def test_mixed_torus_passes_chi_square_and_ks():
    u = MixedTorusSource(2, capacity=10_000, mixer=LcgSource(1)).uniforms(10_000)
    assert uniform_chi_square(u, 20).p_value > 0.05
    # 5% asymptotic critical value of sqrt(n) D_n is 1.358
    rep = ks_test(u, lambda x: x)
    assert np.sqrt(u.size) * rep.statistic < 1.358


@pytest.mark.parametrize("kind", ["lcg", "spreadsheet", "torus", "mixed"])
def test_all_sources_emit_open_unit_interval(kind):
    u = make_source(kind, prime=3, seed=4, count=20_000).uniforms(20_000)
    assert np.all(u > 0) and np.all(u < 1)


def test_make_source_rejects_unknown():
    with pytest.raises(ValueError):
        make_source("sobol")
