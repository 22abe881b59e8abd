"""Uniform [0, 1) sources: linear congruential, irrational torus, mixed torus.

Every source exposes ``uniforms(n)`` (vectorised, advances the stream) and
``random()`` (one draw).  The pure functions ``lcg_next``, ``torus_next`` and
``mixed_torus_next`` operate on frozen state records and are the reference
single-step definitions; the stateful sources produce bit-identical streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from decimal import Decimal, localcontext
from functools import lru_cache

import numpy as np

__all__ = [
    "LcgState",
    "TorusState",
    "MixedTorusConfig",
    "UniformSource",
    "LcgSource",
    "TorusSource",
    "MixedTorusSource",
    "TorusPrecisionError",
    "MINSTD",
    "SPREADSHEET",
    "TORUS_MAX_INDEX",
    "lcg_next",
    "torus_next",
    "torus_value",
    "torus_values",
    "mixed_torus_index",
    "mixed_torus_next",
    "nth_prime",
    "prime_index",
    "make_source",
]

# (multiplier, increment, modulus)
MINSTD = (48271, 0, 2**31 - 1)
SPREADSHEET = (1140671485, 12820163, 2**24)

TORUS_MAX_INDEX = 10**8

_ONE_MINUS = float(np.nextafter(1.0, 0.0))
_TORUS_TINY = 2.0**-53
_SPLIT = 2.0**26


class TorusPrecisionError(OverflowError):
    """Raised when a torus index exceeds the documented precision bound."""


# ---------------------------------------------------------------------------
# primes


@lru_cache(maxsize=None)
def _primes_upto(limit: int) -> tuple[int, ...]:
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for k in range(2, int(limit**0.5) + 1):
        if sieve[k]:
            sieve[k * k :: k] = False
    return tuple(int(v) for v in np.flatnonzero(sieve))


def nth_prime(d: int) -> int:
    """Return the d-th prime (``nth_prime(1) == 2``)."""
    if d < 1:
        raise ValueError(f"prime index must be >= 1, got {d}")
    limit = 16
    while True:
        primes = _primes_upto(limit)
        if len(primes) >= d:
            return primes[d - 1]
        limit *= 2


def prime_index(p: int) -> int:
    """Inverse of :func:`nth_prime`; raises if ``p`` is not prime."""
    if p < 2:
        raise ValueError(f"{p} is not prime")
    primes = _primes_upto(max(p, 16))
    try:
        return primes.index(p) + 1
    except ValueError:
        raise ValueError(f"{p} is not prime") from None


# ---------------------------------------------------------------------------
# linear congruential generator


@dataclass(frozen=True, slots=True)
class LcgState:
    state: int
    multiplier: int = MINSTD[0]
    increment: int = MINSTD[1]
    modulus: int = MINSTD[2]

    def __post_init__(self) -> None:
        if self.modulus <= 1:
            raise ValueError("modulus must be > 1")
        if not 0 <= self.state < self.modulus:
            raise ValueError(f"state must lie in [0, {self.modulus}), got {self.state}")
        if self.state == 0 and self.increment == 0:
            raise ValueError("seed 0 with zero increment is a fixed point")

    @property
    def value(self) -> float:
        return _lcg_to_unit(self.state, self.modulus)


def _lcg_to_unit(state, modulus: int):
    u = np.asarray(state, dtype=np.float64) / float(modulus)
    u = np.where(u == 0.0, 1.0 / modulus, u)
    return u if u.ndim else float(u)


def lcg_next(s: LcgState) -> tuple[LcgState, float]:
    """Advance ``s`` by one step and return ``(new_state, state'/modulus)``."""
    nxt = (s.multiplier * s.state + s.increment) % s.modulus
    new = replace(s, state=nxt)
    return new, _lcg_to_unit(nxt, s.modulus)


# ---------------------------------------------------------------------------
# irrational torus


@lru_cache(maxsize=None)
def _frac_sqrt_parts(p: int) -> tuple[float, float]:
    """frac(sqrt(p)) as an unevaluated sum hi + lo of doubles."""
    with localcontext() as ctx:
        ctx.prec = 60
        root = Decimal(p).sqrt()
        frac = root - int(root)
        hi = float(frac)
        lo = float(frac - Decimal(hi))
    return hi, lo


@dataclass(frozen=True, slots=True)
class TorusState:
    prime_index: int
    prime: int
    counter: int = 0
    frac_sqrt_p: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if nth_prime(self.prime_index) != self.prime:
            raise ValueError(f"{self.prime} is not prime number #{self.prime_index}")
        if self.counter < 0:
            raise ValueError("counter must be non-negative")
        if self.frac_sqrt_p == (0.0, 0.0):
            object.__setattr__(self, "frac_sqrt_p", _frac_sqrt_parts(self.prime))

    @classmethod
    def from_prime(cls, p: int, counter: int = 0) -> "TorusState":
        return cls(prime_index(p), p, counter)


def torus_values(p: int, indices) -> np.ndarray:
    """frac(n * sqrt(p)) for an array of indices n in [1, TORUS_MAX_INDEX].

    The fractional part of sqrt(p) is held as hi + lo; hi is cut into a
    26-bit head (so n * head is exact for n < 2**27) and a tail.  Each
    partial product is reduced mod 1 separately before summing.
    """
    n = np.asarray(indices, dtype=np.int64)
    if n.size and (n.min() < 1 or n.max() > TORUS_MAX_INDEX):
        raise TorusPrecisionError(
            f"torus index must lie in [1, {TORUS_MAX_INDEX}], got [{n.min()}, {n.max()}]"
        )
    hi, lo = _frac_sqrt_parts(p)
    head = math.floor(hi * _SPLIT) / _SPLIT
    tail = hi - head
    nf = n.astype(np.float64)
    x = nf * head
    s = x - np.floor(x)
    y = nf * tail
    s += y - np.floor(y)
    s += nf * lo
    s -= np.floor(s)
    s = np.where(s >= 1.0, _ONE_MINUS, s)
    return np.where(s <= 0.0, _TORUS_TINY, s)


def torus_value(p: int, n: int) -> float:
    return float(torus_values(p, [n])[0])


def torus_next(t: TorusState) -> tuple[TorusState, float]:
    """Increment the counter and return frac(counter * sqrt(p))."""
    n = t.counter + 1
    value = torus_value(t.prime, n)
    return replace(t, counter=n), value


# ---------------------------------------------------------------------------
# mixed torus


@dataclass(frozen=True, slots=True)
class MixedTorusConfig:
    torus: TorusState
    mixer: LcgState | TorusState
    capacity: int
    alpha: float = 10.0

    def __post_init__(self) -> None:
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if self.capacity < 1:
            raise ValueError("capacity must be a positive integer")
        if self.alpha * self.capacity > TORUS_MAX_INDEX:
            raise TorusPrecisionError("alpha * capacity exceeds the torus precision bound")


def mixed_torus_index(u_mix, alpha: float, capacity: int):
    """phi = floor(alpha * N * u) + 1, in [1, alpha * N]."""
    idx = np.floor(alpha * capacity * np.asarray(u_mix, dtype=np.float64)) + 1
    idx = np.minimum(idx, max(1.0, math.ceil(alpha * capacity)))
    return idx.astype(np.int64) if idx.ndim else int(idx)


def _step(state):
    if isinstance(state, LcgState):
        return lcg_next(state)
    return torus_next(state)


def mixed_torus_next(m: MixedTorusConfig) -> tuple[MixedTorusConfig, float]:
    """Draw u~ from the mixer and return the torus value at index phi(u~)."""
    mixer, u = _step(m.mixer)
    idx = mixed_torus_index(u, m.alpha, m.capacity)
    return replace(m, mixer=mixer), torus_value(m.torus.prime, idx)


# ---------------------------------------------------------------------------
# stateful sources


class UniformSource:
    """Sequential stream of binary64 draws in (0, 1).

    Not safe for concurrent mutation; derive independent streams instead.
    """

    name = "uniform"

    def uniforms(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def random(self) -> float:
        return float(self.uniforms(1)[0])

    def __iter__(self):
        while True:
            yield self.random()


class LcgSource(UniformSource):
    """Affine congruential generator, vectorised by jump-ahead blocks."""

    name = "lcg"
    _BLOCK = 8192

    def __init__(self, seed: int = 1, multiplier: int = MINSTD[0],
                 increment: int = MINSTD[1], modulus: int = MINSTD[2]):
        self.state = LcgState(seed, multiplier, increment, modulus)
        self.seed = seed
        self._jump = None

    @classmethod
    def spreadsheet(cls, seed: int = 327680) -> "LcgSource":
        """Compatibility constants of a 24-bit spreadsheet-style generator."""
        return cls(seed, *SPREADSHEET)

    def derive(self, stream: int) -> "LcgSource":
        """Independent stream re-seeded from (seed, stream) via SeedSequence."""
        m = self.state.modulus
        word = np.random.SeedSequence([self.seed, stream]).generate_state(1, np.uint64)[0]
        seed = int(word % np.uint64(m - 1)) + 1
        return LcgSource(seed, self.state.multiplier, self.state.increment, m)

    def _jump_tables(self) -> tuple[np.ndarray, np.ndarray]:
        if self._jump is None:
            a, c, m = self.state.multiplier % self.state.modulus, self.state.increment, self.state.modulus
            mult = np.empty(self._BLOCK, dtype=np.uint64)
            add = np.empty(self._BLOCK, dtype=np.uint64)
            A, C = 1, 0
            for j in range(self._BLOCK):
                A, C = (a * A) % m, (a * C + c) % m
                mult[j], add[j] = A, C
            self._jump = (mult, add)
        return self._jump

    def uniforms(self, n: int) -> np.ndarray:
        s = self.state
        if n <= 0:
            return np.empty(0)
        if s.modulus > 2**32:
            out = np.empty(n)
            for i in range(n):
                s, out[i] = lcg_next(s)
            self.state = s
            return out
        mult, add = self._jump_tables()
        m = np.uint64(s.modulus)
        states = np.empty(n, dtype=np.uint64)
        x = s.state
        for start in range(0, n, self._BLOCK):
            k = min(self._BLOCK, n - start)
            block = (mult[:k] * np.uint64(x)) % m
            block = (block + add[:k]) % m
            states[start : start + k] = block
            x = int(block[-1])
        self.state = replace(s, state=x)
        return _lcg_to_unit(states, s.modulus)


class TorusSource(UniformSource):
    """u_n = frac(n * sqrt(p)), n = 1, 2, ..."""

    name = "torus"

    def __init__(self, prime: int = 2, start: int = 0):
        self.state = TorusState.from_prime(prime, counter=start)

    @property
    def prime(self) -> int:
        return self.state.prime

    def uniforms(self, n: int) -> np.ndarray:
        first = self.state.counter + 1
        if first + n - 1 > TORUS_MAX_INDEX:
            raise TorusPrecisionError(
                f"torus counter would reach {first + n - 1} > {TORUS_MAX_INDEX}"
            )
        out = torus_values(self.prime, np.arange(first, first + n))
        self.state = replace(self.state, counter=first + n - 1)
        return out


class MixedTorusSource(UniformSource):
    """Torus values read at random indices phi(n) = floor(alpha N u~) + 1.

    ``capacity`` is the number of draws the consumer intends to make; the
    mixer defaults to the minimal-standard LCG.  Indices are drawn with
    replacement.
    """

    name = "mixed"

    def __init__(self, prime: int = 2, capacity: int = 10_000, alpha: float = 10.0,
                 mixer: UniformSource | None = None):
        self.config = MixedTorusConfig(
            TorusState.from_prime(prime),
            LcgState(1) if mixer is None else _placeholder_state(mixer),
            capacity,
            alpha,
        )
        self.mixer = LcgSource(1) if mixer is None else mixer
        self.drawn = 0

    @property
    def prime(self) -> int:
        return self.config.torus.prime

    def uniforms(self, n: int) -> np.ndarray:
        u = self.mixer.uniforms(n)
        idx = mixed_torus_index(u, self.config.alpha, self.config.capacity)
        self.drawn += n
        return torus_values(self.prime, idx)


def _placeholder_state(mixer: UniformSource):
    state = getattr(mixer, "state", None)
    if isinstance(state, (LcgState, TorusState)):
        return state
    return LcgState(1)


def make_source(kind: str, *, prime: int = 2, seed: int = 1, count: int = 10_000,
                alpha: float = 10.0, mixer_prime: int | None = None) -> UniformSource:
    """Build a source by name: ``lcg``, ``spreadsheet``, ``torus`` or ``mixed``."""
    if kind == "lcg":
        return LcgSource(seed)
    if kind == "spreadsheet":
        return LcgSource.spreadsheet(seed)
    if kind == "torus":
        return TorusSource(prime)
    if kind == "mixed":
        mixer = TorusSource(mixer_prime) if mixer_prime else LcgSource(seed)
        return MixedTorusSource(prime, capacity=count, alpha=alpha, mixer=mixer)
    raise ValueError(f"unknown source {kind!r}")
