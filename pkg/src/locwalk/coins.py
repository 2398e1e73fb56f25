"""Single-site coin distributions and seeded disorder realizations.

A coin is a 2x2 unitary ``((a, b), (c, d))`` acting on the spin space at one
lattice site. A :class:`CoinDistribution` is the single-site law; a
:class:`DisorderRealization` fixes one environment by mapping every integer
site to a coin drawn from a counter-keyed random stream, so that any window of
the lattice can be materialized lazily and in any order.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np
import scipy.integrate

from .errors import ConfigError, NotUnitary

__all__ = [
    "FLIP_ATOL",
    "UnitaryCoin",
    "CoinDistribution",
    "Fixed",
    "Haar",
    "Discrete",
    "Mixture",
    "DisorderRealization",
    "sample_haar",
    "sample_haar_many",
    "hadamard",
    "identity_coin",
    "flip",
    "two_coin_x",
    "two_coin_set",
    "realization_seed",
    "distribution_from_json",
]

FLIP_ATOL = 1e-14
UNITARY_ATOL = 1e-12
_MASK64 = (1 << 64) - 1
# sites are materialized in blocks sharing one keyed stream
_BLOCK = 64


@dataclass(frozen=True)
class UnitaryCoin:
    """A 2x2 coin ``((a, b), (c, d))``.

    Construct through :meth:`from_matrix` to get the unitarity check; the
    plain constructor accepts any entries so that intermediate objects (for
    instance the preimage of a matrix outside the transfer-matrix image) can
    still be represented and inspected.
    """

    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def from_matrix(cls, m, *, atol: float = UNITARY_ATOL) -> UnitaryCoin:
        arr = np.asarray(m, dtype=np.complex128)
        if arr.shape != (2, 2):
            raise ValueError(f"a coin is a 2x2 matrix, got shape {arr.shape}")
        coin = cls(complex(arr[0, 0]), complex(arr[0, 1]), complex(arr[1, 0]), complex(arr[1, 1]))
        res = coin.unitarity_residual()
        if not res <= atol:
            raise NotUnitary(f"coin is not unitary: |U^H U - I| = {res:.3e}")
        return coin

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=np.complex128)

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @property
    def is_flip(self) -> bool:
        """True when a diagonal entry vanishes, so the coin reflects the walker."""
        return abs(self.a) <= FLIP_ATOL or abs(self.d) <= FLIP_ATOL

    def unitarity_residual(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m.conj().T @ m - np.eye(2)))

    def to_json(self) -> list[list[float]]:
        return [[v.real, v.imag] for v in (self.a, self.b, self.c, self.d)]

    @classmethod
    def from_json(cls, obj: Any) -> UnitaryCoin:
        if isinstance(obj, str):
            named = _NAMED_COINS.get(obj.lower())
            if named is None:
                raise ConfigError(f"unknown coin name {obj!r}; known: {sorted(_NAMED_COINS)}")
            return named()
        try:
            vals = [complex(float(re), float(im)) for re, im in obj]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"coin must be four [re, im] pairs, got {obj!r}") from exc
        if len(vals) != 4:
            raise ConfigError(f"coin must have four entries, got {len(vals)}")
        try:
            return cls.from_matrix(np.reshape(vals, (2, 2)))
        except NotUnitary as exc:
            raise ConfigError(str(exc)) from exc


def hadamard() -> UnitaryCoin:
    s = 1.0 / np.sqrt(2.0)
    return UnitaryCoin(s, s, s, -s)


def identity_coin() -> UnitaryCoin:
    return UnitaryCoin(1.0, 0.0, 0.0, 1.0)


def flip(phase: float = 0.0) -> UnitaryCoin:
    """Off-diagonal coin: a perfect reflector, optionally carrying a phase."""
    p = complex(np.exp(1j * phase))
    return UnitaryCoin(0.0, p, p, 0.0)


def two_coin_x(a: complex, b: complex) -> UnitaryCoin:
    """The coin ``((a, b), (-conj b, conj a))`` paired with the Hadamard coin."""
    a, b = complex(a), complex(b)
    return UnitaryCoin.from_matrix([[a, b], [-b.conjugate(), a.conjugate()]], atol=1e-10)


_NAMED_COINS = {"hadamard": hadamard, "identity": identity_coin, "flip": flip}


# ---------------------------------------------------------------------------
# Haar sampling


def sample_haar_many(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` Haar-distributed 2x2 unitaries, shape ``(n, 2, 2)``.

    Gram-Schmidt on a complex Ginibre matrix with the triangular factor's
    diagonal kept positive; this is QR with the phase ambiguity removed.
    """
    g = (rng.standard_normal((n, 2, 2)) + 1j * rng.standard_normal((n, 2, 2))) / np.sqrt(2.0)
    c1 = g[:, :, 0]
    c2 = g[:, :, 1]
    q1 = c1 / np.linalg.norm(c1, axis=1, keepdims=True)
    r12 = np.sum(q1.conj() * c2, axis=1, keepdims=True)
    w = c2 - r12 * q1
    q2 = w / np.linalg.norm(w, axis=1, keepdims=True)
    return np.stack([q1, q2], axis=2)


def sample_haar(rng: np.random.Generator) -> UnitaryCoin:
    m = sample_haar_many(rng, 1)[0]
    return UnitaryCoin(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))


# ---------------------------------------------------------------------------
# distributions


class CoinDistribution:
    """Base class for single-site coin laws."""

    kind: str = ""

    def sample_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` coins as an array of shape ``(n, 2, 2)``."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> UnitaryCoin:
        m = self.sample_many(rng, 1)[0]
        return UnitaryCoin(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    def reflectivity(self) -> float:
        """Probability of drawing a coin with a vanishing diagonal entry."""
        raise NotImplementedError

    def expected_log_abs_a(self) -> float:
        """E[log|a|]; ``-inf`` when flips carry positive weight."""
        raise NotImplementedError

    def atoms(self) -> list[tuple[UnitaryCoin, float]]:
        """Point masses of the law, weights relative to the total mass 1."""
        raise NotImplementedError

    @property
    def continuous_weight(self) -> float:
        """Mass carried by the Haar (absolutely continuous) part."""
        return 0.0

    @property
    def is_deterministic(self) -> bool:
        ats = self.atoms()
        return self.continuous_weight == 0.0 and len(ats) == 1

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Fixed(CoinDistribution):
    coin: UnitaryCoin
    kind = "fixed"

    def sample_many(self, rng, n):
        return np.broadcast_to(self.coin.matrix, (n, 2, 2)).copy()

    def reflectivity(self):
        return 1.0 if self.coin.is_flip else 0.0

    def expected_log_abs_a(self):
        return float(np.log(abs(self.coin.a))) if abs(self.coin.a) > 0 else -np.inf

    def atoms(self):
        return [(self.coin, 1.0)]

    def to_json(self):
        return {"kind": "fixed", "coin": self.coin.to_json()}


@dataclass(frozen=True)
class Haar(CoinDistribution):
    kind = "haar"

    def sample_many(self, rng, n):
        return sample_haar_many(rng, n)

    def reflectivity(self):
        return 0.0

    def expected_log_abs_a(self):
        # |a|^2 is uniform on [0, 1] under Haar measure
        val, _ = scipy.integrate.quad(lambda u: 0.5 * np.log(u), 0.0, 1.0)
        return float(val)

    def atoms(self):
        return []

    @property
    def continuous_weight(self):
        return 1.0

    def to_json(self):
        return {"kind": "haar"}


def _check_weights(weights: Sequence[float], what: str) -> None:
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise ValueError(f"{what} needs at least one component")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError(f"{what} weights must be positive, got {list(w)}")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"{what} weights must sum to 1, got {w.sum()!r}")


@dataclass(frozen=True)
class Discrete(CoinDistribution):
    """Finitely many coins with positive weights summing to one."""

    support: tuple[tuple[UnitaryCoin, float], ...]
    kind = "discrete"

    def __post_init__(self):
        object.__setattr__(self, "support", tuple((c, float(w)) for c, w in self.support))
        _check_weights([w for _, w in self.support], "discrete distribution")
        for coin, _ in self.support:
            res = coin.unitarity_residual()
            if res > UNITARY_ATOL:
                raise NotUnitary(f"discrete atom is not unitary: residual {res:.3e}")

    @cached_property
    def _stack(self) -> np.ndarray:
        return np.stack([c.matrix for c, _ in self.support])

    @cached_property
    def _weights(self) -> np.ndarray:
        return np.array([w for _, w in self.support])

    def sample_many(self, rng, n):
        idx = rng.choice(len(self.support), size=n, p=self._weights)
        return self._stack[idx]

    def reflectivity(self):
        return float(sum(w for c, w in self.support if c.is_flip))

    def expected_log_abs_a(self):
        if any(abs(c.a) == 0 for c, _ in self.support):
            return -np.inf
        return float(sum(w * np.log(abs(c.a)) for c, w in self.support))

    def atoms(self):
        return list(self.support)

    def to_json(self):
        return {"kind": "discrete", "atoms": [{"coin": c.to_json(), "weight": w} for c, w in self.support]}


@dataclass(frozen=True)
class Mixture(CoinDistribution):
    """Convex combination of other distributions."""

    parts: tuple[tuple[CoinDistribution, float], ...]
    kind = "mixture"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple((d, float(w)) for d, w in self.parts))
        _check_weights([w for _, w in self.parts], "mixture")

    @cached_property
    def _weights(self) -> np.ndarray:
        return np.array([w for _, w in self.parts])

    def sample_many(self, rng, n):
        idx = rng.choice(len(self.parts), size=n, p=self._weights)
        out = np.empty((n, 2, 2), dtype=np.complex128)
        for k, (dist, _) in enumerate(self.parts):
            sel = np.flatnonzero(idx == k)
            if sel.size:
                out[sel] = dist.sample_many(rng, sel.size)
        return out

    def reflectivity(self):
        return float(sum(w * d.reflectivity() for d, w in self.parts))

    def expected_log_abs_a(self):
        return float(sum(w * d.expected_log_abs_a() for d, w in self.parts))

    def atoms(self):
        return [(c, w * wc) for d, w in self.parts for c, wc in d.atoms()]

    @property
    def continuous_weight(self):
        return float(sum(w * d.continuous_weight for d, w in self.parts))

    def to_json(self):
        return {"kind": "mixture", "parts": [{"dist": d.to_json(), "weight": w} for d, w in self.parts]}


def two_coin_set(a: complex, b: complex, p: float = 0.5) -> Discrete:
    """Hadamard coin with weight ``p`` and ``two_coin_x(a, b)`` with ``1 - p``."""
    return Discrete(((hadamard(), p), (two_coin_x(a, b), 1.0 - p)))


def distribution_from_json(obj: Mapping[str, Any], path: str = "dist") -> CoinDistribution:
    """Parse the JSON distribution schema, raising :class:`ConfigError` with a field path."""
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{path}: expected an object, got {type(obj).__name__}")
    kind = obj.get("kind")
    try:
        if kind == "haar":
            return Haar()
        if kind == "fixed":
            if "coin" not in obj:
                raise ConfigError(f"{path}.coin: missing")
            return Fixed(UnitaryCoin.from_json(obj["coin"]))
        if kind == "discrete":
            atoms = obj.get("atoms")
            if not isinstance(atoms, list) or not atoms:
                raise ConfigError(f"{path}.atoms: expected a non-empty list")
            parsed = []
            for k, atom in enumerate(atoms):
                if not isinstance(atom, Mapping) or "coin" not in atom or "weight" not in atom:
                    raise ConfigError(f"{path}.atoms[{k}]: expected {{'coin': ..., 'weight': ...}}")
                parsed.append((UnitaryCoin.from_json(atom["coin"]), float(atom["weight"])))
            return Discrete(tuple(parsed))
        if kind == "mixture":
            parts = obj.get("parts")
            if not isinstance(parts, list) or not parts:
                raise ConfigError(f"{path}.parts: expected a non-empty list")
            parsed = []
            for k, part in enumerate(parts):
                if not isinstance(part, Mapping) or "dist" not in part or "weight" not in part:
                    raise ConfigError(f"{path}.parts[{k}]: expected {{'dist': ..., 'weight': ...}}")
                parsed.append((distribution_from_json(part["dist"], f"{path}.parts[{k}].dist"), float(part["weight"])))
            return Mixture(tuple(parsed))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: expected one of haar, fixed, discrete, mixture; got {kind!r}")


# ---------------------------------------------------------------------------
# realizations


def realization_seed(master_seed: int, index: int) -> int:
    """64-bit sub-seed for realization ``index`` derived from a master seed."""
    state = np.random.SeedSequence([master_seed & _MASK64, index & _MASK64]).generate_state(1, np.uint64)
    return int(state[0])


def _block_stream(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed & _MASK64, block & _MASK64], dtype=np.uint64)))


@dataclass(frozen=True)
class DisorderRealization:
    """One environment: a deterministic map from integer sites to coins.

    Sites are grouped in blocks of 64; each block draws from a Philox stream
    keyed by ``(master_seed, block)``, so ``coin_at(x)`` depends only on the seed
    and ``x``. ``overrides`` pins chosen sites to given coins (used to insert
    reflectors).
    """

    distribution: CoinDistribution
    master_seed: int
    overrides: Mapping[int, UnitaryCoin] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False, hash=False)

    def _block(self, k: int) -> np.ndarray:
        blk = self._cache.get(k)
        if blk is None:
            blk = self.distribution.sample_many(_block_stream(self.master_seed, k), _BLOCK)
            blk.setflags(write=False)
            with self._lock:
                self._cache.setdefault(k, blk)
        return blk

    def coin_matrix(self, x: int) -> np.ndarray:
        x = int(x)
        if x in self.overrides:
            return self.overrides[x].matrix
        return self._block(x // _BLOCK)[x % _BLOCK].copy()

    def coin_at(self, x: int) -> UnitaryCoin:
        m = self.coin_matrix(x)
        return UnitaryCoin(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    def coins(self, x_min: int, x_max: int) -> np.ndarray:
        """Coins for sites ``x_min..x_max`` inclusive, shape ``(n, 2, 2)``."""
        x_min, x_max = int(x_min), int(x_max)
        if x_max < x_min:
            return np.empty((0, 2, 2), dtype=np.complex128)
        k0, k1 = x_min // _BLOCK, x_max // _BLOCK
        stacked = np.concatenate([self._block(k) for k in range(k0, k1 + 1)])
        out = stacked[x_min - k0 * _BLOCK : x_max - k0 * _BLOCK + 1].copy()
        for x, coin in self.overrides.items():
            if x_min <= x <= x_max:
                out[x - x_min] = coin.matrix
        return out

    def with_overrides(self, overrides: Mapping[int, UnitaryCoin]) -> DisorderRealization:
        merged = dict(self.overrides)
        merged.update({int(k): v for k, v in overrides.items()})
        return DisorderRealization(self.distribution, self.master_seed, merged)
