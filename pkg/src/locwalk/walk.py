"""Evolution of the walk ``W = U S`` on a window that grows with the light cone.

One step maps spinor amplitudes ``(psi_-(x), psi_+(x))`` to

    psi'_-(x) = a_x psi_-(x+1) + b_x psi_+(x-1)
    psi'_+(x) = c_x psi_-(x+1) + d_x psi_+(x-1)

so a state supported on ``[x_min, x_max]`` is supported on
``[x_min - 1, x_max + 1]`` afterwards. Amplitudes outside the window are exact
zeros, which makes the light cone exact rather than approximate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coins import CoinDistribution, DisorderRealization, realization_seed
from .errors import InsufficientHorizon
from .indexing import MINUS, PLUS

__all__ = [
    "WalkState",
    "LocalizationProfile",
    "localized_state",
    "step",
    "evolve",
    "amplitude",
    "sup_amplitude",
    "position_distribution",
    "variance",
    "localization_profile",
]


@dataclass(frozen=True)
class WalkState:
    """Spinor amplitudes on sites ``x_min .. x_min + len - 1`` at integer time."""

    x_min: int
    amplitudes: np.ndarray  # (L, 2): columns are e_-, e_+
    time: int = 0

    @property
    def x_max(self) -> int:
        return self.x_min + self.amplitudes.shape[0] - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.x_min, self.x_max + 1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def at(self, y: int, spin: int) -> complex:
        if self.x_min <= y <= self.x_max:
            return complex(self.amplitudes[y - self.x_min, spin])
        return 0j


def localized_state(x: int, spin: int) -> WalkState:
    amp = np.zeros((1, 2), dtype=np.complex128)
    amp[0, spin] = 1.0
    return WalkState(int(x), amp, 0)


def _apply(amp: np.ndarray, coins: np.ndarray) -> np.ndarray:
    # coins cover the grown window [x_min - 1, x_max + 1]
    n = amp.shape[0]
    m = np.zeros(n + 2, dtype=np.complex128)
    p = np.zeros(n + 2, dtype=np.complex128)
    m[: n] = amp[:, MINUS]  # psi_-(x + 1) seen from new-window position x
    p[2:] = amp[:, PLUS]  # psi_+(x - 1)
    out = np.empty((n + 2, 2), dtype=np.complex128)
    out[:, MINUS] = coins[:, 0, 0] * m + coins[:, 0, 1] * p
    out[:, PLUS] = coins[:, 1, 0] * m + coins[:, 1, 1] * p
    return out


def step(state: WalkState, r: DisorderRealization) -> WalkState:
    """Apply ``W = U S`` once; the window grows by one site on each side."""
    coins = r.coins(state.x_min - 1, state.x_max + 1)
    return WalkState(state.x_min - 1, _apply(state.amplitudes, coins), state.time + 1)


def _evolve_iter(state: WalkState, r: DisorderRealization, steps: int, coins: np.ndarray | None = None):
    """Yield successive states; ``coins`` may pre-cover the final window."""
    lo = state.x_min - steps
    if coins is None:
        coins = r.coins(lo, state.x_max + steps)
    amp = state.amplitudes
    x_min = state.x_min
    for k in range(1, steps + 1):
        x_min -= 1
        off = x_min - lo
        amp = _apply(amp, coins[off : off + amp.shape[0] + 2])
        yield WalkState(x_min, amp, state.time + k)


def evolve(state: WalkState, r: DisorderRealization, steps: int) -> WalkState:
    if steps < 0:
        raise ValueError("steps must be non-negative")
    for state in _evolve_iter(state, r, steps):
        pass
    return state


def amplitude(r: DisorderRealization, x: int, i: int, y: int, j: int, t: int) -> complex:
    """``<delta_y (x) e_j, W^t delta_x (x) e_i>``; exactly zero outside the light cone."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if abs(x - y) > t:
        return 0j
    return evolve(localized_state(x, i), r, t).at(y, j)


def sup_amplitude(r: DisorderRealization, x: int, i: int, y: int, j: int, horizon: int) -> float:
    """Largest ``|amplitude|`` over ``t = 0 .. horizon``."""
    if horizon < abs(x - y):
        raise InsufficientHorizon(f"horizon {horizon} < distance {abs(x - y)}")
    state = localized_state(x, i)
    best = abs(state.at(y, j))
    for state in _evolve_iter(state, r, horizon):
        best = max(best, abs(state.at(y, j)))
    return float(best)


def position_distribution(state: WalkState) -> np.ndarray:
    return np.sum(np.abs(state.amplitudes) ** 2, axis=1)


def variance(state: WalkState) -> float:
    """Variance of the position marginal."""
    p = position_distribution(state)
    p = p / p.sum()
    x = state.sites.astype(float)
    mean = float(p @ x)
    return float(p @ (x - mean) ** 2)


@dataclass(frozen=True)
class LocalizationProfile:
    """Finite-horizon estimate of ``E sup_t max_{i,j} |<x0 + d, j| W^t |x0, i>|``."""

    distances: np.ndarray
    mean_sup_amplitude: np.ndarray
    stderr: np.ndarray
    realization_count: int
    horizon: int

    def log_slope(self) -> float:
        """Least-squares slope of the log profile against distance."""
        d = np.abs(self.distances).astype(float)
        return float(np.polyfit(d, np.log(self.mean_sup_amplitude), 1)[0])

    def rows(self):
        for d, m, s in zip(self.distances, self.mean_sup_amplitude, self.stderr):
            yield int(d), float(m), float(s), self.realization_count, self.horizon


def _sup_profile(r: DisorderRealization, x0: int, distances: np.ndarray, horizon: int) -> np.ndarray:
    coins = r.coins(x0 - horizon, x0 + horizon)
    # t = 0 contributes only at distance zero
    best = (distances == 0).astype(float)
    for spin in (MINUS, PLUS):
        for state in _evolve_iter(localized_state(x0, spin), r, horizon, coins):
            idx = x0 + distances - state.x_min
            inside = (idx >= 0) & (idx < state.amplitudes.shape[0])
            vals = np.zeros(distances.size)
            vals[inside] = np.abs(state.amplitudes[idx[inside]]).max(axis=1)
            np.maximum(best, vals, out=best)
    return best


def localization_profile(
    mu: CoinDistribution,
    distances,
    horizon: int,
    realizations: int,
    seed: int,
    *,
    x0: int = 0,
    workers: int | None = None,
) -> LocalizationProfile:
    """Monte Carlo profile of the finite-horizon sup-amplitude against distance.

    Each realization ``k`` uses ``DisorderRealization(mu, realization_seed(seed, k))``;
    the observable at distance ``d`` is the largest transition amplitude from
    either spin at ``x0`` to either spin at ``x0 + d`` over ``t = 0 .. horizon``.
    """
    from ._parallel import ordered_map

    distances = np.asarray(distances, dtype=int)
    if realizations < 1:
        raise ValueError("realizations must be at least 1")
    if distances.size and horizon < np.abs(distances).max():
        raise InsufficientHorizon(f"horizon {horizon} < max distance {np.abs(distances).max()}")

    def one(k: int) -> np.ndarray:
        return _sup_profile(DisorderRealization(mu, realization_seed(seed, k)), x0, distances, horizon)

    samples = np.array(ordered_map(one, range(realizations), workers))
    mean = samples.mean(axis=0)
    err = samples.std(axis=0, ddof=1) / np.sqrt(realizations) if realizations > 1 else np.zeros_like(mean)
    return LocalizationProfile(distances, mean, err, realizations, horizon)
