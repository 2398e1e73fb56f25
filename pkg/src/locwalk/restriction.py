"""The finite unitary restriction W(N) and its spectral data.

W(N) keeps sites ``-N..N`` and closes the lattice with two perfect reflectors
at ``-(N+1)`` and ``N+1``: amplitude leaving site ``-N`` to the left returns as
``e^{i eta_L}`` times the right-moving spin on site ``-N-1``, and symmetrically
on the right. The matrix has dimension ``4(N+1)`` and is exactly unitary by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .coins import DisorderRealization
from .indexing import dim, f_bounds, restricted_index
from .numerics import TWO_PI, UnitaryEig, unitary_eig

__all__ = [
    "FiniteWalk",
    "SpectralMeasure",
    "DecayTable",
    "finite_walk_matrix",
    "build_finite_walk",
    "spectral_measure",
    "wiener_average",
    "eigenfunction_decay",
    "participation_ratios",
    "half_bandwidth",
]

MERGE_GAP = 1e-9


def finite_walk_matrix(coins: np.ndarray, eta_l: float = 0.0, eta_r: float = 0.0) -> np.ndarray:
    """Dense W(N) from the coins on sites ``-N..N`` (array of shape ``(2N+1, 2, 2)``)."""
    coins = np.asarray(coins, dtype=np.complex128)
    n_sites = coins.shape[0]
    if n_sites % 2 != 1:
        raise ValueError("need coins for an odd number of sites -N..N")
    n = (n_sites - 1) // 2
    w = np.zeros((dim(n), dim(n)), dtype=np.complex128)
    off = 2 * n + 1  # matrix index of f-index 0
    f_even = 2 * np.arange(-n, n + 1) + off  # rows of delta_x (x) e_-
    w[f_even, f_even + 2] = coins[:, 0, 0]
    w[f_even + 1, f_even + 2] = coins[:, 1, 0]
    w[f_even, f_even - 1] = coins[:, 0, 1]
    w[f_even + 1, f_even - 1] = coins[:, 1, 1]
    w[0, 1] = np.exp(1j * eta_l)
    w[-1, -2] = np.exp(1j * eta_r)
    return w


def half_bandwidth(m: np.ndarray, atol: float = 0.0) -> int:
    """Largest ``|i - j|`` with ``|m[i, j]| > atol``."""
    i, j = np.nonzero(np.abs(m) > atol)
    return int(np.max(np.abs(i - j))) if i.size else 0


@dataclass(frozen=True)
class FiniteWalk:
    n: int
    eta_l: float
    eta_r: float
    coins: np.ndarray  # (2N+1, 2, 2), sites -N..N
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return dim(self.n)

    @property
    def f_range(self) -> tuple[int, int]:
        return f_bounds(self.n)

    def index(self, x: int, spin: int) -> int:
        return restricted_index(self.n, x, spin)

    def coin(self, x: int) -> np.ndarray:
        return self.coins[x + self.n]

    @cached_property
    def eig(self) -> UnitaryEig:
        return unitary_eig(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig.values

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.eig.vectors

    @cached_property
    def eigenvalue_groups(self) -> list[np.ndarray]:
        """Indices of eigenvalues whose phases lie within ``MERGE_GAP`` (cyclically)."""
        ph = self.eig.phases
        groups: list[list[int]] = [[0]]
        for k in range(1, ph.size):
            if ph[k] - ph[k - 1] < MERGE_GAP:
                groups[-1].append(k)
            else:
                groups.append([k])
        if len(groups) > 1 and ph[0] + TWO_PI - ph[-1] < MERGE_GAP:
            groups[0] = groups.pop() + groups[0]
        return [np.array(g) for g in groups]


def build_finite_walk(r: DisorderRealization, n: int, eta_l: float = 0.0, eta_r: float = 0.0) -> FiniteWalk:
    if n < 0:
        raise ValueError("N must be non-negative")
    coins = r.coins(-n, n)
    return FiniteWalk(int(n), float(eta_l), float(eta_r), coins, finite_walk_matrix(coins, eta_l, eta_r))


@dataclass(frozen=True)
class SpectralMeasure:
    """Point masses ``<delta_y e_j, P_lambda delta_x e_i>`` at the distinct eigenvalues."""

    values: np.ndarray
    masses: np.ndarray

    def moment(self, t: int) -> complex:
        return complex(np.sum(self.values**t * self.masses))

    @property
    def total_mass(self) -> complex:
        return complex(self.masses.sum())

    def wiener_terms(self, horizon: int) -> tuple[float, float]:
        """Time average of ``|moment(t)|^2`` over ``t = 0..T`` and the sum of squared point masses."""
        if horizon < 1:
            raise ValueError("T must be at least 1")
        phases = np.angle(self.values)
        total = 0.0
        # evaluate the moments in chunks of t to bound memory
        for lo in range(0, horizon + 1, 4096):
            chunk = np.arange(lo, min(lo + 4096, horizon + 1))
            moments = np.exp(1j * np.outer(chunk, phases)) @ self.masses
            total += float(np.sum(np.abs(moments) ** 2))
        return total / (horizon + 1), float(np.sum(np.abs(self.masses) ** 2))


def spectral_measure(fw: FiniteWalk, x: int, i: int, y: int, j: int) -> SpectralMeasure:
    kx, ky = fw.index(x, i), fw.index(y, j)
    vec = fw.eigenvectors
    per_vector = vec[ky, :] * vec[kx, :].conj()
    vals, masses = [], []
    for g in fw.eigenvalue_groups:
        lam = fw.eigenvalues[g]
        mean = lam.mean()
        vals.append(mean / abs(mean))
        masses.append(per_vector[g].sum())
    return SpectralMeasure(np.array(vals), np.array(masses))


def wiener_average(fw: FiniteWalk, x: int, i: int, y: int, j: int, horizon: int) -> tuple[float, float]:
    """Time average of ``|rho^(t)|^2`` over ``t = 0..T`` and the sum of squared point masses."""
    if horizon < 1:
        raise ValueError("T must be at least 1")
    return spectral_measure(fw, x, i, y, j).wiener_terms(horizon)


@dataclass(frozen=True)
class DecayTable:
    """Site envelopes ``max_spin |phi(x, spin)|`` of every eigenvector."""

    sites: np.ndarray
    envelopes: np.ndarray  # (n_vectors, n_sites)
    peak_sites: np.ndarray

    def relative_at_distance(self, d: int) -> np.ndarray:
        """Envelope at distance ``d`` from the peak over the peak value; NaN where off-lattice.

        When both sides exist the larger of the two is taken.
        """
        n_sites = self.sites.size
        peak_idx = self.peak_sites - self.sites[0]
        peak_val = self.envelopes[np.arange(len(peak_idx)), peak_idx]
        out = np.full(len(peak_idx), np.nan)
        for sgn in (-1, 1):
            idx = peak_idx + sgn * d
            ok = (idx >= 0) & (idx < n_sites)
            vals = np.full(len(peak_idx), np.nan)
            vals[ok] = self.envelopes[np.flatnonzero(ok), idx[ok]] / peak_val[ok]
            out = np.fmax(out, vals)
        return out


def eigenfunction_decay(fw: FiniteWalk) -> DecayTable:
    n = fw.n
    sites = np.arange(-n - 1, n + 2)
    vec = np.abs(fw.eigenvectors)  # rows are f-index + 2N + 1
    # pad to 2 * (2N + 3) rows so that row 2k, 2k+1 belong to site sites[k]
    padded = np.zeros((2 * sites.size, vec.shape[1]))
    padded[1:-1] = vec
    env = padded.reshape(sites.size, 2, -1).max(axis=1).T
    peaks = sites[np.argmax(env, axis=1)]
    return DecayTable(sites, env, peaks)


def participation_ratios(fw: FiniteWalk) -> np.ndarray:
    """``1 / sum |phi|^4`` per eigenvector: roughly the number of occupied f-indices."""
    return 1.0 / np.sum(np.abs(fw.eigenvectors) ** 4, axis=0)
