"""Lyapunov exponents, invariant measures and the density of states.

The Lyapunov exponent at a spectral parameter ``z`` is the growth rate of
``|T_n(z) ... T_1(z) v|`` for transfer matrices built from i.i.d. coins. Two
independent routes are provided: direct renormalized products
(:func:`estimate_lyapunov`) and integration of the one-step growth against
an empirical stationary measure on projective space
(:func:`lyapunov_via_invariant`). The density of states comes from pooled
eigenphases of finite restrictions, and :func:`thouless_rhs` turns it into a
third, spectral estimate of the same exponent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coins import CoinDistribution, DisorderRealization, realization_seed
from .errors import FlipCoin, FlipEncountered, KernelSingularity
from .numerics import TWO_PI, phase_of, projective_point, unitary_eigvals
from .restriction import finite_walk_matrix
from .transfer import tau_many

__all__ = [
    "LyapunovEstimate",
    "ProjectiveSample",
    "InvariantEstimate",
    "DOSHistogram",
    "IDSCurve",
    "HoelderFit",
    "GammaProbe",
    "estimate_lyapunov",
    "estimate_lyapunov_grid",
    "invariant_measure_sample",
    "lyapunov_via_invariant",
    "density_of_states",
    "integrated_dos",
    "ids_hoelder_probe",
    "log_kernel_integral",
    "thouless_rhs",
    "hoelder_probe_gamma",
]

RENORM_EVERY = 32
DEFAULT_BATCHES = 32
RICHARDSON_EPS = (0.02, 0.01, 0.005)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class LyapunovEstimate:
    """Growth-rate estimate with its standard error.

    ``stderr`` is the larger of the spread across realizations and a batch-means
    estimate over equal chain segments; the second keeps the error honest when
    the realizations coincide (a deterministic coin).
    """

    z: complex
    gamma_hat: float
    stderr: float
    chain_length: int
    realizations: int
    per_realization: np.ndarray


def _transfers(mu: CoinDistribution, rng: np.random.Generator, n: int, z: complex) -> np.ndarray:
    coins = mu.sample_many(rng, n)
    try:
        return tau_many(coins, z, first_site=1)
    except FlipCoin as exc:
        raise FlipEncountered(f"flip coin drawn at chain position {exc.site}", exc.site) from None


def _random_direction(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return v / np.linalg.norm(v)


def _batch_edges(n: int, batches: int) -> np.ndarray:
    b = max(1, min(batches, n))
    return np.linspace(0, n, b + 1).astype(int)


def _run_chains(
    ts: np.ndarray, v: np.ndarray, renorm_every: int, edges: np.ndarray
) -> np.ndarray:
    """Log-growth of ``ts[:, k]`` products applied to ``v``, accumulated per batch.

    ``ts`` has shape ``(M, n, 2, 2)`` and ``v`` shape ``(M, 2)``; the result has
    shape ``(M, len(edges) - 1)``.
    """
    m_count, n = ts.shape[:2]
    v0, v1 = v[:, 0].copy(), v[:, 1].copy()
    out = np.zeros((m_count, edges.size - 1))
    log_acc = np.zeros(m_count)
    boundary = set(edges[1:].tolist())
    batch = 0
    for k in range(n):
        t = ts[:, k]
        v0, v1 = t[:, 0, 0] * v0 + t[:, 0, 1] * v1, t[:, 1, 0] * v0 + t[:, 1, 1] * v1
        done = k + 1
        at_edge = done in boundary
        if done % renorm_every == 0 or at_edge:
            s = np.sqrt(np.abs(v0) ** 2 + np.abs(v1) ** 2)
            v0 /= s
            v1 /= s
            log_acc += np.log(s)
        if at_edge:
            out[:, batch] = log_acc
            log_acc = np.zeros(m_count)
            batch += 1
    return out


def estimate_lyapunov_grid(
    mu: CoinDistribution,
    zs: Sequence[complex],
    chain_length: int,
    realizations: int,
    seed: int,
    *,
    v0=None,
    renorm_every: int = RENORM_EVERY,
    batches: int = DEFAULT_BATCHES,
) -> list[LyapunovEstimate]:
    """Estimates at several ``z`` sharing the same coin sequences (common random numbers)."""
    if chain_length < 1 or realizations < 1:
        raise ValueError("chain_length and realizations must be positive")
    coins, starts = [], []
    for r in range(realizations):
        rng = np.random.default_rng(realization_seed(seed, r))
        coins.append(mu.sample_many(rng, chain_length))
        starts.append(_random_direction(rng))
    coins = np.stack(coins)
    v = np.stack(starts) if v0 is None else np.broadcast_to(np.asarray(v0, complex) / np.linalg.norm(v0), (realizations, 2))
    edges = _batch_edges(chain_length, batches)
    lens = np.diff(edges)

    out = []
    for z in zs:
        z = complex(z)
        try:
            ts = np.stack([tau_many(c, z, first_site=1) for c in coins])
        except FlipCoin as exc:
            raise FlipEncountered(f"flip coin drawn at chain position {exc.site}", exc.site) from None
        logs = _run_chains(ts, v, renorm_every, edges)
        per_real = logs.sum(axis=1) / chain_length
        gamma = float(per_real.mean())
        se_real = float(per_real.std(ddof=1) / np.sqrt(realizations)) if realizations > 1 else 0.0
        rates = (logs / lens).ravel()
        se_batch = float(rates.std(ddof=1) / np.sqrt(rates.size)) if rates.size > 1 else 0.0
        out.append(LyapunovEstimate(z, gamma, max(se_real, se_batch), chain_length, realizations, per_real))
    return out


def estimate_lyapunov(
    mu: CoinDistribution,
    z: complex,
    chain_length: int,
    realizations: int,
    seed: int,
    *,
    v0=None,
    renorm_every: int = RENORM_EVERY,
    batches: int = DEFAULT_BATCHES,
) -> LyapunovEstimate:
    """Mean of ``(1/n) log |T_n ... T_1 v|`` over independent chains.

    Each realization draws its coins and (unless ``v0`` is given) a random unit
    start vector from ``realization_seed(seed, r)``. The running vector is
    renormalized every ``renorm_every`` steps and the logarithms accumulated.
    """
    return estimate_lyapunov_grid(
        mu, [z], chain_length, realizations, seed, v0=v0, renorm_every=renorm_every, batches=batches
    )[0]


# ---------------------------------------------------------------------------
# invariant measure


@dataclass(frozen=True)
class ProjectiveSample:
    """Equally weighted projective points, chain-major order."""

    points: np.ndarray  # (S, 2), canonical representatives
    weights: np.ndarray  # (S,), summing to one
    z: complex
    chains: int


def invariant_measure_sample(
    mu: CoinDistribution,
    z: complex,
    burn_in: int,
    samples: int,
    seed: int,
    *,
    chains: int = 1,
    v0=None,
) -> ProjectiveSample:
    """Directions of ``g_k ... g_1 v0`` along random chains after a burn-in.

    The empirical measure of these directions is a Cesaro average of the
    push-forwards of the start point, which approximates the stationary
    measure of the projective action. ``samples`` points are split evenly over
    ``chains`` independent chains.
    """
    if samples < 1 or chains < 1:
        raise ValueError("samples and chains must be positive")
    per_chain = -(-samples // chains)
    z = complex(z)
    ts, vs = [], []
    for c in range(chains):
        rng = np.random.default_rng(realization_seed(seed, c))
        ts.append(_transfers(mu, rng, burn_in + per_chain, z))
        vs.append(_random_direction(rng) if v0 is None else np.asarray(v0, complex))
    ts = np.stack(ts)
    v = np.stack(vs)
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    pts = np.empty((chains, per_chain, 2), dtype=np.complex128)
    for k in range(burn_in + per_chain):
        v = np.einsum("mij,mj->mi", ts[:, k], v)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        if k >= burn_in:
            pts[:, k - burn_in] = v
    pts = projective_point(pts.reshape(-1, 2)[: chains * per_chain])
    w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    return ProjectiveSample(pts, w, z, chains)


@dataclass(frozen=True)
class InvariantEstimate:
    gamma: float
    stderr: float
    samples: int

    def __float__(self) -> float:
        return self.gamma


def lyapunov_via_invariant(
    mu: CoinDistribution,
    z: complex,
    nu: ProjectiveSample,
    *,
    seed: int = 0,
    batches: int = DEFAULT_BATCHES,
) -> InvariantEstimate:
    """Integrate ``x -> E log |g x|`` (``|x| = 1``) against the sampled measure.

    For purely atomic laws the inner expectation is an exact weighted sum;
    otherwise one fresh coin is drawn per sample point. The standard error uses
    batch means over consecutive points, since chain samples are correlated.
    """
    z = complex(z)
    x = nu.points / np.linalg.norm(nu.points, axis=1, keepdims=True)
    if mu.continuous_weight == 0.0:
        vals = np.zeros(x.shape[0])
        for coin, w in mu.atoms():
            t = tau_many(coin.matrix[None], z)[0]
            vals += w * np.log(np.linalg.norm(x @ t.T, axis=1))
    else:
        rng = np.random.default_rng(realization_seed(seed, 1 << 32))
        ts = _transfers(mu, rng, x.shape[0], z)
        vals = np.log(np.linalg.norm(np.einsum("sij,sj->si", ts, x), axis=1))
    gamma = float(np.sum(nu.weights * vals))
    edges = _batch_edges(vals.size, batches)
    means = np.array([vals[a:b].mean() for a, b in zip(edges[:-1], edges[1:])])
    se = float(means.std(ddof=1) / np.sqrt(means.size)) if means.size > 1 else 0.0
    return InvariantEstimate(gamma, se, int(vals.size))


# ---------------------------------------------------------------------------
# density of states


@dataclass(frozen=True)
class DOSHistogram:
    bin_edges: np.ndarray  # bins + 1 phases from 0 to 2 pi
    masses: np.ndarray
    n_used: int
    realizations: int

    @property
    def bin_width(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


def _restriction_phases(mu: CoinDistribution, n: int, seed: int, eta_l: float, eta_r: float) -> np.ndarray:
    r = DisorderRealization(mu, seed)
    w = finite_walk_matrix(r.coins(-n, n), eta_l, eta_r)
    return phase_of(unitary_eigvals(w))


def density_of_states(
    mu: CoinDistribution,
    n: int,
    realizations: int,
    bins: int = 512,
    seed: int = 0,
    *,
    eta_l: float = 0.0,
    eta_r: float = 0.0,
    workers: int | None = None,
) -> DOSHistogram:
    """Pooled eigenphase histogram of W(N) over independent realizations."""
    from ._parallel import ordered_map

    if n < 4:
        raise ValueError("N must be at least 4")
    if realizations < 1 or bins < 1:
        raise ValueError("realizations and bins must be positive")
    phases = ordered_map(
        lambda k: _restriction_phases(mu, n, realization_seed(seed, k), eta_l, eta_r), range(realizations), workers
    )
    edges = np.linspace(0.0, TWO_PI, bins + 1)
    counts, _ = np.histogram(np.concatenate(phases), bins=edges)
    return DOSHistogram(edges, counts / counts.sum(), n, realizations)


@dataclass(frozen=True)
class IDSCurve:
    phases: np.ndarray
    values: np.ndarray


def integrated_dos(hist: DOSHistogram) -> IDSCurve:
    values = np.concatenate([[0.0], np.cumsum(hist.masses)])
    return IDSCurve(hist.bin_edges.copy(), values)


@dataclass(frozen=True)
class HoelderFit:
    """Continuity modulus ``omega(h)`` at scales ``h`` and a power-law fit ``C h^beta``."""

    scales: np.ndarray
    modulus: np.ndarray
    exponent: float
    r_squared: float
    constant: float


def _power_fit(h: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    ok = (w > 0) & np.isfinite(w)
    if ok.sum() < 2:
        return float("nan"), float("nan"), float("nan")
    lx, ly = np.log(h[ok]), np.log(w[ok])
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2, float(np.exp(icpt))


def ids_hoelder_probe(curve: IDSCurve) -> HoelderFit:
    """Largest increment of the IDS over windows of dyadic numbers of bins.

    The fitted exponent is reported capped at 1, the largest Hoelder exponent
    a non-constant monotone function can have.
    """
    vals = curve.values
    nb = vals.size - 1
    width = (curve.phases[-1] - curve.phases[0]) / nb
    # periodic extension: N(phi + 2 pi) = N(phi) + 1
    ext = np.concatenate([vals[:-1], vals + 1.0])
    lags = 2 ** np.arange(0, int(np.log2(max(nb // 4, 1))) + 1)
    modulus = np.array([np.max(ext[lag : lag + nb] - ext[:nb]) for lag in lags])
    scales = lags * width
    slope, r2, const = _power_fit(scales, modulus)
    beta = min(slope, 1.0) if np.isfinite(slope) else slope
    return HoelderFit(scales, modulus, beta, r2, const)


def log_kernel_integral(hist: DOSHistogram, z: complex) -> float:
    """``integral log|z - e^{i lambda}| d(hist)`` with the mass spread uniformly in each bin."""
    lo = hist.bin_edges[:-1, None]
    h = hist.bin_width[:, None]
    nodes = lo + 0.5 * h * (1.0 + _GL_X[None, :])
    kern = np.log(np.abs(complex(z) - np.exp(1j * nodes)))
    per_bin = 0.5 * kern @ _GL_W
    return float(np.sum(hist.masses * per_bin))


def _rhs_off_circle(hist: DOSHistogram, mu: CoinDistribution, z: complex) -> float:
    return 2.0 * log_kernel_integral(hist, z) - mu.expected_log_abs_a() - float(np.log(abs(z)))


def thouless_rhs(hist: DOSHistogram, mu: CoinDistribution, z: complex, *, method: str = "auto") -> float:
    """Spectral side of the Thouless relation for the per-site exponent:

        gamma(z) = 2 * integral log|z - e^{i lambda}| d theta(lambda) - E log|a| - log|z|.

    On the unit circle ``method="auto"`` extrapolates from ``|z| = 1 + eps`` for
    ``eps`` in (0.02, 0.01, 0.005); ``method="direct"`` integrates on the circle
    and refuses when populated bins lie within 1.5 bin widths of ``z``.
    """
    z = complex(z)
    if z == 0:
        raise ValueError("z must be nonzero")
    if abs(abs(z) - 1.0) > 1e-12:
        return _rhs_off_circle(hist, mu, z)
    if method == "direct":
        dist = np.abs(np.angle(np.exp(1j * (hist.centers - np.angle(z)))))
        near = (dist <= 1.5 * hist.bin_width) & (hist.masses > 0)
        if np.any(near):
            raise KernelSingularity("z sits on populated DOS bins; use the extrapolated evaluation")
        return _rhs_off_circle(hist, mu, z)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    unit = z / abs(z)
    f = [_rhs_off_circle(hist, mu, unit * (1.0 + e)) for e in RICHARDSON_EPS]
    # eps halves at each level: eliminate the linear, then the quadratic term
    r1 = 2.0 * f[1] - f[0]
    r2 = 2.0 * f[2] - f[1]
    return float((4.0 * r2 - r1) / 3.0)


# ---------------------------------------------------------------------------
# continuity of gamma along the circle


@dataclass(frozen=True)
class GammaProbe:
    phases: np.ndarray
    gammas: np.ndarray
    stderrs: np.ndarray
    delta_phi: np.ndarray  # distinct phase separations, ascending
    abs_delta_gamma: np.ndarray  # mean |gamma(phi) - gamma(phi')| at that separation
    delta_stderr: np.ndarray
    fit: HoelderFit


def hoelder_probe_gamma(
    mu: CoinDistribution,
    phases: Sequence[float],
    chain_length: int,
    realizations: int,
    seed: int,
) -> GammaProbe:
    """Empirical continuity modulus of ``gamma(e^{i phi})`` on a phase grid.

    All grid points share their coin sequences, so differences between nearby
    phases are not swamped by independent sampling noise.
    """
    phases = np.sort(np.asarray(phases, dtype=float))
    if phases.size < 8:
        raise ValueError("the phase grid needs at least 8 points")
    ests = estimate_lyapunov_grid(mu, np.exp(1j * phases), chain_length, realizations, seed)
    g = np.array([e.gamma_hat for e in ests])
    s = np.array([e.stderr for e in ests])
    i, j = np.triu_indices(phases.size, k=1)
    sep = np.round(phases[j] - phases[i], 12)
    diff = np.abs(g[j] - g[i])
    dse = np.sqrt(s[i] ** 2 + s[j] ** 2)
    uniq = np.unique(sep)
    mean_diff = np.array([diff[sep == u].mean() for u in uniq])
    mean_se = np.array([dse[sep == u].mean() for u in uniq])
    slope, r2, const = _power_fit(uniq, mean_diff)
    return GammaProbe(phases, g, s, uniq, mean_diff, mean_se, HoelderFit(uniq, mean_diff, slope, r2, const))
