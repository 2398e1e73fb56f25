"""Transfer matrices of generalized eigenfunctions and what is built from them.

For a coin ``((a, b), (c, d))`` with ``a != 0`` and a spectral parameter
``z != 0``,

    tau_z(U) = (1/a) [[det U / z, c], [-b, z]],

maps ``Gamma_x = (phi(2x-1), phi(2x))`` to ``Gamma_{x+1}`` for any solution of
``W phi = z phi`` away from the boundary. Everything here (products, the
resolvent of W(N), the spectral polynomial) is assembled from this map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .coins import FLIP_ATOL, DisorderRealization, UnitaryCoin
from .errors import FlipCoin, NearSpectrum, OffCircle, SingularCorner, SiteOutOfRange
from .indexing import block_of, m_hat
from .numerics import det2, unitary_eigvals
from .restriction import FiniteWalk

__all__ = [
    "TransferMatrix",
    "tau",
    "tau_matrix",
    "tau_many",
    "tau_inv",
    "transfer_product",
    "scaled_product",
    "plane_residual",
    "plane_check",
    "boundary_solutions",
    "resolvent_entry_via_transfer",
    "resolvent_decomposition",
    "spectral_polynomial_eval",
    "spectral_polynomial_coefficients",
    "leading_coefficient",
]

RENORM_EVERY = 32
UNIT_CIRCLE_ATOL = 1e-12


class TransferMatrix(NamedTuple):
    m: np.ndarray
    z: complex


def _coin_entries(u) -> tuple[complex, complex, complex, complex]:
    if isinstance(u, UnitaryCoin):
        return u.a, u.b, u.c, u.d
    m = np.asarray(u)
    return complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1])


def tau_matrix(u, z: complex, site: int | None = None) -> np.ndarray:
    a, b, c, d = _coin_entries(u)
    if abs(a) <= FLIP_ATOL:
        where = f" at site {site}" if site is not None else ""
        raise FlipCoin(f"coin{where} has |a| = {abs(a):.1e}; no transfer matrix exists", site)
    if z == 0:
        raise ValueError("z must be nonzero")
    det = a * d - b * c
    return np.array([[det / z, c], [-b, z]], dtype=np.complex128) / a


def tau(u, z: complex) -> TransferMatrix:
    return TransferMatrix(tau_matrix(u, z), complex(z))


def tau_many(coins: np.ndarray, z: complex, first_site: int = 0) -> np.ndarray:
    """Vectorized ``tau_z`` over a stack of coins ``(n, 2, 2)``."""
    coins = np.asarray(coins, dtype=np.complex128)
    a = coins[:, 0, 0]
    bad = np.flatnonzero(np.abs(a) <= FLIP_ATOL)
    if bad.size:
        site = first_site + int(bad[0])
        raise FlipCoin(f"coin at site {site} has |a| = {abs(a[bad[0]]):.1e}", site)
    b, c, d = coins[:, 0, 1], coins[:, 1, 0], coins[:, 1, 1]
    out = np.empty_like(coins)
    out[:, 0, 0] = (a * d - b * c) / (z * a)
    out[:, 0, 1] = c / a
    out[:, 1, 0] = -b / a
    out[:, 1, 1] = z / a
    return out


def tau_inv(t, z: complex | None = None) -> UnitaryCoin:
    """Coin whose transfer matrix at ``z`` is ``t``.

    ``t`` may be a :class:`TransferMatrix` or a bare matrix together with ``z``.
    The result is unitary exactly when ``t`` lies in the image of ``tau_z``.
    """
    if isinstance(t, TransferMatrix):
        m, z = t.m, t.z
    else:
        m = np.asarray(t, dtype=np.complex128)
        if z is None:
            raise ValueError("z is required with a bare matrix")
    v, w, x, y = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    if abs(y) <= FLIP_ATOL:
        raise SingularCorner(f"lower-right entry {abs(y):.1e} vanishes; tau has no preimage")
    s = z / y
    return UnitaryCoin(complex(s), complex(-x * s), complex(w * s), complex(s * (v * y - x * w)))


# ---------------------------------------------------------------------------
# products


@dataclass(frozen=True)
class ScaledProduct:
    """``exp(log_scale) * matrix`` equals the full product."""

    matrix: np.ndarray
    log_scale: float

    def full(self) -> np.ndarray:
        return self.matrix * np.exp(self.log_scale)


def _product(mats: np.ndarray) -> ScaledProduct:
    acc = np.eye(2, dtype=np.complex128)
    log_scale = 0.0
    for k, t in enumerate(mats, start=1):
        acc = t @ acc
        if k % RENORM_EVERY == 0:
            s = np.abs(acc).max()
            acc /= s
            log_scale += np.log(s)
    return ScaledProduct(acc, log_scale)


def scaled_product(r: DisorderRealization, z: complex, x: int, y: int) -> ScaledProduct:
    """Rescaled ``T_y(z) ... T_x(z)``; the identity for an empty range."""
    if y < x:
        return ScaledProduct(np.eye(2, dtype=np.complex128), 0.0)
    return _product(tau_many(r.coins(x, y), z, first_site=x))


def transfer_product(r: DisorderRealization, z: complex, x: int, y: int) -> np.ndarray:
    """Ordered product ``T_y(z) ... T_x(z)`` of the transfer matrices on sites ``x..y``."""
    return scaled_product(r, z, x, y).full()


# ---------------------------------------------------------------------------
# plane invariance


def plane_residual(v) -> float:
    v = np.asarray(v)
    return float(abs(abs(v[0]) - abs(v[1])))


def plane_check(t, v, z: complex | None = None, *, atol: float = 1e-12) -> np.ndarray:
    """Apply a unit-circle transfer matrix to a vector with ``|v1| = |v2|``."""
    if isinstance(t, TransferMatrix):
        m, z = t.m, t.z
    else:
        m = np.asarray(t, dtype=np.complex128)
        z = 1.0 if z is None else z
    if abs(abs(z) - 1.0) > UNIT_CIRCLE_ATOL:
        raise OffCircle(f"|z| = {abs(z)!r} is not on the unit circle")
    v = np.asarray(v, dtype=np.complex128)
    if plane_residual(v) > atol * max(1.0, float(np.abs(v).max())):
        raise ValueError(f"vector is not in the plane |v1| = |v2| (residual {plane_residual(v):.2e})")
    return m @ v


# ---------------------------------------------------------------------------
# boundary-adapted solutions on W(N)


@dataclass(frozen=True)
class BoundarySolutions:
    """Left- and right-adapted solutions of ``W(N) phi = z phi`` away from one boundary.

    ``gamma_minus[k]`` / ``gamma_plus[k]`` hold the unit-normalized pairs
    ``Gamma_x`` for ``x = -N .. N+1`` (index ``k = x + N``); the true pairs are
    those times ``exp(log_minus[k])`` / ``exp(log_plus[k])``.
    """

    n: int
    z: complex
    transfers: np.ndarray
    gamma_minus: np.ndarray
    log_minus: np.ndarray
    gamma_plus: np.ndarray
    log_plus: np.ndarray

    def _pair(self, which: str, x: int) -> tuple[np.ndarray, float]:
        k = x + self.n
        if which == "-":
            return self.gamma_minus[k], self.log_minus[k]
        return self.gamma_plus[k], self.log_plus[k]

    def value(self, which: str, f: int) -> tuple[complex, float]:
        """Scaled entry ``phi(f)`` as (mantissa, log scale)."""
        x = block_of(f)
        g, s = self._pair(which, x)
        return complex(g[0] if f == 2 * x - 1 else g[1]), s

    def wronskian(self, x: int) -> tuple[complex, float]:
        """``det B_x`` of the two solutions' pairs at site ``x`` as (mantissa, log scale)."""
        gm, sm = self._pair("-", x)
        gp, sp = self._pair("+", x)
        return complex(gm[0] * gp[1] - gp[0] * gm[1]), sm + sp


def boundary_solutions(fw: FiniteWalk, z: complex) -> BoundarySolutions:
    n = fw.n
    z = complex(z)
    ts = tau_many(fw.coins, z, first_site=-n)
    count = 2 * n + 2
    gm = np.empty((count, 2), dtype=np.complex128)
    gp = np.empty((count, 2), dtype=np.complex128)
    lm = np.zeros(count)
    lp = np.zeros(count)

    v = np.array([1.0, z * np.exp(-1j * fw.eta_l)])
    s = np.linalg.norm(v)
    gm[0], lm[0] = v / s, np.log(s)
    for k in range(1, count):
        v = ts[k - 1] @ gm[k - 1]
        s = np.linalg.norm(v)
        gm[k], lm[k] = v / s, lm[k - 1] + np.log(s)

    v = np.array([z * np.exp(-1j * fw.eta_r), 1.0])
    s = np.linalg.norm(v)
    gp[-1], lp[-1] = v / s, np.log(s)
    for k in range(count - 2, -1, -1):
        t = ts[k]
        v = np.linalg.solve(t, gp[k + 1])
        s = np.linalg.norm(v)
        gp[k], lp[k] = v / s, lp[k + 1] + np.log(s)
    return BoundarySolutions(n, z, ts, gm, lm, gp, lp)


def _distance_to_spectrum(fw: FiniteWalk, z: complex) -> float:
    return float(np.min(np.abs(unitary_eigvals(fw.matrix) - z)))


def resolvent_entry_via_transfer(
    fw: FiniteWalk, z: complex, n: int, m: int, *, check_spectrum: bool = True, min_distance: float = 1e-8
) -> float:
    """``|<f_n, (W(N) - z)^{-1} f_m>|`` from the two boundary-adapted solutions.

    With ``m`` in ``{2y, 2y+1}`` and its partner index ``m_hat``,

        |R(n, m)| = |phi_-(n) phi_+(m_hat)| / |z det B|   if n <= 2y,
        |R(n, m)| = |phi_+(n) phi_-(m_hat)| / |z det B|   otherwise,

    where ``det B`` is the (site-independent) Wronskian of the two solutions.
    ``m`` must belong to an interior site ``-N..N``.
    """
    lo, hi = fw.f_range
    if not lo <= n <= hi:
        raise SiteOutOfRange(f"row index {n} outside [{lo}, {hi}]")
    if not -2 * fw.n <= m <= 2 * fw.n + 1:
        raise SiteOutOfRange(f"column index {m} is not on an interior site of W({fw.n})")
    if check_spectrum:
        dist = _distance_to_spectrum(fw, z)
        if dist <= min_distance:
            raise NearSpectrum(f"z is {dist:.2e} from the spectrum of W({fw.n})")
    sol = boundary_solutions(fw, z)
    y = m // 2
    mh = m_hat(m)
    first, second = ("-", "+") if n <= 2 * y else ("+", "-")
    p1, s1 = sol.value(first, n)
    p2, s2 = sol.value(second, mh)
    # evaluate the Wronskian next to the column to keep the scales comparable
    w, sw = sol.wronskian(block_of(mh))
    return float(abs(p1 * p2) / (abs(z) * abs(w)) * np.exp(s1 + s2 - sw))


@dataclass(frozen=True)
class ResolventDecomposition:
    """``|R(2x, 2y-1)| = 1 / (2 |<Phi_plus, T_{y-1} ... T_x Phi_minus>|)`` on the unit circle."""

    phi_minus: np.ndarray
    phi_plus: np.ndarray
    product: np.ndarray
    value: float


def resolvent_decomposition(fw: FiniteWalk, z: complex, x: int, y: int) -> ResolventDecomposition:
    """Plane vectors and transfer product representing ``|R(2x, 2y - 1)|`` for ``x < y``."""
    if abs(abs(z) - 1.0) > UNIT_CIRCLE_ATOL:
        raise OffCircle(f"|z| = {abs(z)!r} is not on the unit circle")
    if not -fw.n <= x < y <= fw.n:
        raise SiteOutOfRange(f"need -N <= x < y <= N, got x={x}, y={y}, N={fw.n}")
    sol = boundary_solutions(fw, z)
    gm, _ = sol._pair("-", x)
    gp, _ = sol._pair("+", y)
    phi_minus = gm / (np.sqrt(2.0) * abs(gm[1]))
    phi_plus = np.array([-np.conj(gp[1]), np.conj(gp[0])]) / (np.sqrt(2.0) * abs(gp[1]))
    prod = np.eye(2, dtype=np.complex128)
    for t in sol.transfers[x + fw.n : y + fw.n]:
        prod = t @ prod
    inner = np.vdot(phi_plus, prod @ phi_minus)
    return ResolventDecomposition(phi_minus, phi_plus, prod, float(0.5 / abs(inner)))


# ---------------------------------------------------------------------------
# spectral polynomial


def spectral_polynomial_eval(fw: FiniteWalk, z: complex) -> complex:
    """``p_N(z) = z^{2N+1} (-v_1 + z e^{-i eta_R} v_2)`` with ``v = T_N...T_{-N} (1, z e^{-i eta_L})``.

    Its zeros are exactly the eigenvalues of W(N).
    """
    z = complex(z)
    if z == 0:
        raise ValueError("z must be nonzero")
    ts = tau_many(fw.coins, z, first_site=-fw.n)
    v = np.array([1.0, z * np.exp(-1j * fw.eta_l)], dtype=np.complex128)
    for t in ts:
        v = t @ v
    return complex(z ** (2 * fw.n + 1) * (-v[0] + z * np.exp(-1j * fw.eta_r) * v[1]))


def spectral_polynomial_coefficients(fw: FiniteWalk, n_samples: int | None = None) -> np.ndarray:
    """Monomial coefficients (ascending powers) from samples at roots of unity.

    With ``n_samples`` larger than the degree plus one, coefficients beyond the
    degree come out at roundoff level, which is how the degree is checked.
    """
    deg = 4 * (fw.n + 1)
    k = deg + 1 if n_samples is None else int(n_samples)
    nodes = np.exp(2j * np.pi * np.arange(k) / k)
    vals = np.array([spectral_polynomial_eval(fw, w) for w in nodes])
    return np.fft.fft(vals) / k


def leading_coefficient(fw: FiniteWalk) -> complex:
    """``e^{-i(eta_L + eta_R)} / prod_l a_l``."""
    a = fw.coins[:, 0, 0]
    bad = np.flatnonzero(np.abs(a) <= FLIP_ATOL)
    if bad.size:
        site = int(bad[0]) - fw.n
        raise FlipCoin(f"coin at site {site} is a flip", site)
    return complex(np.exp(-1j * (fw.eta_l + fw.eta_r)) / np.prod(a))
