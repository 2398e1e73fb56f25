"""Numerical certificates for the hypotheses behind localization.

Three properties of the group generated by the transfer matrices
``tau_z(supp mu)`` are checked:

* non-compactness, certified by a reproducible word with spectral radius > 1;
* strong irreducibility, certified through the orbit criterion (non-compact
  group, ``|det| = 1``, every projective orbit has more than two points);
* zeta-integrability, ``E |tau_theta(U)|^zeta < inf`` on the unit circle.

A failed search returns :class:`Inconclusive`; it never asserts compactness
or reducibility.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.integrate

from .coins import CoinDistribution, Haar, Mixture, UnitaryCoin, hadamard, realization_seed, two_coin_x
from .errors import FlipCoin
from .numerics import inv2, mat2_eig, projective_distance
from .transfer import tau_matrix

__all__ = [
    "Inconclusive",
    "NoncompactCertificate",
    "IrreducibilityWitness",
    "ZetaResult",
    "HypothesisReport",
    "noncompactness_search",
    "verify_certificate",
    "two_coin_product",
    "two_coin_closed_form",
    "exceptional_points",
    "eigenvector_coincidence",
    "irreducibility_orbit_test",
    "zeta_integrability",
    "check_hypotheses",
]

EXPANSION_ATOL = 1e-9
DISTINCT_DELTA = 1e-6


@dataclass(frozen=True)
class Inconclusive:
    reason: str

    def to_dict(self) -> dict:
        return {"verdict": "inconclusive", "reason": self.reason}


Letter = tuple[UnitaryCoin, int]


def _word_matrix(letters: Sequence[Letter], z: complex) -> np.ndarray:
    """Matrix product of the letters, left to right; power -1 means inverse."""
    m = np.eye(2, dtype=np.complex128)
    for coin, power in letters:
        t = tau_matrix(coin, z)
        m = m @ (t if power == 1 else inv2(t))
    return m


def _coin_json(c: UnitaryCoin) -> list:
    return c.to_json()


@dataclass(frozen=True)
class NoncompactCertificate:
    """A word ``L_1 L_2 ... L_k`` in transfer matrices with an eigenvalue off the unit circle."""

    z: complex
    letters: tuple[Letter, ...]
    spectral_radius: float
    eigenvalue_moduli: tuple[float, float]
    form: str
    extra: dict = field(default_factory=dict)

    @property
    def matrix(self) -> np.ndarray:
        return _word_matrix(self.letters, self.z)

    def to_dict(self) -> dict:
        return {
            "verdict": "noncompact",
            "form": self.form,
            "word": [{"coin": _coin_json(c), "power": p} for c, p in self.letters],
            "spectral_radius": self.spectral_radius,
            "eigenvalue_moduli": list(self.eigenvalue_moduli),
            **self.extra,
        }


def verify_certificate(cert: NoncompactCertificate, rtol: float = 1e-9) -> bool:
    """Rebuild the word and confirm its spectral radius (and that it exceeds 1)."""
    rho = float(np.abs(mat2_eig(cert.matrix).values).max())
    return abs(rho - cert.spectral_radius) <= rtol * max(1.0, rho) and rho > 1.0 + EXPANSION_ATOL


def _roundoff_floor(letters: Sequence[Letter], z: complex) -> float:
    # a word that is the identity up to roundoff E has eigenvalues 1 +- O(sqrt|E|)
    size = float(np.prod([np.linalg.norm(tau_matrix(c, z), 2) for c, _ in letters]))
    return 10.0 * np.sqrt(len(letters) * np.finfo(float).eps * size)


def _certificate(z, letters, form, extra=None) -> NoncompactCertificate | None:
    m = _word_matrix(letters, z)
    mods = np.abs(mat2_eig(m).values)
    if mods.max() > 1.0 + max(EXPANSION_ATOL, _roundoff_floor(letters, z)):
        return NoncompactCertificate(complex(z), tuple(letters), float(mods.max()), (float(mods[0]), float(mods[1])), form, extra or {})
    return None


def _atom_coins(mu: CoinDistribution) -> list[UnitaryCoin]:
    return [c for c, _ in mu.atoms() if not c.is_flip]


def _haar_part(mu: CoinDistribution) -> bool:
    if isinstance(mu, Haar):
        return True
    if isinstance(mu, Mixture):
        return any(_haar_part(d) for d, _ in mu.parts)
    return False


def _same_phases_other_ratio(u: UnitaryCoin, ratio: float) -> UnitaryCoin:
    """Coin with the phases of ``u`` but ``|b| / |a| = ratio``."""
    theta = np.arctan(ratio)
    a = np.exp(1j * np.angle(u.a)) * np.cos(theta)
    b = np.exp(1j * np.angle(u.b)) * np.sin(theta)
    c = np.exp(1j * np.angle(u.c)) * np.sin(theta)
    d = np.exp(1j * np.angle(u.d)) * np.cos(theta)
    return UnitaryCoin.from_matrix([[a, b], [c, d]], atol=1e-10)


def _open_support_certificate(z, rng) -> NoncompactCertificate | None:
    u = Haar().sample(rng)
    r = abs(u.b) / abs(u.a)
    r2 = r * 1.5 + 0.5
    u2 = _same_phases_other_ratio(u, r2)
    f = np.sqrt((1 + r**2) * (1 + r2**2)) - r * r2
    g = r * np.sqrt(1 + r2**2) - r2 * np.sqrt(1 + r**2)
    return _certificate(
        z, [(u, 1), (u2, -1)], "T(r) T(r')^-1 with shared phases",
        {"r": float(r), "r_prime": float(r2), "f": float(f), "g": float(g), "closed_form_moduli": [float(abs(f + g)), float(abs(f - g))]},
    )


def noncompactness_search(
    mu: CoinDistribution,
    z: complex,
    max_word_length: int = 6,
    trials: int = 200,
    seed: int = 0,
) -> NoncompactCertificate | Inconclusive:
    """Look for an element of the generated group with an eigenvalue of modulus > 1.

    Atom sets are searched exhaustively by word length, starting with the
    quotients ``T_i T_j^{-1}``. A Haar component is handled with two coins
    that share their phases but differ in ``|b| / |a|``; their quotient has
    eigenvalues ``f +- g`` with ``f^2 - g^2 = 1``.
    """
    if mu.reflectivity() > 0:
        return Inconclusive("distribution contains flip coins; transfer matrices are undefined")
    z = complex(z)
    rng = np.random.default_rng(realization_seed(seed, 0))
    if _haar_part(mu):
        for _ in range(max(1, trials)):
            cert = _open_support_certificate(z, rng)
            if cert is not None:
                return cert
    atoms = _atom_coins(mu)
    if not atoms:
        return Inconclusive("no transfer matrices available")
    for i, j in itertools.permutations(range(len(atoms)), 2):
        cert = _certificate(z, [(atoms[i], 1), (atoms[j], -1)], "T_i T_j^-1")
        if cert is not None:
            return cert
    letters = [(c, p) for c in atoms for p in (1, -1)]
    budget = trials
    for length in range(1, max_word_length + 1):
        for word in itertools.product(letters, repeat=length):
            if any(u is v and p == -q for (u, p), (v, q) in zip(word, word[1:])):
                continue  # not freely reduced
            cert = _certificate(z, list(word), f"word of length {length}")
            if cert is not None:
                return cert
            budget -= 1
        if budget <= 0 and length >= 2:
            break
    return Inconclusive(f"no expanding word up to length {max_word_length}")


# ---------------------------------------------------------------------------
# the Hadamard / X two-coin family


def two_coin_product(a: complex, b: complex, z: complex = 1.0) -> np.ndarray:
    """``T_H T_X^{-1}`` for the Hadamard coin and ``X = ((a, b), (-conj b, conj a))``."""
    return tau_matrix(hadamard(), z) @ inv2(tau_matrix(two_coin_x(a, b), z))


def two_coin_closed_form(a: complex, b: complex) -> tuple[float, float]:
    """``|lambda_+-| = |i Im b +- sqrt(|a|^2 - (Im b)^2)| / |a|`` (principal complex root)."""
    a, b = complex(a), complex(b)
    if abs(a) == 0:
        raise FlipCoin("a = 0: the coin is a flip")
    root = np.sqrt(complex(abs(a) ** 2 - b.imag**2))
    return float(abs(1j * b.imag + root) / abs(a)), float(abs(1j * b.imag - root) / abs(a))


def exceptional_points(a: complex, b: complex) -> np.ndarray:
    """Spectral parameters where an eigenvector of ``T_H T_X^{-1}`` meets one of ``T_H^{-1} T_X``.

    Solves the four sign choices of

        (Re b - sqrt2 +- i g) / (sqrt2 b - 1) = z^2 (Re b + sqrt2 +- i g) / (sqrt2 b + 1),
        g = sqrt((Im b)^2 - |a|^2),

    for ``z`` (both square roots), returning the distinct solutions.
    """
    b = complex(b)
    s = np.sqrt(2.0)
    g = np.sqrt(complex(b.imag**2 - abs(complex(a)) ** 2))
    out = []
    for s1, s2 in itertools.product((1, -1), repeat=2):
        num = (b.real - s + s1 * 1j * g) * (s * b + 1)
        den = (s * b - 1) * (b.real + s + s2 * 1j * g)
        if abs(den) == 0:
            continue
        r = np.sqrt(num / den)
        out.extend([r, -r])
    pts = []
    for p in out:
        if all(abs(p - q) > 1e-12 for q in pts):
            pts.append(p)
    return np.array(pts)


def eigenvector_coincidence(t1: np.ndarray, t2: np.ndarray) -> float:
    """Smallest projective distance between eigenvectors of ``t1 t2^{-1}`` and ``t1^{-1} t2``."""
    e1 = mat2_eig(t1 @ inv2(t2)).vectors
    e2 = mat2_eig(inv2(t1) @ t2).vectors
    return float(min(projective_distance(e1[:, i], e2[:, j]) for i in range(2) for j in range(2)))


# ---------------------------------------------------------------------------
# strong irreducibility


@dataclass(frozen=True)
class IrreducibilityWitness:
    z: complex
    criterion: str
    orbit: np.ndarray  # three pairwise distinct projective points x, Mx, M^2 x
    loxodromic: NoncompactCertificate
    eigenvector_checks: list
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "verdict": "strongly_irreducible",
            "criterion": self.criterion,
            "orbit": [[[v.real, v.imag] for v in p] for p in self.orbit],
            "loxodromic_word": self.loxodromic.to_dict()["word"],
            "eigenvector_checks": self.eigenvector_checks,
            **self.extra,
        }


def _orbit3(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    p1 = m @ v
    p2 = m @ p1
    return np.stack([v / np.linalg.norm(v), p1 / np.linalg.norm(p1), p2 / np.linalg.norm(p2)])


def _pairwise_distinct(pts: np.ndarray, delta: float) -> float:
    return float(min(projective_distance(pts[i], pts[j]) for i, j in ((0, 1), (0, 2), (1, 2))))


def irreducibility_orbit_test(
    mu: CoinDistribution,
    z: complex,
    trials: int = 10,
    seed: int = 0,
    *,
    delta: float = DISTINCT_DELTA,
) -> IrreducibilityWitness | Inconclusive:
    """Certify strong irreducibility through projective orbits.

    An expanding element ``M`` moves every projective point except its two
    eigenvectors along an infinite orbit. So it suffices to show (i) a random
    point whose orbit ``x, Mx, M^2 x`` has three distinct points and (ii) that
    each eigenvector of ``M`` also has three distinct points in its orbit under
    some other group element.
    """
    z = complex(z)
    lox = noncompactness_search(mu, z, seed=seed)
    if isinstance(lox, Inconclusive):
        return Inconclusive("no expanding element found, so the orbit criterion does not apply: " + lox.reason)
    m = lox.matrix
    rng = np.random.default_rng(realization_seed(seed, 1))

    orbit = None
    for _ in range(max(1, trials)):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        pts = _orbit3(m, v)
        if _pairwise_distinct(pts, delta) >= delta:
            orbit = pts
            break
    if orbit is None:
        return Inconclusive(f"no orbit of three distinct points found in {trials} trials")

    # other elements to move the eigenvectors of M
    candidates: list[np.ndarray] = []
    for coin in _atom_coins(mu):
        t = tau_matrix(coin, z)
        candidates += [t, inv2(t)]
    if _haar_part(mu):
        for _ in range(max(1, trials)):
            t = tau_matrix(Haar().sample(rng), z)
            candidates += [t, inv2(t)]
    candidates += [a @ b for a, b in itertools.product(candidates[:8], repeat=2)]

    checks = []
    for k, e in enumerate(mat2_eig(m).vectors.T):
        found = None
        for g in candidates:
            pts = _orbit3(g, e)
            sep = _pairwise_distinct(pts, delta)
            if sep >= delta:
                found = sep
                break
        if found is None:
            return Inconclusive(f"eigenvector {k} of the expanding element has an orbit of at most two points under the tried elements")
        checks.append({"eigenvector": k, "min_separation": found})

    extra = {}
    atoms = _atom_coins(mu)
    if len(atoms) == 2 and not _haar_part(mu):
        t1, t2 = tau_matrix(atoms[0], z), tau_matrix(atoms[1], z)
        extra["eigenvector_coincidence_distance"] = eigenvector_coincidence(t1, t2)
    return IrreducibilityWitness(
        z, "orbit criterion: non-compact group, |det| = 1, every projective orbit has more than two points",
        orbit, lox, checks, extra,
    )


# ---------------------------------------------------------------------------
# zeta-integrability


@dataclass(frozen=True)
class ZetaResult:
    zeta: float
    value: float | None
    divergent: bool
    method: str
    refinement: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": "divergent" if self.divergent else "finite",
            "zeta": self.zeta,
            "expectation": self.value,
            "method": self.method,
        }


def _haar_norm_moment(zeta: float, eps: float) -> float:
    # |a|^2 = u ~ U[0, 1]; on the unit circle |tau| = (1 + sqrt(1 - u)) / sqrt(u).
    # With u = e^{-s} the integrand becomes (1 + sqrt(1 - e^{-s}))^zeta e^{(zeta/2 - 1) s}.
    s_max = -np.log(eps)

    def integrand(s):
        return (1.0 + np.sqrt(-np.expm1(-s))) ** zeta * np.exp((0.5 * zeta - 1.0) * s)

    val, _ = scipy.integrate.quad(integrand, 0.0, s_max, limit=400)
    return float(val)


def _haar_zeta(zeta: float) -> ZetaResult:
    """Quadrature of ``E |tau_theta(U)|^zeta`` truncated at ``|a|^2 >= eps`` for shrinking ``eps``.

    Each refinement lowers ``eps`` by four decades. A convergent integral has
    increments shrinking by a fixed ratio below one, and the tail is summed as
    a geometric series; increments that do not shrink mean divergence.
    """
    eps_list = [10.0 ** (-k) for k in range(4, 44, 4)]
    vals = np.array([_haar_norm_moment(zeta, e) for e in eps_list])
    refinement = [{"eps": e, "value": float(v)} for e, v in zip(eps_list, vals)]
    steps = np.diff(vals)
    if not np.all(np.isfinite(vals)):
        return ZetaResult(zeta, None, True, "quadrature under refinement", refinement)
    if steps[-1] <= 1e-14 * abs(vals[-1]):
        return ZetaResult(zeta, float(vals[-1]), False, "quadrature under refinement", refinement)
    ratio = steps[-1] / steps[-2]
    if not ratio < 1.0 - 1e-3:
        return ZetaResult(zeta, None, True, "quadrature under refinement", refinement)
    return ZetaResult(zeta, float(vals[-1] + steps[-1] * ratio / (1.0 - ratio)), False, "quadrature under refinement", refinement)


def zeta_integrability(mu: CoinDistribution, zeta: float) -> ZetaResult:
    """``E |tau_theta(U)|^zeta`` for ``|theta| = 1`` with ``U ~ mu``, or a divergence flag.

    The operator norm on the unit circle is ``(1 + |c|) / |a|`` independently of
    ``theta``; atoms contribute exactly, a Haar component by quadrature over the
    uniform law of ``|a|^2``.
    """
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    zeta = float(zeta)
    if isinstance(mu, Haar):
        return _haar_zeta(zeta)
    if isinstance(mu, Mixture):
        total, refinement = 0.0, []
        for part, w in mu.parts:
            res = zeta_integrability(part, zeta)
            if res.divergent:
                return ZetaResult(zeta, None, True, "mixture", res.refinement)
            total += w * res.value
        return ZetaResult(zeta, total, False, "mixture", refinement)
    total = 0.0
    for coin, w in mu.atoms():
        if abs(coin.a) == 0:
            return ZetaResult(zeta, None, True, "exact sum over atoms (flip atom)")
        total += w * ((1.0 + abs(coin.c)) / abs(coin.a)) ** zeta
    return ZetaResult(zeta, total, False, "exact sum over atoms")


# ---------------------------------------------------------------------------
# combined report


@dataclass(frozen=True)
class HypothesisReport:
    z: complex
    noncompact: NoncompactCertificate | Inconclusive
    irreducible: IrreducibilityWitness | Inconclusive
    zeta: ZetaResult
    exceptional: dict | None = None

    def verdicts(self) -> dict:
        return {
            "noncompact": "certified" if isinstance(self.noncompact, NoncompactCertificate) else "inconclusive",
            "strongly_irreducible": "certified" if isinstance(self.irreducible, IrreducibilityWitness) else "inconclusive",
            "zeta_integrable": "divergent" if self.zeta.divergent else "finite",
        }

    def to_dict(self) -> dict[str, Any]:
        out = {
            "z": [self.z.real, self.z.imag],
            "verdicts": self.verdicts(),
            "noncompact": self.noncompact.to_dict(),
            "irreducible": self.irreducible.to_dict(),
            "zeta": self.zeta.to_dict(),
        }
        if self.exceptional is not None:
            out["exceptional"] = self.exceptional
        return out


def _hadamard_pair(mu: CoinDistribution) -> UnitaryCoin | None:
    """The partner X when ``mu`` is supported on the Hadamard coin and one X-type coin."""
    atoms = _atom_coins(mu)
    if len(atoms) != 2 or _haar_part(mu):
        return None
    h = hadamard().matrix
    for k in (0, 1):
        if np.allclose(atoms[k].matrix, h, atol=1e-12):
            x = atoms[1 - k]
            if abs(x.d - np.conj(x.a)) < 1e-12 and abs(x.c + np.conj(x.b)) < 1e-12:
                return x
    return None


def check_hypotheses(mu: CoinDistribution, z: complex, *, zeta: float = 0.5, trials: int = 10, seed: int = 0) -> HypothesisReport:
    z = complex(z)
    nc = noncompactness_search(mu, z, seed=seed)
    irr = irreducibility_orbit_test(mu, z, trials=trials, seed=seed)
    zr = zeta_integrability(mu, zeta)
    exc = None
    x = _hadamard_pair(mu)
    if x is not None:
        pts = exceptional_points(x.a, x.b)
        exc = {
            "points": [[complex(p).real, complex(p).imag] for p in pts],
            "distance_to_nearest": float(np.min(np.abs(pts - z))) if pts.size else None,
        }
    return HypothesisReport(z, nc, irr, zr, exc)
