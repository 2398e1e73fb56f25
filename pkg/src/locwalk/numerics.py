"""Small complex linear algebra used throughout the package.

2x2 matrices are plain ``numpy`` arrays of shape ``(2, 2)`` and dtype
``complex128``; projective points are unit vectors of shape ``(..., 2)`` in a
canonical phase. Only the dense eigensolver for unitaries of moderate size
leans on LAPACK (via :func:`scipy.linalg.schur`).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NotUnitary

TWO_PI = 2.0 * np.pi

# relative tolerance below which two eigenvalue moduli count as tied
_TIE_RTOL = 1e-12
# largest dense unitary we agree to diagonalize
MAX_DENSE_DIM = 4096


class Eig2(NamedTuple):
    values: np.ndarray  # shape (2,)
    vectors: np.ndarray  # columns are unit eigenvectors, shape (2, 2)
    defective: bool


class UnitaryEig(NamedTuple):
    values: np.ndarray  # shape (d,), on the unit circle
    vectors: np.ndarray  # orthonormal columns, shape (d, d)
    phases: np.ndarray  # arg(values) in [0, 2*pi), ascending


def as_cmat2(m) -> np.ndarray:
    """Coerce to a finite complex 2x2 array (copying)."""
    arr = np.array(m, dtype=np.complex128)
    if arr.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("2x2 matrix has non-finite entries")
    return arr


def det2(m: np.ndarray) -> complex:
    return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def inv2(m: np.ndarray) -> np.ndarray:
    d = det2(m)
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / d


def phase_of(z) -> np.ndarray:
    """Argument mapped to [0, 2*pi)."""
    return np.mod(np.angle(z), TWO_PI)


def _ldexp_c(x: np.ndarray, e: int) -> np.ndarray:
    return np.ldexp(x.real, e) + 1j * np.ldexp(x.imag, e)


def _eigvec(m: np.ndarray, lam: complex, scale: float) -> np.ndarray | None:
    # (m - lam) v = 0 has the two candidate solutions below; take the better conditioned one
    va = np.array([m[0, 1], lam - m[0, 0]])
    vb = np.array([lam - m[1, 1], m[1, 0]])
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    v, n = (va, na) if na >= nb else (vb, nb)
    if n <= 1e-14 * scale:
        return None
    return v / n


def mat2_eig(m) -> Eig2:
    """Closed-form eigen-decomposition of a complex 2x2 matrix.

    Eigenvalues come ordered by descending modulus, ties broken by ascending
    phase in [0, 2*pi). A defective matrix returns its repeated eigenvalue twice
    with the single eigenvector in both columns and ``defective=True``.
    """
    m = as_cmat2(m)
    peak = float(np.abs(m).max())
    if peak == 0.0 or not np.isfinite(peak):
        return Eig2(np.full(2, peak, dtype=np.complex128), np.eye(2, dtype=np.complex128), False)
    # power-of-two rescaling is exact and keeps the closed form clear of under/overflow
    e = int(np.frexp(peak)[1])
    vals = _eig_unit_scale(_ldexp_c(m, -e))
    return Eig2(_ldexp_c(vals.values, e), vals.vectors, vals.defective)


def _eig_unit_scale(m: np.ndarray) -> Eig2:
    scale = float(np.abs(m).max())
    half = 0.5 * (m[0, 0] + m[1, 1])
    det = det2(m)
    disc = np.sqrt(complex(half * half - det))
    plus, minus = half + disc, half - disc
    l1 = plus if abs(plus) >= abs(minus) else minus
    l2 = det / l1 if l1 != 0 else 0.0 + 0.0j
    lams = [complex(l1), complex(l2)]

    m1, m2 = abs(lams[0]), abs(lams[1])
    tied = abs(m1 - m2) <= _TIE_RTOL * max(m1, m2, 1e-300)
    if (tied and phase_of(lams[1]) < phase_of(lams[0])) or (not tied and m2 > m1):
        lams.reverse()

    coincide = abs(lams[0] - lams[1]) <= 1e-12 * scale
    if coincide:
        off = max(abs(m[0, 1]), abs(m[1, 0]), abs(m[0, 0] - m[1, 1]))
        if off <= 1e-14 * scale:
            return Eig2(np.array(lams), np.eye(2, dtype=np.complex128), False)
        v = _eigvec(m, lams[0], scale)
        vecs = np.column_stack([v, v])
        return Eig2(np.array(lams), vecs, True)

    vecs = np.empty((2, 2), dtype=np.complex128)
    for k, lam in enumerate(lams):
        v = _eigvec(m, lam, scale)
        vecs[:, k] = v if v is not None else np.eye(2)[:, k]
    return Eig2(np.array(lams), vecs, False)


def spectral_radius2(m) -> float:
    return float(abs(mat2_eig(m).values[0]))


def mat2_singular_values(m) -> tuple[float, float]:
    """Singular values (s1 >= s2 >= 0) of a complex 2x2 matrix.

    With ``u = det / |det|``, ``(s1 +- s2)^2 = |a +- u conj(d)|^2 + |b -+ u conj(c)|^2``,
    which gives both sums without the cancellation of ``|M|_F^2 - 2 |det|``.
    """
    m = as_cmat2(m)
    scale = float(np.abs(m).max())
    if scale == 0.0 or not np.isfinite(scale):
        return scale, scale
    e = int(np.frexp(scale)[1])
    (a, b), (c, d) = _ldexp_c(m, -e)
    det = a * d - b * c
    u = det / abs(det) if det != 0 else 1.0
    total = np.hypot(abs(a + u * np.conj(d)), abs(b - u * np.conj(c)))
    diff = np.hypot(abs(a - u * np.conj(d)), abs(b + u * np.conj(c)))
    return float(np.ldexp(0.5 * (total + diff), e)), float(np.ldexp(0.5 * abs(total - diff), e))


def op_norm2(m) -> float:
    return mat2_singular_values(m)[0]


def projective_point(v) -> np.ndarray:
    """Unit representative whose first nonzero component is real and positive.

    Works on a single vector of shape (2,) or a stack of shape (..., 2).
    """
    v = np.asarray(v, dtype=np.complex128)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("the zero vector is not a projective point")
    u = v / norms
    lead = np.where(u[..., 0] != 0, u[..., 0], u[..., 1])
    return u * (np.conj(lead) / np.abs(lead))[..., None]


def projective_distance(x, y) -> np.ndarray | float:
    """|det(x, y)| / (|x| |y|), broadcasting over leading axes."""
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    num = np.abs(x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0])
    den = np.linalg.norm(x, axis=-1) * np.linalg.norm(y, axis=-1)
    d = np.minimum(num / den, 1.0)
    return float(d) if np.ndim(d) == 0 else d


def unitarity_residual(m: np.ndarray) -> float:
    """Frobenius norm of M^H M - I (an upper bound for the operator norm)."""
    m = np.asarray(m)
    return float(np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0])))


def unitary_eig(m, *, atol: float = 1e-8) -> UnitaryEig:
    """Eigen-decomposition of a dense unitary matrix, sorted by phase.

    The complex Schur form of a normal matrix is diagonal, so the Schur
    vectors are an orthonormal eigenbasis even for degenerate spectra.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] > MAX_DENSE_DIM:
        raise ValueError(f"dimension {m.shape[0]} exceeds {MAX_DENSE_DIM}")
    res = unitarity_residual(m)
    if res > atol:
        raise NotUnitary(f"|M^H M - I| = {res:.3e} exceeds {atol:.1e}")
    t, z = scipy.linalg.schur(m, output="complex")
    values = np.diag(t).copy()
    phases = phase_of(values)
    order = np.argsort(phases, kind="stable")
    return UnitaryEig(values[order], z[:, order], phases[order])


def unitary_eigvals(m) -> np.ndarray:
    """Eigenvalues only, sorted by phase; skips the unitarity check."""
    values = scipy.linalg.eigvals(np.asarray(m, dtype=np.complex128), check_finite=False)
    return values[np.argsort(phase_of(values), kind="stable")]
