"""The single place where (site, spin) pairs meet flat f-indices.

``delta_x (x) e_-`` is ``f_{2x}`` and ``delta_x (x) e_+`` is ``f_{2x+1}``. Spin 0
is ``e_-`` (moves left under the shift), spin 1 is ``e_+`` (moves right).
The finite restriction of half-width N keeps f-indices ``-2N-1 .. 2N+2``,
stored at matrix rows ``f + 2N + 1``.
"""

from __future__ import annotations

from .errors import SiteOutOfRange

MINUS = 0
PLUS = 1


def f_index(x: int, spin: int) -> int:
    if spin not in (MINUS, PLUS):
        raise ValueError(f"spin must be 0 (minus) or 1 (plus), got {spin!r}")
    return 2 * int(x) + spin


def site_spin(f: int) -> tuple[int, int]:
    f = int(f)
    return f // 2, f % 2


def m_hat(m: int) -> int:
    """Partner index: ``m - 1`` for even ``m``, ``m + 1`` for odd ``m``."""
    return m - 1 if m % 2 == 0 else m + 1


def block_of(f: int) -> int:
    """Site k whose pair ``(f_{2k-1}, f_{2k})`` contains ``f``."""
    return (int(f) + 1) // 2


def f_bounds(n: int) -> tuple[int, int]:
    return -2 * n - 1, 2 * n + 2


def dim(n: int) -> int:
    return 4 * (n + 1)


def matrix_index(n: int, f: int) -> int:
    lo, hi = f_bounds(n)
    if not lo <= f <= hi:
        raise SiteOutOfRange(f"f-index {f} outside [{lo}, {hi}] for N={n}")
    return f - lo


def restricted_index(n: int, x: int, spin: int) -> int:
    """Matrix row of ``delta_x (x) e_spin`` inside the restriction of half-width ``n``.

    Retained pairs are both spins on sites ``-n..n`` plus the inward-facing
    spin on each boundary site: ``(-n-1, +)`` and ``(n+1, -)``.
    """
    try:
        return matrix_index(n, f_index(x, spin))
    except SiteOutOfRange:
        raise SiteOutOfRange(f"(site {x}, spin {spin}) is not retained for N={n}") from None
