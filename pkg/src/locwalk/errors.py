"""Exception types raised by locwalk.

Every numerical precondition failure derives from :class:`LocwalkError` so the
CLI can map it to exit status 1 and name the failing operation.
"""

from __future__ import annotations


class LocwalkError(Exception):
    """Base class for numerical precondition failures."""


class NotUnitary(LocwalkError, ValueError):
    pass


class FlipCoin(LocwalkError, ValueError):
    """A coin with vanishing diagonal entry was fed to the transfer-matrix path."""

    def __init__(self, message: str, site: int | None = None):
        super().__init__(message)
        self.site = site


class FlipEncountered(FlipCoin):
    """A flip coin was drawn while sampling a transfer-matrix chain."""


class SingularCorner(LocwalkError, ValueError):
    pass


class OffCircle(LocwalkError, ValueError):
    pass


class NearSpectrum(LocwalkError, ValueError):
    pass


class SiteOutOfRange(LocwalkError, IndexError):
    pass


class InsufficientHorizon(LocwalkError, ValueError):
    pass


class KernelSingularity(LocwalkError, ValueError):
    pass


class ConfigError(ValueError):
    """Invalid experiment or distribution configuration (CLI exit status 2)."""
