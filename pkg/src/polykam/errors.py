"""Exception taxonomy shared by all polykam modules.

Every error that a caller can reasonably recover from carries enough
payload to act on (partial results, offending indices, config paths).
"""

from __future__ import annotations


class PolykamError(Exception):
    """Base class for all package errors."""


class GridMismatch(PolykamError):
    """Operands live on different grids."""


class InvalidScalar(PolykamError):
    """A scalar argument is NaN or infinite."""


class NotStabilized(PolykamError):
    """Windowed minimum of cost powers did not settle within the window.

    Carries the partial barrier so a caller can inspect it or retry with
    a larger transient/window.
    """

    def __init__(self, message, partial=None, diagnostics=None):
        super().__init__(message)
        self.partial = partial
        self.diagnostics = diagnostics


class NotFixed(PolykamError):
    """A candidate weak-KAM solution fails the fixed-point residual test."""

    def __init__(self, message, residual=None, candidate=None):
        super().__init__(message)
        self.residual = residual
        self.candidate = candidate


class CohomologyMismatch(PolykamError):
    """Pseudograph operands carry different cohomology classes."""


class LiftWindowTooSmall(PolykamError):
    """A minimizing lift was attained on the scan-window boundary."""


class MapSolveFailed(PolykamError):
    """Implicit solve of the twist relation did not converge."""


class NoGap(PolykamError):
    """The complement of the contact set has no arc of the required length."""


class ArcTooShort(PolykamError):
    """A bump profile was requested on an arc shorter than four indices."""


class StepTooSmall(PolykamError):
    """Cohomology increment fell below delta_min while halving."""


class NotBacktrackable(PolykamError):
    """An operator word cannot be backtracked (contains a limit node)."""


class DiffusionStalled(PolykamError):
    """No catalog word yields a usable gap at the current cohomology.

    Carries the partial step trail and the blocking pseudograph.
    """

    def __init__(self, message, trail=None, pseudograph=None):
        super().__init__(message)
        self.trail = trail
        self.pseudograph = pseudograph


class Blocked(PolykamError):
    """Diffusion refused up front: a probe did not certify a full R-space."""

    def __init__(self, message, reports=None):
        super().__init__(message)
        self.reports = reports


class Unresolved(PolykamError):
    """Neither a common circle nor a gap could be certified."""


class ConfigError(PolykamError):
    """Configuration file is malformed; message names the offending key path."""
