"""Discrete pseudographs: cohomology class plus a potential on the grid.

A pseudograph is the discrete stand-in for the graph of ``c dx + du``:
a real cohomology parameter ``c`` together with a normalized grid
function ``u``.  The sum with a one-form splits canonically into a
constant part (which moves ``c``) and an exact part (which moves ``u``),
and the wedge of two pseudographs of the same cohomology is the contact
set of their potentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArcTooShort, CohomologyMismatch, InvalidScalar
from .models import PhasePoint
from .tropical import ArgminSet, CostMatrix, GridFunction, GridSpec, half_oscillation


@dataclass(frozen=True)
class Pseudograph:
    """Cohomology ``c`` and normalized potential ``u`` (min zero)."""

    c: float
    u: GridFunction

    def __post_init__(self):
        if not math.isfinite(self.c):
            raise InvalidScalar(f"cohomology must be finite, got {self.c!r}")
        object.__setattr__(self, "u", self.u.normalize())

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @classmethod
    def flat(cls, c: float, grid: GridSpec) -> "Pseudograph":
        return cls(c, GridFunction(grid, np.zeros(grid.n)))

    def momentum(self) -> np.ndarray:
        """Momentum samples ``c + du`` with cyclic central differences."""
        u = self.u.values
        n = self.grid.n
        return self.c + 0.5 * n * (np.roll(u, -1) - np.roll(u, 1))


@dataclass(frozen=True)
class BumpForm:
    """Single-signed one-form sample supported on a cyclic arc.

    ``values`` are the samples ``nu_i`` (all of one sign); the mean
    ``sum(nu) / n`` is the cohomology increment the form carries.
    """

    grid: GridSpec
    values: np.ndarray
    arc: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "arc", tuple(int(i) for i in self.arc))
        if values.shape != (self.grid.n,):
            raise ValueError("bump samples must match the grid")
        if values.min() < 0 < values.max():
            raise ValueError("bump samples must be single-signed")
        support = set(np.flatnonzero(values).tolist())
        if not support <= set(self.arc):
            raise ValueError("bump support leaks outside its arc")

    @property
    def increment(self) -> float:
        return float(self.values.sum() / self.grid.n)


def wedge(u, v, tol: float | None = None) -> ArgminSet:
    """Indices where ``u - v`` attains its minimum (within ``tol``).

    Accepts either grid functions or pseudographs; pseudograph operands
    must carry the same cohomology (the wedge of two pseudographs is only
    defined at equal cohomology).
    """
    if isinstance(u, Pseudograph) or isinstance(v, Pseudograph):
        if not (isinstance(u, Pseudograph) and isinstance(v, Pseudograph)):
            raise CohomologyMismatch("cannot wedge a pseudograph with a bare function")
        if abs(u.c - v.c) > 1e-12:
            raise CohomologyMismatch(f"cohomologies differ: {u.c} vs {v.c}")
        u, v = u.u, v.u
    if u.grid != v.grid:
        raise CohomologyMismatch("wedge operands live on different grids")
    diff = u.values - v.values
    if tol is None:
        tol = 1e-9 * (1.0 + float(diff.max() - diff.min()))
    members = np.flatnonzero(diff <= diff.min() + tol)
    return ArgminSet(u.grid, tuple(int(i) for i in members))


def wedge_graph(g: Pseudograph, g2: Pseudograph, tol: float | None = None):
    """Wedge as a set of phase points ``(x_i, c + du(x_i))``.

    Both pseudographs must carry the same cohomology; momenta are read
    from ``g`` by central differences (the two derivatives agree on the
    wedge up to discretization).
    """
    if abs(g.c - g2.c) > 1e-12:
        raise CohomologyMismatch(f"cohomologies differ: {g.c} vs {g2.c}")
    members = wedge(g.u, g2.u, tol)
    mom = g.momentum()
    points = tuple(PhasePoint(i / g.grid.n, float(mom[i])) for i in members.members)
    return members, points


def semiconcavity_constant(u: GridFunction) -> float:
    """Largest cyclic second difference, scaled by ``n^2``."""
    vals = u.values
    n = u.grid.n
    second = np.roll(vals, 1) - 2.0 * vals + np.roll(vals, -1)
    return float(n * n * second.max())


def cost_semiconcavity(a: CostMatrix) -> float:
    """Largest second difference of the cost in its second argument."""
    m = a.entries
    n = a.grid.n
    second = np.roll(m, 1, axis=1) - 2.0 * m + np.roll(m, -1, axis=1)
    return float(n * n * second.max())


def pseudograph_sum(g: Pseudograph, nu: BumpForm) -> Pseudograph:
    """Add a one-form to a pseudograph, splitting it into ``dc`` and ``dP``.

    The constant part of ``nu`` raises the cohomology by its mean; the
    mean-free remainder integrates to a periodic primitive ``P`` that is
    added to the potential.  ``P[0] = 0`` and
    ``P[i] = sum_{j < i} (nu_j - dc) / n``.
    """
    if g.grid != nu.grid:
        raise CohomologyMismatch("pseudograph and bump live on different grids")
    n = g.grid.n
    dc = nu.increment
    primitive = np.concatenate(([0.0], np.cumsum(nu.values[:-1] - dc) / n))
    return Pseudograph(g.c + dc, GridFunction(g.grid, g.u.values + primitive))


def is_c11_graph(g: Pseudograph, sc_bound: float, margin: float = 1.05) -> bool:
    """Both-sided curvature test: discrete second differences of the
    potential bounded by ``margin * sc_bound`` in absolute value, which is
    the discrete counterpart of semiconcave plus semiconvex, i.e. C^{1,1}.
    """
    vals = g.u.values
    n = g.grid.n
    second = n * n * (np.roll(vals, 1) - 2.0 * vals + np.roll(vals, -1))
    return bool(np.abs(second).max() <= margin * sc_bound + 1e-9)


def bump_form(arc, delta_c: float, grid: GridSpec) -> BumpForm:
    """Smooth nonnegative bump on a cyclic arc carrying increment ``delta_c``.

    The profile is ``s (1 - cos(2 pi t))`` with ``t`` running from 0 to 1
    across the arc, so both arc endpoints carry exactly zero; ``s`` is
    chosen so the mean of the samples equals ``delta_c``.  Arcs shorter
    than four indices are refused.
    """
    arc = tuple(int(i) % grid.n for i in arc)
    if len(arc) < 4:
        raise ArcTooShort(f"bump arc needs at least 4 indices, got {len(arc)}")
    if not math.isfinite(delta_c):
        raise InvalidScalar(f"delta_c must be finite, got {delta_c!r}")
    ell = len(arc)
    profile = 1.0 - np.cos(2.0 * np.pi * np.arange(ell) / (ell - 1))
    total = profile.sum()
    scale = delta_c * grid.n / total if total > 0 else 0.0
    values = np.zeros(grid.n)
    values[list(arc)] = scale * profile
    return BumpForm(grid, values, arc)
