"""Generating functions of exact twist maps and their discretized costs.

A generator here is a function ``S(y, x)`` on the universal cover with
``S(y + 1, x + 1) = S(y, x)`` and a negative cross derivative (the twist
condition).  It induces the exact symplectic map

    (y, p) with p = -dS/dy(y, x)   maps to   (x, dS/dx(y, x)).

All built-in kinds have the mechanical form ``S(y, x) = (x - y)^2 / 2 + V(y)``
with a trigonometric-polynomial potential, which keeps the implicit twist
relation solvable in closed form while the generic bisection/Newton path is
retained as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidScalar, LiftWindowTooSmall, MapSolveFailed
from .tropical import CostMatrix, GridSpec, compose_costs, tropical_matmul

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhasePoint:
    """Point on the cylinder: position mod 1, momentum on the real line."""

    x: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.p)):
            raise InvalidScalar(f"non-finite phase point ({self.x}, {self.p})")
        object.__setattr__(self, "x", self.x % 1.0)


def cylinder_distance(a: PhasePoint, b: PhasePoint) -> float:
    """Euclidean distance with the circle metric in x and absolute p."""
    dx = abs(a.x - b.x)
    dx = min(dx, 1.0 - dx)
    return math.hypot(dx, a.p - b.p)


@dataclass(frozen=True)
class TwistGenerator:
    """Generating function of one exact twist map.

    ``kind`` is one of ``pure_twist``, ``standard``, ``fourier``.  The
    potential is ``V(y) = sum_m cos_coeffs[m-1] cos(2 pi m y)
    + sin_coeffs[m-1] sin(2 pi m y)`` plus, for the standard kind,
    ``(k / 4 pi^2) (1 - cos 2 pi y)``.
    """

    kind: str
    k: float = 0.0
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("pure_twist", "standard", "fourier"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(c) for c in self.sin_coeffs))
        if not self.label:
            object.__setattr__(self, "label", self._default_label())
        self._check_twist()

    def _default_label(self) -> str:
        if self.kind == "pure_twist":
            return "twist"
        if self.kind == "standard":
            return f"std(k={self.k:g})"
        return "fourier"

    def _check_twist(self):
        # For S = (x-y)^2/2 + V(y) the cross derivative is identically -1,
        # but verify numerically on a coarse sample so a future generator
        # form cannot silently violate the twist condition.
        ys = np.linspace(0.0, 1.0, 17)
        xs = np.linspace(-1.5, 2.5, 17)
        eps = 1e-5
        yy, xx = np.meshgrid(ys, xs, indexing="ij")
        cross = (
            self.S(yy + eps, xx + eps)
            - self.S(yy + eps, xx - eps)
            - self.S(yy - eps, xx + eps)
            + self.S(yy - eps, xx - eps)
        ) / (4 * eps * eps)
        if cross.max() >= -1e-6:
            raise ValueError(f"twist condition violated for {self.label}")

    # -- potential ---------------------------------------------------------

    def V(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        if self.kind == "standard":
            out = out + self.k / (4 * math.pi**2) * (1.0 - np.cos(TWO_PI * y))
        for m, c in enumerate(self.cos_coeffs, start=1):
            out = out + c * np.cos(TWO_PI * m * y)
        for m, s in enumerate(self.sin_coeffs, start=1):
            out = out + s * np.sin(TWO_PI * m * y)
        return out

    def dV(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        if self.kind == "standard":
            out = out + self.k / TWO_PI * np.sin(TWO_PI * y)
        for m, c in enumerate(self.cos_coeffs, start=1):
            out = out - c * TWO_PI * m * np.sin(TWO_PI * m * y)
        for m, s in enumerate(self.sin_coeffs, start=1):
            out = out + s * TWO_PI * m * np.cos(TWO_PI * m * y)
        return out

    def d2V(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        if self.kind == "standard":
            out = out + self.k * np.cos(TWO_PI * y)
        for m, c in enumerate(self.cos_coeffs, start=1):
            out = out - c * (TWO_PI * m) ** 2 * np.cos(TWO_PI * m * y)
        for m, s in enumerate(self.sin_coeffs, start=1):
            out = out - s * (TWO_PI * m) ** 2 * np.sin(TWO_PI * m * y)
        return out

    # -- generating function ------------------------------------------------

    def S(self, y, x):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        return 0.5 * (x - y) ** 2 + self.V(y)

    def d1S(self, y, x):
        return -(np.asarray(x, float) - np.asarray(y, float)) + self.dV(y)

    def d2S(self, y, x):
        return np.asarray(x, float) - np.asarray(y, float)

    def sc_bound(self) -> float:
        """Upper bound on the semiconcavity constant of induced costs."""
        bound = 1.0
        if self.kind == "standard":
            bound += abs(self.k)
        for m, c in enumerate(self.cos_coeffs, start=1):
            bound += (TWO_PI * m) ** 2 * abs(c)
        for m, s in enumerate(self.sin_coeffs, start=1):
            bound += (TWO_PI * m) ** 2 * abs(s)
        return bound

    # -- constructors --------------------------------------------------------

    @classmethod
    def pure_twist(cls) -> "TwistGenerator":
        return cls(kind="pure_twist")

    @classmethod
    def standard(cls, k: float) -> "TwistGenerator":
        return cls(kind="standard", k=float(k))

    @classmethod
    def fourier(cls, cos_coeffs=(), sin_coeffs=()) -> "TwistGenerator":
        return cls(kind="fourier", cos_coeffs=tuple(cos_coeffs), sin_coeffs=tuple(sin_coeffs))


def apply_map(gen: TwistGenerator, z: PhasePoint) -> PhasePoint:
    """Time-one map induced by the generating function.

    For the mechanical kinds the twist relation is linear in ``x`` and the
    closed form ``x = y + p + V'(y)`` is used; the ``fourier`` kind goes
    through the generic implicit solve, and the two paths are checked
    against each other in the test suite.
    """
    if gen.kind in ("pure_twist", "standard"):
        vy = float(gen.dV(z.x))
        x_new = z.x + z.p + vy
        return PhasePoint(x_new, z.p + vy)
    return _apply_map_implicit(gen, z)


def _apply_map_implicit(gen: TwistGenerator, z: PhasePoint) -> PhasePoint:
    """Solve ``p = -d1S(y, x)`` for ``x`` by bisection plus Newton polish."""
    y, p = z.x, z.p

    def f(x):
        return float(-gen.d1S(y, x)) - p

    span = 1.0 + float(np.abs(gen.dV(np.linspace(0, 1, 256))).max())
    lo, hi = y + p - span, y + p + span
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise MapSolveFailed(f"no bracket for twist relation at {z}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(50):
        fx = f(x)
        if abs(fx) < 1e-14:
            break
        # d/dx of -d1S is +1 for the mechanical form
        x -= fx
    else:
        raise MapSolveFailed(f"Newton polish did not converge at {z}")
    return PhasePoint(x, float(gen.d2S(y, x)))


def build_cost_twist(
    gen: TwistGenerator, c: float, grid: GridSpec, scan_k: int | None = None
) -> CostMatrix:
    """Discretized cohomology-twisted cost of one generator.

    ``entry[y][x] = min over integer lifts k with |k| < scan_k of
    S(y, x + k) - c (x + k - y)``, with ``scan_k`` defaulting to the
    grid's lift window.  The boundary lifts ``|k| = scan_k`` are scanned
    only to detect an undersized window: a strictly better value there
    raises :class:`~polykam.errors.LiftWindowTooSmall`.
    """
    if not math.isfinite(c):
        raise InvalidScalar(f"cohomology must be finite, got {c!r}")
    n, kmax = grid.n, scan_k if scan_k is not None else grid.lift_k
    if n < 8:
        raise ValueError("model grids need n >= 8")
    y = grid.points[:, None]
    x = grid.points[None, :]
    ks = np.arange(-kmax, kmax + 1)
    stack = np.stack([gen.S(y, x + k) - c * (x + k - y) for k in ks])
    interior = stack[1:-1]
    idx = interior.argmin(axis=0)
    best = interior.min(axis=0)
    boundary = np.minimum(stack[0], stack[-1])
    if np.any(boundary < best):
        raise LiftWindowTooSmall(
            f"minimizing lift of {gen.label} at c={c} hit the window "
            f"boundary |k|={kmax}; enlarge lift_k"
        )
    lifts = ks[1:-1][idx]
    return CostMatrix(grid, best, lifts=lifts)


def build_cost_twist_auto(
    gen: TwistGenerator, c: float, grid: GridSpec, max_widen: int = 6
) -> CostMatrix:
    """Like :func:`build_cost_twist` but widens the lift scan window until
    the minimizer is interior.  The returned cost still lives on ``grid``;
    the scan width is a build detail, not part of the grid identity."""
    scan = grid.lift_k
    while True:
        try:
            return build_cost_twist(gen, c, grid, scan_k=scan)
        except LiftWindowTooSmall:
            scan += 1
            if scan > grid.lift_k + max_widen:
                raise


def family_costs(family, c: float, grid: GridSpec) -> list[CostMatrix]:
    """Twisted costs of every generator in the family at one cohomology,
    with automatic lift-window widening."""
    return [build_cost_twist_auto(gen, c, grid) for gen in family]


@dataclass(frozen=True)
class LagrangianSpec:
    """Time-periodic mechanical Lagrangian ``L = v^2 / 2 - V(x, t)``.

    ``potential`` is a sequence of per-time-slice Fourier coefficient
    pairs ``(cos_coeffs, sin_coeffs)``; a single pair is replicated over
    all ``time_steps`` slices.
    """

    potential: tuple
    time_steps: int = 16

    def __post_init__(self):
        if self.time_steps < 4:
            raise ValueError("need at least 4 time steps")
        pot = self.potential
        if len(pot) == 2 and not (len(pot[0]) and isinstance(pot[0][0], (tuple, list))):
            # a single (cos, sin) pair: replicate
            pot = tuple((tuple(pot[0]), tuple(pot[1])) for _ in range(self.time_steps))
        else:
            pot = tuple((tuple(cs), tuple(ss)) for cs, ss in pot)
            if len(pot) != self.time_steps:
                raise ValueError("one (cos, sin) pair per time slice required")
        object.__setattr__(self, "potential", pot)

    def V(self, x, j: int):
        x = np.asarray(x, dtype=float)
        cs, ss = self.potential[j]
        out = np.zeros_like(x)
        for m, ccoef in enumerate(cs, start=1):
            out = out + ccoef * np.cos(TWO_PI * m * x)
        for m, scoef in enumerate(ss, start=1):
            out = out + scoef * np.sin(TWO_PI * m * x)
        return out


def build_cost_lagrangian(
    spec: LagrangianSpec,
    c: float,
    grid: GridSpec,
    *,
    return_displacement: bool = False,
):
    """Unit-time cost by midpoint-rule substeps composed tropically.

    Each substep cost is ``tau * L((y + x~) / 2, (x~ - y) / tau, t_j)
    - c (x~ - y)`` minimized over lifts, with ``tau = 1 / m`` and ``t_j``
    the midpoint of slice ``j``.  With ``return_displacement`` the total
    displacement of the minimizing substep chain is propagated through the
    compositions and returned alongside.
    """
    if not math.isfinite(c):
        raise InvalidScalar(f"cohomology must be finite, got {c!r}")
    n, kmax = grid.n, grid.lift_k
    if n < 8:
        raise ValueError("model grids need n >= 8")
    m = spec.time_steps
    tau = 1.0 / m
    y = grid.points[:, None]
    x = grid.points[None, :]
    ks = np.arange(-kmax, kmax + 1)

    def substep(j):
        vals = []
        for k in ks:
            xt = x + k
            disp = xt - y
            mid = 0.5 * (y + xt)
            vals.append(tau * (0.5 * (disp / tau) ** 2 - spec.V(mid, j)) - c * disp)
        stack = np.stack(vals)
        interior = stack[1:-1]
        idx = interior.argmin(axis=0)
        best = interior.min(axis=0)
        if np.any(np.minimum(stack[0], stack[-1]) < best):
            raise LiftWindowTooSmall(
                f"substep {j} minimizing lift hit the window boundary"
            )
        disp = (x + 0.0) - y + ks[1:-1][idx]
        return best, disp

    total, disp_total = substep(0)
    for j in range(1, m):
        step, disp_step = substep(j)
        total, disp_total = tropical_matmul(total, step, disp_total, disp_step)
    cost = CostMatrix(grid, total)
    if return_displacement:
        return cost, disp_total
    return cost
