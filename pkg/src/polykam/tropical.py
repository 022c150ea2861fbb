"""Min-plus (tropical) algebra on periodic grids.

Cost matrices over a cyclic grid form a min-plus semiring: composition is
the tropical matrix product, the pointwise minimum is the semiring sum,
and adding a scalar shifts the tropical eigenvalue.  Everything downstream
(weak-KAM solutions, Peierls barriers, Aubry sets) reduces to a handful of
operations implemented here.

Conventions
-----------
* ``entries[y, x]`` is the cost of the transition from grid node ``y`` to
  grid node ``x``.
* The forward Lax-Oleinik operator acts on functions-of-endpoints:
  ``(T_A u)(x) = min_y u(y) + A(y, x)``.
* The backward (dual) operator: ``(T*_A u)(y) = max_x u(x) - A(y, x)``.
* All argmin ties are broken toward the smallest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, InvalidScalar, NotFixed, NotStabilized

# Row-block size used to bound the memory of the broadcasted tropical
# product at large n (a full (n, n, n) temporary would be ~1 GB at n=512).
_MATMUL_BLOCK_ELEMS = 2**24


def _check_scalar(lam: float) -> float:
    lam = float(lam)
    if not math.isfinite(lam):
        raise InvalidScalar(f"scalar must be finite, got {lam!r}")
    return lam


@dataclass(frozen=True)
class GridSpec:
    """Uniform cyclic grid on the circle: nodes ``i / n`` for ``0 <= i < n``.

    ``lift_k`` is the half-width of the integer lift window scanned when a
    cost is built from a generating function.  Model-level code insists on
    ``n >= 8``; the tropical layer only needs ``n >= 2`` so that small
    hand-checked matrices remain expressible.
    """

    n: int
    lift_k: int = 2

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid size must be at least 2, got {self.n}")
        if self.lift_k < 1:
            raise ValueError(f"lift window must be at least 1, got {self.lift_k}")

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @property
    def h(self) -> float:
        return 1.0 / self.n


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CostMatrix:
    """Dense cost matrix on a grid, entry ``[y, x]`` = cost of ``y -> x``.

    ``lifts`` optionally records, for costs built from a generating
    function, the integer lift achieving each entry; it is carried through
    so orbit reconstruction can unwrap chains to the universal cover.
    """

    grid: GridSpec
    entries: np.ndarray
    lifts: np.ndarray | None = None

    def __post_init__(self):
        entries = _freeze(self.entries)
        object.__setattr__(self, "entries", entries)
        n = self.grid.n
        if entries.shape != (n, n):
            raise ValueError(f"expected shape {(n, n)}, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise InvalidScalar("cost entries must all be finite")
        if self.lifts is not None:
            lifts = np.asarray(self.lifts)
            lifts.setflags(write=False)
            object.__setattr__(self, "lifts", lifts)

    @property
    def oscillation(self) -> float:
        return float(self.entries.max() - self.entries.min())


@dataclass(frozen=True)
class GridFunction:
    """Scalar function sampled on the grid nodes."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = _freeze(self.values)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.n,):
            raise ValueError(f"expected shape {(self.grid.n,)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidScalar("function values must all be finite")

    def normalize(self) -> "GridFunction":
        """Shift so the minimum value is exactly zero."""
        return GridFunction(self.grid, self.values - self.values.min())

    @property
    def half_oscillation(self) -> float:
        return float(self.values.max() - self.values.min()) / 2.0


def half_oscillation(values: np.ndarray) -> float:
    """Half-oscillation seminorm, the natural norm on functions mod constants."""
    values = np.asarray(values, dtype=float)
    return float(values.max() - values.min()) / 2.0


@dataclass(frozen=True)
class ArgminSet:
    """A set of grid indices, kept sorted; supports cyclic arc queries."""

    grid: GridSpec
    members: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(int(m) for m in self.members)))
        for m in self.members:
            if not 0 <= m < self.grid.n:
                raise ValueError(f"index {m} out of range for n={self.grid.n}")

    def __contains__(self, idx) -> bool:
        return int(idx) in set(self.members)

    def __len__(self) -> int:
        return len(self.members)


def _same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")


# ---------------------------------------------------------------------------
# operators


def lax_oleinik(a: CostMatrix, u: GridFunction) -> GridFunction:
    """Forward Lax-Oleinik: ``result[x] = min_y u[y] + a[y, x]``.

    The result is not normalized; callers that need the min-zero form
    call :meth:`GridFunction.normalize`.
    """
    _same_grid(a, u)
    return GridFunction(a.grid, (u.values[:, None] + a.entries).min(axis=0))


def lax_oleinik_argmin(a: CostMatrix, u: GridFunction) -> np.ndarray:
    """Argmin table of the forward operator: smallest minimizing ``y`` per ``x``."""
    _same_grid(a, u)
    return (u.values[:, None] + a.entries).argmin(axis=0)


def dual_lax_oleinik(a: CostMatrix, u: GridFunction) -> GridFunction:
    """Backward operator: ``result[y] = max_x u[x] - a[y, x]``."""
    _same_grid(a, u)
    return GridFunction(a.grid, (u.values[None, :] - a.entries).max(axis=1))


def add_constant(a: CostMatrix, lam: float) -> CostMatrix:
    lam = _check_scalar(lam)
    return CostMatrix(a.grid, a.entries + lam, lifts=a.lifts)


def min_costs(a: CostMatrix, b: CostMatrix) -> CostMatrix:
    """Entrywise minimum (tropical sum) of two costs on the same grid."""
    _same_grid(a, b)
    return CostMatrix(a.grid, np.minimum(a.entries, b.entries))


def tropical_matmul(
    a: np.ndarray,
    b: np.ndarray,
    na: np.ndarray | None = None,
    nb: np.ndarray | None = None,
):
    """Tropical product ``(a*b)[y, x] = min_z a[y, z] + b[z, x]``.

    When ``na``/``nb`` are given (per-entry path-length bookkeeping) the
    corresponding lengths are propagated through the minimizing ``z`` and
    the pair ``(product, lengths)`` is returned.  The product is computed
    in row blocks so the broadcast temporary stays bounded.
    """
    n = a.shape[0]
    out = np.empty_like(a)
    track = na is not None
    nout = np.empty_like(na) if track else None
    block = max(1, _MATMUL_BLOCK_ELEMS // (n * n))
    cols = np.arange(n)
    for start in range(0, n, block):
        rows = slice(start, min(start + block, n))
        t = a[rows][:, :, None] + b[None, :, :]
        if track:
            idx = t.argmin(axis=1)
            out[rows] = np.take_along_axis(t, idx[:, None, :], axis=1)[:, 0, :]
            nout[rows] = na[rows][np.arange(idx.shape[0])[:, None], idx] + nb[idx, cols[None, :]]
        else:
            out[rows] = t.min(axis=1)
    if track:
        return out, nout
    return out


def compose_costs(a: CostMatrix, a2: CostMatrix) -> CostMatrix:
    """Cost of doing ``a`` first, then ``a2``: the tropical product ``a2 o a``."""
    _same_grid(a, a2)
    return CostMatrix(a.grid, tropical_matmul(a.entries, a2.entries))


def tropical_eigenvalue(a: CostMatrix) -> float:
    """Tropical eigenvalue, ``alpha = -(minimum mean cycle of a)``.

    Karp's algorithm on the complete graph induced by the (finite) cost
    matrix.  The dynamic program is vectorized over target nodes.
    """
    m = a.entries
    n = m.shape[0]
    table = np.full((n + 1, n), np.inf)
    table[0, 0] = 0.0
    d = table[0]
    for k in range(1, n + 1):
        d = (d[:, None] + m).min(axis=0)
        table[k] = d
    # mu* = min_v max_k (d_n(v) - d_k(v)) / (n - k); d_n is finite everywhere
    # on a complete graph, so the inf rows of the table only produce -inf
    # candidates that drop out of the max.
    denom = (n - np.arange(n)).astype(float)
    ratios = (table[n][None, :] - table[:n]) / denom[:, None]
    mu = ratios.max(axis=0).min()
    return float(-mu + 0.0)


def argmin_front(a: CostMatrix, u: GridFunction, tol: float | None = None) -> ArgminSet:
    """Contact set of ``u`` against the cost ``a``.

    Returns the indices where ``u - T*_A T_A u`` attains its minimum, the
    discrete counterpart of the set on which a dominated function is
    calibrated.  ``tol`` defaults to ``1e-9 * (1 + oscillation)`` of the
    defect.
    """
    v = lax_oleinik(a, u)
    back = dual_lax_oleinik(a, v)
    defect = u.values - back.values
    if tol is None:
        tol = 1e-9 * (1.0 + float(defect.max() - defect.min()))
    members = np.flatnonzero(defect <= defect.min() + tol)
    return ArgminSet(a.grid, tuple(int(i) for i in members))


# ---------------------------------------------------------------------------
# Peierls closure


@dataclass(frozen=True)
class ClosureDiagnostics:
    """What the windowed-minimum computation actually did."""

    transient: int
    window: int
    certified: bool
    residual: float
    tol: float
    achieved_n: np.ndarray = field(repr=False)
    doublings: int = 0


@dataclass(frozen=True)
class PeierlsBarrier:
    """Stabilized windowed minimum ``h = min_{t <= k <= t+w} (a + alpha)^k``.

    Bundles the barrier with the eigenvalue and the base cost so that
    downstream fixed-point certification has everything it needs.
    """

    h: CostMatrix
    alpha: float
    base: CostMatrix
    diagnostics: ClosureDiagnostics


def _window_min(b: np.ndarray, transient: int, window: int):
    """Entrywise ``min`` of ``b^k`` over ``k`` in ``[transient, transient + w']``.

    ``w'`` is ``window`` rounded up to a power of two (doubling makes the
    cumulative window cheap).  Returns ``(m1, n1, m2, n2, w_eff)`` where
    ``m2`` covers the doubled window ``[transient, transient + 2 w']`` and
    the ``n`` arrays record an achieving power per entry.
    """
    n = b.shape[0]
    ones = np.ones((n, n))
    w_eff = 1
    while w_eff < window:
        w_eff *= 2
    # cumulative window C = min_{1 <= j <= w_eff} b^j, with power bookkeeping
    c, nc = b.copy(), ones.copy()
    span = 1
    while span < w_eff:
        prod, nprod = tropical_matmul(c, c, nc, nc)
        better = prod < c
        c = np.where(better, prod, c)
        nc = np.where(better, nprod, nc)
        span *= 2
    # b^transient by binary exponentiation
    pt, npt = None, None
    sq, nsq = b.copy(), ones.copy()
    rem = transient
    while rem:
        if rem & 1:
            if pt is None:
                pt, npt = sq.copy(), nsq.copy()
            else:
                pt, npt = tropical_matmul(pt, sq, npt, nsq)
        rem >>= 1
        if rem:
            sq, nsq = tropical_matmul(sq, sq, nsq, nsq)
    # b^w_eff for the stabilization window shift
    pw, npw = b.copy(), ones.copy()
    span = 1
    while span < w_eff:
        pw, npw = tropical_matmul(pw, pw, npw, npw)
        span *= 2

    tail, ntail = tropical_matmul(pt, c, npt, nc)
    m1 = np.where(pt <= tail, pt, tail)
    n1 = np.where(pt <= tail, npt, ntail)

    pt2, npt2 = tropical_matmul(pt, pw, npt, npw)
    tail2, ntail2 = tropical_matmul(pt2, c, npt2, nc)
    m2 = np.where(m1 <= tail2, m1, tail2)
    n2 = np.where(m1 <= tail2, n1, ntail2)
    m2b = np.where(m2 <= pt2, m2, pt2)
    n2b = np.where(m2 <= pt2, n2, npt2)
    return m1, n1, m2b, n2b, w_eff


def peierls_closure(
    a: CostMatrix,
    transient: int | None = None,
    window: int | None = None,
    tol: float = 1e-8,
    *,
    auto_extend: bool = True,
    max_doublings: int = 14,
) -> PeierlsBarrier:
    """Peierls barrier of a cost: stabilized tail minimum of shifted powers.

    Shifts the cost by its tropical eigenvalue (so the minimum cycle mean
    is zero) and takes the entrywise minimum of the powers over a window
    deep in the tail.  Stabilization is certified by doubling the window
    and checking that no entry moves by more than ``tol``; for slowly
    converging (parabolic) costs the transient is doubled automatically
    until the certificate holds, which is cheap because all powers are
    formed by tropical squaring.

    Defaults: ``transient = 4n``, ``window = 2n``.
    """
    n = a.grid.n
    if transient is None:
        transient = 4 * n
    if window is None:
        window = 2 * n
    if transient < 1 or window < 1:
        raise ValueError("transient and window must be positive")
    alpha = tropical_eigenvalue(a)
    b = a.entries + alpha

    t_cur, w_cur = transient, window
    for attempt in range(max_doublings + 1):
        m1, _n1, m2, n2, w_eff = _window_min(b, t_cur, w_cur)
        residual = float(np.abs(m2 - m1).max())
        certified = residual <= tol
        diag = ClosureDiagnostics(
            transient=t_cur,
            window=2 * w_eff,
            certified=certified,
            residual=residual,
            tol=tol,
            achieved_n=n2,
            doublings=attempt,
        )
        if certified:
            return PeierlsBarrier(CostMatrix(a.grid, m2), alpha, a, diag)
        if not auto_extend or attempt == max_doublings:
            partial = PeierlsBarrier(CostMatrix(a.grid, m2), alpha, a, diag)
            raise NotStabilized(
                f"windowed minimum moved by {residual:.3e} > tol {tol:.3e} "
                f"at transient={t_cur}, window={2 * w_eff}",
                partial=partial,
                diagnostics=diag,
            )
        t_cur *= 2
        w_cur *= 2
    raise AssertionError("unreachable")


def weak_kam_from_barrier(
    barrier: PeierlsBarrier,
    seed: GridFunction,
    tol_fix: float = 1e-8,
) -> GridFunction:
    """One application of the barrier operator, certified as a fixed point.

    Applying the Lax-Oleinik operator of the Peierls barrier to any seed
    lands on a weak-KAM solution of the base cost.  The result is
    normalized to min zero and checked against the defining equation
    ``T_a u + alpha = u``; a residual above ``tol_fix`` raises
    :class:`~polykam.errors.NotFixed`.
    """
    u = lax_oleinik(barrier.h, seed).normalize()
    check = lax_oleinik(barrier.base, u)
    residual = half_oscillation(check.values + barrier.alpha - u.values)
    # the defining equation holds up to a constant only if alpha is exact;
    # compare mod constants and also pin the constant itself.
    shift = float(np.mean(check.values + barrier.alpha - u.values))
    residual = max(residual, abs(shift))
    if residual > tol_fix:
        raise NotFixed(
            f"barrier image is not a weak-KAM solution: residual {residual:.3e} "
            f"> tol_fix {tol_fix:.3e}",
            residual=residual,
            candidate=u,
        )
    return u
