"""Weak-KAM analysis per cohomology class.

Operator words form the free min-plus semigroup generated by the family
costs: leaves, composition, pointwise minimum, scalar shift, windowed
powers (a finite stand-in for the Peierls limit) and the Peierls closure
itself.  Words are evaluated in two ways:

* **matrix level** -- :func:`evaluate_word` materializes the cost matrix,
  including genuine Peierls closures; and
* **function level** -- :class:`WordOperator` applies the induced
  Lax-Oleinik operator (and its dual) directly to grid functions, records
  argmin tables, and can backtrack minimizing chains.  Only finite-type
  words (no closure nodes) can be applied this way; closures are replaced
  by windowed powers first (see :func:`finitize`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CohomologyMismatch,
    NotBacktrackable,
    Unresolved,
)
from .models import PhasePoint, TwistGenerator, apply_map, cylinder_distance, family_costs
from .pseudograph import Pseudograph, is_c11_graph, wedge_graph
from .tropical import (
    ArgminSet,
    CostMatrix,
    GridFunction,
    GridSpec,
    PeierlsBarrier,
    compose_costs,
    half_oscillation,
    lax_oleinik,
    min_costs,
    peierls_closure,
    tropical_eigenvalue,
    weak_kam_from_barrier,
)

# ---------------------------------------------------------------------------
# operator words


@dataclass(frozen=True)
class Leaf:
    """One application of a family generator's cost."""

    index: int


@dataclass(frozen=True)
class Compose:
    """``first`` applied first, then ``then``."""

    first: "OperatorWord"
    then: "OperatorWord"


@dataclass(frozen=True)
class MinOf:
    left: "OperatorWord"
    right: "OperatorWord"


@dataclass(frozen=True)
class Shift:
    inner: "OperatorWord"
    offset: float


@dataclass(frozen=True)
class Closure:
    """Peierls closure of the inner word (a genuine limit object)."""

    inner: "OperatorWord"
    transient: int | None = None
    window: int | None = None


@dataclass(frozen=True)
class WindowedPower:
    """``min`` over ``lo <= k <= hi`` of the inner word's k-th power,
    with the inner eigenvalue added per application so the minimum is
    balanced across the window.  A finite element of the semigroup.
    """

    inner: "OperatorWord"
    lo: int
    hi: int


OperatorWord = Leaf | Compose | MinOf | Shift | Closure | WindowedPower


def is_finite_type(word: OperatorWord) -> bool:
    if isinstance(word, Leaf):
        return True
    if isinstance(word, Compose):
        return is_finite_type(word.first) and is_finite_type(word.then)
    if isinstance(word, MinOf):
        return is_finite_type(word.left) and is_finite_type(word.right)
    if isinstance(word, Shift):
        return is_finite_type(word.inner)
    if isinstance(word, WindowedPower):
        return is_finite_type(word.inner)
    return False


def finitize(word: OperatorWord, grid: GridSpec, transient=None, window=None) -> OperatorWord:
    """Replace closure nodes by windowed powers (finite tail minima)."""
    t = 4 * grid.n if transient is None else transient
    w = 2 * grid.n if window is None else window
    if isinstance(word, Closure):
        t0 = word.transient or t
        w0 = word.window or w
        return WindowedPower(finitize(word.inner, grid, transient, window), t0, t0 + w0)
    if isinstance(word, Compose):
        return Compose(finitize(word.first, grid, transient, window), finitize(word.then, grid, transient, window))
    if isinstance(word, MinOf):
        return MinOf(finitize(word.left, grid, transient, window), finitize(word.right, grid, transient, window))
    if isinstance(word, Shift):
        return Shift(finitize(word.inner, grid, transient, window), word.offset)
    return word


def word_label(word: OperatorWord, family=None) -> str:
    def name(i):
        if family is not None:
            return family[i].label
        return f"g{i}"

    if isinstance(word, Leaf):
        return name(word.index)
    if isinstance(word, Compose):
        return f"({word_label(word.then, family)} o {word_label(word.first, family)})"
    if isinstance(word, MinOf):
        return f"min({word_label(word.left, family)}, {word_label(word.right, family)})"
    if isinstance(word, Shift):
        return f"({word_label(word.inner, family)} + {word.offset:g})"
    if isinstance(word, Closure):
        return f"peierls[{word_label(word.inner, family)}]"
    return f"tailmin[{word_label(word.inner, family)}; {word.lo}..{word.hi}]"


def evaluate_word(
    word: OperatorWord,
    costs: list[CostMatrix],
    *,
    transient: int | None = None,
    window: int | None = None,
    tol: float = 1e-8,
) -> CostMatrix:
    """Materialize the cost matrix of an operator word."""
    if isinstance(word, Leaf):
        return costs[word.index]
    if isinstance(word, Compose):
        a = evaluate_word(word.first, costs, transient=transient, window=window, tol=tol)
        b = evaluate_word(word.then, costs, transient=transient, window=window, tol=tol)
        return compose_costs(a, b)
    if isinstance(word, MinOf):
        a = evaluate_word(word.left, costs, transient=transient, window=window, tol=tol)
        b = evaluate_word(word.right, costs, transient=transient, window=window, tol=tol)
        return min_costs(a, b)
    if isinstance(word, Shift):
        inner = evaluate_word(word.inner, costs, transient=transient, window=window, tol=tol)
        return CostMatrix(inner.grid, inner.entries + word.offset)
    if isinstance(word, Closure):
        inner = evaluate_word(word.inner, costs, transient=transient, window=window, tol=tol)
        bar = peierls_closure(
            inner,
            transient=word.transient or transient,
            window=word.window or window,
            tol=tol,
        )
        return bar.h
    if isinstance(word, WindowedPower):
        inner = evaluate_word(word.inner, costs, transient=transient, window=window, tol=tol)
        alpha = tropical_eigenvalue(inner)
        b = inner.entries + alpha
        power = b.copy()
        for _ in range(1, word.lo):
            power = _matmul(power, b)
        best = power.copy()
        for _ in range(word.lo, word.hi):
            power = _matmul(power, b)
            best = np.minimum(best, power)
        return CostMatrix(inner.grid, best)
    raise TypeError(f"not an operator word: {word!r}")


def _matmul(a, b):
    from .tropical import tropical_matmul

    return tropical_matmul(a, b)


# ---------------------------------------------------------------------------
# function-level application with backtracking


@dataclass
class Transition:
    """One elementary generator application within a minimizing chain."""

    gen: int
    y: int
    x: int
    lift: int


@dataclass
class _LeafTrace:
    table: np.ndarray


@dataclass
class _ComposeTrace:
    first: object
    then: object


@dataclass
class _MinTrace:
    left: object
    right: object
    left_vals: np.ndarray
    right_vals: np.ndarray


@dataclass
class _PowerTrace:
    iterates: list
    nstar: np.ndarray


class WordOperator:
    """Applies finite-type operator words to grid functions.

    Keeps the family costs of one cohomology class; caches evaluated
    inner costs and eigenvalues for windowed-power nodes.
    """

    def __init__(self, costs: list[CostMatrix]):
        if not costs:
            raise ValueError("need at least one cost")
        grid = costs[0].grid
        for a in costs:
            if a.grid != grid:
                raise CohomologyMismatch("family costs live on different grids")
        self.costs = list(costs)
        self.grid = grid
        self._alpha_cache: dict = {}

    def _alpha(self, word: OperatorWord) -> float:
        if word not in self._alpha_cache:
            self._alpha_cache[word] = tropical_eigenvalue(evaluate_word(word, self.costs))
        return self._alpha_cache[word]

    def apply(self, word: OperatorWord, values: np.ndarray, record: bool = False):
        """Apply ``T_word`` to raw values; returns ``(values, trace)``."""
        if isinstance(word, Leaf):
            a = self.costs[word.index].entries
            stacked = values[:, None] + a
            out = stacked.min(axis=0)
            trace = _LeafTrace(stacked.argmin(axis=0)) if record else None
            return out, trace
        if isinstance(word, Compose):
            mid, t1 = self.apply(word.first, values, record)
            out, t2 = self.apply(word.then, mid, record)
            return out, (_ComposeTrace(t1, t2) if record else None)
        if isinstance(word, MinOf):
            lv, t1 = self.apply(word.left, values, record)
            rv, t2 = self.apply(word.right, values, record)
            out = np.minimum(lv, rv)
            return out, (_MinTrace(t1, t2, lv, rv) if record else None)
        if isinstance(word, Shift):
            out, t = self.apply(word.inner, values, record)
            return out + word.offset, t
        if isinstance(word, WindowedPower):
            return self._apply_power(word, values, record)
        raise NotBacktrackable(
            f"word contains a closure node; finitize it first: {word_label(word)}"
        )

    def _apply_power(self, word: WindowedPower, values: np.ndarray, record: bool):
        alpha = self._alpha(word.inner)
        cur = values
        iterates = [] if record else None
        best = None
        nstar = None
        for k in range(1, word.hi + 1):
            cur, trace = self.apply(word.inner, cur, record)
            cur = cur + alpha
            if record:
                iterates.append(trace)
            if k >= word.lo:
                if best is None:
                    best = cur.copy()
                    nstar = np.full(self.grid.n, k)
                else:
                    better = cur < best
                    best = np.where(better, cur, best)
                    if record:
                        nstar = np.where(better, k, nstar)
        return best, (_PowerTrace(iterates, nstar) if record else None)

    def apply_dual(self, word: OperatorWord, values: np.ndarray) -> np.ndarray:
        if isinstance(word, Leaf):
            a = self.costs[word.index].entries
            return (values[None, :] - a).max(axis=1)
        if isinstance(word, Compose):
            return self.apply_dual(word.first, self.apply_dual(word.then, values))
        if isinstance(word, MinOf):
            return np.maximum(
                self.apply_dual(word.left, values), self.apply_dual(word.right, values)
            )
        if isinstance(word, Shift):
            return self.apply_dual(word.inner, values) - word.offset
        if isinstance(word, WindowedPower):
            alpha = self._alpha(word.inner)
            cur = values
            best = None
            for k in range(1, word.hi + 1):
                cur = self.apply_dual(word.inner, cur) - alpha
                if k >= word.lo:
                    best = cur.copy() if best is None else np.maximum(best, cur)
            return best
        raise NotBacktrackable(
            f"word contains a closure node; finitize it first: {word_label(word)}"
        )

    # -- chain reconstruction ------------------------------------------------

    def backtrack(self, word: OperatorWord, trace, x: int) -> list[Transition]:
        """Minimizing chain ending at index ``x``, in forward order."""
        if isinstance(word, Leaf):
            y = int(trace.table[x])
            lift = int(self.costs[word.index].lifts[y, x]) if self.costs[word.index].lifts is not None else 0
            return [Transition(word.index, y, int(x), lift)]
        if isinstance(word, Compose):
            tail = self.backtrack(word.then, trace.then, x)
            head = self.backtrack(word.first, trace.first, tail[0].y)
            return head + tail
        if isinstance(word, MinOf):
            if trace.left_vals[x] <= trace.right_vals[x]:
                return self.backtrack(word.left, trace.left, x)
            return self.backtrack(word.right, trace.right, x)
        if isinstance(word, Shift):
            return self.backtrack(word.inner, trace, x)
        if isinstance(word, WindowedPower):
            k = int(trace.nstar[x])
            chain: list[Transition] = []
            cur = int(x)
            for j in range(k - 1, -1, -1):
                seg = self.backtrack(word.inner, trace.iterates[j], cur)
                chain = seg + chain
                cur = seg[0].y
            return chain
        raise NotBacktrackable(f"cannot backtrack {word_label(word)}")

    def first_argmin_map(self, word: OperatorWord, trace) -> np.ndarray:
        """For every final index, the first index of its minimizing chain."""
        n = self.grid.n
        if isinstance(word, Leaf):
            return trace.table.copy()
        if isinstance(word, Compose):
            then_map = self.first_argmin_map(word.then, trace.then)
            first_map = self.first_argmin_map(word.first, trace.first)
            return first_map[then_map]
        if isinstance(word, MinOf):
            lm = self.first_argmin_map(word.left, trace.left)
            rm = self.first_argmin_map(word.right, trace.right)
            return np.where(trace.left_vals <= trace.right_vals, lm, rm)
        if isinstance(word, Shift):
            return self.first_argmin_map(word.inner, trace)
        if isinstance(word, WindowedPower):
            cur = np.arange(n)
            nstar = trace.nstar
            maps = [self.first_argmin_map(word.inner, t) for t in trace.iterates]
            for k in range(len(trace.iterates), 0, -1):
                active = nstar >= k
                cur = np.where(active, maps[k - 1][cur], cur)
            return cur
        raise NotBacktrackable(f"cannot map {word_label(word)}")

    def argmin_front(self, word: OperatorWord, values: np.ndarray, tol: float | None = None) -> ArgminSet:
        """Contact set of a function against a finite-type word."""
        forward, _ = self.apply(word, values)
        defect = values - self.apply_dual(word, forward)
        if tol is None:
            tol = 1e-9 * (1.0 + float(defect.max() - defect.min()))
        members = np.flatnonzero(defect <= defect.min() + tol)
        return ArgminSet(self.grid, tuple(int(i) for i in members))


# ---------------------------------------------------------------------------
# per-cohomology analysis


def default_seeds(grid: GridSpec, count: int = 5, rng_seed: int = 0) -> list[GridFunction]:
    """Standard seed battery: flat, +/- cosine, and fixed random Lipschitz draws."""
    xs = grid.points
    seeds = [
        GridFunction(grid, np.zeros(grid.n)),
        GridFunction(grid, np.cos(2 * np.pi * xs)),
        GridFunction(grid, -np.cos(2 * np.pi * xs)),
    ]
    rng = np.random.default_rng(rng_seed)
    while len(seeds) < count:
        modes = rng.normal(size=4) / (1.0 + np.arange(4))
        phases = rng.uniform(0, 2 * np.pi, size=4)
        vals = sum(
            m * np.cos(2 * np.pi * (j + 1) * xs + ph)
            for j, (m, ph) in enumerate(zip(modes, phases))
        )
        seeds.append(GridFunction(grid, vals))
    return seeds[:count]


def _closure_cache_key(gen_index: int, c: float) -> tuple:
    return (gen_index, round(float(c), 14))


class BarrierCache:
    """Peierls barriers per (generator, cohomology); the expensive objects."""

    def __init__(self, family, grid: GridSpec, tol: float = 1e-8):
        self.family = list(family)
        self.grid = grid
        self.tol = tol
        self._cache: dict = {}

    def cost(self, i: int, c: float) -> CostMatrix:
        key = ("cost", _closure_cache_key(i, c))
        if key not in self._cache:
            self._cache[key] = family_costs([self.family[i]], c, self.grid)[0]
        return self._cache[key]

    def costs(self, c: float) -> list[CostMatrix]:
        return [self.cost(i, c) for i in range(len(self.family))]

    def barrier(self, i: int, c: float) -> PeierlsBarrier:
        key = ("bar", _closure_cache_key(i, c))
        if key not in self._cache:
            self._cache[key] = peierls_closure(self.cost(i, c), tol=self.tol)
        return self._cache[key]


def alpha_curve(gen: TwistGenerator, cs, grid: GridSpec, threads: int | None = None):
    """Tropical eigenvalue of one generator over a cohomology range."""
    cs = [float(c) for c in cs]

    def one(c):
        return tropical_eigenvalue(build_cost_twist_cached(gen, c, grid))

    width = _thread_width(threads)
    if width > 1 and len(cs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=width) as pool:
            alphas = list(pool.map(one, cs))
    else:
        alphas = [one(c) for c in cs]
    return np.array(cs), np.array(alphas)


def build_cost_twist_cached(gen, c, grid):
    from .models import build_cost_twist_auto

    return build_cost_twist_auto(gen, c, grid)


def _thread_width(threads: int | None) -> int:
    import os

    if threads is None:
        raw = os.environ.get("POLYKAM_THREADS", "1")
        try:
            threads = int(raw)
        except ValueError:
            threads = 1
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def weak_kam_solutions(
    target,
    c: float,
    grid: GridSpec,
    seeds: list[GridFunction] | None = None,
    *,
    family=None,
    tol_fix: float = 1e-8,
    dedupe_tol: float = 1e-6,
) -> list[Pseudograph]:
    """Certified weak-KAM solutions reached from a battery of seeds.

    ``target`` may be a generator, a finished cost matrix, or an operator
    word over ``family``.  Each seed is pushed through the Peierls-barrier
    operator, certified against the defining fixed-point equation, and
    deduplicated in the half-oscillation metric.
    """
    if isinstance(target, TwistGenerator):
        cost = build_cost_twist_cached(target, c, grid)
    elif isinstance(target, CostMatrix):
        cost = target
    else:
        if family is None:
            raise ValueError("operator-word targets need the generator family")
        cost = evaluate_word(target, family_costs(family, c, grid))
    barrier = peierls_closure(cost)
    if seeds is None:
        seeds = default_seeds(grid)
    out: list[Pseudograph] = []
    for seed in seeds:
        u = weak_kam_from_barrier(barrier, seed, tol_fix=tol_fix)
        if all(half_oscillation(u.values - g.u.values) > dedupe_tol for g in out):
            out.append(Pseudograph(c, u))
    return out


def aubry_set(target, c: float, grid: GridSpec, g: Pseudograph | None = None, *, family=None):
    """Contact set of a weak-KAM solution against the Peierls barrier,
    returned as indices plus phase points on the cylinder."""
    if isinstance(target, TwistGenerator):
        cost = build_cost_twist_cached(target, c, grid)
    elif isinstance(target, CostMatrix):
        cost = target
    else:
        if family is None:
            raise ValueError("operator-word targets need the generator family")
        cost = evaluate_word(target, family_costs(family, c, grid))
    barrier = peierls_closure(cost)
    if g is None:
        g = weak_kam_solutions(cost, c, grid)[0]
    u = g.u
    v = lax_oleinik(barrier.h, u)
    from .tropical import dual_lax_oleinik

    back = dual_lax_oleinik(barrier.h, v)
    g2 = Pseudograph(c, GridFunction(grid, back.values))
    members, points = wedge_graph(g, g2, tol=None)
    return members, points


def detect_common_circle(
    family,
    c: float,
    grid: GridSpec,
    seeds: list[GridFunction] | None = None,
    *,
    tol_fix: float = 1e-8,
    max_iter: int = 200,
    cache: BarrierCache | None = None,
) -> Pseudograph | None:
    """Search for a pseudograph fixed by every generator's barrier operator.

    Iterates the cyclic composition of the barrier operators from each
    seed; a settled candidate is accepted only if the forward and dual
    fixed-point residuals of every single generator stay below
    ``tol_fix``.  Returns ``None`` when every seed settles on a rejected
    candidate, raises :class:`~polykam.errors.Unresolved` when no seed
    settles at all.
    """
    cache = cache or BarrierCache(family, grid)
    barriers = [cache.barrier(i, c) for i in range(len(family))]
    if seeds is None:
        seeds = default_seeds(grid)
    settle_tol = min(1e-12, tol_fix * 1e-3)
    any_settled = False
    from .tropical import dual_lax_oleinik

    for seed in seeds:
        u = seed.normalize()
        for _ in range(max_iter):
            v = u
            for bar in barriers:
                v = lax_oleinik(bar.h, v).normalize()
            if half_oscillation(v.values - u.values) <= settle_tol:
                u = v
                break
            u = v
        else:
            continue
        any_settled = True
        ok = True
        for bar in barriers:
            fwd = lax_oleinik(bar.h, u).normalize()
            if half_oscillation(fwd.values - u.values) > tol_fix:
                ok = False
                break
            dual = dual_lax_oleinik(bar.h, u)
            dual = GridFunction(grid, dual.values - dual.values.min())
            if half_oscillation(dual.values - u.values) > tol_fix:
                ok = False
                break
        if ok:
            return Pseudograph(c, u)
    if not any_settled:
        raise Unresolved(f"no seed settled within {max_iter} iterations at c={c}")
    return None


def default_catalog(m: int) -> list[OperatorWord]:
    """Probe catalog: single barriers, ordered pair compositions, and the
    closures of the pair compositions."""
    singles = [Closure(Leaf(i)) for i in range(m)]
    pairs = [
        Compose(Closure(Leaf(i)), Closure(Leaf(j)))
        for i in range(m)
        for j in range(m)
        if i != j
    ]
    closures = [Closure(p) for p in pairs]
    return singles + pairs + closures


def cyclic_gap(members: tuple[int, ...], n: int) -> tuple[int, ...]:
    """Longest cyclic run of indices not in ``members``; ties go to the
    smallest starting index.  Empty when ``members`` covers the grid."""
    in_set = np.zeros(n, dtype=bool)
    for m in members:
        in_set[m] = True
    if in_set.all():
        return ()
    if not in_set.any():
        return tuple(range(n))
    runs = []
    for i in range(n):
        if not in_set[i] and in_set[(i - 1) % n]:
            length = 0
            while not in_set[(i + length) % n]:
                length += 1
            runs.append((i, length))
    start, best_len = max(runs, key=lambda r: (r[1], -r[0]))
    return tuple((start + k) % n for k in range(best_len))


@dataclass
class RSpaceReport:
    """Outcome of probing the forcing directions at one cohomology."""

    c: float
    verdict: str  # "trivial" or "full"
    circle: Pseudograph | None = None
    witness_word: OperatorWord | None = None
    witness_g: Pseudograph | None = None
    gap: tuple[int, ...] = ()
    details: dict = field(default_factory=dict)


def r_space_probe(
    family,
    c: float,
    grid: GridSpec,
    catalog: list[OperatorWord] | None = None,
    *,
    gap_min: int | None = None,
    tol_fix: float = 1e-8,
    seeds: list[GridFunction] | None = None,
    cache: BarrierCache | None = None,
) -> RSpaceReport:
    """Dichotomy probe at one cohomology class.

    Returns verdict ``trivial`` with the common invariant circle when one
    is detected, else scans the word catalog for the first word whose
    contact set at its own closure fixed point omits a cyclic arc of at
    least ``gap_min`` indices and returns verdict ``full`` with that
    witness.  Raises :class:`~polykam.errors.Unresolved` when neither
    certifies.
    """
    cache = cache or BarrierCache(family, grid)
    if gap_min is None:
        gap_min = max(4, grid.n // 32)
    if catalog is None:
        catalog = default_catalog(len(family))
    try:
        circle = detect_common_circle(family, c, grid, seeds, tol_fix=tol_fix, cache=cache)
    except Unresolved:
        circle = None
    if circle is not None:
        sc = 1.05 * max(gen.sc_bound() for gen in family)
        report = RSpaceReport(c=c, verdict="trivial", circle=circle)
        report.details["c11"] = is_c11_graph(circle, sc)
        return report
    costs = cache.costs(c)
    flat = GridFunction(grid, np.zeros(grid.n))
    from .tropical import argmin_front

    for word in catalog:
        cost_w = evaluate_word(word, costs)
        bar_w = peierls_closure(cost_w)
        u = weak_kam_from_barrier(bar_w, flat, tol_fix=max(tol_fix, 10 * bar_w.diagnostics.tol))
        front = argmin_front(cost_w, u)
        gap = cyclic_gap(front.members, grid.n)
        if len(gap) >= gap_min:
            return RSpaceReport(
                c=c,
                verdict="full",
                witness_word=word,
                witness_g=Pseudograph(c, u),
                gap=gap,
                details={"front": front.members},
            )
    raise Unresolved(f"no circle and no gap of length >= {gap_min} at c={c}")


@dataclass
class SwitchedReport:
    """Forward/backward invariance of the switched flow on a contact set."""

    set_points: tuple
    forward_deviation: float
    backward_deviation: float
    containment_residual: float


def switched_invariance_check(
    family,
    i: int,
    j: int,
    c: float,
    grid: GridSpec,
    *,
    tol_fix: float = 1e-8,
) -> SwitchedReport:
    """Invariance of the switched composite on the contact set.

    Builds the composite cost ``A = a_j o a_i`` (``a_i`` applied first),
    its closure ``h_A``, a fixed point ``g`` of the closure operator and
    the contact set ``g`` restricted to ``I_{h_A}(g)`` (only the closure's
    contact set — not the larger ``I_A`` — is invariant both forward and
    backward); measures how far the composite map moves the set's phase
    points (forward), how far argmin backtracking moves them (backward),
    and the switched containment: a fixed point of the composed-barrier
    operator is fixed by the second barrier alone, because the second
    barrier is idempotent.
    """
    cache = BarrierCache(family, grid)
    a_i, a_j = cache.cost(i, c), cache.cost(j, c)
    comp = compose_costs(a_i, a_j)
    bar = peierls_closure(comp)
    flat = GridFunction(grid, np.zeros(grid.n))
    u = weak_kam_from_barrier(bar, flat, tol_fix=max(tol_fix, 10 * bar.diagnostics.tol))
    g = Pseudograph(c, u)
    from .tropical import argmin_front, dual_lax_oleinik

    front = argmin_front(bar.h, u)
    mom = g.momentum()
    pts = tuple(PhasePoint(k / grid.n, float(mom[k])) for k in front.members)

    def dist_to_set(z: PhasePoint) -> float:
        return min(cylinder_distance(z, w) for w in pts)

    fwd = 0.0
    for z in pts:
        image = apply_map(family[j], apply_map(family[i], z))
        fwd = max(fwd, dist_to_set(image))

    # backward: one composite application backtracked through the argmins
    op = WordOperator(cache.costs(c))
    word = Compose(Leaf(i), Leaf(j))
    _, trace = op.apply(word, u.values, record=True)
    bwd = 0.0
    for k in front.members:
        chain = op.backtrack(word, trace, k)
        t0 = chain[0]
        gen = family[t0.gen]
        x_t = t0.x / grid.n + t0.lift
        y = t0.y / grid.n
        pre = PhasePoint(y, float(-gen.d1S(y, x_t)))
        bwd = max(bwd, dist_to_set(pre))

    # containment: fixed points of Phi_{h_j o h_i} are fixed by Phi_{h_j}
    h_i, h_j = cache.barrier(i, c).h, cache.barrier(j, c).h
    barriers_composed = compose_costs(h_i, h_j)
    bar2 = peierls_closure(barriers_composed)
    u2 = weak_kam_from_barrier(
        bar2, flat, tol_fix=max(tol_fix, 10 * bar2.diagnostics.tol)
    )
    fixed = lax_oleinik(h_j, u2).normalize()
    containment = half_oscillation(fixed.values - u2.values)
    return SwitchedReport(pts, fwd, bwd, containment)
