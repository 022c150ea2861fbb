"""Cohomology-drifting polyorbits via forcing steps.

One step perturbs the current pseudograph by a nonnegative bump one-form
supported on a cyclic arc disjoint from the contact set, applies a
finite-type operator word at the raised cohomology, and keeps the full
argmin record.  The support condition (every backtracked chain must begin
where the bump vanishes) ensures each step's minimizing chains start on
the previous pseudograph, so concatenating the backtracked chains gives a
genuine orbit of the switched family.

Grid chains carry an O(1/n) discrete stationarity residual; before
verification the interior chain points are relaxed off-grid by a damped
Newton iteration on the discrete Euler-Lagrange equations with the
endpoints pinned, after which the map residuals drop to solver tolerance
while the endpoint momenta move by at most O(1/n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    Blocked,
    DiffusionStalled,
    NoGap,
    NotBacktrackable,
    StepTooSmall,
    Unresolved,
)
from .models import PhasePoint, apply_map, cylinder_distance
from .pseudograph import BumpForm, Pseudograph, bump_form, pseudograph_sum
from .tropical import GridFunction, GridSpec
from .weakkam import (
    BarrierCache,
    OperatorWord,
    RSpaceReport,
    Transition,
    WordOperator,
    cyclic_gap,
    finitize,
    is_finite_type,
    r_space_probe,
    word_label,
)


def gap_arc(front_members, n: int, gap_min: int = 0) -> tuple[int, ...]:
    """Longest cyclic arc disjoint from the contact set.

    Raises :class:`~polykam.errors.NoGap` when the arc is shorter than
    ``gap_min``; ties go to the smallest starting index.
    """
    arc = cyclic_gap(tuple(front_members), n)
    if len(arc) < gap_min:
        raise NoGap(
            f"largest free arc has {len(arc)} indices, need at least {gap_min}"
        )
    return arc


@dataclass
class MechanismStep:
    """One accepted forcing step, with everything needed to backtrack it.

    ``good`` marks the final indices whose minimizing chain starts where
    the bump vanishes and, chained through the previous steps, keeps the
    support condition all the way back; only these indices may serve as
    backtrack entry points.
    """

    word: OperatorWord
    bump: BumpForm
    before: Pseudograph
    after: Pseudograph
    operator: WordOperator = field(repr=False)
    trace: object = field(repr=False)
    arc: tuple[int, ...] = ()
    good: np.ndarray | None = field(default=None, repr=False)

    @property
    def delta_c(self) -> float:
        return self.bump.increment


def mechanism_step(
    g: Pseudograph,
    word: OperatorWord,
    delta_c: float,
    costs_before,
    costs_after,
    *,
    gap_min: int | None = None,
    delta_min: float = 1e-4,
    tol_argmin: float | None = None,
    entry_ok: np.ndarray | None = None,
) -> MechanismStep:
    """One forcing step ``g -> Phi_word(g + bump)`` at raised cohomology.

    ``costs_before`` are the family costs at ``g.c`` (used to locate the
    contact set and its gap) and ``costs_after`` a callable
    ``dc -> costs at g.c + dc``.  The support condition is validated on
    the sample of final indices that can actually serve as backtrack
    entries (the chain-start indices at the raised cohomology plus the
    new potential's minimum); on a violation the increment is halved,
    down to ``delta_min``.  ``entry_ok`` chains the condition through the
    previous step's good set.
    """
    if not is_finite_type(word):
        raise NotBacktrackable(
            f"mechanism words must be finite type, got {word_label(word)}"
        )
    grid = g.grid
    n = grid.n
    if gap_min is None:
        gap_min = max(4, n // 32)
    op0 = WordOperator(costs_before)
    front = op0.argmin_front(word, g.u.values, tol=tol_argmin)
    # no gap off the contact set itself is a hard block (the R-trivial
    # signal), regardless of the increment size
    gap_arc(tuple(front.members), n, gap_min)

    dc = float(delta_c)
    while True:
        # adapted neighborhood: the bump must avoid the contact set and,
        # in practice, every index where a minimizing chain at the raised
        # cohomology starts.  A trial unperturbed application locates the
        # starts; the subsequent validation catches any shift the bump
        # itself induces.
        op_trial = WordOperator(costs_after(dc))
        _, trial_trace = op_trial.apply(word, g.u.values, record=True)
        starts = np.unique(op_trial.first_argmin_map(word, trial_trace))
        blocked = set(front.members) | set(int(s) for s in starts)
        op1 = op_trial
        accepted = False
        # The bump's primitive can itself pull minimizing chains into the
        # arc; when the validation sample lands in the support, block the
        # offending entry indices and re-derive the arc before shrinking
        # the increment.
        for _ in range(8):
            try:
                arc = gap_arc(tuple(blocked), n, gap_min)
            except NoGap:
                break
            bump = bump_form(arc, dc, grid)
            g_pert = pseudograph_sum(g, bump)
            values, trace = op1.apply(word, g_pert.u.values, record=True)
            first_map = op1.first_argmin_map(word, trace)
            good = bump.values[first_map] == 0.0
            if entry_ok is not None:
                good &= entry_ok[first_map]
            sample = set(int(s) for s in starts)
            sample.add(int(np.argmin(values)))
            bad = [s for s in sample if not good[s]]
            if not bad and good.any():
                accepted = True
                break
            newly = set(int(first_map[s]) for s in bad)
            if newly <= blocked:
                break
            blocked |= newly
        if accepted:
            break
        dc /= 2.0
        if abs(dc) < delta_min:
            raise StepTooSmall(
                f"support condition kept failing down to delta_c={dc:.2e}"
            )
    after = Pseudograph(g.c + bump.increment, GridFunction(grid, values))
    return MechanismStep(
        word=word,
        bump=bump,
        before=g,
        after=after,
        operator=op1,
        trace=trace,
        arc=arc,
        good=good,
    )


@dataclass
class PolyOrbit:
    """A finite orbit of the switched family, self-certifying.

    ``points[i]`` is a cylinder phase point; ``labels[i]`` names the
    generator mapping point ``i`` to point ``i + 1``; ``residuals[i]`` is
    the cylinder distance between the mapped point and the recorded
    successor.
    """

    points: list[PhasePoint]
    labels: list[int]
    residuals: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0


def backtrack_orbit(steps: list[MechanismStep], terminal: int) -> tuple[list[Transition], list[int]]:
    """Concatenated minimizing chain through all steps, ending at ``terminal``.

    Walks the recorded argmin structures backwards; at each step boundary
    the chain's first index is audited against the bump support (it must
    carry a zero sample, otherwise the chain does not start on the
    previous pseudograph and the orbit claim would be unsound).
    Returns the transitions in forward order plus the step boundary
    offsets into the transition list.
    """
    transitions: list[Transition] = []
    boundaries: list[int] = []
    idx = int(terminal)
    for step in reversed(steps):
        if step.good is not None and not step.good[idx]:
            raise NotBacktrackable(
                f"entry index {idx} is not in the step's good set"
            )
        seg = step.operator.backtrack(step.word, step.trace, idx)
        y0 = seg[0].y
        if step.bump.values[y0] != 0.0:
            raise NotBacktrackable(
                f"support condition audit failed: chain starts at {y0} inside "
                f"the bump support"
            )
        transitions = seg + transitions
        boundaries = [len(seg) + b for b in boundaries]
        boundaries.insert(0, 0)
        idx = y0
    return transitions, boundaries


def _chain_positions(transitions: list[Transition], n: int) -> np.ndarray:
    """Lift the chain to the universal cover (real positions)."""
    xs = [transitions[0].y / n]
    for t in transitions:
        disp = (t.x / n + t.lift) - (t.y / n)
        xs.append(xs[-1] + disp)
    return np.array(xs)


def relax_chain(family, labels: list[int], xs: np.ndarray, *, max_iter: int = 60, tol: float = 1e-11):
    """Damped Newton on the discrete Euler-Lagrange equations.

    Endpoints stay pinned; interior points move off-grid until the
    stationarity residual of the switched action drops below ``tol``.
    Returns the relaxed cover positions and the final residual.
    """
    xs = xs.astype(float).copy()
    m = len(xs)
    if m < 3:
        return xs, 0.0

    # generator of the outgoing transition at each interior node
    out_labels = np.array(labels[1:])
    distinct = sorted(set(labels[1:]))

    def _per_gen(fn, pos_inner):
        out = np.zeros(m - 2)
        for gidx in distinct:
            mask = out_labels == gidx
            out[mask] = fn(family[gidx], pos_inner[mask])
        return out

    def residual_vec(pos):
        # F_i = d2S(x_{i-1}, x_i) + d1S(x_i, x_{i+1})
        #     = 2 x_i - x_{i-1} - x_{i+1} + V'(x_i) for the mechanical form
        inner = pos[1:-1]
        return 2.0 * inner - pos[:-2] - pos[2:] + _per_gen(lambda g_, p: g_.dV(p), inner)

    f = residual_vec(xs)
    best = float(np.abs(f).max()) if len(f) else 0.0
    for _ in range(max_iter):
        if best <= tol:
            break
        # tridiagonal Jacobian: dF_i/dx_i = 2 + V''(x_i), off-diagonals -1
        diag = 2.0 + _per_gen(lambda g_, p: g_.d2V(p), xs[1:-1])
        k = m - 2
        ab = np.zeros((3, k))
        ab[0, 1:] = -1.0
        ab[1, :] = diag
        ab[2, :-1] = -1.0
        try:
            delta = solve_banded((1, 1), ab, f)
        except np.linalg.LinAlgError:
            break
        step_scale = 1.0
        improved = False
        for _ in range(20):
            trial = xs.copy()
            trial[1:-1] = xs[1:-1] - step_scale * delta
            ft = residual_vec(trial)
            norm = float(np.abs(ft).max())
            if norm < best:
                xs, f, best = trial, ft, norm
                improved = True
                break
            step_scale /= 2.0
        if not improved:
            break
    return xs, best


def orbit_from_chain(family, transitions: list[Transition], xs: np.ndarray) -> PolyOrbit:
    """Phase points and labels from cover positions via the generating
    relations: outgoing momentum ``-d1S`` along each transition, incoming
    ``d2S`` at the terminal point."""
    labels = [t.gen for t in transitions]
    points: list[PhasePoint] = []
    for i, t in enumerate(transitions):
        gen = family[t.gen]
        points.append(PhasePoint(xs[i] % 1.0, float(-gen.d1S(xs[i], xs[i + 1]))))
    last = transitions[-1]
    gen = family[last.gen]
    points.append(PhasePoint(xs[-1] % 1.0, float(gen.d2S(xs[-2], xs[-1]))))
    orbit = PolyOrbit(points=points, labels=labels)
    orbit.residuals = verify_polyorbit(family, orbit)
    return orbit


def verify_polyorbit(family, orbit: PolyOrbit, tol: float | None = None) -> list[float]:
    """Independent re-certification: apply each labelled map and measure
    the cylinder distance to the recorded successor.  With ``tol`` given,
    raises :class:`~polykam.errors.NotBacktrackable` on any violation."""
    residuals = []
    for i, label in enumerate(orbit.labels):
        image = apply_map(family[label], orbit.points[i])
        residuals.append(cylinder_distance(image, orbit.points[i + 1]))
    if tol is not None and residuals and max(residuals) > tol:
        raise NotBacktrackable(
            f"orbit verification failed: max residual {max(residuals):.3e} > {tol:.3e}"
        )
    return residuals


@dataclass
class DiffusionResult:
    orbit: PolyOrbit
    steps: list[MechanismStep]
    reports: list[RSpaceReport]
    relax_residual: float


def diffuse(
    family,
    c_start: float,
    c_end: float,
    grid: GridSpec,
    *,
    eps_step: float = 0.05,
    delta_min: float = 1e-4,
    gap_min: int | None = None,
    transient: int | None = None,
    window: int | None = None,
    tol_orbit: float = 1e-3,
    tol_fix: float = 1e-8,
    probe_samples: int = 3,
    reprobe_every: int = 10,
) -> DiffusionResult:
    """Drive the cohomology from ``c_start`` to ``c_end`` and certify an orbit.

    Probes the forcing dichotomy at sampled cohomologies first and refuses
    (:class:`~polykam.errors.Blocked`) unless every sample certifies a full
    forcing space.  Then alternates forcing steps with periodic re-probes,
    refreshing the witness word whenever the current one stops producing a
    gap.  The final orbit is backtracked through every step, relaxed
    off-grid, and re-verified against the maps themselves.
    """
    if c_end == c_start:
        # nothing to force: the empty orbit is trivially verified
        return DiffusionResult(
            orbit=PolyOrbit(points=[], labels=[], residuals=[]),
            steps=[],
            reports=[],
            relax_residual=0.0,
        )
    cache = BarrierCache(family, grid, tol=tol_fix)
    if gap_min is None:
        gap_min = max(4, grid.n // 32)

    samples = np.linspace(c_start, c_end, max(2, probe_samples))
    reports: list[RSpaceReport] = []
    for cs in samples:
        try:
            rep = r_space_probe(family, float(cs), grid, gap_min=gap_min, tol_fix=tol_fix, cache=cache)
        except Unresolved as exc:
            raise Blocked(f"probe unresolved at c={cs}: {exc}", reports=reports) from exc
        reports.append(rep)
        if rep.verdict != "full":
            raise Blocked(
                f"forcing space is trivial at c={cs}: common invariant circle",
                reports=reports,
            )

    sign = 1.0 if c_end > c_start else -1.0
    g = Pseudograph.flat(c_start, grid)
    witness = finitize(reports[0].witness_word, grid, transient, window)
    catalog_left: list[OperatorWord] = []
    steps: list[MechanismStep] = []

    def costs_at(c):
        return cache.costs(c)

    steps_since_probe = 0
    while sign * (c_end - g.c) > 1e-12:
        remaining = abs(c_end - g.c)
        dc = sign * min(eps_step, remaining)
        if steps_since_probe >= reprobe_every:
            steps_since_probe = 0
            rep = r_space_probe(family, g.c, grid, gap_min=gap_min, tol_fix=tol_fix, cache=cache)
            reports.append(rep)
            if rep.verdict != "full":
                raise DiffusionStalled(
                    f"re-probe found a common circle at c={g.c}", trail=steps, pseudograph=g
                )
            witness = finitize(rep.witness_word, grid, transient, window)
        try:
            step = mechanism_step(
                g,
                witness,
                dc,
                costs_at(g.c),
                lambda d: costs_at(g.c + d),
                gap_min=gap_min,
                delta_min=delta_min,
                entry_ok=steps[-1].good if steps else None,
            )
        except NoGap:
            if not catalog_left:
                from .weakkam import default_catalog

                catalog_left = [
                    finitize(w, grid, transient, window)
                    for w in default_catalog(len(family))
                    if finitize(w, grid, transient, window) != witness
                ]
            found = False
            while catalog_left:
                witness = catalog_left.pop(0)
                try:
                    step = mechanism_step(
                        g,
                        witness,
                        dc,
                        costs_at(g.c),
                        lambda d: costs_at(g.c + d),
                        gap_min=gap_min,
                        delta_min=delta_min,
                        entry_ok=steps[-1].good if steps else None,
                    )
                    found = True
                    break
                except NoGap:
                    continue
            if not found:
                raise DiffusionStalled(
                    f"no catalog word yields a gap at c={g.c}", trail=steps, pseudograph=g
                )
        steps.append(step)
        steps_since_probe += 1
        g = step.after

    final_good = steps[-1].good
    masked = np.where(final_good, g.u.values, np.inf)
    terminal = int(np.argmin(masked))
    transitions, _bounds = backtrack_orbit(steps, terminal)
    xs = _chain_positions(transitions, grid.n)
    labels = [t.gen for t in transitions]
    xs_relaxed, relax_residual = relax_chain(family, labels, xs)
    orbit = orbit_from_chain(family, transitions, xs_relaxed)
    verify_polyorbit(family, orbit, tol=tol_orbit)
    return DiffusionResult(orbit=orbit, steps=steps, reports=reports, relax_residual=relax_residual)
