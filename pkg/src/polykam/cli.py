"""Command-line front end: config ingestion, dispatch, and file emission.

Commands
--------
``alpha``     tropical eigenvalue curve over a cohomology range -> alpha.csv / alpha.svg
``solve``     weak-KAM solutions at one cohomology -> solutions.json
``aubry``     contact (Aubry) sets at one cohomology -> aubry.json / aubry.svg
``circles``   common invariant circle detection -> rspace.json
``rspace``    forcing-direction probe (trivial / full dichotomy) -> rspace.json
``diffuse``   momentum-drifting polyorbit -> orbit.csv / orbit.json / orbit.svg
``verify``    independent re-certification of an emitted orbit.csv -> verify.json
``selftest``  frozen micro-examples of the tropical core

Exit status: 0 success, 2 honest negative (blocked, no gap, nothing
found, unresolved), 1 error.  Identical config + command + rng_seed
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    Blocked,
    ConfigError,
    NoGap,
    PolykamError,
    Unresolved,
)
from .mechanism import PolyOrbit, diffuse, verify_polyorbit
from .models import PhasePoint, TwistGenerator
from .pseudograph import Pseudograph
from .tropical import (
    GridFunction,
    GridSpec,
    dual_lax_oleinik,
    lax_oleinik,
    tropical_eigenvalue,
)
from .weakkam import (
    alpha_curve,
    aubry_set,
    default_seeds,
    detect_common_circle,
    r_space_probe,
    weak_kam_solutions,
    word_label,
)

# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GridConfig:
    n: int = 256
    lift_k: int = 2


@dataclass(frozen=True)
class ToleranceConfig:
    tol_fix: float = 1e-8
    tol_orbit: float = 1e-3
    tol_argmin: float = 1e-9
    dedupe_tol: float = 1e-6


@dataclass(frozen=True)
class MechanismConfig:
    eps_step: float = 0.05
    delta_min: float = 1e-4
    gap_min: int | None = None
    transient: int | None = None
    window: int | None = None


@dataclass(frozen=True)
class SeedConfig:
    count: int = 5
    rng_seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    family: tuple[TwistGenerator, ...] = (TwistGenerator.pure_twist(),)
    grid: GridConfig = field(default_factory=GridConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    mechanism: MechanismConfig = field(default_factory=MechanismConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)

    @property
    def grid_spec(self) -> GridSpec:
        return GridSpec(self.grid.n, self.grid.lift_k)

    def seed_functions(self, grid: GridSpec) -> list[GridFunction]:
        return default_seeds(grid, count=self.seeds.count, rng_seed=self.seeds.rng_seed)


_GENERATOR_KEYS = {"type", "k", "cos_coeffs", "sin_coeffs", "label"}


def _check_keys(obj: dict, allowed, path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}.{key}" if path else f"unknown key {key}")


def _parse_generator(obj, path: str) -> TwistGenerator:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: generator spec must be an object")
    _check_keys(obj, _GENERATOR_KEYS, path)
    kind = obj.get("type")
    if kind == "pure_twist":
        gen = TwistGenerator.pure_twist()
    elif kind == "standard":
        if "k" not in obj:
            raise ConfigError(f"{path}.k: standard generator needs a coupling k")
        gen = TwistGenerator.standard(float(obj["k"]))
    elif kind == "fourier":
        gen = TwistGenerator.fourier(
            cos_coeffs=tuple(float(v) for v in obj.get("cos_coeffs", ())),
            sin_coeffs=tuple(float(v) for v in obj.get("sin_coeffs", ())),
        )
    else:
        raise ConfigError(f"{path}.type: unknown generator type {kind!r}")
    if obj.get("label"):
        gen = dataclasses.replace(gen, label=str(obj["label"]))
    return gen


def _fill_section(obj, cls, path: str):
    if obj is None:
        return cls()
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(obj, fields, path)
    kwargs = {}
    for name, value in obj.items():
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse a JSON configuration document; unknown keys are rejected."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected an object")
    _check_keys(doc, {"family", "grid", "tolerances", "mechanism", "seeds"}, "")
    fam_obj = doc.get("family")
    if fam_obj is None:
        family = (TwistGenerator.pure_twist(),)
    else:
        if not isinstance(fam_obj, list) or not fam_obj:
            raise ConfigError("family: must be a non-empty list of generator specs")
        family = tuple(
            _parse_generator(g, f"family[{i}]") for i, g in enumerate(fam_obj)
        )
    grid = _fill_section(doc.get("grid"), GridConfig, "grid")
    if grid.n < 8:
        raise ConfigError("grid.n: must be at least 8")
    if grid.lift_k < 1:
        raise ConfigError("grid.lift_k: must be at least 1")
    tols = _fill_section(doc.get("tolerances"), ToleranceConfig, "tolerances")
    for name in ("tol_fix", "tol_orbit", "tol_argmin", "dedupe_tol"):
        if not getattr(tols, name) > 0:
            raise ConfigError(f"tolerances.{name}: must be positive")
    mech = _fill_section(doc.get("mechanism"), MechanismConfig, "mechanism")
    if not mech.eps_step > 0:
        raise ConfigError("mechanism.eps_step: must be positive")
    if not mech.delta_min > 0:
        raise ConfigError("mechanism.delta_min: must be positive")
    seeds = _fill_section(doc.get("seeds"), SeedConfig, "seeds")
    if seeds.count < 1:
        raise ConfigError("seeds.count: must be at least 1")
    return RunConfig(family=family, grid=grid, tolerances=tols, mechanism=mech, seeds=seeds)


# ---------------------------------------------------------------------------
# emission helpers


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, PhasePoint):
        return {"x": float(obj.x), "p": float(obj.p)}
    if isinstance(obj, Pseudograph):
        return {
            "c": float(obj.c),
            "u": [float(v) for v in obj.u.values],
            "momentum": [float(v) for v in obj.momentum()],
        }
    if isinstance(obj, (str, bool)) or obj is None:
        return obj
    return str(obj)


def _write_json(path: Path, payload) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")


def _svg_document(body: list[str]) -> str:
    head = (
        '<svg xmlns="http://www.w3.org/2000/svg" width="640" height="480" '
        'viewBox="0 0 640 480">\n'
        '<rect x="0" y="0" width="640" height="480" fill="white"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _scale(values, lo_px, hi_px):
    values = np.asarray(values, dtype=float)
    vmin, vmax = float(values.min()), float(values.max())
    if vmax - vmin < 1e-30:
        vmax = vmin + 1.0
    return lo_px + (values - vmin) / (vmax - vmin) * (hi_px - lo_px)


def _svg_polyline(path: Path, xs, ys_list, colors=("black", "tab:blue")) -> None:
    body = ['<rect x="60" y="20" width="540" height="420" fill="none" stroke="black"/>']
    px = _scale(xs, 60.0, 600.0)
    all_y = np.concatenate([np.asarray(ys, dtype=float) for ys in ys_list])
    ymin, ymax = float(all_y.min()), float(all_y.max())
    if ymax - ymin < 1e-30:
        ymax = ymin + 1.0
    palette = ["black", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    for idx, ys in enumerate(ys_list):
        py = 440.0 - (np.asarray(ys, dtype=float) - ymin) / (ymax - ymin) * 420.0
        pts = " ".join(f"{a:.6g},{b:.6g}" for a, b in zip(px, py))
        color = palette[idx % len(palette)]
        body.append(f'<polyline fill="none" stroke="{color}" points="{pts}"/>')
    path.write_text(_svg_document(body), encoding="utf-8")


def _svg_scatter(path: Path, groups) -> None:
    """Scatter plot of (x, p) point groups on the cylinder."""
    body = ['<rect x="60" y="20" width="540" height="420" fill="none" stroke="black"/>']
    palette = ["black", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    all_p = [p for _, pts in groups for (_, p) in pts] or [0.0]
    pmin, pmax = min(all_p), max(all_p)
    if pmax - pmin < 1e-30:
        pmax = pmin + 1.0
    for idx, (_, pts) in enumerate(groups):
        color = palette[idx % len(palette)]
        for x, p in pts:
            cx = 60.0 + (x % 1.0) * 540.0
            cy = 440.0 - (p - pmin) / (pmax - pmin) * 420.0
            body.append(f'<circle cx="{cx:.6g}" cy="{cy:.6g}" r="2" fill="{color}"/>')
    path.write_text(_svg_document(body), encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def _cmd_alpha(config: RunConfig, args, out: Path) -> int:
    cs = np.linspace(args.c_min, args.c_max, args.steps)
    grid = config.grid_spec
    curves = [alpha_curve(gen, cs, grid)[1] for gen in config.family]
    header = ["c"] + [f"alpha_{gen.label}" for gen in config.family]
    rows = [
        [_g17(c)] + [_g17(curve[i]) for curve in curves] for i, c in enumerate(cs)
    ]
    _write_csv(out / "alpha.csv", header, rows)
    _svg_polyline(out / "alpha.svg", cs, curves)
    return 0


def _cmd_solve(config: RunConfig, args, out: Path) -> int:
    grid = config.grid_spec
    seeds = config.seed_functions(grid)
    payload = {"c": args.c, "generators": []}
    for gen in config.family:
        sols = weak_kam_solutions(
            gen,
            args.c,
            grid,
            seeds,
            tol_fix=config.tolerances.tol_fix,
            dedupe_tol=config.tolerances.dedupe_tol,
        )
        alpha = tropical_eigenvalue_for(gen, args.c, grid)
        payload["generators"].append(
            {
                "label": gen.label,
                "alpha": alpha,
                "solutions": [list(map(float, g.u.values)) for g in sols],
            }
        )
    _write_json(out / "solutions.json", payload)
    return 0


def tropical_eigenvalue_for(gen: TwistGenerator, c: float, grid: GridSpec) -> float:
    from .weakkam import build_cost_twist_cached

    return tropical_eigenvalue(build_cost_twist_cached(gen, c, grid))


def _cmd_aubry(config: RunConfig, args, out: Path) -> int:
    grid = config.grid_spec
    payload = {"c": args.c, "generators": []}
    groups = []
    for gen in config.family:
        members, points = aubry_set(gen, args.c, grid)
        payload["generators"].append(
            {
                "label": gen.label,
                "members": list(members.members),
                "points": [{"x": z.x, "p": z.p} for z in points],
            }
        )
        groups.append((gen.label, [(z.x, z.p) for z in points]))
    _write_json(out / "aubry.json", payload)
    _svg_scatter(out / "aubry.svg", groups)
    return 0


def _cmd_circles(config: RunConfig, args, out: Path) -> int:
    grid = config.grid_spec
    seeds = config.seed_functions(grid)
    try:
        circle = detect_common_circle(
            config.family, args.c, grid, seeds, tol_fix=config.tolerances.tol_fix
        )
    except Unresolved:
        circle = None
        status = "unresolved"
    else:
        status = "found" if circle is not None else "rejected"
    payload = {"c": args.c, "command": "circles", "status": status, "circle": circle}
    _write_json(out / "rspace.json", payload)
    return 0 if circle is not None else 2


def _cmd_rspace(config: RunConfig, args, out: Path) -> int:
    grid = config.grid_spec
    seeds = config.seed_functions(grid)
    try:
        report = r_space_probe(
            config.family,
            args.c,
            grid,
            seeds=seeds,
            gap_min=config.mechanism.gap_min,
            tol_fix=config.tolerances.tol_fix,
        )
    except Unresolved as exc:
        _write_json(
            out / "rspace.json",
            {"c": args.c, "command": "rspace", "verdict": "unresolved", "reason": str(exc)},
        )
        return 2
    payload = {
        "c": report.c,
        "command": "rspace",
        "verdict": report.verdict,
        "circle": report.circle,
        "witness_word": word_label(report.witness_word) if report.witness_word else None,
        "gap": list(report.gap),
        "details": report.details,
    }
    _write_json(out / "rspace.json", payload)
    return 0


def _orbit_rows(orbit: PolyOrbit):
    rows = []
    for i, z in enumerate(orbit.points):
        if i < len(orbit.labels):
            rows.append(
                [str(i), _g17(z.x), _g17(z.p), str(orbit.labels[i]), _g17(orbit.residuals[i])]
            )
        else:
            rows.append([str(i), _g17(z.x), _g17(z.p), "", ""])
    return rows


def write_orbit_csv(path: Path, orbit: PolyOrbit) -> None:
    _write_csv(path, ["step", "x", "p", "label", "residual"], _orbit_rows(orbit))


def read_orbit_csv(path: Path) -> PolyOrbit:
    points, labels, residuals = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            points.append(PhasePoint(float(row["x"]), float(row["p"])))
            if row["label"] != "":
                labels.append(int(row["label"]))
                residuals.append(float(row["residual"]))
    return PolyOrbit(points=points, labels=labels, residuals=residuals)


def _cmd_diffuse(config: RunConfig, args, out: Path) -> int:
    grid = config.grid_spec
    mech = config.mechanism
    try:
        result = diffuse(
            config.family,
            args.c_from,
            args.c_to,
            grid,
            eps_step=mech.eps_step,
            delta_min=mech.delta_min,
            gap_min=mech.gap_min,
            transient=mech.transient,
            window=mech.window,
            tol_orbit=config.tolerances.tol_orbit,
            tol_fix=config.tolerances.tol_fix,
        )
    except Blocked as exc:
        _write_json(
            out / "orbit.json",
            {
                "command": "diffuse",
                "status": "blocked",
                "reason": str(exc),
                "from": args.c_from,
                "to": args.c_to,
            },
        )
        return 2
    orbit = result.orbit
    write_orbit_csv(out / "orbit.csv", orbit)
    _write_json(
        out / "orbit.json",
        {
            "command": "diffuse",
            "status": "ok",
            "from": args.c_from,
            "to": args.c_to,
            "cohomology_trail": [s.before.c for s in result.steps]
            + [result.steps[-1].after.c],
            "relax_residual": result.relax_residual,
            "max_residual": orbit.max_residual,
            "points": orbit.points,
            "labels": orbit.labels,
            "residuals": orbit.residuals,
            "probes": [
                {"c": r.c, "verdict": r.verdict, "witness": word_label(r.witness_word) if r.witness_word else None}
                for r in result.reports
            ],
        },
    )
    _svg_polyline(
        out / "orbit.svg",
        np.arange(len(orbit.points)),
        [[z.p for z in orbit.points]],
    )
    return 0


def _cmd_verify(config: RunConfig, args, out: Path) -> int:
    orbit = read_orbit_csv(Path(args.orbit))
    residuals = verify_polyorbit(config.family, orbit)
    worst = max(residuals) if residuals else 0.0
    ok = worst <= config.tolerances.tol_orbit
    _write_json(
        out / "verify.json",
        {
            "command": "verify",
            "orbit": str(args.orbit),
            "steps": len(residuals),
            "max_residual": worst,
            "tolerance": config.tolerances.tol_orbit,
            "certified": ok,
        },
    )
    return 0 if ok else 2


def _cmd_selftest(config: RunConfig, args, out: Path) -> int:
    from .tropical import CostMatrix

    grid = GridSpec(2, 1)
    a = CostMatrix(grid, np.array([[1.0, 4.0], [2.0, 0.0]]))
    checks = []
    t = lax_oleinik(a, GridFunction(grid, np.array([0.0, 0.0])))
    checks.append(("lax_oleinik", bool(np.allclose(t.values, [1.0, 0.0]))))
    checks.append(("eigenvalue", abs(tropical_eigenvalue(a) - 0.0) < 1e-15))
    d = dual_lax_oleinik(a, GridFunction(grid, np.array([1.0, 0.0])))
    checks.append(("dual", bool(np.allclose(d.values, [0.0, 0.0]))))
    from .tropical import peierls_closure

    bar = peierls_closure(a)
    checks.append(
        ("peierls", bool(np.allclose(bar.h.entries, [[6.0, 4.0], [2.0, 0.0]])))
    )
    payload = {"command": "selftest", "checks": [{"name": n, "ok": ok} for n, ok in checks]}
    _write_json(out / "selftest.json", payload)
    return 0 if all(ok for _, ok in checks) else 1


# ---------------------------------------------------------------------------
# dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polykam",
        description="weak-KAM toolkit for polysystems of exact twist maps",
    )
    parser.add_argument("--config", type=str, default=None, help="JSON config path")
    parser.add_argument("--out", type=str, default="out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("alpha", help="alpha-function curve")
    p.add_argument("--c-min", dest="c_min", type=float, default=0.0)
    p.add_argument("--c-max", dest="c_max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=21)

    for name in ("solve", "aubry", "circles", "rspace"):
        p = sub.add_parser(name)
        p.add_argument("--c", type=float, default=0.0)

    p = sub.add_parser("diffuse", help="momentum-drifting polyorbit")
    p.add_argument("--from", dest="c_from", type=float, required=True)
    p.add_argument("--to", dest="c_to", type=float, required=True)

    p = sub.add_parser("verify", help="re-certify an emitted orbit.csv")
    p.add_argument("--orbit", type=str, required=True)

    sub.add_parser("selftest")
    return parser


_COMMANDS = {
    "alpha": _cmd_alpha,
    "solve": _cmd_solve,
    "aubry": _cmd_aubry,
    "circles": _cmd_circles,
    "rspace": _cmd_rspace,
    "diffuse": _cmd_diffuse,
    "verify": _cmd_verify,
    "selftest": _cmd_selftest,
}

_NEGATIVE = (Blocked, NoGap, Unresolved)


def run(command: str, args, config: RunConfig, out_dir) -> int:
    """Dispatch one command; returns the process exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[command](config, args, out)
    except _NEGATIVE as exc:
        print(f"{type(exc).__module__}.{type(exc).__qualname__}: {exc}", file=sys.stderr)
        return 2
    except PolykamError as exc:
        print(f"{type(exc).__module__}.{type(exc).__qualname__}: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            config = parse_config(Path(args.config).read_text(encoding="utf-8"))
        else:
            config = RunConfig()
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return run(args.command, args, config, args.out)


if __name__ == "__main__":
    sys.exit(main())
