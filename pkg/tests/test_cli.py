"""Config parsing, command dispatch, exit codes, and output determinism."""

import json

import numpy as np
import pytest

from polykam.cli import (
    RunConfig,
    main,
    parse_config,
    read_orbit_csv,
    write_orbit_csv,
)
from polykam.errors import ConfigError
from polykam.mechanism import PolyOrbit
from polykam.models import PhasePoint, TwistGenerator, apply_map


# ---------------------------------------------------------------------------
# config parsing


def test_parse_config_minimal_defaults():
    cfg = parse_config('{"family":[{"type":"pure_twist"}]}')
    assert cfg.grid.n == 256 and cfg.grid.lift_k == 2
    assert cfg.tolerances.tol_fix == 1e-8
    assert cfg.mechanism.eps_step == 0.05
    assert cfg.seeds.count == 5 and cfg.seeds.rng_seed == 0


def test_parse_config_partial_override():
    cfg = parse_config('{"family":[{"type":"standard","k":2.0}],"grid":{"n":128}}')
    assert cfg.grid.n == 128 and cfg.grid.lift_k == 2
    assert cfg.family[0].kind == "standard" and cfg.family[0].k == 2.0


def test_parse_config_rejects_bad_documents():
    with pytest.raises(ConfigError):
        parse_config('{"family":[]}')
    with pytest.raises(ConfigError) as exc:
        parse_config('{"family":[{"type":"pure_twist"}],"grid":{"m":9}}')
    assert "grid.m" in str(exc.value)
    with pytest.raises(ConfigError):
        parse_config('{"family":[{"type":"pure_twist"}],"bogus":1}')
    with pytest.raises(ConfigError):
        parse_config("not json")
    with pytest.raises(ConfigError):
        parse_config('{"family":[{"type":"pure_twist"}],"grid":{"n":4}}')
    with pytest.raises(ConfigError):
        parse_config('{"family":[{"type":"unknown_kind"}]}')
    with pytest.raises(ConfigError):
        parse_config('{"family":[{"type":"standard"}]}')  # missing k
    with pytest.raises(ConfigError):
        parse_config(
            '{"family":[{"type":"pure_twist"}],"tolerances":{"tol_fix":-1}}'
        )


def test_default_config_is_valid():
    cfg = RunConfig()
    assert cfg.family[0].kind == "pure_twist"
    assert cfg.grid_spec.n == 256


# ---------------------------------------------------------------------------
# commands through main()

CFG64 = '{"family":[{"type":"pure_twist"}],"grid":{"n":64}}'
CFG_PAIR = '{"family":[{"type":"pure_twist"},{"type":"standard","k":2.0}],"grid":{"n":64}}'


def _write_cfg(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_alpha_command_and_determinism(tmp_path):
    cfg = _write_cfg(tmp_path, CFG64)
    out = tmp_path / "out"
    args = ["--config", cfg, "--out", str(out), "alpha", "--c-min", "0", "--c-max", "1", "--steps", "21"]
    assert main(args) == 0
    first = (out / "alpha.csv").read_bytes()
    svg_first = (out / "alpha.svg").read_bytes()

    lines = first.decode().strip().split("\r\n")
    assert lines[0] == "c,alpha_twist"
    assert len(lines) == 22  # header + 21 rows
    mid = dict(zip(("c", "alpha"), lines[11].split(",")))
    assert float(mid["c"]) == 0.5
    assert abs(float(mid["alpha"]) - 0.125) <= 1e-3

    assert main(args) == 0
    assert (out / "alpha.csv").read_bytes() == first
    assert (out / "alpha.svg").read_bytes() == svg_first


def test_circles_command_exit_codes(tmp_path):
    cfg = _write_cfg(tmp_path, CFG64)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "circles", "--c", "0.0"]) == 0
    doc = json.loads((out / "rspace.json").read_text())
    assert doc["status"] == "found"
    assert doc["circle"] is not None

    cfg2 = _write_cfg(tmp_path, CFG_PAIR, "pair.json")
    assert main(["--config", cfg2, "--out", str(out), "circles", "--c", "0.0"]) == 2


def test_rspace_command(tmp_path):
    cfg = _write_cfg(tmp_path, CFG_PAIR)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "rspace", "--c", "0.0"]) == 0
    doc = json.loads((out / "rspace.json").read_text())
    assert doc["verdict"] == "full"
    assert doc["witness_word"]


def test_solve_and_aubry_commands(tmp_path):
    cfg = _write_cfg(tmp_path, CFG64)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "solve", "--c", "0.3"]) == 0
    doc = json.loads((out / "solutions.json").read_text())
    assert len(doc["generators"][0]["solutions"]) >= 1
    assert doc["generators"][0]["alpha"] == pytest.approx(0.045, abs=2e-3)

    assert main(["--config", cfg, "--out", str(out), "aubry", "--c", "0.0"]) == 0
    doc = json.loads((out / "aubry.json").read_text())
    assert doc["generators"][0]["members"] == list(range(64))
    assert (out / "aubry.svg").exists()


def test_diffuse_blocked_exit_code(tmp_path):
    cfg = _write_cfg(tmp_path, CFG64)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "diffuse", "--from", "0", "--to", "0.5"]) == 2
    doc = json.loads((out / "orbit.json").read_text())
    assert doc["status"] == "blocked"


def test_diffuse_and_verify_roundtrip(tmp_path):
    cfg = _write_cfg(tmp_path, CFG_PAIR)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "diffuse", "--from", "0", "--to", "0.1"]) == 0
    doc = json.loads((out / "orbit.json").read_text())
    assert doc["status"] == "ok"
    assert doc["max_residual"] <= 1e-3
    assert (out / "orbit.svg").exists()

    assert main(
        ["--config", cfg, "--out", str(out), "verify", "--orbit", str(out / "orbit.csv")]
    ) == 0
    vdoc = json.loads((out / "verify.json").read_text())
    assert vdoc["certified"] is True


def test_verify_rejects_corrupted_orbit(tmp_path):
    fam = [TwistGenerator.pure_twist()]
    z = PhasePoint(0.1, 0.4)
    points, labels = [z], []
    for _ in range(5):
        labels.append(0)
        z = apply_map(fam[0], z)
        points.append(z)
    points[2] = PhasePoint(points[2].x, points[2].p + 0.05)
    orbit = PolyOrbit(points=points, labels=labels, residuals=[0.0] * 5)
    path = tmp_path / "orbit.csv"
    write_orbit_csv(path, orbit)

    cfg = _write_cfg(tmp_path, CFG64)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "verify", "--orbit", str(path)]) == 2


def test_orbit_csv_roundtrip(tmp_path):
    fam = [TwistGenerator.pure_twist()]
    z = PhasePoint(0.123456789, 0.3)
    points, labels = [z], []
    for _ in range(4):
        labels.append(0)
        z = apply_map(fam[0], z)
        points.append(z)
    orbit = PolyOrbit(points=points, labels=labels, residuals=[0.0] * 4)
    path = tmp_path / "orbit.csv"
    write_orbit_csv(path, orbit)
    back = read_orbit_csv(path)
    assert back.labels == orbit.labels
    for a, b in zip(back.points, orbit.points):
        assert a.x == b.x and a.p == b.p  # 17 significant digits round-trip


def test_selftest_command(tmp_path):
    assert main(["--out", str(tmp_path / "out"), "selftest"]) == 0


def test_bad_config_path_exits_1(tmp_path):
    assert main(["--config", str(tmp_path / "missing.json"), "--out", str(tmp_path), "selftest"]) == 1
