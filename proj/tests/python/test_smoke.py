import math
import os
import pathlib
import subprocess

import pytest

import sievehom

CLI = os.environ.get("SIEVEHOM_CLI")


def test_critical_hole_size():
    assert sievehom.critical_hole_size(1.0, 5, 2.0) == 1.0
    a = sievehom.critical_hole_size(1e-2, 2, 1.5)
    assert math.isclose(a, 10.0 ** (-8.0 / 3.0), rel_tol=1e-12)


def test_discrepancy_and_bounds():
    # Perfectly spread points: D_N = 1/N exactly.
    n = 50
    values = [(j + 0.5) / n for j in range(n)]
    two_sided, star, count = sievehom.discrepancy(values)
    assert count == n
    assert math.isclose(two_sided, 1.0 / n, rel_tol=1e-12)
    assert star <= two_sided + 1e-15
    assert sievehom.erdos_turan_bound(values) >= two_sided

    dev, hits, total = sievehom.interval_deviation(values, 0.0, 0.5)
    assert (hits, total) == (25, n)
    assert dev == 0.0


def test_surface_sequence_matches_direct_evaluation():
    surf = sievehom.ConvexSurface.quadratic([1.0], [0.0], 0.45, [-0.25], [1.25])
    eps = 1.0 / 64
    vals = sievehom.surface_values(surf, eps, [0.0], [0.5])
    ks = range(math.ceil(0.0 / eps), math.ceil(0.5 / eps))
    expect = [math.modf((0.5 * (k * eps) ** 2 + 0.45) / eps)[0] % 1.0 for k in ks]
    assert len(vals) == len(expect)
    assert max(abs(a - b) for a, b in zip(vals, expect)) < 1e-9


def test_capacity_values():
    # Grounding at |y| = R makes this the spherical-condenser value
    # 4*pi / (1 - 1/R); the whole-space 4*pi is the R -> infinity limit.
    ball = sievehom.HoleShape.ball(3, 1.0)
    cap = sievehom.capacity(2.0, ball, R=4.0, cells=24, levels=2)
    exact = 4.0 * math.pi / (1.0 - 1.0 / 4.0)
    assert abs(cap - exact) / exact < 0.05

    value, solves = sievehom.mean_capacity(2.0, ball, [0.0, 0.0, 1.0], R=4.0, cells=16,
                                           quad_tol=0.05)
    assert value > 0.0 and solves >= 3


def test_run_config_roundtrip(tmp_path):
    text = sievehom.fixture_config("discrepancy-parabola")
    assert ("discrepancy-parabola", ) in [(name, ) for name, _ in sievehom.fixtures()]
    assert sievehom.validate_config(text) == []

    out_dir, files = sievehom.run_config(text, str(tmp_path), dir_name="r1")
    assert "deviation.csv" in files and "MANIFEST.txt" not in files
    assert (pathlib.Path(out_dir) / "MANIFEST.txt").exists()

    # Same config, same seed: byte-identical artifacts.
    out2, _ = sievehom.run_config(text, str(tmp_path), dir_name="r2")
    for name in files:
        a = (pathlib.Path(out_dir) / name).read_bytes()
        b = (pathlib.Path(out2) / name).read_bytes()
        assert a == b, name


def test_config_errors_name_the_key():
    with pytest.raises(ValueError, match="space.p"):
        sievehom.run_config("[experiment]\nkind = capacity\nname = t\n[space]\nd = 2\n",
                            "/tmp")


@pytest.mark.skipif(CLI is None, reason="SIEVEHOM_CLI not set")
class TestCli:
    def run(self, *args):
        return subprocess.run([CLI, *args], capture_output=True, text=True)

    def test_list_fixtures(self):
        r = self.run("list-fixtures")
        assert r.returncode == 0
        assert "discrepancy-parabola" in r.stdout

    def test_validate_fixture(self):
        r = self.run("validate", "--config", "capacity-ball-3d")
        assert r.returncode == 0

    def test_validate_bad_config(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[experiment]\nkind = capacity\nname = t\n"
                       "[space]\nd = 2\np = 0.5\n")
        r = self.run("validate", "--config", str(bad))
        assert r.returncode == 2
        assert "space.p" in r.stderr

    def test_missing_config_is_usage_error(self):
        r = self.run("run", "--config", "no-such-fixture")
        assert r.returncode == 2

    def test_run_writes_manifest(self, tmp_path):
        r = self.run("run", "--config", "capacity-cube-2d", "--out", str(tmp_path),
                     "--quiet")
        assert r.returncode == 0, r.stderr
        runs = list(tmp_path.iterdir())
        assert len(runs) == 1
        manifest = (runs[0] / "MANIFEST.txt").read_text()
        assert "capacity.csv" in manifest
