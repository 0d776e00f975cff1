"""cli: command composition, exit codes, file outputs."""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from conftest import cyclone_fieldset, synthetic_fieldset
from wxrobust.cli import main
from wxrobust.core import GridSpec
from wxrobust.forecast import SurrogateBackend, SurrogateParams, rollout
from wxrobust.harness import MANIFEST_NAME, ExperimentManifest
from wxrobust.stateio import read_state, write_state

GRID = GridSpec.from_resolution(10.0)
STUB = Path(__file__).parent / "stub_backend.py"


@pytest.fixture
def state_path(tmp_path):
    p = tmp_path / "ic.wxs"
    write_state(p, synthetic_fieldset(GRID, seed=3))
    return p


@pytest.fixture
def stats_path(tmp_path, state_path):
    p = tmp_path / "ic.stats.csv"
    assert main(["stats", str(state_path), str(p)]) == 0
    return p


class TestStats:
    def test_valid_snapshot(self, tmp_path, state_path):
        out = tmp_path / "s.stats.csv"
        assert main(["stats", str(state_path), str(out)]) == 0
        assert len(out.read_text().splitlines()) == 73

    def test_missing_input_is_data_error(self, tmp_path):
        assert main(["stats", str(tmp_path / "nope.wxs"), str(tmp_path / "o.csv")]) == 2

    def test_constant_channel_warns_but_succeeds(self, tmp_path, capsys):
        fs = synthetic_fieldset(GRID, seed=3)
        values = fs.values.copy()
        values[5] = 7.0
        p = tmp_path / "const.wxs"
        write_state(p, fs.with_values(values))
        assert main(["stats", str(p), str(tmp_path / "o.csv")]) == 0
        assert "degenerate std" in capsys.readouterr().err


class TestPerturb:
    def test_zero_noise_bitwise_identity(self, tmp_path, state_path, stats_path):
        out = tmp_path / "out.wxs"
        rc = main(["perturb", str(state_path), str(out), "--stats", str(stats_path),
                   "--beta", "0", "--alpha", "0"])
        assert rc == 0
        assert out.read_bytes() == state_path.read_bytes()

    def test_seeded_noise_deterministic(self, tmp_path, state_path, stats_path):
        a, b = tmp_path / "a.wxs", tmp_path / "b.wxs"
        for out in (a, b):
            rc = main(["perturb", str(state_path), str(out), "--stats", str(stats_path),
                       "--beta", "0.05", "--seed", "7"])
            assert rc == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != state_path.read_bytes()

    def test_beta_out_of_range_is_usage_error(self, tmp_path, state_path, stats_path, capsys):
        rc = main(["perturb", str(state_path), str(tmp_path / "o.wxs"),
                   "--stats", str(stats_path), "--beta", "1.5"])
        assert rc == 1
        assert "beta out of range" in capsys.readouterr().err


class TestRandomize:
    def test_chi2(self, tmp_path, stats_path):
        out = tmp_path / "r.wxs"
        rc = main(["randomize", str(out), "--stats", str(stats_path), "--dist", "chi2",
                   "--seed", "3", "--resolution", "10"])
        assert rc == 0
        assert read_state(out).grid == GRID

    def test_unsupported_distribution(self, tmp_path, stats_path, capsys):
        rc = main(["randomize", str(tmp_path / "r.wxs"), "--stats", str(stats_path),
                   "--dist", "cauchy"])
        assert rc == 1
        assert "unsupported distribution" in capsys.readouterr().err

    def test_same_seed_identical_files(self, tmp_path, stats_path):
        a, b = tmp_path / "a.wxs", tmp_path / "b.wxs"
        for out in (a, b):
            assert main(["randomize", str(out), "--stats", str(stats_path), "--dist", "normal",
                         "--seed", "11", "--resolution", "10"]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestForecast:
    def test_surrogate_fifteen_states(self, tmp_path, state_path):
        out = tmp_path / "fc"
        rc = main(["forecast", str(state_path), "--backend", "surrogate",
                   "--steps", "14", "--out-dir", str(out)])
        assert rc == 0
        files = sorted(out.glob("state_*.wxs"))
        assert len(files) == 15

    def test_zero_steps_is_usage_error(self, tmp_path, state_path):
        assert main(["forecast", str(state_path), "--steps", "0",
                     "--out-dir", str(tmp_path / "fc")]) == 1

    def test_relax_requires_stats(self, tmp_path, state_path):
        assert main(["forecast", str(state_path), "--steps", "2", "--relax", "0.5",
                     "--out-dir", str(tmp_path / "fc")]) == 1

    def test_failing_external_is_backend_error(self, tmp_path, state_path, monkeypatch, capsys):
        monkeypatch.setenv("STUB_MODE", "exit3")
        rc = main(["forecast", str(state_path), "--backend", "external",
                   "--command", f"{sys.executable} {STUB}",
                   "--workdir", str(tmp_path / "xc"),
                   "--steps", "3", "--out-dir", str(tmp_path / "fc")])
        assert rc == 3
        assert "step 0" in capsys.readouterr().err

    def test_external_stub_identity(self, tmp_path, state_path, monkeypatch):
        monkeypatch.delenv("STUB_MODE", raising=False)
        out = tmp_path / "fc"
        rc = main(["forecast", str(state_path), "--backend", "external",
                   "--command", f"{sys.executable} {STUB}",
                   "--workdir", str(tmp_path / "xc"),
                   "--steps", "2", "--out-dir", str(out)])
        assert rc == 0
        first = read_state(out / "state_000.wxs")
        last = read_state(out / "state_002.wxs")
        assert first.values.tobytes() == last.values.tobytes()


def _forecast_dirs(tmp_path):
    """Identical forecast/truth directories from a surrogate rollout."""
    ic = cyclone_fieldset(GRID, 30.0, 270.0, width_deg=12.0)
    run = rollout(SurrogateBackend(SurrogateParams(advect_cells_lon=1)), ic, steps=6)
    fdir, tdir = tmp_path / "fc", tmp_path / "truth"
    fdir.mkdir(), tdir.mkdir()
    for k, state in enumerate(run.states):
        write_state(fdir / f"state_{k:03d}.wxs", state)
        write_state(tdir / f"state_{k:03d}.wxs", state)
    return fdir, tdir


class TestTrack:
    def test_identical_series_zero_mte(self, tmp_path, capsys):
        fdir, tdir = _forecast_dirs(tmp_path)
        out = tmp_path / "track"
        rc = main(["track", "--forecast-dir", str(fdir), "--truth-dir", str(tdir),
                   "--region", "10,50,250,340", "--out-dir", str(out)])
        assert rc == 0
        assert "mte_km=0" in capsys.readouterr().out
        assert (out / "forecast_trajectory.csv").read_text() == (out / "truth_trajectory.csv").read_text()
        assert (out / "mte.txt").read_text().strip() == "0"

    def test_trajectory_csv_format(self, tmp_path):
        fdir, tdir = _forecast_dirs(tmp_path)
        out = tmp_path / "track"
        main(["track", "--forecast-dir", str(fdir), "--truth-dir", str(tdir),
              "--region", "10,50,250,340", "--out-dir", str(out)])
        lines = (out / "forecast_trajectory.csv").read_text().splitlines()
        assert lines[0] == "time,lat,lon"
        assert len(lines) == 8  # header + 7 states
        assert lines[1].count(",") == 2


class TestEvaluate:
    def test_range_change_conserves_mass(self, tmp_path):
        fdir, tdir = _forecast_dirs(tmp_path)
        outs = {}
        for rng in ("7.5", "15"):
            out = tmp_path / f"eval_{rng}"
            rc = main(["evaluate", "--forecast-dir", str(fdir), "--truth-dir", str(tdir),
                       "--variable", "msl", "--range", rng, "--out-dir", str(out)])
            assert rc == 0
            outs[rng] = out

        def totals(p):
            lines = p.read_text().splitlines()[1:]
            return sum(int(l.split(",")[2]) for l in lines), (lines[0].split(",")[0], lines[-1].split(",")[1])

        mass75, edges75 = totals(outs["7.5"] / "hist_final.csv")
        mass15, edges15 = totals(outs["15"] / "hist_final.csv")
        assert mass75 == mass15 == GRID.lat_count * GRID.lon_count
        assert edges75 != edges15

    def test_regional_evaluation(self, tmp_path):
        fdir, tdir = _forecast_dirs(tmp_path)
        out = tmp_path / "eval"
        rc = main(["evaluate", "--forecast-dir", str(fdir), "--truth-dir", str(tdir),
                   "--region", "10,50,250,340", "--out-dir", str(out)])
        assert rc == 0
        rows = (out / "summary.csv").read_text().splitlines()
        assert len(rows) == 8  # header + one per time point


class TestEnsembleAndReport:
    def _write_config(self, tmp_path, tdir, extra=None):
        cfg = {
            "truth_states": str(tdir),
            "out_dir": str(tmp_path / "exp"),
            "levels": [0.0, 0.05],
            "trials": 3,
            "base_seed": 12,
            "backend": {"kind": "surrogate", "advect_cells_lon": 1},
            "track": {"region": [10, 50, 250, 340]},
        }
        cfg.update(extra or {})
        p = tmp_path / "exp.yaml"
        p.write_text(yaml.safe_dump(cfg))
        return p

    def test_ensemble_then_report(self, tmp_path):
        _, tdir = _forecast_dirs(tmp_path)
        cfg = self._write_config(tmp_path, tdir)
        assert main(["ensemble", str(cfg)]) == 0
        manifest_path = tmp_path / "exp" / MANIFEST_NAME
        manifest = ExperimentManifest.read(manifest_path)
        assert len(manifest.trials) == 6

        out = tmp_path / "report"
        assert main(["report", str(manifest_path), "--out-dir", str(out)]) == 0
        lines = (out / "mte_by_level.csv").read_text().splitlines()
        assert len(lines) == 3  # header + 2 levels
        for line, agg in zip(lines[1:], manifest.aggregates):
            cells = line.split(",")
            assert float(cells[6]) == agg.mean_mte_km
            assert float(cells[7]) == agg.std_mte_km
        med = (out / "median_summaries.csv").read_text().splitlines()
        assert len(med) == 1 + 2 * 7  # header + 2 levels x 7 time points

    def test_flag_overrides(self, tmp_path):
        _, tdir = _forecast_dirs(tmp_path)
        cfg = self._write_config(tmp_path, tdir)
        out2 = tmp_path / "exp2"
        assert main(["ensemble", str(cfg), "--trials", "2", "--levels", "0",
                     "--out-dir", str(out2)]) == 0
        manifest = ExperimentManifest.read(out2 / MANIFEST_NAME)
        assert len(manifest.trials) == 2

    def test_random_ic_mode(self, tmp_path):
        _, tdir = _forecast_dirs(tmp_path)
        cfg = self._write_config(tmp_path, tdir, extra={
            "mode": "random_ic",
            "distributions": ["chi2", "normal"],
            "trials": 1,
        })
        # noise-only keys are rejected in random_ic mode
        raw = yaml.safe_load(cfg.read_text())
        for key in ("levels", "track"):
            raw.pop(key)
        cfg.write_text(yaml.safe_dump(raw))
        assert main(["ensemble", str(cfg)]) == 0
        manifest = ExperimentManifest.read(tmp_path / "exp" / MANIFEST_NAME)
        assert [t.distribution for t in manifest.trials] == ["chi2", "normal"]

    def test_unknown_config_key_is_data_error(self, tmp_path, capsys):
        _, tdir = _forecast_dirs(tmp_path)
        cfg = self._write_config(tmp_path, tdir, extra={"typo_key": 1})
        assert main(["ensemble", str(cfg)]) == 2
        assert "unknown config keys" in capsys.readouterr().err


class TestEntrypoint:
    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 1

    def test_module_invocation(self, tmp_path, state_path):
        out = tmp_path / "s.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "wxrobust", "stats", str(state_path), str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert len(out.read_text().splitlines()) == 73

    def test_module_invocation_exit_codes(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "wxrobust", "stats", str(tmp_path / "missing.wxs"),
             str(tmp_path / "o.csv")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
