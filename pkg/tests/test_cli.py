import json
import math

import numpy as np
import pytest
import yaml
from click.testing import CliRunner
from conftest import PROV_RE, read_data_lines

from rram_mcmc import characterize as ch
from rram_mcmc.cli import main
from rram_mcmc.config import (
    ConfigError,
    config_from_dict,
    load_preset,
    preset_dict,
    preset_names,
    with_override,
)
from rram_mcmc.crossbar import CrossbarArray
from rram_mcmc.device import DeviceLaw
from rram_mcmc.outputs import read_csv

TOY_2D = {
    "command": "train-supervised",
    "master_seed": 5,
    "runs": 2,
    "device": {"g_min": 40.0, "g_max": 80.0, "use_lut": True},
    "mcmc": {"rows": 64, "burn_in": 8, "sigma_prior": 40.0, "scale_S": 0.1},
    "task": {"kind": "two_gaussians", "n": 20, "shift": 3.0, "grid_steps": 11},
}


def _write(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def _invoke(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env, catch_exceptions=False)


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# -- configuration ------------------------------------------------------------


def test_bundled_presets_validate():
    names = preset_names()
    for required in ("illustrative-2d", "breast-cancer-256x16", "cartpole-512x4"):
        assert required in names
    for name in names:
        load_preset(name)


def test_unknown_keys_rejected():
    for where in ("device", "mcmc", "task"):
        doc = json.loads(json.dumps(TOY_2D))
        doc[where]["typo"] = 1
        with pytest.raises(ConfigError, match="typo"):
            config_from_dict(doc)
    with pytest.raises(ConfigError):
        config_from_dict({**TOY_2D, "extra": 1})


@pytest.mark.parametrize(
    "patch",
    [
        {"command": "dance"},
        {"runs": 0},
        {"task": {"kind": "cartpole"}},
        {"device": {"g_min": 40.0}},
        {"device": {"g_min": 40.0, "g_max": 80.0, "i_min": 1.0, "i_max": 2.0}},
        {"mcmc": {"rows": 10, "burn_in": 9}},
        {"master_seed": -1},
        {"runs": "many"},
    ],
)
def test_invalid_configs(patch):
    with pytest.raises(ConfigError):
        config_from_dict({**TOY_2D, **patch})


def test_digest_ignores_jobs_and_out():
    a = config_from_dict(TOY_2D)
    b = config_from_dict({**TOY_2D, "jobs": 3, "out": "elsewhere"})
    c = config_from_dict({**TOY_2D, "master_seed": 6})
    assert a.digest() == b.digest() != c.digest()


def test_override():
    cfg = load_preset("cartpole-d2d-sweep")
    sub = with_override(cfg, "mcmc.variability_mode", "cycle_only")
    assert sub.command == "train-rl" and sub.mcmc.variability_mode == "cycle_only"
    with pytest.raises(ConfigError):
        with_override(cfg, "mcmc.nope", 1)


# -- characterize ---------------------------------------------------------------


def test_noiseless_fit_recovers_constants_exactly():
    law = DeviceLaw(e=0.0)
    s = ch.power_law_sweep(law, 4, 3, 9, np.random.default_rng(0), d2d=False)
    noiseless = ch.PowerLawSweep(s.i_set, s.law_median, s.law_sd, s.law_median, s.law_sd).fit()
    assert noiseless["d"] == pytest.approx(0.19, rel=1e-9)
    assert noiseless["c"] == pytest.approx(0.78, rel=1e-9)


def test_device_spread_shape():
    law = DeviceLaw.from_conductance_range(40.0, 200.0, e=0.0046)
    i = math.sqrt(law.i_min * law.i_max)
    med, sd = ch.device_spread(law, 4096, 500, i, np.random.default_rng(1))
    # every device sits near the law; medians scatter by the d2d spread, SDs by sampling
    assert med.shape == sd.shape == (4096,)
    assert np.median(med) == pytest.approx(law.d * i**law.c, rel=0.01)
    assert np.median(sd) == pytest.approx(law.a * i**law.b, rel=0.02)
    assert np.std(med) == pytest.approx(law.e * i**law.c, rel=0.1)
    assert abs(np.corrcoef(med, sd)[0, 1]) < 0.1


def test_characterize_cli(tmp_path):
    doc = preset_dict("characterize")
    doc["task"].update(devices=256, cycles=20, population_devices=64, population_cycles=50, single_device_cycles=100)
    cfg = _write(tmp_path, doc)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    r = _invoke("characterize", "--config", cfg, "--out", out1)
    assert r.exit_code == 0, r.output
    _invoke("characterize", "--config", cfg, "--out", out2, "--no-plots")
    for name in ("power_law.csv", "fit.csv", "cycle_distribution.csv", "device_spread.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        assert PROV_RE.match((out1 / name).read_text().splitlines()[0])
    assert (out1 / "fig_power_law.png").stat().st_size > 0
    assert not (out2 / "fig_power_law.png").exists()
    header, rows = read_csv(out1 / "power_law.csv")
    assert header == ["i_set", "empirical_median", "empirical_sd", "law_median", "law_sd"]
    assert len(rows) == 9


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    r = _invoke("characterize", "--preset", "characterize", "--out", blocker / "sub")
    assert r.exit_code == 2


# -- train-supervised -----------------------------------------------------------


def test_train_supervised_outputs(tmp_path):
    cfg = _write(tmp_path, TOY_2D)
    out = tmp_path / "o"
    r = _invoke("train-supervised", "--config", cfg, "--out", out)
    assert r.exit_code == 0, r.output
    files = _files(out)
    assert sorted(k for k in files if k.startswith("snapshots/")) == ["snapshots/run000.json", "snapshots/run001.json"]
    assert "summary.csv" in files and "fig_probability_contour.png" in files
    for name, blob in files.items():
        if name.endswith(".csv"):
            assert PROV_RE.match(blob.decode().splitlines()[0]), name
        elif name.endswith(".json"):
            assert json.loads(blob)["provenance"]["master_seed"] == 5
    # summary recomputable from per-run rows
    _, runs = read_csv(out / "runs.csv")
    header, summary = read_csv(out / "summary.csv")
    accs = [float(r[2]) for r in runs]
    assert float(summary[0][header.index("median")]) == pytest.approx(float(np.median(accs)))
    # probability grid inside [0, 1]
    _, grid = read_csv(out / "probability_grid.csv")
    assert all(0.0 <= float(p[2]) <= 1.0 for p in grid)


def test_rerun_byte_identical_and_jobs_invariant(tmp_path):
    cfg = _write(tmp_path, TOY_2D)
    _invoke("train-supervised", "--config", cfg, "--out", tmp_path / "a")
    _invoke("train-supervised", "--config", cfg, "--out", tmp_path / "b", "--jobs", 2)
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_env_overrides(tmp_path):
    cfg = _write(tmp_path, TOY_2D)
    out = tmp_path / "env"
    r = _invoke("train-supervised", "--config", cfg, "--no-plots", env={"RRAM_MCMC_OUT": str(out), "RRAM_MCMC_RUNS": "1", "RRAM_MCMC_SEED": "77"})
    assert r.exit_code == 0, r.output
    _, runs = read_csv(out / "runs.csv")
    assert len(runs) == 1
    assert "master_seed=77" in (out / "runs.csv").read_text().splitlines()[0]


def test_no_d2d_and_no_lut_flags(tmp_path):
    cfg = _write(tmp_path, TOY_2D)
    out = tmp_path / "o"
    _invoke("train-supervised", "--config", cfg, "--out", out, "--runs", 1, "--no-d2d", "--no-lut", "--no-plots")
    snap = json.loads((out / "snapshots" / "run000.json").read_text())
    assert snap["lut"] is None
    assert len(set(snap["d_plus"])) == 1
    rec = json.loads((out / "records" / "run000.json").read_text())
    assert rec["config"]["variability_mode"] == "cycle_only"
    assert "wall_clock" not in rec


def test_config_errors_exit_2(tmp_path):
    bad = _write(tmp_path, {**TOY_2D, "bogus": 1})
    assert _invoke("train-supervised", "--config", bad).exit_code == 2
    assert _invoke("train-rl", "--config", _write(tmp_path, TOY_2D, "ok.yaml")).exit_code == 2
    assert _invoke("train-supervised", "--preset", "no-such-preset").exit_code == 2
    assert _invoke("train-supervised").exit_code == 2


def test_missing_dataset_exit_3(tmp_path):
    doc = preset_dict("breast-cancer-smoke")
    doc["task"]["path"] = str(tmp_path / "absent.csv")
    r = _invoke("train-supervised", "--config", _write(tmp_path, doc), "--out", tmp_path / "o")
    assert r.exit_code == 3
    assert "dataset breast-cancer" in r.output


def test_stuck_chain_exit_4_names_run(tmp_path):
    doc = json.loads(json.dumps(TOY_2D))
    doc["mcmc"]["reject_cap"] = 1
    doc["runs"] = 3
    r = _invoke("train-supervised", "--config", _write(tmp_path, doc), "--out", tmp_path / "o")
    assert r.exit_code == 4
    assert "run 0" in r.output


# -- infer ----------------------------------------------------------------------


def _infer_cfg(tmp_path, snapshot, **task):
    doc = {
        "command": "infer",
        "device": {"g_min": 40.0, "g_max": 80.0},
        "mcmc": {"rows": 64, "burn_in": 8, "sigma_prior": 40.0, "scale_S": 0.1},
        "task": {"kind": "infer", "snapshot": str(snapshot), "grid_steps": 5, **task},
    }
    return _write(tmp_path, doc, "infer.yaml")


def test_infer_single_known_row(tmp_path):
    law = DeviceLaw.from_conductance_range(40.0, 80.0)
    arr = CrossbarArray(10, 2, law, None, d2d=False)
    arr.g_plus[9], arr.g_minus[9] = [60.0, 45.0], [41.0, 70.0]
    arr.hcs_plus[9] = arr.hcs_minus[9] = True
    arr.counters[9] = 4
    snap = tmp_path / "snap.json"
    snap.write_text(arr.snapshot())
    pts = tmp_path / "pts.csv"
    pts.write_text("# any comment\nv0,v1\n1.0,0.5\n-2.0,0.25\n")
    cfg = _infer_cfg(tmp_path, snap, inputs=str(pts))
    r = _invoke("infer", "--config", cfg, "--out", tmp_path / "o")
    assert r.exit_code == 0, r.output
    _, rows = read_csv(tmp_path / "o" / "probabilities.csv")
    for v0, v1, p in rows:
        z = 0.1 * (19.0 * float(v0) - 25.0 * float(v1))
        assert float(p) == pytest.approx(1 / (1 + math.exp(-z)), rel=1e-12)


def test_infer_grid_from_trained_snapshot(tmp_path):
    _invoke("train-supervised", "--config", _write(tmp_path, {**TOY_2D, "runs": 1}), "--out", tmp_path / "t", "--no-plots")
    snap = tmp_path / "t" / "snapshots" / "run000.json"
    r = _invoke("infer", "--config", _infer_cfg(tmp_path, snap), "--out", tmp_path / "o")
    assert r.exit_code == 0, r.output
    _, rows = read_csv(tmp_path / "o" / "probabilities.csv")
    assert len(rows) == 25 and all(0 <= float(p) <= 1 for *_, p in rows)


def test_infer_malformed_snapshot(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1, "rows": 2')
    r = _invoke("infer", "--config", _infer_cfg(tmp_path, bad), "--out", tmp_path / "o")
    assert r.exit_code == 3
    assert "snapshot" in r.output.lower() or "json" in r.output.lower()


def test_infer_dimension_mismatch(tmp_path):
    law = DeviceLaw.from_conductance_range(40.0, 80.0)
    arr = CrossbarArray(10, 3, law, None, d2d=False)
    arr.counters[9] = 1
    snap = tmp_path / "snap.json"
    snap.write_text(arr.snapshot())
    pts = tmp_path / "pts.csv"
    pts.write_text("v0,v1\n1,2\n")
    assert _invoke("infer", "--config", _infer_cfg(tmp_path, snap, inputs=str(pts)), "--out", tmp_path / "o").exit_code == 3
    assert _invoke("infer", "--config", _infer_cfg(tmp_path, snap), "--out", tmp_path / "g").exit_code == 3


# -- train-rl and sweep -----------------------------------------------------------


def test_train_rl_outputs(tmp_path):
    doc = preset_dict("cartpole-smoke")
    doc["runs"] = 2
    doc["task"]["test_episodes"] = 5
    doc["task"]["trajectory"] = True
    cfg = _write(tmp_path, doc)
    r = _invoke("train-rl", "--config", cfg, "--out", tmp_path / "a")
    assert r.exit_code == 0, r.output
    _invoke("train-rl", "--config", cfg, "--out", tmp_path / "b", "--jobs", 2)
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    _, runs = read_csv(tmp_path / "a" / "runs.csv")
    _, eps = read_csv(tmp_path / "a" / "episodes" / "run001.csv")
    assert float(runs[1][3]) == pytest.approx(np.mean([float(e[1]) for e in eps]))
    lines = read_data_lines(tmp_path / "a" / "trajectory_run000.csv")
    assert lines[0] == "step,x,v,theta,omega,action" and len(lines) > 1


def test_sweep(tmp_path):
    doc = preset_dict("cartpole-d2d-sweep")
    doc.update(runs=2)
    doc["mcmc"].update(rows=24, burn_in=4)
    doc["task"]["test_episodes"] = 3
    r = _invoke("sweep", "--config", _write(tmp_path, doc), "--out", tmp_path / "s")
    assert r.exit_code == 0, r.output
    _, rows = read_csv(tmp_path / "s" / "sweep.csv")
    assert [row[0] for row in rows] == ["cycle_and_d2d"] * 2 + ["cycle_only"] * 2
    assert (tmp_path / "s" / "fig_sweep_box.png").exists()


def test_dataset_export(tmp_path):
    r = _invoke("dataset", "breast-cancer", "--out", tmp_path / "w.csv")
    assert r.exit_code == 0
    header = (tmp_path / "w.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["id", "diagnosis", "mean_radius"] and len(header) == 32


def test_presets_command_and_version():
    assert "cartpole-512x4" in _invoke("presets").output
    assert "0.1.0" in _invoke("--version").output
