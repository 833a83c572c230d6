"""Experiment drivers behind the CLI commands.

Each ``run_*`` function takes a validated :class:`ExperimentConfig`, writes
its files under ``out`` and returns a small summary dict.  Runs are
independent; with ``jobs > 1`` they execute in worker processes and are
written back in run order, so outputs do not depend on ``jobs``.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import characterize as ch
from .config import ConfigError, ExperimentConfig, config_from_dict, with_override
from .crossbar import CrossbarArray, SnapshotError
from .mcmc import StuckChainError
from .outputs import provenance, provenance_line, read_csv, write_csv, write_text
from .rl import PolicyPair, RlConfig, train_and_test_rl
from .supervised import (
    DataError,
    LabeledDataset,
    SplitSpec,
    SupervisedTask,
    boxplot_stats,
    generate_two_gaussians,
    load_csv_dataset,
    predict_points,
    prepare_split,
    probability_grid,
    run_seed,
    train_and_evaluate,
)

log = logging.getLogger(__name__)


def _parallel_map(fn, args: list, jobs: int) -> list:
    if jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args))


def _maybe_plot(plots: bool):
    if not plots:
        return None
    from . import plotting

    return plotting


# -- characterize -------------------------------------------------------------


def run_characterize(cfg: ExperimentConfig, out, plots: bool = False) -> dict:
    out = Path(out)
    law = cfg.law()
    t = cfg.task
    prov = provenance_line(cfg.digest(), cfg.master_seed)
    d2d = cfg.mcmc.variability_mode == "cycle_and_d2d"
    ss = np.random.SeedSequence(cfg.master_seed)
    rng_sweep, rng_single, rng_pop = (np.random.default_rng(s) for s in ss.spawn(3))

    sweep = ch.power_law_sweep(law, t.devices, t.cycles, t.currents, rng_sweep, d2d=d2d)
    write_csv(
        out / "power_law.csv",
        ["i_set", "empirical_median", "empirical_sd", "law_median", "law_sd"],
        sweep.rows(),
        prov,
    )
    fitted = sweep.fit()
    fitted_law = ch.PowerLawSweep(
        sweep.i_set, sweep.law_median, sweep.law_sd, sweep.law_median, sweep.law_sd
    ).fit()
    configured = {"a": law.a, "b": law.b, "c": law.c, "d": law.d}
    write_csv(
        out / "fit.csv",
        ["constant", "configured", "fitted", "relative_error"],
        [(k, configured[k], fitted[k], fitted[k] / configured[k] - 1) for k in ("a", "b", "c", "d")],
        prov,
    )

    i_mid = float(np.sqrt(law.i_min * law.i_max))
    single = ch.single_device_cycles(law, i_mid, t.single_device_cycles, rng_single)
    write_csv(
        out / "cycle_distribution.csv",
        ["cycle", "i_set", "conductance"],
        ((k, i_mid, g) for k, g in enumerate(single)),
        prov,
    )
    med, sd = ch.device_spread(law, t.population_devices, t.population_cycles, i_mid, rng_pop, d2d)
    write_csv(
        out / "device_spread.csv",
        ["device", "i_set", "median", "sd"],
        ((k, i_mid, m, s) for k, (m, s) in enumerate(zip(med, sd))),
        prov,
    )
    pl = _maybe_plot(plots)
    if pl:
        unit = law.units[1]
        pl.c2c_distribution(single, law.d * i_mid**law.c, law.a * i_mid**law.b, unit, out / "fig_c2c_distribution.png")
        pl.power_law(sweep, fitted, law.units, out / "fig_power_law.png")
        pl.device_spread(med, sd, unit, out / "fig_device_spread.png")
    return {"fitted": fitted, "noiseless_fit": fitted_law, "configured": configured}


# -- supervised ---------------------------------------------------------------


def _supervised_task(cfg: ExperimentConfig) -> SupervisedTask:
    return SupervisedTask(
        rows=cfg.mcmc.rows,
        law=cfg.law(),
        mcmc=cfg.mcmc_config(cfg.master_seed),
        use_lut=cfg.device.use_lut,
        lut_entries=cfg.device.lut_entries,
        sd_scale=cfg.device.sd_scale,
    )


def load_task_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    t = cfg.task
    path = Path(t.path)
    if not path.is_file():
        raise DataError(
            f"dataset {path} not found; create it with `rram-mcmc dataset breast-cancer --out {path}`"
        )
    data = load_csv_dataset(path, t.label_column, t.positive_label, tuple(t.drop_columns))
    if t.train_count + t.test_count != len(data):
        raise DataError(f"{path}: {len(data)} rows but split asks for {t.train_count}+{t.test_count}")
    return data


def _two_gaussian_data(cfg: ExperimentConfig, seed: int) -> LabeledDataset:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    return generate_two_gaussians(cfg.task.n, cfg.task.shift, rng)


def _supervised_worker(args):
    cfg_dict, run, data = args
    cfg = config_from_dict(cfg_dict)
    seed = run_seed(cfg.master_seed, run)
    task = _supervised_task(cfg)
    if cfg.task.kind == "two_gaussians":
        tr = te = _two_gaussian_data(cfg, seed)
    else:
        t = cfg.task
        split = SplitSpec(t.train_count, t.test_count, seed if t.split_per_run else t.shuffle_seed)
        tr, te = prepare_split(*split.split(data), t.n_features)
    try:
        res = train_and_evaluate(task, tr, te, seed, run=run)
    except StuckChainError as exc:
        exc.run = run
        raise
    return {
        "run": run,
        "seed": seed,
        "accuracy": res.accuracy,
        "snapshot": res.array.snapshot(),
        "record": res.record,
        "test_metrics": res.test_metrics,
        "train": tr,
        "test": te,
    }


def _cfg_payload(cfg: ExperimentConfig) -> dict:
    d = cfg.to_dict()
    d["device"] = {k: v for k, v in d["device"].items() if v is not None}
    if d.get("sweep") is None:
        d.pop("sweep", None)
    return d


def run_train_supervised(cfg: ExperimentConfig, out, plots: bool = False, timing: bool = False) -> dict:
    out = Path(out)
    data = load_task_dataset(cfg) if cfg.task.kind == "csv" else None
    payload = _cfg_payload(cfg)
    results = _parallel_map(_supervised_worker, [(payload, r, data) for r in range(cfg.runs)], cfg.jobs)
    prov = provenance_line(cfg.digest(), cfg.master_seed)
    prov_doc = provenance(cfg.digest(), cfg.master_seed)
    mcmc = cfg.mcmc_config(cfg.master_seed)

    write_csv(out / "runs.csv", ["run", "seed", "accuracy"], ((r["run"], r["seed"], r["accuracy"]) for r in results), prov)
    stats = boxplot_stats([r["accuracy"] for r in results])
    write_csv(out / "summary.csv", list(stats), [list(stats.values())], prov)
    for r in results:
        tag = f"run{r['run']:03d}"
        write_text(out / "snapshots" / f"{tag}.json", _with_provenance(r["snapshot"], prov_doc))
        write_text(out / "records" / f"{tag}.json", _record_json(r["record"], prov_doc, timing))
        rows = r["record"].rows
        write_csv(
            out / "traces" / f"{tag}.csv",
            ["row", "accepted_metric", "test_metric", "counter", "rejects"],
            ((x["row"], x["accepted_metric"], tm, x["counter"], x["rejects"]) for x, tm in zip(rows, r["test_metrics"])),
            prov,
        )
    first = results[0]
    arr0 = CrossbarArray.restore(first["snapshot"])
    W = arr0.weights()
    write_csv(
        out / "posterior_run000.csv",
        ["row", *[f"g{m}" for m in range(W.shape[1])], "counter"],
        ((n, *W[n], int(arr0.counters[n])) for n in range(W.shape[0])),
        prov,
    )
    summary = {"stats": stats, "accuracies": [r["accuracy"] for r in results]}
    if cfg.task.kind == "two_gaussians":
        t = cfg.task
        pts, probs = probability_grid(arr0, mcmc, t.grid_lo, t.grid_hi, t.grid_steps)
        write_csv(out / "probability_grid.csv", ["v0", "v1", "probability"], ((p[0], p[1], q) for p, q in zip(pts, probs)), prov)
        ds = first["train"]
        write_csv(out / "dataset_run000.csv", ["v0", "v1", "label"], ((x[0], x[1], y) for x, y in zip(ds.features, ds.labels)), prov)
        centers = np.array([[-t.shift, t.shift], [t.shift, -t.shift]])
        summary["center_probabilities"] = predict_points(arr0, centers, mcmc).tolist()
    pl = _maybe_plot(plots)
    if pl:
        rec = first["record"]
        pl.accuracy_trace(rec.metrics(), [x["counter"] for x in rec.rows], cfg.mcmc.burn_in, out / "fig_trace_run000.png", first["accuracy"])
        pl.boxplot({"simulation": [r["accuracy"] for r in results]}, "test accuracy", out / "fig_accuracy_box.png")
        pl.array_heatmap(W, out / "fig_array_heatmap.png")
        if cfg.task.kind == "two_gaussians":
            ds = first["train"]
            pl.posterior_walk(W, arr0.counters, cfg.mcmc.burn_in, out / "fig_posterior_walk.png")
            pl.hyperplanes(ds.features, ds.labels, W[cfg.mcmc.burn_in:], out / "fig_hyperplanes.png")
            pl.probability_contour(pts, probs, cfg.task.grid_steps, ds.features, ds.labels, out / "fig_probability_contour.png")
    return summary


def _with_provenance(snapshot_json: str, prov: dict) -> str:
    doc = json.loads(snapshot_json)
    return json.dumps({"provenance": prov, **doc}, separators=(",", ":"))


def _record_json(record, prov: dict, timing: bool) -> str:
    return json.dumps({"provenance": prov, **json.loads(record.to_json(include_timing=timing))}, separators=(",", ":"))


# -- reinforcement learning ---------------------------------------------------


def _rl_config(cfg: ExperimentConfig) -> RlConfig:
    t = cfg.task
    return RlConfig(kappa=t.kappa, rows=cfg.mcmc.rows, test_episodes=t.test_episodes, physics=t.physics_obj())


def _rl_worker(args):
    cfg_dict, run = args
    cfg = config_from_dict(cfg_dict)
    seed = run_seed(cfg.master_seed, run)
    try:
        res = train_and_test_rl(
            cfg.law(),
            cfg.mcmc_config(seed),
            _rl_config(cfg),
            seed,
            run=run,
            use_lut=cfg.device.use_lut,
            lut_entries=cfg.device.lut_entries,
            keep=True,
        )
    except StuckChainError as exc:
        exc.run = run
        raise
    return {
        "run": run,
        "seed": seed,
        "mean_reward": res.mean_reward,
        "episodes": res.episode_rewards,
        "record": res.record,
        "snapshot": res.pair.snapshot(),
    }


def run_rl_runs(cfg: ExperimentConfig) -> list[dict]:
    payload = _cfg_payload(cfg)
    return _parallel_map(_rl_worker, [(payload, r) for r in range(cfg.runs)], cfg.jobs)


def run_train_rl(cfg: ExperimentConfig, out, plots: bool = False, timing: bool = False) -> dict:
    out = Path(out)
    results = run_rl_runs(cfg)
    prov = provenance_line(cfg.digest(), cfg.master_seed)
    prov_doc = provenance(cfg.digest(), cfg.master_seed)
    mode = cfg.mcmc.variability_mode
    write_csv(
        out / "runs.csv",
        ["run", "seed", "variability_mode", "mean_reward"],
        ((r["run"], r["seed"], mode, r["mean_reward"]) for r in results),
        prov,
    )
    stats = boxplot_stats([r["mean_reward"] for r in results])
    write_csv(out / "summary.csv", list(stats), [list(stats.values())], prov)
    for r in results:
        tag = f"run{r['run']:03d}"
        write_text(
            out / "snapshots" / f"{tag}.json",
            json.dumps({"provenance": prov_doc, "left": json.loads(r["snapshot"]["left"]), "right": json.loads(r["snapshot"]["right"])}, separators=(",", ":")),
        )
        write_text(out / "records" / f"{tag}.json", _record_json(r["record"], prov_doc, timing))
        write_csv(
            out / "traces" / f"{tag}.csv",
            ["row", "accepted_reward", "counter", "rejects"],
            ((x["row"], x["accepted_metric"], x["counter"], x["rejects"]) for x in r["record"].rows),
            prov,
        )
        write_csv(
            out / "episodes" / f"{tag}.csv",
            ["episode", "reward"],
            enumerate(r["episodes"].tolist()),
            prov,
        )
    if cfg.task.trajectory:
        _write_trajectory(cfg, results[0], out / "trajectory_run000.csv", prov)
    pl = _maybe_plot(plots)
    if pl:
        rec = results[0]["record"]
        pl.accuracy_trace(
            rec.metrics(), [x["counter"] for x in rec.rows], cfg.mcmc.burn_in, out / "fig_reward_trace_run000.png", label="accepted reward"
        )
        pl.boxplot({mode: [r["mean_reward"] for r in results]}, "mean test reward", out / "fig_reward_box.png")
    return {"stats": stats, "mean_rewards": [r["mean_reward"] for r in results]}


def _write_trajectory(cfg, result, path, prov):
    from .cartpole import run_linear_episode
    from .rl import episode_seeds

    pair = PolicyPair.restore(result["snapshot"])
    gl, gr = pair.posterior_weights(cfg.mcmc.burn_in)
    traj: list = []
    seed = int(episode_seeds(result["seed"], 1, 1)[0])
    run_linear_episode(gl, gr, seed, cfg.task.physics_obj(), traj)
    write_csv(path, ["step", "x", "v", "theta", "omega", "action"], traj, prov)


# -- infer ----------------------------------------------------------------------


def load_snapshot(path) -> CrossbarArray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"{path}: not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SnapshotError(f"{path}: snapshot must be a JSON object")
    doc.pop("provenance", None)
    return CrossbarArray.restore(json.dumps(doc))


def run_infer(cfg: ExperimentConfig, out) -> dict:
    out = Path(out)
    t = cfg.task
    array = load_snapshot(t.snapshot)
    mcmc = cfg.mcmc_config(cfg.master_seed)
    if cfg.mcmc.burn_in >= array.rows:
        raise ConfigError(f"burn_in {cfg.mcmc.burn_in} exceeds snapshot rows {array.rows}")
    if t.inputs:
        header, rows = read_csv(t.inputs)
        try:
            pts = np.array([[float(v) for v in row] for row in rows if row])
        except ValueError as exc:
            raise DataError(f"{t.inputs}: {exc}") from exc
        if pts.ndim != 2 or pts.shape[1] != array.cols:
            raise SnapshotError(f"inputs have {pts.shape[-1]} columns but the snapshot has {array.cols}")
        names = header
    else:
        if array.cols != 2:
            raise SnapshotError(f"grid inference needs a 2-column snapshot, got {array.cols}")
        pts, _ = probability_grid(array, mcmc, t.grid_lo, t.grid_hi, t.grid_steps)
        names = ["v0", "v1"]
    probs = predict_points(array, pts, mcmc)
    prov = provenance_line(cfg.digest(), cfg.master_seed)
    write_csv(out / "probabilities.csv", [*names, "probability"], ((*p, q) for p, q in zip(pts, probs)), prov)
    return {"points": len(pts), "min": float(probs.min()), "max": float(probs.max())}


# -- sweep --------------------------------------------------------------------


def run_sweep(cfg: ExperimentConfig, out, plots: bool = False) -> dict:
    out = Path(out)
    prov = provenance_line(cfg.digest(), cfg.master_seed)
    rows, groups = [], {}
    for value in cfg.sweep.values:
        sub = with_override(cfg, cfg.sweep.param, value)
        sub = replace(sub, jobs=cfg.jobs)
        if sub.task.kind == "cartpole":
            metrics = [r["mean_reward"] for r in run_rl_runs(sub)]
        else:
            data = load_task_dataset(sub) if sub.task.kind == "csv" else None
            payload = _cfg_payload(sub)
            res = _parallel_map(_supervised_worker, [(payload, r, data) for r in range(sub.runs)], sub.jobs)
            metrics = [r["accuracy"] for r in res]
        groups[str(value)] = metrics
        rows.extend((value, r, m) for r, m in enumerate(metrics))
    write_csv(out / "sweep.csv", ["value", "run", "metric"], rows, prov)
    stats = [(v, *boxplot_stats(m).values()) for v, m in groups.items()]
    write_csv(out / "sweep_summary.csv", ["value", *boxplot_stats([0]).keys()], stats, prov)
    pl = _maybe_plot(plots)
    if pl:
        pl.boxplot(groups, cfg.sweep.param, out / "fig_sweep_box.png")
    return {k: boxplot_stats(v) for k, v in groups.items()}


__all__ = [
    "load_snapshot",
    "run_characterize",
    "run_infer",
    "run_sweep",
    "run_train_rl",
    "run_train_supervised",
]
