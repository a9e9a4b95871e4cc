"""Experiment runner: executes methods over seeds and writes summary CSVs.

Every number in a CSV is re-derivable from ``records_<task>.json``, which
keeps full-precision per-seed results; ``verify_run`` re-renders the CSVs
from those records and checks them byte for byte.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import analytic_circle_optimum, band_match_baseline, equal_dex_baseline, phi_sweep
from .blackbox import SearchSpace1D, bo_optimize, cmaes_optimize, pso_optimize
from .config import (
    FILE_TASK_NAME,
    HEURISTICS,
    RL_METHODS,
    UNSTATED_DEFAULTS,
    ConfigError,
    ExperimentConfig,
    config_from_mapping,
)
from .kinematics import phi_to_lengths
from .reward import circle_analytic_reward, evaluate
from .rlagents import TRAINERS, make_env, map_action
from .taskpaths import PathKind, band_for, sample_path

CIRCLE_SUMMARY = "circle_summary_methods.csv"
METADATA = "run_metadata.json"
MA_WINDOW = 100

CIRCLE_ROW_ORDER = ("analytic", "sweep", "pso", "bo", "cmaes", "sac", "ddpg", "ppo")
DISPLAY = {"analytic": "Analytic", "sweep": "Sweep", "pso": "PSO", "bo": "BO", "cmaes": "CMA-ES",
           "sac": "SAC", "ddpg": "DDPG", "ppo": "PPO", "equal-dex": "EqualDex", "band-match": "BandMatch"}
HEURISTIC_FN = {"pso": pso_optimize, "bo": bo_optimize, "cmaes": cmaes_optimize}


class HarnessError(RuntimeError):
    pass


class IntegrityError(HarnessError):
    pass


def fmt(x: float) -> str:
    """Fixed-point, six decimals, locale independent; never ``-0.000000``."""
    x = float(x)
    if np.isnan(x):
        return "nan"
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def csv_text(header: list[str], rows: list[list]) -> str:
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(c if isinstance(c, str) else fmt(c) for c in row) + "\n")
    return out.getvalue()


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (nan for a single value)."""
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else float("nan")


def moving_average(x, window: int = MA_WINDOW) -> np.ndarray:
    """Trailing mean over the last ``window`` entries (fewer at the start)."""
    x = np.asarray(x, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


# ---------------------------------------------------------------------------
# jobs (run in worker processes; pure functions of the config)


@dataclass(frozen=True)
class Job:
    method: str
    seed: int | None = None


def _jobs(cfg: ExperimentConfig) -> list[Job]:
    # the circle summary always carries the closed-form reference row
    methods = list(cfg.methods)
    if cfg.task.kind is PathKind.CIRCLE and "analytic" not in methods:
        methods.insert(0, "analytic")
    jobs = []
    for m in methods:
        if m in RL_METHODS:
            jobs.extend(Job(m, s) for s in cfg.seeds)
        else:
            jobs.append(Job(m))
    return jobs


def _phi_record(method: str, phi: float, R: float, objective: float, **extra) -> dict:
    L1, L2 = phi_to_lengths(phi, R)
    return {"method": method, "phi": float(phi), "L1": float(L1), "L2": float(L2),
            "w_norm": float(objective), **extra}


def _path_morph_record(method: str, m, path, band, cfg: ExperimentConfig, **extra) -> dict:
    br = evaluate(m, path, band, cfg.weights)
    return {"method": method, "L1": m.L1, "L2": m.L2, "theta2": m.theta2_cmd,
            "rmin": abs(m.L1 - m.L2), "rmax": m.L1 + m.L2, **br.as_dict(), **extra}


def run_job(cfg: ExperimentConfig, job: Job) -> dict:
    t = cfg.task
    circle = t.kind is PathKind.CIRCLE
    if job.method == "analytic":
        b = analytic_circle_optimum(t.R)
        return _phi_record("analytic", b.phi, t.R, circle_analytic_reward(b.phi))
    if job.method == "sweep":
        b = phi_sweep(t.R, cfg.sweep_n_grid)
        return _phi_record("sweep", b.phi, t.R, b.objective, n_grid=cfg.sweep_n_grid)
    if job.method in HEURISTICS:
        res = HEURISTIC_FN[job.method](circle_analytic_reward, SearchSpace1D(), cfg.heuristic_seed,
                                        getattr(cfg, job.method))
        return _phi_record(job.method, res.best_x, t.R, res.best_f, eval_count=res.eval_count,
                           seed=cfg.heuristic_seed, trace=[[int(i), float(f)] for i, f in res.trace])
    if job.method in ("equal-dex", "band-match"):
        band = band_for(t)
        b = equal_dex_baseline(t) if job.method == "equal-dex" else band_match_baseline(band)
        return _path_morph_record(job.method, b.morphology, sample_path(t), band, cfg)
    if job.method in RL_METHODS:
        env = make_env(t, cfg.reward_variant if not circle else "hybrid", cfg.weights)
        rec, _ = TRAINERS[job.method](env, job.seed, cfg.rl_settings(job.method))
        best, greedy = map_action(env.spec, rec.best_u), map_action(env.spec, rec.greedy_u)
        out = {"method": job.method, "seed": job.seed, "best_index": rec.best_index,
               "best_u": rec.best_u.tolist(), "best_reward": rec.best_reward,
               "greedy_u": np.asarray(rec.greedy_u).tolist(), "greedy_reward": rec.greedy_reward,
               "rewards": rec.rewards.tolist()}
        if circle:
            out.update(best_phi=best.phi, greedy_phi=greedy.phi)
        else:
            out.update(best_morphology=best.physical(), greedy_morphology=greedy.physical())
        return out
    raise ConfigError(f"unknown method {job.method!r}")


def _timed_job(cfg: ExperimentConfig, job: Job) -> tuple[dict, float]:
    t0 = time.perf_counter()
    rec = run_job(cfg, job)
    return rec, time.perf_counter() - t0


def _execute(cfg: ExperimentConfig, jobs: list[Job]) -> list[tuple[dict, float]]:
    if cfg.workers <= 1 or len(jobs) <= 1:
        return [_timed_job(cfg, j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
        futures = [pool.submit(_timed_job, cfg, j) for j in jobs]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# rendering: records -> file contents (shared by run and verify_run)


def _rl(records: list[dict], algo: str) -> list[dict]:
    return sorted((r for r in records if r["method"] == algo), key=lambda r: r["seed"])


def aggregates(task_kind: PathKind, records: list[dict]) -> dict:
    """Summary statistics derived from per-seed records."""
    agg = {}
    for algo in RL_METHODS:
        rs = _rl(records, algo)
        if not rs:
            continue
        if task_kind is PathKind.CIRCLE:
            agg[algo] = {"phi_deg": float(np.mean([np.degrees(r["best_phi"]) for r in rs])),
                         "w_norm": float(np.mean([r["best_reward"] for r in rs])),
                         "L1": float(np.mean([phi_to_lengths(r["best_phi"], 1.0)[0] for r in rs])),
                         "L2": float(np.mean([phi_to_lengths(r["best_phi"], 1.0)[1] for r in rs]))}
        else:
            g = np.array([r["greedy_morphology"] for r in rs])
            agg[algo] = {
                "L1": mean_std(g[:, 0]), "L2": mean_std(g[:, 1]),
                "R": mean_std([r["greedy_reward"] for r in rs]),
                "rmin": mean_std(np.abs(g[:, 0] - g[:, 1])), "rmax": mean_std(g[:, 0] + g[:, 1]),
            }
    return agg


def render(cfg: ExperimentConfig, records: list[dict]) -> dict[str, str]:
    t = cfg.task
    name = FILE_TASK_NAME[t.kind]
    files: dict[str, str] = {}
    agg = aggregates(t.kind, records)
    by_method = {r["method"]: r for r in records if "seed" not in r or r["method"] in HEURISTICS}

    if t.kind is PathKind.CIRCLE:
        rows = []
        for m in CIRCLE_ROW_ORDER:
            if m in RL_METHODS and m in agg:
                a = agg[m]
                rows.append([DISPLAY[m], a["phi_deg"], a["L1"] * t.R, a["L2"] * t.R, a["w_norm"]])
            elif m in by_method:
                r = by_method[m]
                rows.append([DISPLAY[m], np.degrees(r["phi"]), r["L1"], r["L2"], r["w_norm"]])
        files[CIRCLE_SUMMARY] = csv_text(["Method", "phi_deg", "L1_m", "L2_m", "w_norm"], rows)
    else:
        band = band_for(t)
        algos = [a for a in RL_METHODS if a in agg]
        if algos:
            files[f"combined_{name}_hybrid_algos_L1L2R.csv"] = csv_text(
                ["algo", "L1_mean", "L1_std", "L2_mean", "L2_std", "R_mean", "R_std"],
                [[DISPLAY[a], *agg[a]["L1"], *agg[a]["L2"], *agg[a]["R"]] for a in algos])
            files[f"annulus_{name}.csv"] = csv_text(
                ["algo", "rmin_mean", "rmin_std", "rmax_mean", "rmax_std", "band_b", "band_a"],
                [[DISPLAY[a], *agg[a]["rmin"], *agg[a]["rmax"], band.b, band.a] for a in algos])
        base = [by_method[m] for m in ("equal-dex", "band-match") if m in by_method]
        if base:
            files[f"baselines_{name}.csv"] = csv_text(
                ["method", "L1_m", "L2_m", "theta2_deg", "rmin", "rmax", "coverage", "w_bar_n",
                 "band_penalty", "r_hyb", "band_b", "band_a"],
                [[DISPLAY[r["method"]], r["L1"], r["L2"], np.degrees(r["theta2"]), r["rmin"], r["rmax"],
                  r["coverage"], r["w_bar_n"], r["band_penalty"], r["r_hyb"], band.b, band.a]
                 for r in base])

    for algo in RL_METHODS:
        for r in _rl(records, algo):
            rew = np.asarray(r["rewards"])
            ma = moving_average(rew)
            files[f"curves_{algo}_{r['seed']}.csv"] = csv_text(
                ["episode", "reward", "reward_ma100"],
                [[str(i + 1), rew[i], ma[i]] for i in range(rew.size)])

    files[f"records_{name}.json"] = json.dumps(
        {"task": name, "records": records, "aggregates": agg}, indent=1, sort_keys=True) + "\n"
    return files


def metadata(cfg: ExperimentConfig, files: dict[str, str]) -> dict:
    return {
        "package_version": __version__,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "unstated_defaults": UNSTATED_DEFAULTS,
        "csv_format": "comma separated, header row, LF, fixed-point 6 decimals",
        "files": {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(files.items())},
    }


def _sort_records(records: list[dict]) -> list[dict]:
    order = {m: i for i, m in enumerate(CIRCLE_ROW_ORDER + ("equal-dex", "band-match"))}
    return sorted(records, key=lambda r: (order[r["method"]], r.get("seed") or 0))


def _write_all(out: Path, files: dict[str, str]) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        for fname in sorted(files):
            with open(out / fname, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(files[fname])
    except OSError as e:
        raise HarnessError(f"cannot write to output directory {out}: {e.strerror or e}") from None


def run(cfg: ExperimentConfig) -> Path:
    """Execute every configured method and write the run directory."""
    return run_timed(cfg)[0]


def run_timed(cfg: ExperimentConfig) -> tuple[Path, dict[str, float]]:
    """Like ``run`` but also return wall-clock seconds per method (summed
    over seeds). Timings are kept out of the files so they stay byte-stable."""
    out = Path(cfg.out_dir)
    if out.exists() and not out.is_dir():
        raise HarnessError(f"output path {out} exists and is not a directory")
    if out.exists() and not os.access(out, os.W_OK):
        raise HarnessError(f"output directory {out} is not writable")
    results = _execute(cfg, _jobs(cfg))
    timings: dict[str, float] = {}
    for rec, secs in results:
        timings[rec["method"]] = timings.get(rec["method"], 0.0) + secs
    records = _sort_records([rec for rec, _ in results])
    files = render(cfg, records)
    files[METADATA] = json.dumps(metadata(cfg, files), indent=1, sort_keys=True) + "\n"
    _write_all(out, files)
    return out, timings


# ---------------------------------------------------------------------------
# integrity


def load_run(run_dir: str | Path) -> tuple[ExperimentConfig, dict, list[dict]]:
    run_dir = Path(run_dir)
    meta_path = run_dir / METADATA
    if not meta_path.exists():
        raise HarnessError(f"missing {meta_path}")
    meta = json.loads(meta_path.read_text())
    cfg = config_from_mapping(meta["config"])
    rec_path = run_dir / f"records_{FILE_TASK_NAME[cfg.task.kind]}.json"
    if not rec_path.exists():
        raise HarnessError(f"missing {rec_path}")
    return cfg, meta, json.loads(rec_path.read_text())["records"]


def verify_run(run_dir: str | Path, *, recompute_rewards: bool = True, tol: float = 1e-12) -> None:
    """Re-derive every output file from the stored records and compare.

    Checks the config hash, re-renders all files byte for byte, and (optionally)
    re-evaluates stored best/greedy rewards from their actions to ``tol``.
    """
    run_dir = Path(run_dir)
    cfg, meta, records = load_run(run_dir)
    if cfg.digest() != meta["config_sha256"]:
        raise IntegrityError("config hash mismatch: metadata config does not reproduce its hash")
    files = render(cfg, records)
    if set(files) != set(meta["files"]):
        raise IntegrityError(f"file set mismatch: {sorted(set(files) ^ set(meta['files']))}")
    for fname, text in files.items():
        path = run_dir / fname
        if not path.exists():
            raise IntegrityError(f"missing {fname}")
        if path.read_text() != text:
            raise IntegrityError(f"{fname} differs from the value re-derived from records")
    if recompute_rewards:
        env = make_env(cfg.task, cfg.reward_variant if cfg.task.kind is not PathKind.CIRCLE else "hybrid",
                       cfg.weights)
        for r in records:
            if r["method"] not in RL_METHODS:
                continue
            for key in ("best", "greedy"):
                got = env.reward(np.asarray(r[f"{key}_u"]))
                if abs(got - r[f"{key}_reward"]) > tol:
                    raise IntegrityError(f"{r['method']} seed {r['seed']}: {key} reward not reproducible")
            if abs(r["rewards"][r["best_index"]] - r["best_reward"]) > tol:
                raise IntegrityError(f"{r['method']} seed {r['seed']}: best reward not in its curve")


# ---------------------------------------------------------------------------
# report


class ReportError(HarnessError):
    pass


def _circle_plot_data(cfg, records, summary_rows) -> dict[str, str]:
    phis = np.linspace(0.0, 90.0, 181)
    rows = [["analytic_curve", "sin(2phi)", p, np.sin(2 * np.radians(p))] for p in phis]
    rows += [["endpoint", name, float(p), float(w)] for name, p, w in summary_rows]
    files = {"plot_circle_endpoints.csv": csv_text(["series", "label", "phi_deg", "w_norm"], rows)}
    dev = []
    for algo in RL_METHODS:
        for r in _rl(records, algo):
            dev.append([DISPLAY[algo], str(r["seed"]), "BEST", abs(np.degrees(r["best_phi"]) - 45.0)])
            dev.append([DISPLAY[algo], str(r["seed"]), "GREEDY", abs(np.degrees(r["greedy_phi"]) - 45.0)])
    files["plot_circle_deviation.csv"] = csv_text(["algo", "seed", "kind", "abs_dev_deg"], dev)
    return files


def _path_plot_data(cfg, name, agg, base_rows) -> dict[str, str]:
    band = band_for(cfg.task)
    ann = []
    for algo in RL_METHODS:
        if algo in agg:
            a = agg[algo]
            ann += [[DISPLAY[algo], "rmin", a["rmin"][0], a["rmin"][1]],
                    [DISPLAY[algo], "rmax", a["rmax"][0], a["rmax"][1]]]
    for r in base_rows:
        ann += [[DISPLAY[r["method"]], "rmin", r["rmin"], 0.0], [DISPLAY[r["method"]], "rmax", r["rmax"], 0.0]]
    ann += [["band", "rmin", band.b, 0.0], ["band", "rmax", band.a, 0.0]]
    morph = [[DISPLAY[a], agg[a]["L1"][0], agg[a]["L1"][1], agg[a]["L2"][0], agg[a]["L2"][1]]
             for a in RL_METHODS if a in agg]
    morph += [[DISPLAY[r["method"]], r["L1"], 0.0, r["L2"], 0.0] for r in base_rows]
    lo, hi = 0.05, 0.60
    morph += [["diagonal", lo, 0.0, lo, 0.0], ["diagonal", hi, 0.0, hi, 0.0]]
    return {
        f"plot_{name}_annulus.csv": csv_text(["algo", "quantity", "mean", "std"], ann),
        f"plot_{name}_morphology.csv": csv_text(["series", "L1_mean", "L1_std", "L2_mean", "L2_std"], morph),
    }


def _svgs(files: dict[str, str]) -> dict[str, str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "morpho2r"
    out = {}
    for fname, text in files.items():
        lines = [ln.split(",") for ln in text.strip().split("\n")]
        header, body = lines[0], lines[1:]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        if "endpoints" in fname:
            curve = [r for r in body if r[0] == "analytic_curve"]
            ax.plot([float(r[2]) for r in curve], [float(r[3]) for r in curve], "k-", lw=1, label="sin(2φ)")
            for r in body:
                if r[0] == "endpoint":
                    ax.plot(float(r[2]), float(r[3]), "o", label=r[1])
            ax.set_xlabel("φ [deg]")
            ax.set_ylabel("w_norm")
        elif "deviation" in fname:
            labels = [f"{r[0]}-{r[1]}-{r[2][0]}" for r in body]
            ax.bar(range(len(body)), [float(r[3]) for r in body])
            ax.set_xticks(range(len(body)), labels, rotation=90, fontsize=5)
            ax.set_ylabel("|φ − 45°| [deg]")
        elif "annulus" in fname:
            names = list(dict.fromkeys(r[0] for r in body))
            for i, n in enumerate(names):
                v = {r[1]: float(r[2]) for r in body if r[0] == n}
                ax.plot([i, i], [v["rmin"], v["rmax"]], "-", lw=6)
            ax.set_xticks(range(len(names)), names)
            ax.set_ylabel("radius [m]")
        else:
            diag = [r for r in body if r[0] == "diagonal"]
            ax.plot([float(r[1]) for r in diag], [float(r[3]) for r in diag], "k--", lw=1, label="L1 = L2")
            for r in body:
                if r[0] != "diagonal":
                    ax.plot(float(r[1]), float(r[3]), "o", label=r[0])
            ax.set_xlabel("L1 [m]")
            ax.set_ylabel("L2 [m]")
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=6)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
        out[fname.replace(".csv", ".svg")] = buf.getvalue()
    return out


def report(run_dir: str | Path, *, svg: bool = False) -> list[Path]:
    """Write tidy plot-data files into ``<run_dir>/plots``.

    All inputs are checked before anything is written, so a failed report
    leaves no partial output.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ReportError(f"run directory not found: {run_dir}")
    meta_path = run_dir / METADATA
    if not meta_path.exists():
        raise ReportError(f"missing input file: {meta_path}")
    cfg = config_from_mapping(json.loads(meta_path.read_text())["config"])
    name = FILE_TASK_NAME[cfg.task.kind]
    rec_path = run_dir / f"records_{name}.json"
    if not rec_path.exists():
        raise ReportError(f"missing input file: {rec_path}")
    doc = json.loads(rec_path.read_text())
    records = doc["records"]

    if cfg.task.kind is PathKind.CIRCLE:
        summ_path = run_dir / CIRCLE_SUMMARY
        if not summ_path.exists():
            raise ReportError(f"missing input file: {summ_path}")
        rows = [ln.split(",") for ln in summ_path.read_text().strip().split("\n")[1:]]
        files = _circle_plot_data(cfg, records, [(r[0], r[1], r[4]) for r in rows])
    else:
        needed = [run_dir / f"annulus_{name}.csv"] if any(r["method"] in RL_METHODS for r in records) else []
        for p in needed:
            if not p.exists():
                raise ReportError(f"missing input file: {p}")
        agg = {k: {kk: tuple(vv) for kk, vv in v.items()} for k, v in doc["aggregates"].items()}
        base = [r for r in records if r["method"] in ("equal-dex", "band-match")]
        files = _path_plot_data(cfg, name, agg, base)
    if svg:
        files.update(_svgs(files))

    # stage in a temp dir, then move into place
    dest = run_dir / "plots"
    stage = Path(tempfile.mkdtemp(prefix=".plots-", dir=run_dir))
    try:
        _write_all(stage, files)
        dest.mkdir(exist_ok=True)
        for fname in sorted(files):
            shutil.move(str(stage / fname), dest / fname)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return [dest / f for f in sorted(files)]
