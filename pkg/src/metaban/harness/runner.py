"""Seeded multi-run execution and CSV/SVG emission."""

from __future__ import annotations

import csv
import json
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, PolicySpec, build_env, build_policy
from .plot import write_line_plot
from .simulate import TraceRow, simulate

log = logging.getLogger(__name__)

TRACE_HEADER = ["t", "policy", "seed", "arm", "reward", "regret", "cum_regret", "group_exact"]
SUMMARY_HEADER = ["policy", "checkpoint", "mean_cum_regret", "std_cum_regret"]


def derive_seed(base: int, label: str) -> int:
    """Per-stream seed: base XOR crc32(label), kept to 32 bits."""
    return (int(base) ^ zlib.crc32(label.encode("utf-8"))) & 0xFFFFFFFF


def env_seed(base: int, run: int) -> int:
    return derive_seed(base, f"env:{run}")


def policy_seed(base: int, key: str, run: int) -> int:
    return derive_seed(base, f"{key}:{run}")


@dataclass
class RunResult:
    key: str
    run: int
    seed: int
    rows: list[TraceRow]

    @property
    def cum_regret(self) -> np.ndarray:
        return np.array([r.cum_regret for r in self.rows])

    @property
    def group_sizes(self) -> np.ndarray | None:
        if not self.rows or self.rows[0].group_size is None:
            return None
        return np.array([r.group_size for r in self.rows])


def run_single(env_cfg: dict, spec: PolicySpec, horizon: int, run: int, base_seed: int) -> RunResult:
    env = build_env(env_cfg, env_seed(base_seed, run))
    seed = policy_seed(base_seed, spec.key, run)
    policy = build_policy(spec, env, seed)
    return RunResult(spec.key, run, seed, simulate(env, policy, horizon))


def _run_job(job):
    return run_single(*job)


def run_all(cfg: ExperimentConfig, policies=None) -> list[RunResult]:
    """Every (policy, run) pair, in the deterministic order policy-major."""
    policies = cfg.policies if policies is None else policies
    jobs = [(cfg.env, p, cfg.horizon, r, cfg.seed) for p in policies for r in range(cfg.runs)]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trace(path: Path, result: RunResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in result.rows:
            exact = "" if r.group_exact is None else str(int(r.group_exact))
            w.writerow([r.t, result.key, result.seed, r.arm, _fmt(r.reward), _fmt(r.regret),
                        _fmt(r.cum_regret), exact])


def read_trace(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def checkpoints(horizon: int) -> list[int]:
    """Rounds T/10, 2T/10, ..., T, rounded up and deduplicated."""
    pts = sorted({max(1, -(-j * horizon // 10)) for j in range(1, 11)})
    return pts


def summarize(results: list[RunResult], horizon: int) -> list[tuple[str, int, float, float]]:
    by_key: dict[str, list[np.ndarray]] = {}
    for res in results:
        by_key.setdefault(res.key, []).append(res.cum_regret)
    rows = []
    for key, curves in by_key.items():
        M = np.stack(curves)
        for c in checkpoints(horizon):
            col = M[:, c - 1]
            rows.append((key, c, float(col.mean()), float(col.std())))
    return rows


def write_summary(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for key, c, mean, std in rows:
            w.writerow([key, c, _fmt(mean), _fmt(std)])


def _mean_std_curves(results: list[RunResult], attr: str = "cum_regret"):
    by_key: dict[str, list[np.ndarray]] = {}
    for res in results:
        by_key.setdefault(res.key, []).append(getattr(res, attr))
    return {k: (np.mean(v, axis=0), np.std(v, axis=0)) for k, v in by_key.items()}


def write_outputs(out: Path, results: list[RunResult], horizon: int, title: str) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    traces = out / "traces"
    traces.mkdir(exist_ok=True)
    paths = []
    for res in results:
        p = traces / f"{res.key}_run{res.run}.csv"
        write_trace(p, res)
        paths.append(p)
    write_summary(out / "summary.csv", summarize(results, horizon))
    write_line_plot(out / "regret.svg", _mean_std_curves(results), title, "cumulative regret")
    return {"traces": paths, "summary": out / "summary.csv", "plot": out / "regret.svg"}


def run_experiment(cfg: ExperimentConfig) -> tuple[list[RunResult], dict]:
    results = run_all(cfg)
    files = write_outputs(Path(cfg.out), results, cfg.horizon, "Mean cumulative regret")
    return results, files


@dataclass(frozen=True)
class GridCell:
    policy: str
    alpha: float
    lam: float
    mean_final: float
    std_final: float


def best_cells(cells: list[GridCell]) -> dict[str, GridCell]:
    """Lowest mean final regret per policy; ties go to the smallest (alpha, lam)."""
    best: dict[str, GridCell] = {}
    for c in sorted(cells, key=lambda c: (c.policy, c.mean_final, c.alpha, c.lam)):
        best.setdefault(c.policy, c)
    return best


def run_grid(cfg: ExperimentConfig) -> tuple[list[GridCell], dict[str, GridCell]]:
    specs, meta = [], []
    for p in cfg.policies:
        for a in cfg.alpha_grid:
            for lam in cfg.lambda_grid:
                label = f"{p.key}@a={a:g},l={lam:g}"
                specs.append(PolicySpec(p.name, {**p.params, "alpha": a, "lam": lam}, label))
                meta.append((p.key, a, lam))
    results = run_all(cfg, specs)
    finals: dict[str, list[float]] = {}
    for res in results:
        finals.setdefault(res.key, []).append(res.rows[-1].cum_regret)
    cells = []
    for spec, (key, a, lam) in zip(specs, meta):
        v = np.array(finals[spec.key])
        cells.append(GridCell(key, a, lam, float(v.mean()), float(v.std())))
    best = best_cells(cells)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "grid.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "alpha", "lambda", "mean_final_cum_regret", "std_final_cum_regret"])
        for c in cells:
            w.writerow([c.policy, _fmt(c.alpha), _fmt(c.lam), _fmt(c.mean_final), _fmt(c.std_final)])
    report = {k: {"alpha": c.alpha, "lambda": c.lam, "mean_final_cum_regret": c.mean_final}
              for k, c in best.items()}
    (out / "grid_best.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return cells, best


def ablation_specs(cfg: ExperimentConfig, gamma: float = 0.4) -> list[PolicySpec]:
    base = next((p for p in cfg.policies if p.name == "metaban"), PolicySpec("metaban"))
    return [
        PolicySpec("metaban", {**base.params, "nu": nu, "gamma": gamma}, f"metaban-nu{nu:g}")
        for nu in cfg.nu_values
    ]


def run_ablation_nu(cfg: ExperimentConfig, gamma: float = 0.4) -> tuple[list[RunResult], dict]:
    """Meta-Ban once per nu in ``cfg.nu_values`` with gamma held fixed."""
    specs = ablation_specs(cfg, gamma)
    results = run_all(cfg, specs)
    out = Path(cfg.out)
    files = write_outputs(out, results, cfg.horizon, "Meta-Ban cumulative regret by nu")
    sizes = _mean_std_curves(results, "group_sizes")
    with open(out / "group_size.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "t", "mean_group_size"])
        for key, (mean, _) in sizes.items():
            for t, v in enumerate(mean, start=1):
                w.writerow([key, t, _fmt(v)])
    write_line_plot(out / "group_size.svg", sizes, "Mean inferred group size by nu", "group size")
    files["group_size"] = out / "group_size.csv"
    return results, files
