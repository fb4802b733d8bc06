"""Experiment suite definitions, repeated-run execution and metrics.

The built-in suite fixes, per test function, the number of initial designs N
and the response sample size n; every experiment is repeated R times with
sequential seeds and summarised by the probability of reaching an
epsilon-solution within the budget and by the distance to the optimum after
50 simulator calls.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .blackbox import get_spec
from .optimizer import METHODS, ConfigError, RunConfig, RunFailure, RunRecord, run


@dataclass(frozen=True)
class ExperimentSpec:
    blackbox: str
    n_init: int
    n_sample: int


# Built-in experiments: (N initial designs, n observations per response).
BUILTIN_SUITE: dict[str, ExperimentSpec] = {
    "three_hump_camel": ExperimentSpec("three_hump_camel", 4, 100),
    "ackley": ExperimentSpec("ackley", 4, 100),
    "levi": ExperimentSpec("levi", 4, 100),
    "himmelblau": ExperimentSpec("himmelblau", 4, 10),
    "rosenbrock8": ExperimentSpec("rosenbrock8", 121, 100),
    "rosenbrock20": ExperimentSpec("rosenbrock20", 25, 100),
    "styblinski_tang20": ExperimentSpec("styblinski_tang20", 25, 100),
}

DEFAULT_REPEATS = 10


@dataclass
class MethodMetrics:
    """Aggregated results for one (experiment, method) cell."""

    experiment: str
    method: str
    repeats: int
    kappa: float
    budget: int
    eps_probability: float
    eps_stderr: float
    dist50_mean: float
    dist50_std: float
    curve_mean: list[float]
    curve_std: list[float]
    n_failed: int = 0


@dataclass
class MetricsReport:
    rows: list[MethodMetrics] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"rows": [dataclasses.asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(rows=[MethodMetrics(**r) for r in d["rows"]])

    def row(self, experiment: str, method: str) -> MethodMetrics:
        for r in self.rows:
            if r.experiment == experiment and r.method == method:
                return r
        raise KeyError((experiment, method))


def eps_probability(records: list[RunRecord]) -> tuple[float, float]:
    """Fraction of runs that reached an epsilon-solution, with the Bernoulli
    standard error sqrt(p (1 - p) / R)."""
    r = len(records)
    if r == 0:
        raise ValueError("no records")
    p = sum(rec.status == "eps_solved" for rec in records) / r
    return p, math.sqrt(p * (1.0 - p) / r)


def distance_after_k(records: list[RunRecord], k: int = 50) -> tuple[float, float]:
    """Mean and population std of the running-minimum distance after k
    simulator calls; early-terminated runs carry their final value forward."""
    vals = np.array([rec.padded_distances(k + 1)[k] for rec in records])
    return float(vals.mean()), float(vals.std())


def convergence_curves(records: list[RunRecord], budget: int) -> tuple[np.ndarray, np.ndarray]:
    series = np.stack([rec.padded_distances(budget + 1) for rec in records])
    return series.mean(axis=0), series.std(axis=0)


def aggregate(experiment: str, method: str, records: list[RunRecord],
              kappa: float, budget: int) -> MethodMetrics:
    p, se = eps_probability(records)
    d_mean, d_std = distance_after_k(records, 50)
    c_mean, c_std = convergence_curves(records, budget)
    return MethodMetrics(
        experiment=experiment,
        method=method,
        repeats=len(records),
        kappa=kappa,
        budget=budget,
        eps_probability=p,
        eps_stderr=se,
        dist50_mean=d_mean,
        dist50_std=d_std,
        curve_mean=[float(v) for v in c_mean],
        curve_std=[float(v) for v in c_std],
        n_failed=sum(rec.status == "aborted" for rec in records),
    )


# --------------------------------------------------------------------------
# execution with persistence


def record_path(out_dir: Path, cfg: RunConfig) -> Path:
    tag = f"{cfg.blackbox}__{cfg.method}__k{cfg.kappa:g}__seed{cfg.seed}"
    return Path(out_dir) / "records" / f"{tag}.json"


def save_record(path: Path, record: RunRecord) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(record.to_dict(), sort_keys=True, indent=1) + "\n")
    os.replace(tmp, path)
    _append_distance_log(path, record)


def _append_distance_log(record_path: Path, record: RunRecord) -> None:
    """Accumulating (run_id, iteration, distance) log next to the records."""
    log = record_path.parent.parent / "runs.csv"
    run_id = record_path.stem
    fresh = not log.exists()
    with open(log, "a", encoding="utf-8", newline="\n") as fh:
        if fresh:
            fh.write("run_id,iteration,distance\n")
        for i, d in enumerate(record.distances()):
            fh.write(f"{run_id},{i},{d:.6g}\n")


def load_record(path: Path, cfg: RunConfig) -> RunRecord | None:
    """Reload a persisted record if it matches the config exactly."""
    if not path.is_file():
        return None
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError:
        return None
    if d.get("config") != cfg.canonical():
        return None
    return RunRecord.from_dict(d)


def execute_run(cfg_dict: dict) -> dict:
    """Worker entry point: run one config, return the full record dict."""
    cfg = RunConfig(**cfg_dict)
    try:
        record = run(cfg)
    except RunFailure as exc:
        record = exc.record
    return record.to_dict()


def _pool_init():
    # Workers each get one BLAS thread; the process pool is the parallelism.
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")


def run_many(configs: list[RunConfig], out_dir: Path | None = None,
             parallel: int = 1, log=None) -> list[RunRecord]:
    """Run configs (resuming from persisted records when available), persist
    results, and return records in input order. Failed runs are returned with
    status ``aborted`` rather than raising."""
    records: dict[int, RunRecord] = {}
    todo: list[tuple[int, RunConfig]] = []
    for i, cfg in enumerate(configs):
        cached = load_record(record_path(out_dir, cfg), cfg) if out_dir else None
        if cached is not None:
            records[i] = cached
        else:
            todo.append((i, cfg))

    def finish(i: int, cfg: RunConfig, rec_dict: dict):
        rec = RunRecord.from_dict(rec_dict)
        records[i] = rec
        if out_dir:
            save_record(record_path(out_dir, cfg), rec)
        if log is not None:
            log(cfg, rec)

    if parallel > 1 and len(todo) > 1:
        ctx = get_context("spawn")
        with ProcessPoolExecutor(max_workers=parallel, mp_context=ctx,
                                 initializer=_pool_init) as pool:
            futures = [(i, cfg, pool.submit(execute_run, cfg.canonical())) for i, cfg in todo]
            for i, cfg, fut in futures:
                finish(i, cfg, fut.result())
    else:
        for i, cfg in todo:
            finish(i, cfg, execute_run(cfg.canonical()))
    return [records[i] for i in range(len(configs))]


def suite_configs(experiments: list[str], method: str, base_seed: int,
                  repeats: int = DEFAULT_REPEATS, kappa: float = 2.0,
                  overrides: dict | None = None) -> list[RunConfig]:
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    overrides = dict(overrides or {})
    configs = []
    for exp in experiments:
        if exp in BUILTIN_SUITE:
            spec = BUILTIN_SUITE[exp]
        else:
            get_spec(exp)  # validate id
            spec = ExperimentSpec(exp, overrides.get("n_init", 4), overrides.get("n_sample", 100))
        base = {
            "blackbox": spec.blackbox,
            "n_init": spec.n_init,
            "n_sample": spec.n_sample,
            "method": method,
            "kappa": kappa,
        }
        base.update(overrides)
        for r in range(repeats):
            configs.append(RunConfig(**base, seed=base_seed + r))
    return configs


def run_suite(experiments: list[str], method: str, base_seed: int,
              repeats: int = DEFAULT_REPEATS, kappa: float = 2.0,
              out_dir: Path | None = None, parallel: int = 1,
              overrides: dict | None = None, log=None) -> MetricsReport:
    """R independent runs per experiment with seeds base_seed..base_seed+R-1."""
    configs = suite_configs(experiments, method, base_seed, repeats, kappa, overrides)
    records = run_many(configs, out_dir=out_dir, parallel=parallel, log=log)
    report = MetricsReport()
    for j, exp in enumerate(experiments):
        chunk = records[j * repeats : (j + 1) * repeats]
        budget = configs[j * repeats].budget
        report.rows.append(aggregate(exp, method, chunk, kappa, budget))
    return report


def ablation_kappa(experiment: str, kappas: list[float], repeats: int,
                   base_seed: int, method: str = "wugo_wgan",
                   out_dir: Path | None = None, parallel: int = 1,
                   overrides: dict | None = None, log=None) -> dict[float, MetricsReport]:
    """Re-run one experiment across a list of exploration coefficients."""
    for k in kappas:
        if not (np.isfinite(k) and k >= 0):
            raise ConfigError(f"invalid kappa {k!r}")
    return {
        k: run_suite([experiment], method, base_seed, repeats, kappa=k,
                     out_dir=out_dir, parallel=parallel, overrides=overrides, log=log)
        for k in kappas
    }
