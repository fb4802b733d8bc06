"""Outer optimisation loops: WU-GO and the EGO/LCB baselines.

One simulator call per loop iteration; the run stops as soon as any evaluated
design point lies within ``epsilon`` of a true optimum, or when the simulator
budget is exhausted. Everything is driven by a single seed: given the same
config and seed, a run reproduces exactly.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .acquisition import AcquisitionError, ei_gaussian_values, lcb_values, wu_regret
from .blackbox import (
    distance_to_optimum,
    distance_to_optimum_many,
    get_spec,
    simulate,
)
from .design import (
    SearchSpace,
    build_candidates,
    default_candidates_kind,
    default_candidates_size,
    lhs_init,
)
from .neural import TrainingDivergence
from .statdist import GroundTruthSet
from .surrogates import SurrogateError, build_surrogate

# method id -> (loop family, surrogate kind, acquisition kind)
METHODS = {
    "wugo_wgan": ("generative", "wgan_gp", "wu_regret"),
    "wugo_energy": ("generative", "energy_gen", "wu_regret"),
    "ego_gp": ("posterior", "gp", "ei_gaussian"),
    "ego_de": ("posterior", "deep_ensemble", "ei_gaussian"),
    "lcb_gp": ("posterior", "gp", "lcb"),
    "lcb_de": ("posterior", "deep_ensemble", "lcb"),
}

_DUP_TOL = 1e-9


class ConfigError(ValueError):
    pass


class RunFailure(RuntimeError):
    """A run aborted after repeated surrogate-fit failures."""

    def __init__(self, message: str, record: "RunRecord"):
        super().__init__(message)
        self.record = record


@dataclass(frozen=True)
class RunConfig:
    blackbox: str
    n_init: int
    n_sample: int
    method: str = "wugo_wgan"
    budget: int = 100
    epsilon: float = 0.1
    kappa: float = 2.0
    candidates_kind: str = ""  # empty -> grid2d in 2-D, lhs_fixed otherwise
    candidates_size: int = 0   # 0 -> 101 per axis / 101^2 total
    warm_start: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.n_init < 1 or self.n_sample < 1:
            raise ConfigError("n_init and n_sample must be >= 1")
        if self.budget < 0:
            raise ConfigError("budget must be >= 0")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ConfigError("kappa must be finite and non-negative")
        try:
            get_spec(self.blackbox)
        except Exception as exc:
            raise ConfigError(str(exc)) from exc

    def resolved_candidates(self, dim: int) -> tuple[str, int]:
        kind = self.candidates_kind or default_candidates_kind(dim)
        size = self.candidates_size or default_candidates_size(dim)
        return kind, size

    def canonical(self) -> dict:
        return asdict(self)


@dataclass
class IterationEntry:
    iteration: int
    theta: list[float]
    f_hat: float
    uncertainty: float
    best_distance: float
    elapsed_s: float


@dataclass
class RunRecord:
    """Per-iteration optimisation history plus terminal status."""

    config: dict
    init_best_distance: float
    entries: list[IterationEntry] = field(default_factory=list)
    status: str = "budget_exhausted"  # eps_solved | budget_exhausted | aborted
    eps_iteration: int | None = None
    error: str | None = None

    @property
    def n_simulator_calls(self) -> int:
        return self.config["n_init"] + len(self.entries)

    def distances(self) -> np.ndarray:
        """Running-minimum distance series, index 0 = after initialisation."""
        return np.array(
            [self.init_best_distance] + [e.best_distance for e in self.entries]
        )

    def padded_distances(self, length: int) -> np.ndarray:
        """Distance series carried forward to a fixed length (budget + 1)."""
        d = self.distances()
        if d.size >= length:
            return d[:length]
        return np.concatenate([d, np.full(length - d.size, d[-1])])

    def to_dict(self, include_timing: bool = True) -> dict:
        entries = []
        for e in self.entries:
            d = asdict(e)
            if not include_timing:
                d.pop("elapsed_s")
            entries.append(d)
        out = {
            "config": dict(self.config),
            "init_best_distance": self.init_best_distance,
            "entries": entries,
            "status": self.status,
            "eps_iteration": self.eps_iteration,
            "error": self.error,
            "n_simulator_calls": self.n_simulator_calls,
        }
        return out

    def canonical_dict(self) -> dict:
        """Serialisable form with volatile timing stripped; byte-for-byte
        reproducible for a fixed (config, seed)."""
        return self.to_dict(include_timing=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        entries = [
            IterationEntry(
                iteration=e["iteration"],
                theta=list(e["theta"]),
                f_hat=e["f_hat"],
                uncertainty=e["uncertainty"],
                best_distance=e["best_distance"],
                elapsed_s=e.get("elapsed_s", 0.0),
            )
            for e in d["entries"]
        ]
        return cls(
            config=dict(d["config"]),
            init_best_distance=d["init_best_distance"],
            entries=entries,
            status=d["status"],
            eps_iteration=d["eps_iteration"],
            error=d.get("error"),
        )


def check_eps_solution(spec, thetas, epsilon: float, iterations=None):
    """Earliest iteration index at which an evaluated point is an
    epsilon-solution, or None. ``iterations`` labels the points (defaults to
    1-based positions)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.size == 0:
        return None
    if iterations is None:
        iterations = range(1, thetas.shape[0] + 1)
    dists = distance_to_optimum_many(spec, thetas)
    for it, d in zip(iterations, dists):
        if d <= epsilon:
            return it
    return None


def _mark_evaluated(mask: np.ndarray, candidates: np.ndarray, thetas: np.ndarray) -> None:
    for theta in np.atleast_2d(thetas):
        hit = np.max(np.abs(candidates - theta), axis=1) <= _DUP_TOL
        mask |= hit


def run(cfg: RunConfig, surrogate=None, log=None) -> RunRecord:
    """Execute one optimisation run; raises RunFailure if the surrogate cannot
    be fit even after a retry (the partial record rides on the exception)."""
    family, surrogate_kind, acq = METHODS[cfg.method]
    spec = get_spec(cfg.blackbox)
    space = SearchSpace(spec.bounds)
    sub = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(5)]
    r_init, r_cand, r_fit, r_score, r_sim = sub

    init_points = lhs_init(space, cfg.n_init, r_init)
    gts = GroundTruthSet()
    for p in init_points:
        gts.add(simulate(spec, p, cfg.n_sample, r_sim))

    kind, size = cfg.resolved_candidates(spec.dim)
    cands = build_candidates(space, kind, size, r_cand)
    evaluated = np.zeros(cands.size, dtype=bool)
    _mark_evaluated(evaluated, cands.points, init_points)

    best = float(distance_to_optimum_many(spec, init_points).min())
    record = RunRecord(config=cfg.canonical(), init_best_distance=best)
    if best <= cfg.epsilon:
        record.status, record.eps_iteration = "eps_solved", 0
        return record

    model = surrogate if surrogate is not None else build_surrogate(
        surrogate_kind, space, warm_start=cfg.warm_start
    )

    for it in range(1, cfg.budget + 1):
        t_iter = time.perf_counter()
        try:
            model.fit(gts, outer_iter=it, rng=r_fit)
        except (SurrogateError, TrainingDivergence) as first:
            try:
                model.fit(gts, outer_iter=it, rng=r_fit)
            except (SurrogateError, TrainingDivergence) as second:
                record.status = "aborted"
                record.error = f"surrogate fit failed twice at iteration {it}: {second}"
                raise RunFailure(record.error, record) from first

        if family == "generative":
            samples = model.sample_batch(cands.points, cfg.n_sample, r_score)
            f_hat = samples.mean(axis=1)
            sigma = gts.min_energy_distance(samples)
            score = wu_regret(f_hat, sigma, cfg.kappa)
        else:
            f_hat, sigma = model.predict_batch(cands.points)
            if acq == "ei_gaussian":
                f_min = float(gts.sample_means().min())
                score = -ei_gaussian_values(f_hat, sigma, f_min)
            else:
                score = lcb_values(f_hat, sigma, cfg.kappa)

        score = np.where(evaluated, np.inf, score)
        pick = int(np.argmin(score))  # first occurrence wins ties
        theta = cands.points[pick]

        gts.add(simulate(spec, theta, cfg.n_sample, r_sim))
        evaluated[pick] = True
        best = min(best, distance_to_optimum(spec, theta))
        record.entries.append(
            IterationEntry(
                iteration=it,
                theta=[float(v) for v in theta],
                f_hat=float(f_hat[pick]),
                uncertainty=float(sigma[pick]),
                best_distance=best,
                elapsed_s=time.perf_counter() - t_iter,
            )
        )
        if log is not None:
            log(it, best)
        if best <= cfg.epsilon:
            record.status, record.eps_iteration = "eps_solved", it
            return record

    record.status = "budget_exhausted"
    return record
