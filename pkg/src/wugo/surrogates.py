"""Fit-and-query surrogates over the ground-truth set.

Two families:

* generative surrogates (adversarial WGAN-GP recipe, plus an energy-score
  trainer used as an adversarial-free cross-check) that emit response samples
  conditioned on a design point;
* posterior surrogates (Gaussian-process regression, adversarial deep
  ensemble) that emit a Gaussian (mean, std) at a design point.

Design points are mapped to [-1, 1] per axis and responses are standardised
by the global mean/std of the current ground truths before any network sees
them; both statistics are recomputed at every fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist

from ._kernels import energy_epoch, wgan_epoch
from .design import SearchSpace
from .neural import AdamState, Mlp, StepLrSchedule, TrainingDivergence
from .statdist import GroundTruthSet


class SurrogateError(RuntimeError):
    pass


@dataclass(frozen=True)
class GaussianPosterior:
    mean: float
    std: float

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("posterior std must be non-negative")


# --------------------------------------------------------------------------
# shared scaling helpers


class _ThetaScaler:
    """Affine map from the search box to [-1, 1]^m."""

    def __init__(self, space: SearchSpace):
        self.lower = space.lower
        self.half = 0.5 * (space.upper - space.lower)

    def transform(self, thetas: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(thetas) - self.lower) / self.half - 1.0


def _batch_size(n_pairs: int, target_steps: int, lo: int, hi: int) -> int:
    return int(np.clip(int(round(n_pairs / target_steps)) or 1, lo, hi))


# --------------------------------------------------------------------------
# generative surrogates


@dataclass(frozen=True)
class GenTrainConfig:
    latent_dim: int = 10
    hidden_dim: int = 64
    lambda_gp: float = 1.0
    n_critic: int = 5
    adam_lr: float = 1e-3
    epochs: int = 100
    # Small decoupled weight decay keeps the networks from inventing deep
    # minima in regions no ground truth supports.
    weight_decay: float = 0.01
    warm_start: bool = True
    warm_schedule: StepLrSchedule = StepLrSchedule(1e-1, 1e-1, 30)
    # One epoch is this many optimiser steps; the batch size adapts to the
    # number of (theta, x) pairs up to a cap, past which an epoch covers the
    # pairs over consecutive epochs via a reshuffled cycle. The recipe fixes
    # the epoch count but not the batching, and this keeps every fit at the
    # same cost regardless of how large the ground-truth set has grown.
    target_steps_per_epoch: int = 25
    batch_min: int = 4
    batch_max: int = 64
    # Samples come from the Polyak average of the generator weights over the
    # last part of training; the adversarial game orbits the target
    # distribution and the average sits at the centre of the orbit.
    avg_tail_frac: float = 0.7
    sample_chunk: int = 131072


class _GenerativeBase:
    """Common state for conditional generators: scaling, sampling, retry."""

    def __init__(self, space: SearchSpace, cfg: GenTrainConfig | None = None):
        self.space = space
        self.cfg = cfg or GenTrainConfig()
        self.scaler = _ThetaScaler(space)
        self.gen: Mlp | None = None
        self._y_mean = 0.0
        self._y_std = 1.0

    @property
    def fitted(self) -> bool:
        return self.gen is not None

    def fit(self, gts: GroundTruthSet, outer_iter: int, rng: np.random.Generator) -> None:
        if len(gts) == 0:
            raise SurrogateError("cannot fit a surrogate on an empty ground-truth set")
        try:
            self._fit_once(gts, outer_iter, rng)
        except TrainingDivergence:
            # One retry from a fresh initialisation; rng keeps advancing so
            # the retry is deterministic too.
            self._reset()
            self._fit_once(gts, outer_iter, rng, force_fresh=True)

    def sample_batch(self, thetas: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """n generated responses for every row of thetas; returns (len(thetas), n).

        The forward pass runs in float32: candidate scoring pushes millions of
        rows through the generator and the samples feed statistical estimates,
        so single precision is ample there.
        """
        if not self.fitted:
            raise SurrogateError("surrogate is not fitted")
        if n < 1:
            raise SurrogateError("sample size must be >= 1")
        thetas = np.atleast_2d(thetas)
        cond = self.scaler.transform(thetas).astype(np.float32)
        latent = self.cfg.latent_dim
        w1t = self.gen.w1.T.astype(np.float32)
        b1 = self.gen.b1.astype(np.float32)
        w2 = self.gen.w2[0].astype(np.float32)
        b2 = np.float32(self.gen.b2[0])

        c = cond.shape[0]
        out = np.empty((c, n))
        block = max(1, self.cfg.sample_chunk // n)
        for a in range(0, c, block):
            cb = cond[a : a + block]
            rows = cb.shape[0] * n
            inp = np.empty((rows, latent + cb.shape[1]), dtype=np.float32)
            inp[:, :latent] = rng.standard_normal((rows, latent)).astype(np.float32)
            inp[:, latent:] = np.repeat(cb, n, axis=0)
            hidden = np.tanh(inp @ w1t + b1)
            vals = hidden @ w2 + b2
            out[a : a + block] = vals.astype(np.float64).reshape(cb.shape[0], n)
        return out * self._y_std + self._y_mean

    def sample(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.sample_batch(np.atleast_2d(theta), n, rng)[0]

    # subclass hooks ------------------------------------------------------

    def _reset(self) -> None:
        self.gen = None

    def _fit_once(self, gts, outer_iter, rng, force_fresh=False) -> None:
        raise NotImplementedError

    def _prepare(self, gts: GroundTruthSet):
        # Robust centre/scale over all observed responses. The benchmark
        # objectives span orders of magnitude while the optimiser concentrates
        # ground truths near the low values; median/MAD keeps the network's
        # resolution where the data mass is instead of handing the scale to a
        # few extreme observations.
        values = gts.all_values()
        med = float(np.median(values))
        mad = float(np.median(np.abs(values - med)))
        scale = 1.4826 * mad
        if scale < 1e-9:
            scale = float(max(values.std(), 1e-9))
        self._y_mean = med
        self._y_std = scale

    def _check_finite(self, *nets: Mlp) -> None:
        for net in nets:
            if not np.all(np.isfinite(net.params)):
                raise TrainingDivergence("non-finite network parameters")


class WganGpSurrogate(_GenerativeBase):
    """Conditional WGAN with gradient penalty.

    The critic scores (response, theta) pairs; five critic steps per generator
    step. The first outer iteration trains from scratch at a constant Adam
    learning rate; later iterations warm-start from the previous weights and
    run the step schedule instead.
    """

    def __init__(self, space: SearchSpace, cfg: GenTrainConfig | None = None):
        super().__init__(space, cfg)
        self.disc: Mlp | None = None
        self._raw_gen: Mlp | None = None

    def _reset(self) -> None:
        self.gen = None
        self.disc = None
        self._raw_gen = None

    def _fit_once(self, gts, outer_iter, rng, force_fresh=False) -> None:
        cfg = self.cfg
        self._prepare(gts)
        thetas, values = gts.raw_pairs()
        cond_all = self.scaler.transform(thetas)
        y_all = (values - self._y_mean) / self._y_std
        m = cond_all.shape[1]

        warm = (
            cfg.warm_start and outer_iter >= 2
            and self._raw_gen is not None and not force_fresh
        )
        if not warm:
            self._raw_gen = Mlp(cfg.latent_dim + m, cfg.hidden_dim, 1, rng)
            self.disc = Mlp(1 + m, cfg.hidden_dim, 1, rng)
        gen = self._raw_gen
        gm, gv = np.zeros(gen.n_params), np.zeros(gen.n_params)
        dm, dv = np.zeros(self.disc.n_params), np.zeros(self.disc.n_params)
        counters = np.zeros(2, dtype=np.int64)

        p = y_all.size
        bs = min(
            _batch_size(p, cfg.target_steps_per_epoch, cfg.batch_min, cfg.batch_max),
            p,
        )
        steps = min(math.ceil(p / bs), cfg.target_steps_per_epoch)
        avg_from = int(cfg.epochs * (1.0 - cfg.avg_tail_frac))
        avg_sum = np.zeros_like(gen.params)
        snapshots = 0
        order = rng.permutation(p)
        cursor = 0
        idx_mat = np.empty((steps, bs), dtype=np.int64)

        for epoch in range(cfg.epochs):
            lr = cfg.warm_schedule.lr(epoch) if warm else cfg.adam_lr
            for s in range(steps):
                if cursor + bs > p:
                    order = rng.permutation(p)
                    cursor = 0
                idx_mat[s] = order[cursor : cursor + bs]
                cursor += bs
            z_crit = rng.standard_normal((steps, cfg.n_critic, bs, cfg.latent_dim))
            u_gp = rng.random((steps, cfg.n_critic, bs))
            z_gen = rng.standard_normal((steps, bs, cfg.latent_dim))
            snapshots += wgan_epoch(
                gen.params, gm, gv,
                self.disc.params, dm, dv,
                counters,
                cfg.latent_dim, cfg.hidden_dim, m,
                cond_all, y_all, idx_mat,
                z_crit, u_gp, z_gen,
                lr, cfg.lambda_gp, cfg.weight_decay,
                avg_sum, epoch >= avg_from,
            )
            self._check_finite(gen, self.disc)
        self.gen = gen.clone()
        if snapshots:
            self.gen.params[:] = avg_sum / snapshots


class EnergyGenSurrogate(_GenerativeBase):
    """Adversarial-free generator trained by minimising the squared energy
    distance between generated minibatches and each ground-truth sample.

    Trains from scratch at every fit (no warm start); used to cross-check the
    adversarial trainer.
    """

    GEN_BATCH = 64

    def _fit_once(self, gts, outer_iter, rng, force_fresh=False) -> None:
        cfg = self.cfg
        self._prepare(gts)
        thetas = gts.thetas()
        cond = self.scaler.transform(thetas)
        sorted_norm = [
            np.sort((e.values - self._y_mean) / self._y_std) for e in gts.entries
        ]
        values_flat = np.concatenate(sorted_norm)
        offsets = np.cumsum([0] + [v.size for v in sorted_norm]).astype(np.int64)
        m = cond.shape[1]
        k = len(gts)

        self.gen = Mlp(cfg.latent_dim + m, cfg.hidden_dim, 1, rng)
        gm, gv = np.zeros(self.gen.n_params), np.zeros(self.gen.n_params)
        counters = np.zeros(1, dtype=np.int64)
        avg_sum = np.zeros_like(self.gen.params)
        bs = self.GEN_BATCH

        steps = max(k, cfg.target_steps_per_epoch)
        for _ in range(cfg.epochs):
            entry_seq = np.concatenate(
                [rng.permutation(k) for _ in range(math.ceil(steps / k))]
            )[:steps].astype(np.int64)
            z_all = rng.standard_normal((steps, bs, cfg.latent_dim))
            energy_epoch(
                self.gen.params, gm, gv, counters,
                cfg.latent_dim, cfg.hidden_dim, m,
                cond, values_flat, offsets, entry_seq, z_all,
                cfg.adam_lr, cfg.weight_decay,
                avg_sum, False,
            )
            self._check_finite(self.gen)


# --------------------------------------------------------------------------
# Gaussian process


@dataclass(frozen=True)
class GpHyperparams:
    lengthscale: float
    signal_var: float
    noise_var: float

    def as_log(self) -> np.ndarray:
        return np.log([self.lengthscale, self.signal_var, self.noise_var])


_GP_LOG_BOUNDS = [
    (math.log(1e-3), math.log(1e4)),   # lengthscale
    (math.log(1e-12), math.log(1e12)), # signal variance
    (math.log(1e-6), math.log(1e10)),  # noise variance (floor 1e-6)
]


class GpSurrogate:
    """Zero-mean GP regression with an RBF kernel on per-sample means.

    Hyperparameters maximise the log marginal likelihood via L-BFGS on the
    log-parameters from five deterministic starting points.
    """

    def __init__(self, space: SearchSpace | None = None):
        self.space = space
        self.x: np.ndarray | None = None
        self.y: np.ndarray | None = None
        self.hyper: GpHyperparams | None = None
        self._chol = None
        self._alpha = None

    @property
    def fitted(self) -> bool:
        return self._alpha is not None

    def fit(
        self,
        gts: GroundTruthSet,
        outer_iter: int = 1,
        rng: np.random.Generator | None = None,
        hyperparams: GpHyperparams | None = None,
    ) -> None:
        if len(gts) == 0:
            raise SurrogateError("cannot fit a surrogate on an empty ground-truth set")
        self.x = gts.thetas()
        self.y = gts.sample_means()
        if hyperparams is None:
            hyperparams = self._optimise()
        self.hyper = hyperparams
        self._factorise()

    def _starts(self) -> list[np.ndarray]:
        n = self.x.shape[0]
        d_med = float(np.median(pdist(self.x))) if n > 1 else 1.0
        d_med = max(d_med, 1e-3)
        vy = float(max(np.var(self.y), 1e-8))
        combos = [
            (d_med, vy, 1e-3 * vy),
            (d_med / 3, vy, 1e-3 * vy),
            (3 * d_med, vy, 1e-3 * vy),
            (d_med, vy, 1e-1 * vy),
            (d_med / 3, 10 * vy, 1e-5 * vy),
        ]
        lo, hi = np.array(_GP_LOG_BOUNDS).T
        return [np.clip(np.log(c), lo, hi) for c in combos]

    def log_marginal_likelihood(self, log_params: np.ndarray, with_grad: bool = False):
        """LML of the training data at the given log hyperparameters."""
        ls, sf2, sn2 = np.exp(log_params)
        d2 = cdist(self.x, self.x, "sqeuclidean")
        kf = sf2 * np.exp(-0.5 * d2 / ls**2)
        k = kf + sn2 * np.eye(self.x.shape[0])
        try:
            c, low = cho_factor(k, lower=True)
        except np.linalg.LinAlgError:
            return (-np.inf, np.zeros(3)) if with_grad else -np.inf
        alpha = cho_solve((c, low), self.y)
        n = self.y.size
        lml = (
            -0.5 * float(self.y @ alpha)
            - float(np.log(np.diag(c)).sum())
            - 0.5 * n * math.log(2 * math.pi)
        )
        if not with_grad:
            return lml
        kinv = cho_solve((c, low), np.eye(n))
        a = np.outer(alpha, alpha) - kinv
        dk_dl = kf * (d2 / ls**2)
        grad = 0.5 * np.array(
            [
                np.einsum("ij,ij->", a, dk_dl),
                np.einsum("ij,ij->", a, kf),
                sn2 * np.trace(a),
            ]
        )
        return lml, grad

    def _optimise(self) -> GpHyperparams:
        def neg(lp):
            lml, g = self.log_marginal_likelihood(lp, with_grad=True)
            if not np.isfinite(lml):
                return 1e12, np.zeros(3)
            return -lml, -g

        best, best_val = None, np.inf
        for x0 in self._starts():
            res = minimize(
                neg, x0, jac=True, method="L-BFGS-B", bounds=_GP_LOG_BOUNDS,
                options={"maxiter": 80},
            )
            if res.fun < best_val:
                best, best_val = res.x, res.fun
        ls, sf2, sn2 = np.exp(best)
        return GpHyperparams(float(ls), float(sf2), float(sn2))

    def _factorise(self) -> None:
        h = self.hyper
        d2 = cdist(self.x, self.x, "sqeuclidean")
        k = h.signal_var * np.exp(-0.5 * d2 / h.lengthscale**2)
        k[np.diag_indices_from(k)] += h.noise_var
        jitter = 0.0
        while True:
            try:
                self._chol = cho_factor(k + jitter * np.eye(k.shape[0]), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = 1e-10 if jitter == 0.0 else jitter * 10
                if jitter > 1e-6:
                    raise SurrogateError(
                        "GP covariance not positive definite even with 1e-6 jitter"
                    )
        self._alpha = cho_solve(self._chol, self.y)

    def predict_batch(self, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and std (noise included) at each row of thetas."""
        if not self.fitted:
            raise SurrogateError("surrogate is not fitted")
        h = self.hyper
        thetas = np.atleast_2d(thetas)
        ks = h.signal_var * np.exp(
            -0.5 * cdist(thetas, self.x, "sqeuclidean") / h.lengthscale**2
        )
        mean = ks @ self._alpha
        c, low = self._chol
        v = solve_triangular(c, ks.T, lower=low)
        latent = np.clip(h.signal_var - np.einsum("ij,ij->j", v, v), 0.0, None)
        return mean, np.sqrt(latent + h.noise_var)

    def predict(self, theta: np.ndarray) -> GaussianPosterior:
        mean, std = self.predict_batch(np.atleast_2d(theta))
        return GaussianPosterior(float(mean[0]), float(std[0]))


# --------------------------------------------------------------------------
# deep ensemble


@dataclass(frozen=True)
class EnsembleConfig:
    n_members: int = 10
    hidden_dim: int = 16
    epochs: int = 100
    schedule: StepLrSchedule = StepLrSchedule(1e-1, 1e-1, 6)
    target_steps_per_epoch: int = 15
    batch_min: int = 8
    batch_max: int = 1024


class EnsembleSurrogate:
    """Deep ensemble of small regressors fit to raw (theta, observation) pairs.

    Members share the minibatch stream and differ only in their initial
    weights; disagreement across members is the uncertainty. All members are
    trained jointly through stacked weight tensors.
    """

    def __init__(self, space: SearchSpace, cfg: EnsembleConfig | None = None):
        self.space = space
        self.cfg = cfg or EnsembleConfig()
        self.scaler = _ThetaScaler(space)
        self.w1 = None  # (M, H, I)
        self.b1 = None  # (M, H)
        self.w2 = None  # (M, H)
        self.b2 = None  # (M,)
        self._y_mean = 0.0
        self._y_std = 1.0

    @property
    def fitted(self) -> bool:
        return self.w1 is not None

    def fit(self, gts: GroundTruthSet, outer_iter: int = 1, rng: np.random.Generator | None = None) -> None:
        if len(gts) == 0:
            raise SurrogateError("cannot fit a surrogate on an empty ground-truth set")
        if rng is None:
            raise SurrogateError("ensemble fit needs a random generator")
        cfg = self.cfg
        thetas, values = gts.raw_pairs()
        self._y_mean = float(values.mean())
        self._y_std = float(max(values.std(), 1e-9))
        x_all = self.scaler.transform(thetas)
        y_all = (values - self._y_mean) / self._y_std
        p, m = x_all.shape
        nm, h = cfg.n_members, cfg.hidden_dim

        # One flat parameter vector; the stacked per-member tensors are views.
        flat = np.empty(nm * (h * m + h + h + 1))
        offs = np.cumsum([0, nm * h * m, nm * h, nm * h, nm])
        self.w1 = flat[offs[0] : offs[1]].reshape(nm, h, m)
        self.b1 = flat[offs[1] : offs[2]].reshape(nm, h)
        self.w2 = flat[offs[2] : offs[3]].reshape(nm, h)
        self.b2 = flat[offs[3] : offs[4]]
        s1, s2 = 1.0 / math.sqrt(m), 1.0 / math.sqrt(h)
        self.w1[:] = rng.uniform(-s1, s1, size=(nm, h, m))
        self.b1[:] = rng.uniform(-s1, s1, size=(nm, h))
        self.w2[:] = rng.uniform(-s2, s2, size=(nm, h))
        self.b2[:] = rng.uniform(-s2, s2, size=nm)

        adam = AdamState(flat.size)
        bs = _batch_size(p, cfg.target_steps_per_epoch, cfg.batch_min, cfg.batch_max)
        n_batches = math.ceil(p / bs)
        for epoch in range(cfg.epochs):
            lr = cfg.schedule.lr(epoch)
            perm = rng.permutation(p)
            for b in range(n_batches):
                idx = perm[b * bs : (b + 1) * bs]
                x, y = x_all[idx], y_all[idx]
                nb = idx.size
                t = np.tanh(np.einsum("bi,khi->kbh", x, self.w1) + self.b1[:, None, :])
                out = np.einsum("kbh,kh->kb", t, self.w2) + self.b2[:, None]
                dout = (out - y[None, :]) / nb  # squared-error loss, batch mean
                dw2 = np.einsum("kb,kbh->kh", dout, t)
                db2 = dout.sum(axis=1)
                du = dout[:, :, None] * self.w2[:, None, :] * (1.0 - t * t)
                dw1 = np.einsum("kbh,bi->khi", du, x)
                db1 = du.sum(axis=1)
                grads = np.concatenate([dw1.ravel(), db1.ravel(), dw2.ravel(), db2])
                adam.step(flat, grads, lr)
        if not np.all(np.isfinite(flat)):
            raise TrainingDivergence("non-finite ensemble parameters")

    def member_outputs(self, thetas: np.ndarray) -> np.ndarray:
        """Raw-unit predictions of every member; (n_members, len(thetas))."""
        if not self.fitted:
            raise SurrogateError("surrogate is not fitted")
        x = self.scaler.transform(thetas)
        t = np.tanh(np.einsum("bi,khi->kbh", x, self.w1) + self.b1[:, None, :])
        out = np.einsum("kbh,kh->kb", t, self.w2) + self.b2[:, None]
        return out * self._y_std + self._y_mean

    def predict_batch(self, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        outs = self.member_outputs(thetas)
        return outs.mean(axis=0), outs.std(axis=0)

    def predict(self, theta: np.ndarray) -> GaussianPosterior:
        mean, std = self.predict_batch(np.atleast_2d(theta))
        return GaussianPosterior(float(mean[0]), float(std[0]))


# --------------------------------------------------------------------------


SURROGATE_KINDS = ("wgan_gp", "energy_gen", "gp", "deep_ensemble")


def build_surrogate(kind: str, space: SearchSpace, warm_start: bool = True):
    if kind == "wgan_gp":
        return WganGpSurrogate(space, replace(GenTrainConfig(), warm_start=warm_start))
    if kind == "energy_gen":
        return EnergyGenSurrogate(space, replace(GenTrainConfig(), warm_start=False))
    if kind == "gp":
        return GpSurrogate(space)
    if kind == "deep_ensemble":
        return EnsembleSurrogate(space)
    raise SurrogateError(f"unknown surrogate kind {kind!r}")
