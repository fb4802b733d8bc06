"""Energy-distance estimation and the Wasserstein uncertainty over ground truths.

The two-sample energy distance D is estimated with U-statistic within-sample
terms:

    D^2 = 2/(n_a n_b) sum_ij |a_i - b_j|
          - 1/(n_a (n_a - 1)) sum_{i != j} |a_i - a_j|
          - 1/(n_b (n_b - 1)) sum_{i != j} |b_i - b_j|

and D = sqrt(max(0, D^2)). The Wasserstein uncertainty of a predicted sample
is its minimal energy distance to any ground-truth sample.
"""

from __future__ import annotations

import numpy as np

from .blackbox import ResponseSample


class StatDistError(ValueError):
    pass


def _as_values(x) -> np.ndarray:
    if isinstance(x, ResponseSample):
        x = x.values
    v = np.asarray(x, dtype=float).ravel()
    if v.size == 0:
        raise StatDistError("empty sample")
    return v


def _sorted_abs_sum(sorted_v: np.ndarray) -> float:
    # sum_{i,j} |v_i - v_j| over all ordered pairs, for sorted v.
    n = sorted_v.size
    k = np.arange(1, n + 1)
    return float(2.0 * np.dot(2 * k - n - 1, sorted_v))


def _within_u(sorted_v: np.ndarray) -> float:
    # U-statistic within-sample term; zero for singletons.
    n = sorted_v.size
    if n < 2:
        return 0.0
    return _sorted_abs_sum(sorted_v) / (n * (n - 1))


def _cross_sum(values: np.ndarray, sorted_other: np.ndarray, prefix: np.ndarray) -> float:
    # sum_{i,j} |x_i - y_j| with y pre-sorted and prefix[k] = sum of first k ys.
    m = sorted_other.size
    k = np.searchsorted(sorted_other, values)
    return float(np.dot(values, 2 * k - m) - 2 * prefix[k].sum() + values.size * prefix[m])


def _canonical_sides(sa: np.ndarray, sb: np.ndarray):
    # Fix which sample is queried against which so the floating-point
    # association is identical under argument swap (exact symmetry).
    if sa.size != sb.size:
        return (sa, sb) if sa.size < sb.size else (sb, sa)
    neq = sa != sb
    if neq.any():
        i = int(np.argmax(neq))
        return (sa, sb) if sa[i] < sb[i] else (sb, sa)
    return sa, sb


def energy_distance(a, b) -> float:
    """Two-sample energy distance between 1-D samples (arrays or ResponseSamples)."""
    av, bv = _as_values(a), _as_values(b)
    query, base = _canonical_sides(np.sort(av), np.sort(bv))
    prefix = np.concatenate([[0.0], np.cumsum(base)])
    cross = 2.0 * _cross_sum(query, base, prefix) / (query.size * base.size)
    d2 = cross - _within_u(query) - _within_u(base)
    return float(np.sqrt(max(0.0, d2)))


class GroundTruthSet:
    """The growing set M of response samples driving the surrogate."""

    _DUP_TOL = 1e-9  # L-infinity distinctness tolerance for design points

    def __init__(self, entries: list[ResponseSample] | None = None):
        self.entries: list[ResponseSample] = []
        # Per-entry caches used by the uncertainty scorer.
        self._sorted: list[np.ndarray] = []
        self._prefix: list[np.ndarray] = []
        self._within: list[float] = []
        for e in entries or []:
            self.add(e)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, sample: ResponseSample) -> None:
        theta = np.asarray(sample.theta, dtype=float)
        for e in self.entries:
            if np.max(np.abs(e.theta - theta)) <= self._DUP_TOL:
                raise StatDistError(f"duplicate design point {theta} in ground-truth set")
        self.entries.append(sample)
        s = np.sort(np.asarray(sample.values, dtype=float))
        self._sorted.append(s)
        self._prefix.append(np.concatenate([[0.0], np.cumsum(s)]))
        self._within.append(_within_u(s))

    def thetas(self) -> np.ndarray:
        return np.array([e.theta for e in self.entries])

    def sample_means(self) -> np.ndarray:
        return np.array([e.values.mean() for e in self.entries])

    def all_values(self) -> np.ndarray:
        return np.concatenate([e.values for e in self.entries])

    def raw_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All (theta, observation) pairs, stacked: (P, m) and (P,)."""
        thetas = np.concatenate(
            [np.broadcast_to(e.theta, (e.size, e.theta.size)) for e in self.entries]
        )
        values = self.all_values()
        return thetas, values

    # -- uncertainty ------------------------------------------------------

    def min_energy_distance(self, samples: np.ndarray) -> np.ndarray:
        """Wasserstein uncertainty for a batch of predicted samples.

        ``samples`` is (R, n): R predicted response samples of size n. Returns
        the (R,) vector of min-over-entries energy distances. Equivalent to
        calling :func:`energy_distance` against every entry and taking the
        minimum, but prunes entries with moment bounds so only a few exact
        cross terms are evaluated per row.
        """
        if not self.entries:
            raise StatDistError("ground-truth set is empty")
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[None, :]
        r, n = samples.shape
        ks = len(self.entries)

        srt = np.sort(samples, axis=1)
        mean_a = srt.mean(axis=1)
        var_a = srt.var(axis=1)
        if n > 1:
            w = 2 * np.arange(1, n + 1) - n - 1
            within_a = (2.0 * (srt @ w)) / (n * (n - 1))
        else:
            within_a = np.zeros(r)

        mean_k = np.array([s.mean() for s in self._sorted])
        var_k = np.array([s.var() for s in self._sorted])
        within_k = np.array(self._within)

        diff = np.abs(mean_a[:, None] - mean_k[None, :])  # (R, K)
        pair_w = within_a[:, None] + within_k[None, :]
        lower = 2.0 * diff - pair_w
        upper = 2.0 * np.sqrt(diff**2 + var_a[:, None] + var_k[None, :]) - pair_w

        def exact_d2(rows: np.ndarray, k: int) -> np.ndarray:
            vals = srt[rows]
            sk, pk = self._sorted[k], self._prefix[k]
            m = sk.size
            pos = np.searchsorted(sk, vals.ravel()).reshape(vals.shape)
            cross = (
                (vals * (2 * pos - m)).sum(axis=1)
                - 2 * pk[pos].sum(axis=1)
                + n * pk[m]
            )
            return 2.0 * cross / (n * m) - within_a[rows] - within_k[k]

        # Exact distance to the entry with the smallest upper bound, then
        # exact checks only where the lower bound could still beat it.
        k_first = np.argmin(upper, axis=1)
        best = np.empty(r)
        for k in np.unique(k_first):
            rows = np.nonzero(k_first == k)[0]
            best[rows] = exact_d2(rows, k)
        for k in range(ks):
            rows = np.nonzero((lower[:, k] < best) & (k_first != k))[0]
            if rows.size:
                best[rows] = np.minimum(best[rows], exact_d2(rows, k))
        return np.sqrt(np.clip(best, 0.0, None))


def wasserstein_uncertainty(gts: GroundTruthSet, nu) -> float:
    """Minimal energy distance from a predicted sample to the ground truths."""
    if len(gts) == 0:
        raise StatDistError("ground-truth set is empty")
    values = _as_values(nu)
    return min(energy_distance(values, e.values) for e in gts.entries)
