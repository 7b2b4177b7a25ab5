"""Shot-by-shot Monte Carlo of the distillation experiment.

Each shot draws a channel level, samples the six quadratures (A, B, Tap)
from that component's Gaussian Wigner function and keeps the shot when
X_Tap clears the threshold. Kept shots feed a streaming moment accumulator
and histograms, so memory stays bounded at any shot count.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from multiprocessing import Pool

import numpy as np

from exceptions import ConfigError, DegenerateSelectionError, DimensionError, InvalidMatrixError
from gaussian_core import log_negativity_from_cov

logger = logging.getLogger(__name__)

DEFAULT_SHOTS = 10_000_000
DEFAULT_SEED = 20260101
DEFAULT_CHUNK = 1 << 18
SERIES = ("X_tap", "X_B", "P_B", "X_A+X_B", "P_A-P_B")
SELECTIONS = ("pre", "post")
N_KEPT = 4
PAIRS = [(i, j) for i in range(N_KEPT) for j in range(i, N_KEPT)]


# =============== CONFIG AND RESULT TYPES ===============
@dataclass(frozen=True)
class McConfig:
    n_shots: int = DEFAULT_SHOTS
    seed: int = DEFAULT_SEED
    threshold_x: float = 0.0
    histogram_bins: int = 201
    histogram_range: float = 25.0
    workers: int = 1
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if int(self.n_shots) < 1:
            raise ConfigError(f"n_shots must be at least 1, got {self.n_shots}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.histogram_bins) < 2:
            raise ConfigError(f"histogram_bins must be at least 2, got {self.histogram_bins}")
        if self.histogram_range <= 0:
            raise ConfigError(f"histogram_range must be positive, got {self.histogram_range}")
        if int(self.workers) < 1 or int(self.chunk_size) < 1:
            raise ConfigError("workers and chunk_size must be positive")


@dataclass(eq=False)
class McResult:
    threshold_x: float
    kept_count: int
    total_count: int
    success_probability_hat: float
    success_probability_stderr: float
    pooled_mean_hat: np.ndarray = field(repr=False)
    pooled_cov_hat: np.ndarray = field(repr=False)
    pooled_cov_stderr: np.ndarray = field(repr=False)
    ln_hat: float
    ln_stderr: float
    bin_edges: np.ndarray = field(repr=False)
    histograms: dict = field(repr=False)
    per_level_kept: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    @property
    def degenerate(self):
        return self.kept_count == 0


# =============== STREAMING MOMENTS ===============
class MomentAccumulator:
    """Mean and covariance of (X_A, P_A, X_B, P_B) and their pair products.

    Batches are folded in with the pairwise (Chan et al.) update, which is
    also the merge rule between accumulators, so splitting the stream and
    merging gives the same moments as one pass.
    """
    dim = N_KEPT + len(PAIRS)

    def __init__(self):
        self.n = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros((self.dim, self.dim))

    @staticmethod
    def expand(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        products = np.stack([x[:, i] * x[:, j] for i, j in PAIRS], axis=1)
        return np.hstack([x, products])

    def update(self, x):
        """Fold a batch of kept shots, shape (k, 4), into the accumulator."""
        v = self.expand(x)
        if v.shape[0] == 0:
            return self
        other = MomentAccumulator()
        other.n = v.shape[0]
        other.mean = v.mean(axis=0)
        centered = v - other.mean
        other.m2 = centered.T @ centered
        return self.merge(other, inplace=True)

    def merge(self, other, inplace=False):
        target = self if inplace else self.copy()
        if other.n == 0:
            return target
        if target.n == 0:
            target.n, target.mean, target.m2 = other.n, other.mean.copy(), other.m2.copy()
            return target
        n = target.n + other.n
        delta = other.mean - target.mean
        target.mean = target.mean + delta * (other.n / n)
        target.m2 = target.m2 + other.m2 + np.outer(delta, delta) * (target.n * other.n / n)
        target.n = n
        return target

    def copy(self):
        clone = MomentAccumulator()
        clone.n, clone.mean, clone.m2 = self.n, self.mean.copy(), self.m2.copy()
        return clone

    @property
    def quadrature_mean(self):
        return self.mean[:N_KEPT].copy()

    @property
    def quadrature_cov(self):
        cov = self.m2[:N_KEPT, :N_KEPT] / self.n
        return 0.5 * (cov + cov.T)

    def entry_jacobian(self):
        """Derivative of each independent covariance entry w.r.t. the expanded means."""
        mu = self.quadrature_mean
        jac = np.zeros((len(PAIRS), self.dim))
        for row, (i, j) in enumerate(PAIRS):
            jac[row, N_KEPT + row] = 1.0
            jac[row, i] -= mu[j]
            jac[row, j] -= mu[i]
        return jac

    def entry_covariance(self):
        """Sampling covariance of the 10 independent covariance estimates (delta method)."""
        jac = self.entry_jacobian()
        return jac @ (self.m2 / self.n) @ jac.T / self.n

    def cov_stderr(self):
        var = np.clip(np.diag(self.entry_covariance()), 0.0, None)
        stderr = np.zeros((N_KEPT, N_KEPT))
        for row, (i, j) in enumerate(PAIRS):
            stderr[i, j] = stderr[j, i] = np.sqrt(var[row])
        return stderr


def ln_with_stderr(acc):
    """Gaussian LN of the accumulated covariance and its delta-method error."""
    if acc.n <= MomentAccumulator.dim:
        return float("nan"), float("nan")
    cov = acc.quadrature_cov
    try:
        ln = log_negativity_from_cov(cov)
        grad = np.zeros(len(PAIRS))
        for row, (i, j) in enumerate(PAIRS):
            step = 1e-6 * max(1.0, abs(cov[i, j]))
            up, down = cov.copy(), cov.copy()
            up[i, j] += step
            down[i, j] -= step
            if i != j:
                up[j, i] += step
                down[j, i] -= step
            grad[row] = (log_negativity_from_cov(up) - log_negativity_from_cov(down)) / (2 * step)
    except InvalidMatrixError:
        return float("nan"), float("nan")
    var = grad @ acc.entry_covariance() @ grad
    return ln, float(np.sqrt(max(var, 0.0)))


# =============== SAMPLING ===============
@lru_cache(maxsize=64)
def _cumulative(channel):
    cum = np.cumsum(channel.probabilities)
    cum.flags.writeable = False
    return cum


def sample_level(channel, rng):
    """Index of a channel level drawn by inverse CDF."""
    cum = _cumulative(channel)
    return int(min(np.searchsorted(cum, rng.random(), side="right"), len(cum) - 1))


def sample_phase_point(state, rng):
    """One draw from the Gaussian Wigner function of ``state``."""
    return state.mean + state.cholesky @ rng.standard_normal(2 * state.n_modes)


def _sample_chunk(rng, cum, means, chols, size):
    levels = np.minimum(np.searchsorted(cum, rng.random(size), side="right"), len(cum) - 1)
    z = rng.standard_normal((size, means.shape[1]))
    x = np.empty_like(z)
    for k in np.unique(levels):
        idx = levels == k
        x[idx] = z[idx] @ chols[k].T + means[k]
    return levels, x


# =============== HISTOGRAMS ===============
def bin_edges(bins, half_range):
    return np.linspace(-half_range, half_range, bins + 1)


def _bin_counts(values, bins, half_range):
    values = np.asarray(values, dtype=float)
    idx = np.floor((values + half_range) * (bins / (2.0 * half_range)))
    idx = np.clip(idx, 0, bins - 1).astype(np.int64)
    return np.bincount(idx, minlength=bins).astype(np.int64)


def histogram(series, bins=201, half_range=25.0):
    """Uniform bins over [-half_range, half_range]; outliers land in the end bins."""
    if bins < 2:
        raise ConfigError(f"bins must be at least 2, got {bins}")
    return bin_edges(bins, half_range), _bin_counts(series, bins, half_range)


def _series(x):
    return {
        "X_tap": x[:, 4],
        "X_B": x[:, 2],
        "P_B": x[:, 3],
        "X_A+X_B": x[:, 0] + x[:, 2],
        "P_A-P_B": x[:, 1] - x[:, 3],
    }


# =============== WORKERS ===============
def _run_worker(task):
    means, chols, cum, n_shots, seed_seq, thresholds, bins, half_range, chunk = task
    rng = np.random.default_rng(seed_seq)
    n_levels = len(cum)
    pre = {name: np.zeros(bins, dtype=np.int64) for name in SERIES}
    tallies = [{
        "acc": MomentAccumulator(),
        "per_level": np.zeros(n_levels, dtype=np.int64),
        "post": {name: np.zeros(bins, dtype=np.int64) for name in SERIES},
    } for _ in thresholds]

    done = 0
    while done < n_shots:
        size = min(chunk, n_shots - done)
        levels, x = _sample_chunk(rng, cum, means, chols, size)
        for name, values in _series(x).items():
            pre[name] += _bin_counts(values, bins, half_range)
        for threshold, tally in zip(thresholds, tallies):
            keep = x[:, 4] >= threshold
            if not keep.any():
                continue
            kept = x[keep]
            tally["acc"].update(kept[:, :N_KEPT])
            tally["per_level"] += np.bincount(levels[keep], minlength=n_levels)
            for name, values in _series(kept).items():
                tally["post"][name] += _bin_counts(values, bins, half_range)
        done += size
        logger.debug("worker sampled %d/%d shots", done, n_shots)
    return n_shots, pre, tallies


def _split_shots(n_shots, workers):
    base, extra = divmod(n_shots, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


def run_mc_sweep(mixture3, config, thresholds):
    """Sample once and evaluate every threshold on the same shots.

    The shot space is split deterministically over ``config.workers``; each
    worker gets its own child of ``SeedSequence(config.seed)`` and the
    per-worker tallies are merged in worker order.
    """
    if mixture3.n_modes != 3:
        raise DimensionError(f"run_mc needs a three-mode mixture, got {mixture3.n_modes}")
    thresholds = [float(t) for t in thresholds]
    means = np.array([s.mean for s in mixture3.states])
    chols = np.array([s.cholesky for s in mixture3.states])
    cum = np.cumsum(mixture3.weights)
    bins, half_range = int(config.histogram_bins), float(config.histogram_range)
    workers = int(config.workers)

    children = np.random.SeedSequence(int(config.seed)).spawn(workers)
    tasks = [(means, chols, cum, n, child, thresholds, bins, half_range, int(config.chunk_size))
             for n, child in zip(_split_shots(int(config.n_shots), workers), children)]
    if workers == 1:
        outputs = [_run_worker(tasks[0])]
    else:
        with Pool(workers) as pool:
            outputs = pool.map(_run_worker, tasks)

    total = sum(n for n, _, _ in outputs)
    pre = {name: sum(out[1][name] for out in outputs) for name in SERIES}
    edges = bin_edges(bins, half_range)
    metadata = {"seed": int(config.seed), "workers": workers,
                "chunk_size": int(config.chunk_size), "n_shots": total}

    results = []
    for t_index, threshold in enumerate(thresholds):
        acc = MomentAccumulator()
        per_level = np.zeros(len(cum), dtype=np.int64)
        post = {name: np.zeros(bins, dtype=np.int64) for name in SERIES}
        for _, _, tallies in outputs:
            tally = tallies[t_index]
            acc.merge(tally["acc"], inplace=True)
            per_level += tally["per_level"]
            for name in SERIES:
                post[name] += tally["post"][name]
        results.append(_summarize(threshold, total, acc, per_level, edges, pre, post, metadata))
        logger.info("threshold %.4g SNU: kept %d of %d shots", threshold, acc.n, total)
    return results


def _summarize(threshold, total, acc, per_level, edges, pre, post, metadata):
    kept = acc.n
    p_hat = kept / total
    nan4 = np.full(N_KEPT, np.nan)
    if kept:
        mean, cov, stderr = acc.quadrature_mean, acc.quadrature_cov, acc.cov_stderr()
    else:
        mean, cov, stderr = nan4, np.full((N_KEPT, N_KEPT), np.nan), np.full((N_KEPT, N_KEPT), np.nan)
    ln, ln_err = ln_with_stderr(acc)
    histograms = {
        "pre": {name: (edges, counts.copy()) for name, counts in pre.items()},
        "post": {name: (edges, counts) for name, counts in post.items()},
    }
    return McResult(
        threshold_x=threshold,
        kept_count=kept,
        total_count=total,
        success_probability_hat=p_hat,
        success_probability_stderr=float(np.sqrt(p_hat * (1.0 - p_hat) / total)),
        pooled_mean_hat=mean,
        pooled_cov_hat=cov,
        pooled_cov_stderr=stderr,
        ln_hat=ln,
        ln_stderr=ln_err,
        bin_edges=edges,
        histograms=histograms,
        per_level_kept=per_level,
        metadata=dict(metadata),
    )


def run_mc(mixture3, config):
    """Monte Carlo run at ``config.threshold_x``; no kept shots raises with the partial result."""
    result = run_mc_sweep(mixture3, config, [config.threshold_x])[0]
    if result.degenerate:
        raise DegenerateSelectionError(
            f"no shots kept at threshold {config.threshold_x:g} SNU out of {result.total_count}",
            partial=result)
    return result
