"""Collapsed Gibbs sampling over partitions.

Cluster parameters are integrated out in closed form, so the state is just
the label vector.  Two conjugate cluster models are provided: a normal
likelihood with a normal-gamma prior on ``(mu, 1/sigma^2)`` and a binomial
likelihood with a beta prior on the success probability.

The partition prior is either a Dirichlet process (closed-form PPF) or a
weight-defined species sampling model whose PPF is estimated by Monte Carlo.
In the second case the PPF estimates are refreshed every sweep, so the
sampler is a noisy approximation of the exact Gibbs kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from ._random import as_seed_sequence, generator, seed_record
from .exceptions import EmptyChain
from .partitions import Composition, dp_log_eppf
from .predictive import EstimatedPpf
from .weights import WeightModel, weight_model_from_dict

_LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class NormalModelConfig:
    """``mu | sigma^2 ~ N(mu0, c sigma^2)``, ``1/sigma^2 ~ Gamma(a_ig/2, rate=b_ig/2)``."""

    mu0: float = 0.0
    c: float = 10.0
    a_ig: float = 4.0
    b_ig: float = 4.0

    def __post_init__(self):
        if not (self.c > 0 and self.a_ig > 0 and self.b_ig > 0):
            raise ValueError("c, a_ig and b_ig must be positive")


@dataclass(frozen=True)
class BinomialModelConfig:
    """Success probability ``~ Beta(alpha, beta)``."""

    alpha: float = 0.15
    beta: float = 0.85

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")


class NormalKernel:
    """Sufficient statistics ``(count, mean, sum of squared deviations)``."""

    empty = (0, 0.0, 0.0)

    def __init__(self, cfg: NormalModelConfig):
        self.cfg = cfg
        self.kappa0 = 1.0 / cfg.c
        self.alpha0 = cfg.a_ig / 2
        self.beta0 = cfg.b_ig / 2
        self._const = -math.lgamma(self.alpha0) + self.alpha0 * math.log(self.beta0)

    @staticmethod
    def add(s, y):
        n, mean, m2 = s
        n += 1
        delta = y - mean
        mean += delta / n
        return n, mean, m2 + delta * (y - mean)

    def remove(self, s, y):
        n, mean, m2 = s
        if n <= 1:
            return self.empty
        new_mean = (n * mean - y) / (n - 1)
        return n - 1, new_mean, max(m2 - (y - new_mean) * (y - mean), 0.0)

    def posterior(self, s):
        """Posterior ``(kappa_n, mu_n, alpha_n, beta_n)``."""
        n, mean, m2 = s
        kappa = self.kappa0 + n
        mu = (self.kappa0 * self.cfg.mu0 + n * mean) / kappa
        alpha = self.alpha0 + n / 2
        beta = self.beta0 + m2 / 2 + self.kappa0 * n * (mean - self.cfg.mu0) ** 2 / (2 * kappa)
        return kappa, mu, alpha, beta

    def log_marginal(self, s) -> float:
        n = s[0]
        if n == 0:
            return 0.0
        kappa, _, alpha, beta = self.posterior(s)
        return (
            self._const
            + math.lgamma(alpha)
            - alpha * math.log(beta)
            + 0.5 * math.log(self.kappa0 / kappa)
            - n / 2 * _LOG_2PI
        )

    def stats_of(self, values) -> tuple:
        values = np.asarray(values, dtype=float)
        if len(values) == 0:
            return self.empty
        mean = float(values.mean())
        return len(values), mean, float(((values - mean) ** 2).sum())

    def predictive_density(self, s, grid) -> np.ndarray:
        """Student-t posterior predictive density of a new point on ``grid``."""
        kappa, mu, alpha, beta = self.posterior(s)
        scale = math.sqrt(beta * (kappa + 1) / (alpha * kappa))
        return stats.t.pdf(grid, df=2 * alpha, loc=mu, scale=scale)


class BinomialKernel:
    """Sufficient statistics ``(successes, failures, sum log C(n_i, y_i), count)``."""

    empty = (0, 0, 0.0, 0)

    def __init__(self, cfg: BinomialModelConfig):
        self.cfg = cfg
        self._prior = math.lgamma(cfg.alpha) + math.lgamma(cfg.beta) - math.lgamma(cfg.alpha + cfg.beta)

    @staticmethod
    def _log_choose(n, y):
        return math.lgamma(n + 1) - math.lgamma(y + 1) - math.lgamma(n - y + 1)

    def add(self, s, row):
        y, n = row
        return s[0] + y, s[1] + n - y, s[2] + self._log_choose(n, y), s[3] + 1

    def remove(self, s, row):
        if s[3] <= 1:
            return self.empty
        y, n = row
        return s[0] - y, s[1] - (n - y), s[2] - self._log_choose(n, y), s[3] - 1

    def log_marginal(self, s) -> float:
        if s[3] == 0:
            return 0.0
        a = self.cfg.alpha + s[0]
        b = self.cfg.beta + s[1]
        return s[2] + math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b) - self._prior

    def stats_of(self, rows) -> tuple:
        s = self.empty
        for row in rows:
            s = self.add(s, row)
        return s


def make_kernel(cfg):
    if isinstance(cfg, NormalModelConfig):
        return NormalKernel(cfg)
    if isinstance(cfg, BinomialModelConfig):
        return BinomialKernel(cfg)
    if hasattr(cfg, "log_marginal") and hasattr(cfg, "add"):
        return cfg
    raise TypeError(f"unsupported cluster model {cfg!r}")


def prepare_data(data, cfg) -> list:
    """Per-observation items as the kernels expect them."""
    if isinstance(cfg, BinomialModelConfig):
        rows = np.asarray(data)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise ValueError("binomial data must have two columns: successes, trials")
        if np.any(rows < 0) or np.any(rows[:, 0] > rows[:, 1]):
            raise ValueError("need 0 <= successes <= trials")
        return [(int(y), int(n)) for y, n in rows]
    if isinstance(cfg, NormalModelConfig):
        return [float(v) for v in np.asarray(data, dtype=float).ravel()]
    return list(data)


def normal_cluster_marginal(y, cfg: NormalModelConfig) -> float:
    """Log marginal likelihood of one cluster under the normal-gamma prior."""
    y = np.asarray(y, dtype=float).ravel()
    if len(y) == 0:
        raise ValueError("cluster must be nonempty")
    kernel = NormalKernel(cfg)
    return kernel.log_marginal(kernel.stats_of(y))


def binomial_cluster_marginal(rows, cfg: BinomialModelConfig) -> float:
    """Log beta-binomial marginal likelihood of one cluster of ``(y, n)`` rows."""
    rows = prepare_data(rows, cfg)
    if not rows:
        raise ValueError("cluster must be nonempty")
    kernel = BinomialKernel(cfg)
    return kernel.log_marginal(kernel.stats_of(rows))


@dataclass(frozen=True)
class PartitionPriorSpec:
    """Either ``kind="dp"`` with ``theta`` or ``kind="ssm"`` with a weight model."""

    kind: str = "dp"
    theta: float = 2.83
    weight_model: WeightModel | None = None
    ppf_draws: int = 1000

    def __post_init__(self):
        if self.kind == "dp":
            if not self.theta > 0:
                raise ValueError("theta must be positive")
        elif self.kind == "ssm":
            if not isinstance(self.weight_model, WeightModel):
                raise ValueError("an ssm prior needs a weight model")
            if self.ppf_draws < 1:
                raise ValueError("ppf_draws must be positive")
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    @classmethod
    def dp(cls, theta: float):
        return cls("dp", theta=theta)

    @classmethod
    def ssm(cls, weight_model: WeightModel, ppf_draws: int = 1000):
        return cls("ssm", weight_model=weight_model, ppf_draws=ppf_draws)

    @classmethod
    def from_dict(cls, config: dict):
        kind = config.get("kind", "dp")
        if kind == "dp":
            return cls.dp(float(config.get("theta", 2.83)))
        return cls.ssm(weight_model_from_dict(config["weights"]), int(config.get("ppf_draws", 1000)))

    def to_dict(self) -> dict:
        if self.kind == "dp":
            return {"kind": "dp", "theta": self.theta}
        return {"kind": "ssm", "weights": self.weight_model.to_dict(), "ppf_draws": self.ppf_draws}

    def ppf(self, seed):
        """Predictive rule for arbitrary size lists (order of clusters free)."""
        if self.kind == "dp":
            return _DpRule(self.theta)
        return _SortedRule(EstimatedPpf(self.weight_model, self.ppf_draws, seed))


class _DpRule:
    def __init__(self, theta):
        self.theta = theta

    def __call__(self, sizes: Sequence[int]) -> list[float]:
        total = sum(sizes) + self.theta
        return [s / total for s in sizes] + [self.theta / total]

    def log_eppf(self, sizes) -> float:
        return dp_log_eppf(sizes, self.theta)


class _SortedRule:
    """Evaluates an estimated PPF at the size-sorted composition.

    Sorting makes equal multisets of sizes share one cached estimate; the
    exact PPF of an exchangeable partition is equivariant under relabeling,
    so results are mapped back to the caller's cluster order.
    """

    def __init__(self, estimated: EstimatedPpf):
        self.estimated = estimated

    def _sorted(self, sizes):
        order = sorted(range(len(sizes)), key=lambda j: (-sizes[j], j))
        return order, Composition(tuple(sizes[j] for j in order))

    def __call__(self, sizes):
        if not sizes:
            return [1.0]
        order, comp = self._sorted(sizes)
        p = self.estimated(comp)
        out = [0.0] * (len(sizes) + 1)
        for t, j in enumerate(order):
            out[j] = float(p[t])
        out[-1] = float(p[-1])
        return out

    def log_eppf(self, sizes) -> float:
        _, comp = self._sorted(sizes)
        return self.estimated.estimate(comp).log_eppf


def is_canonical(labels: Sequence[int]) -> bool:
    """True when labels are 0-based in order of first appearance."""
    top = -1
    for label in labels:
        if label > top + 1 or label < 0:
            return False
        top = max(top, label)
    return len(labels) > 0


def canonicalize(labels: Sequence[int]) -> tuple[int, ...]:
    mapping: dict[int, int] = {}
    return tuple(mapping.setdefault(label, len(mapping)) for label in labels)


class _Sampler:
    def __init__(self, labels, items, kernel, prior: PartitionPriorSpec):
        self.items = items
        self.kernel = kernel
        self.prior = prior
        self.labels = list(canonicalize(labels))
        k = max(self.labels) + 1
        self.sizes = [0] * k
        self.stats = [kernel.empty] * k
        for label, item in zip(self.labels, items):
            self.sizes[label] += 1
            self.stats[label] = kernel.add(self.stats[label], item)
        self.lm = [kernel.log_marginal(s) for s in self.stats]
        self.lm_single = [kernel.log_marginal(kernel.add(kernel.empty, item)) for item in items]

    def sweep(self, rng: np.random.Generator, ppf_seed):
        rule = self.prior.ppf(ppf_seed)
        kernel = self.kernel
        uniforms = rng.random(len(self.items))
        for i, item in enumerate(self.items):
            c = self.labels[i]
            self.sizes[c] -= 1
            if self.sizes[c] == 0:
                del self.sizes[c], self.stats[c], self.lm[c]
                self.labels = [l - 1 if l > c else l for l in self.labels]
            else:
                self.stats[c] = kernel.remove(self.stats[c], item)
                self.lm[c] = kernel.log_marginal(self.stats[c])
            probs = rule(self.sizes)
            k = len(self.sizes)
            logp = []
            candidates = []
            for j in range(k):
                s = kernel.add(self.stats[j], item)
                lm = kernel.log_marginal(s)
                candidates.append((s, lm))
                logp.append(_log(probs[j]) + lm - self.lm[j])
            logp.append(_log(probs[k]) + self.lm_single[i])
            top = max(logp)
            weights = [math.exp(v - top) for v in logp]
            target = uniforms[i] * sum(weights)
            j, acc = 0, weights[0]
            while acc < target and j < k:
                j += 1
                acc += weights[j]
            if j == k:
                self.sizes.append(1)
                s = kernel.add(kernel.empty, item)
                self.stats.append(s)
                self.lm.append(self.lm_single[i])
            else:
                self.sizes[j] += 1
                self.stats[j], self.lm[j] = candidates[j]
            self.labels[i] = j
        self._relabel()
        return rule

    def _relabel(self):
        order: dict[int, int] = {}
        for label in self.labels:
            order.setdefault(label, len(order))
        old = sorted(order, key=order.get)
        self.labels = [order[l] for l in self.labels]
        self.sizes = [self.sizes[o] for o in old]
        self.stats = [self.stats[o] for o in old]
        self.lm = [self.lm[o] for o in old]

    def log_score(self, rule) -> float:
        return rule.log_eppf(self.sizes) + math.fsum(self.lm)


def _log(p):
    return math.log(p) if p > 0 else -math.inf


def gibbs_sweep(state, data, cfg, prior: PartitionPriorSpec, seed) -> tuple[int, ...]:
    """One systematic-scan sweep; returns the new order-of-appearance labels."""
    items = prepare_data(data, cfg)
    if len(state) != len(items):
        raise ValueError("state and data lengths differ")
    if not is_canonical(state):
        raise ValueError(f"state {state} is not in order-of-appearance form")
    sampler = _Sampler(state, items, make_kernel(cfg), prior)
    sampler.sweep(generator(seed, 0), as_seed_sequence(seed, 1, 0))
    return tuple(sampler.labels)


@dataclass
class PartitionChain:
    """Post-burn-in label vectors with their unnormalized log posteriors."""

    states: list[tuple[int, ...]]
    log_scores: list[float]
    iters: int
    burn_in: int
    seed: str
    data: list = field(default=None, repr=False)
    cfg: object = None
    prior: PartitionPriorSpec | None = None
    seed_sequence: np.random.SeedSequence | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.states)

    def labels(self) -> np.ndarray:
        return np.array(self.states, dtype=int)


def run_chain(data, cfg, prior: PartitionPriorSpec, iters: int = 1000, burn_in: int = 100, seed=0) -> PartitionChain:
    """Start from one cluster, run ``iters`` sweeps, keep the last ``iters - burn_in``."""
    if not iters > burn_in >= 0:
        raise ValueError("need iters > burn_in >= 0")
    items = prepare_data(data, cfg)
    if not items:
        raise ValueError("no data")
    seed = as_seed_sequence(seed)
    rng = generator(seed, 0)
    sampler = _Sampler([0] * len(items), items, make_kernel(cfg), prior)
    states, scores = [], []
    for t in range(iters):
        rule = sampler.sweep(rng, as_seed_sequence(seed, 1, t))
        if t >= burn_in:
            states.append(tuple(sampler.labels))
            scores.append(sampler.log_score(rule))
    return PartitionChain(states, scores, iters, burn_in, seed_record(seed), items, cfg, prior, seed)


@dataclass
class PosteriorSummary:
    cocluster: np.ndarray
    k_dist: np.ndarray
    nmax_dist: np.ndarray
    predictive: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def mean_k(self) -> float:
        return float(np.arange(len(self.k_dist)) @ self.k_dist)

    @property
    def mode_k(self) -> int:
        return int(np.argmax(self.k_dist))

    @property
    def mode_nmax(self) -> int:
        return int(np.argmax(self.nmax_dist))


def default_grid(data, points: int = 200) -> np.ndarray:
    y = np.asarray(data, dtype=float)
    sd = y.std(ddof=1) if len(y) > 1 else 1.0
    return np.linspace(y.min() - 3 * sd, y.max() + 3 * sd, points)


def predictive_density(chain: PartitionChain, grid, seed=None) -> np.ndarray:
    """Posterior mean density of a new observation, averaged over states.

    For each state the density mixes the cluster posterior predictives with
    the PPF at that state's composition, plus the new-cluster prior predictive.
    """
    if not isinstance(chain.cfg, NormalModelConfig):
        raise ValueError("predictive densities are available for the normal model only")
    grid = np.asarray(grid, dtype=float)
    kernel = NormalKernel(chain.cfg)
    y = np.asarray(chain.data, dtype=float)
    if seed is None:
        seed = chain.seed_sequence if chain.seed_sequence is not None else 0
    rule = chain.prior.ppf(as_seed_sequence(seed, 2))
    prior_part = kernel.predictive_density(kernel.empty, grid)
    total = np.zeros_like(grid)
    cache: dict[tuple, np.ndarray] = {}
    for state in chain.states:
        if state not in cache:
            labels = np.array(state)
            k = labels.max() + 1
            sizes = [int((labels == j).sum()) for j in range(k)]
            probs = rule(sizes)
            dens = probs[k] * prior_part
            for j in range(k):
                dens = dens + probs[j] * kernel.predictive_density(kernel.stats_of(y[labels == j]), grid)
            cache[state] = dens
        total += cache[state]
    return total / len(chain.states)


def summarize(chain: PartitionChain, predictive_grid=None) -> PosteriorSummary:
    """Co-clustering matrix, distributions of ``k_n`` and ``n_(1)``, predictive density.

    ``predictive_grid=None`` uses :func:`default_grid` for the normal model;
    pass ``False`` to skip the density.
    """
    if len(chain.states) == 0:
        raise EmptyChain("chain has no states")
    labels = chain.labels()
    n = labels.shape[1]
    cocluster = np.zeros((n, n))
    for row in labels:
        cocluster += row[:, None] == row[None, :]
    cocluster /= len(labels)
    k = labels.max(axis=1) + 1
    nmax = np.array([np.bincount(row).max() for row in labels])
    k_dist = np.bincount(k, minlength=n + 1) / len(labels)
    nmax_dist = np.bincount(nmax, minlength=n + 1) / len(labels)
    predictive = None
    if predictive_grid is not False and isinstance(chain.cfg, NormalModelConfig):
        grid = default_grid(chain.data) if predictive_grid is None else np.asarray(predictive_grid, dtype=float)
        predictive = (grid, predictive_density(chain, grid))
    return PosteriorSummary(cocluster, k_dist, nmax_dist, predictive)
