"""Monte Carlo predictive probability functions for weight-defined models.

For a composition ``n`` the PPF is the posterior mean of the size-biased
weights given ``n``.  Draws from the weight prior act as the importance
proposal: each draw ``l`` contributes the predictive vector
``(P~_1, ..., P~_k, 1 - sum P~)`` weighted by ``p(n | P~)``, the probability
of the canonical label sequence given those weights.  The estimate is the
self-normalized average, computed in log space.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._random import as_seed_sequence, generator, seed_record
from .exceptions import DegenerateWeights
from .partitions import Composition, PutativePpf, as_composition, compositions, sequence_count
from .weights import WeightModel, batch_size_biased

BLOCK_SIZE = 4096
LOG_FLOOR = -745.0
MAX_TOTAL = 10**4


@dataclass
class PpfEstimate:
    n: Composition
    probabilities: np.ndarray
    standard_errors: np.ndarray
    draws: int
    effective_sample_size: float
    seed: str
    log_eppf: float = math.nan

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("draws must be positive")
        if np.any(self.probabilities < 0) or abs(self.probabilities.sum() - 1) > 1e-12:
            raise ValueError("estimate is not a probability vector")


def _block(model: WeightModel, sizes: np.ndarray, size: int, seed, index: int):
    rng = generator(seed, index)
    weights, tail = model.sample_batch(rng, size)
    k = len(sizes)
    if weights.shape[1] < k:
        # too few atoms for k clusters: these draws get zero weight
        weights = np.pad(weights, ((0, 0), (0, k - weights.shape[1])))
    picked, remaining = batch_size_biased(weights, tail, k, rng)
    with np.errstate(divide="ignore", invalid="ignore"):
        exponents = (sizes - 1).astype(float)
        log_w = np.where(exponents > 0, np.log(picked) * exponents, 0.0).sum(axis=1)
        if k > 1:
            log_w += np.log(remaining[:, : k - 1]).sum(axis=1)
    v = np.concatenate([picked, remaining[:, k - 1 : k]], axis=1)
    return log_w, v


def importance_draws(model: WeightModel, n, draws: int, seed, n_jobs: int = 1):
    """Log weights ``log p(n | P~)`` and predictive vectors for ``draws`` prior draws.

    Work is split into fixed blocks of :data:`BLOCK_SIZE` draws, each with its
    own substream, so the output does not depend on ``n_jobs``.
    """
    n = as_composition(n)
    if draws < 1:
        raise ValueError("draws must be positive")
    if n.n > MAX_TOTAL:
        raise ValueError(f"composition total {n.n} exceeds the supported maximum {MAX_TOTAL}")
    sizes = np.array(n.sizes)
    seed = as_seed_sequence(seed)
    starts = list(range(0, draws, BLOCK_SIZE))
    jobs = [(model, sizes, min(BLOCK_SIZE, draws - s), seed, b) for b, s in enumerate(starts)]
    if n_jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(lambda args: _block(*args), jobs))
    else:
        parts = [_block(*args) for args in jobs]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def estimate_ppf(model: WeightModel, n, draws: int, seed, n_jobs: int = 1) -> PpfEstimate:
    """Self-normalized importance estimate of ``p_j(n)``, ``j = 0..k``.

    Standard errors use the delta method for a ratio of means; the effective
    sample size is ``(sum w)^2 / sum w^2``.
    """
    n = as_composition(n)
    log_w, v = importance_draws(model, n, draws, seed, n_jobs)
    top = log_w.max()
    if not top > LOG_FLOOR:
        raise DegenerateWeights(f"all {draws} importance weights underflowed at {n}")
    w = np.exp(log_w - top)
    total = w.sum()
    probs = (w @ v) / total
    probs = probs / probs.sum()
    resid = v - probs[None, :]
    se = np.sqrt((w[:, None] ** 2 * resid**2).sum(axis=0)) / total
    ess = total**2 / (w**2).sum()
    log_eppf = float(logsumexp(log_w) - math.log(draws))
    return PpfEstimate(n, probs, se, draws, float(ess), seed_record(seed), log_eppf)


class EstimatedPpf(PutativePpf):
    """A :class:`PutativePpf` backed by :func:`estimate_ppf`, memoized by composition.

    The ``c``-th distinct composition evaluated uses substream ``c`` of
    ``seed``, so results depend only on the order of first evaluation.
    """

    def __init__(self, model: WeightModel, draws: int, seed, n_jobs: int = 1):
        self.model = model
        self.draws = draws
        self.seed = as_seed_sequence(seed)
        self.n_jobs = n_jobs
        self.estimates: dict[Composition, PpfEstimate] = {}
        super().__init__(self._rule, name=f"estimated({model!r}, draws={draws})")

    def estimate(self, n) -> PpfEstimate:
        n = as_composition(n)
        if n not in self.estimates:
            sub = as_seed_sequence(self.seed, len(self.estimates))
            self.estimates[n] = estimate_ppf(self.model, n, self.draws, sub, self.n_jobs)
        return self.estimates[n]

    def _rule(self, n):
        return self.estimate(n).probabilities


@dataclass
class PpfCurve:
    """Per-cluster PPF estimates across scenarios, plus averages by cluster size."""

    rows: list[dict] = field(default_factory=list)

    def by_size(self) -> dict[int, float]:
        """Mean estimate for each cluster size (0 is the new-cluster column)."""
        groups: dict[int, list[float]] = {}
        for row in self.rows:
            groups.setdefault(row["n_j"], []).append(row["estimate"])
        return {size: float(np.mean(vals)) for size, vals in sorted(groups.items())}


def ppf_curve(model: WeightModel, scenarios, draws: int, seed, n_jobs: int = 1) -> PpfCurve:
    scenarios = [as_composition(s) for s in scenarios]
    if not scenarios:
        raise ValueError("need at least one scenario")
    curve = PpfCurve()
    seed = as_seed_sequence(seed)
    for index, comp in enumerate(scenarios):
        est = estimate_ppf(model, comp, draws, as_seed_sequence(seed, index), n_jobs)
        for j in range(comp.k + 1):
            curve.rows.append(
                {
                    "composition": comp.key,
                    "j": j,
                    "n_j": comp.sizes[j] if j < comp.k else 0,
                    "estimate": float(est.probabilities[j]),
                    "stderr": float(est.standard_errors[j]),
                    "draws": est.draws,
                    "ess": est.effective_sample_size,
                    "seed": est.seed,
                }
            )
    return curve


def simulate_sss(ppf, length: int, seed) -> list[int]:
    """Sample a label sequence of given length from a predictive rule.

    ``ppf`` is any callable mapping a :class:`Composition` to ``k + 1``
    probabilities.  Labels are 0-based in order of appearance.
    """
    if length < 1:
        raise ValueError("length must be positive")
    rng = generator(seed)
    labels = [0]
    sizes = [1]
    for _ in range(length - 1):
        probs = np.asarray(ppf(Composition(tuple(sizes))), dtype=float)
        j = int(rng.choice(len(probs), p=probs / probs.sum()))
        if j == len(sizes):
            sizes.append(1)
        else:
            sizes[j] += 1
        labels.append(j)
    return labels


def empirical_partition_distribution(source, length: int, reps: int, seed, draws: int = 20000) -> dict[Composition, float]:
    """Composition frequencies over ``reps`` simulated sequences.

    ``source`` is either an exact predictive rule or a :class:`WeightModel`;
    a model is wrapped in an :class:`EstimatedPpf` with ``draws`` prior
    draws per composition.
    """
    if length > 5:
        raise ValueError("enumeration-scale only: length must be <= 5")
    seed = as_seed_sequence(seed)
    ppf = EstimatedPpf(source, draws, as_seed_sequence(seed, 1)) if isinstance(source, WeightModel) else source
    counts: Counter = Counter()
    for r in range(reps):
        labels = simulate_sss(ppf, length, as_seed_sequence(seed, 0, r))
        sizes = Counter(labels)
        counts[Composition(tuple(sizes[j] for j in range(len(sizes))))] += 1
    return {comp: counts[comp] / reps for comp in compositions(length)}


def partition_law_oracle(model: WeightModel, length: int, draws: int, seed) -> dict[Composition, float]:
    """Composition probabilities from the partially exchangeable representation.

    ``P(composition) = #sequences * E[p(n | P~)]`` with the expectation taken
    by plain Monte Carlo over prior weight draws.
    """
    out = {}
    seed = as_seed_sequence(seed)
    for index, comp in enumerate(compositions(length)):
        log_w, _ = importance_draws(model, comp, draws, as_seed_sequence(seed, index))
        out[comp] = sequence_count(comp) * float(np.exp(logsumexp(log_w) - math.log(draws)))
    return out
