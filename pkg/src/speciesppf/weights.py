"""Weight-sequence priors for proper species sampling models.

A model here is a prior on the atom masses ``(P_1, P_2, ...)`` of a discrete
random measure with ``sum_h P_h = 1``.  Atom locations never enter the
induced partition law, so they are not represented.

The infinite sequence is truncated once the (analytically bounded) mass of
the undrawn atoms falls below ``epsilon`` relative to the drawn mass; the
bound is recorded on every draw as ``tail_mass``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from ._random import generator, seed_record
from .exceptions import Exhausted, InsufficientPrefix, TruncationOverflow

DEFAULT_EPSILON = 1e-10
DEFAULT_HARD_CAP = 10**6
_CHUNK = 32


class WeightModel:
    """Base class.  Subclasses implement :meth:`sample_batch`."""

    kind = "abstract"

    def __init__(self, epsilon: float = DEFAULT_EPSILON, hard_cap: int = DEFAULT_HARD_CAP):
        if not 0 < epsilon <= 1e-6:
            raise ValueError(f"epsilon must lie in (0, 1e-6], got {epsilon}")
        if hard_cap < 1:
            raise ValueError("hard_cap must be positive")
        self.epsilon = float(epsilon)
        self.hard_cap = int(hard_cap)

    def sample_batch(self, rng: np.random.Generator, size: int):
        """Draw ``size`` truncated weight vectors sharing one horizon ``H``.

        Returns ``(weights, tail)`` with shapes ``(size, H)`` and ``(size,)``;
        each row plus its tail sums to one.
        """
        raise NotImplementedError

    def expected_weights(self, horizon: int) -> np.ndarray:
        """Prior mean of the unsorted ``P_h`` (or of ``u_h`` where noted)."""
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params(),
            "epsilon": self.epsilon,
            "hard_cap": self.hard_cap,
        }

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.params().items()))))


def _check_overflow(model: WeightModel, horizon: int):
    if horizon > model.hard_cap:
        raise TruncationOverflow(
            f"{model!r} needs more than hard_cap={model.hard_cap} atoms for epsilon={model.epsilon:g}"
        )


class StickBreakingWeights(WeightModel):
    """Dirichlet process weights: ``V_h ~ Beta(1, theta)``, ``P_h = V_h prod_{i<h}(1 - V_i)``."""

    kind = "dp-stick-breaking"

    def __init__(self, theta: float, **kwargs):
        super().__init__(**kwargs)
        if not theta > 0:
            raise ValueError(f"theta must be positive, got {theta}")
        self.theta = float(theta)

    def params(self):
        return {"theta": self.theta}

    def sample_batch(self, rng, size):
        log_rest = np.zeros(size)
        blocks, tails = [], None
        horizon = 0
        log_eps = math.log(self.epsilon)
        while True:
            # V ~ Beta(1, theta) has log(1 - V) = -E / theta with E ~ Exp(1)
            log_left = -rng.standard_exponential((size, _CHUNK)) / self.theta
            v = -np.expm1(log_left)
            log_keep = np.cumsum(log_left, axis=1) + log_rest[:, None]
            before = np.concatenate([log_rest[:, None], log_keep[:, :-1]], axis=1)
            blocks.append(v * np.exp(before))
            done = np.all(log_keep < log_eps, axis=0)
            if done.any():
                stop = int(np.argmax(done)) + 1
                blocks[-1] = blocks[-1][:, :stop]
                horizon += stop
                tails = np.exp(log_keep[:, stop - 1])
                break
            horizon += _CHUNK
            _check_overflow(self, horizon)
            log_rest = log_keep[:, -1]
        _check_overflow(self, horizon)
        return np.concatenate(blocks, axis=1), tails

    def expected_weights(self, horizon):
        h = np.arange(1, horizon + 1)
        return self.theta ** (h - 1) / (1 + self.theta) ** h


class LogisticNormalWeights(WeightModel):
    """``P_h`` proportional to ``exp(X_h)``, ``X_h ~ N(log(1 - 1/(1 + exp(b - a h))), sigma2)``.

    The location equals ``log sigmoid(b - a h)`` so the mean weights stay
    roughly level for ``h < b / a`` and then decay geometrically at rate
    ``exp(-a)``.
    """

    kind = "logistic-normal"

    def __init__(self, a: float = 1.0, b: float = 10.0, sigma2: float = 0.25, **kwargs):
        super().__init__(**kwargs)
        if not (a > 0 and b > 0 and sigma2 > 0):
            raise ValueError(f"a, b, sigma2 must be positive, got {(a, b, sigma2)}")
        self.a, self.b, self.sigma2 = float(a), float(b), float(sigma2)

    def params(self):
        return {"a": self.a, "b": self.b, "sigma2": self.sigma2}

    def location(self, h) -> np.ndarray:
        return -np.logaddexp(0.0, self.a * np.asarray(h, dtype=float) - self.b)

    def expected_u(self, h) -> np.ndarray:
        """``E(u_h) = sigmoid(b - a h) exp(sigma2 / 2)``."""
        return np.exp(self.location(h) + self.sigma2 / 2)

    def tail_bound(self, horizon) -> np.ndarray:
        """Upper bound on ``sum_{h > horizon} E(u_h)``.

        Uses ``sigmoid(x) <= exp(x)``, so the sum is geometric.
        """
        horizon = np.asarray(horizon, dtype=float)
        return np.exp(self.sigma2 / 2 + self.b - self.a * (horizon + 1)) / -np.expm1(-self.a)

    def sample_batch(self, rng, size):
        sigma = math.sqrt(self.sigma2)
        blocks = []
        total = np.zeros(size)
        horizon = 0
        while True:
            h = np.arange(horizon + 1, horizon + _CHUNK + 1)
            u = np.exp(self.location(h) + sigma * rng.standard_normal((size, _CHUNK)))
            running = np.cumsum(u, axis=1) + total[:, None]
            bound = self.tail_bound(h)
            done = np.all(bound[None, :] < self.epsilon * running, axis=0)
            blocks.append(u)
            if done.any():
                stop = int(np.argmax(done)) + 1
                blocks[-1] = u[:, :stop]
                horizon += stop
                total = running[:, stop - 1]
                tail = self.tail_bound(horizon)
                break
            horizon += _CHUNK
            _check_overflow(self, horizon)
            total = running[:, -1]
        _check_overflow(self, horizon)
        u = np.concatenate(blocks, axis=1)
        norm = total + tail
        return u / norm[:, None], tail / norm

    def expected_weights(self, horizon):
        """Prior mean of ``E(u_h)`` rescaled to sum to one over the horizon.

        The exact mean of the normalized ``P_h`` has no closed form; use
        :func:`mean_weights` for a Monte Carlo value.
        """
        m = self.expected_u(np.arange(1, horizon + 1))
        return m / (m.sum() + self.tail_bound(horizon))


class CustomWeights(WeightModel):
    """User-defined independent ``u_h`` with ``P_h = u_h / sum_i u_i``.

    Parameters
    ----------
    expected : callable
        Vectorized ``h -> E(u_h)`` for ``h = 1, 2, ...``.  Drives truncation.
    sampler : callable
        ``sampler(rng, h, size)`` returning an array of shape
        ``(size, len(h))`` of draws of ``u_h``.
    summable : bool
        Caller's certificate that ``sum_h E(u_h) < inf``.  Only the partial
        sums up to ``hard_cap`` are checked numerically.
    """

    kind = "custom"

    def __init__(self, expected: Callable, sampler: Callable, summable: bool = False, name: str = "custom", **kwargs):
        super().__init__(**kwargs)
        if not summable:
            raise ValueError("custom weight models must certify sum_h E(u_h) < inf (summable=True)")
        self.expected = expected
        self.sampler = sampler
        self.name = name

    def params(self):
        return {"name": self.name}

    @cached_property
    def _tails(self) -> np.ndarray:
        means = np.asarray(self.expected(np.arange(1, self.hard_cap + 1)), dtype=float)
        if np.any(means < 0) or not np.all(np.isfinite(means)):
            raise ValueError("expected(h) must be finite and nonnegative")
        # tails[H] = sum_{h > H} E(u_h) over the checked horizon
        return np.concatenate([np.cumsum(means[::-1])[::-1], [0.0]])

    def sample_batch(self, rng, size):
        tails = self._tails
        blocks = []
        total = np.zeros(size)
        horizon = 0
        while True:
            if horizon >= self.hard_cap:
                raise TruncationOverflow(f"{self!r} did not reach epsilon within hard_cap atoms")
            stop_at = min(horizon + _CHUNK, self.hard_cap)
            h = np.arange(horizon + 1, stop_at + 1)
            u = np.asarray(self.sampler(rng, h, size), dtype=float).reshape(size, len(h))
            running = np.cumsum(u, axis=1) + total[:, None]
            bound = tails[h]
            done = np.all(bound[None, :] <= self.epsilon * running, axis=0)
            blocks.append(u)
            if done.any():
                stop = int(np.argmax(done)) + 1
                blocks[-1] = u[:, :stop]
                horizon += stop
                total = running[:, stop - 1]
                tail = np.full(size, tails[horizon])
                break
            horizon = stop_at
            total = running[:, -1]
        u = np.concatenate(blocks, axis=1)
        norm = total + tail
        return u / norm[:, None], tail / norm

    def expected_weights(self, horizon):
        m = np.asarray(self.expected(np.arange(1, horizon + 1)), dtype=float)
        return m / self._tails[0]


def fixed_weights(weights) -> CustomWeights:
    """Degenerate prior putting all mass on one finite weight vector."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0) or abs(weights.sum() - 1) > 1e-12:
        raise ValueError("fixed weights must be positive and sum to one")

    def expected(h):
        out = np.zeros(len(h))
        inside = h <= len(weights)
        out[inside] = weights[h[inside] - 1]
        return out

    def sampler(rng, h, size):
        return np.tile(expected(h), (size, 1))

    return CustomWeights(expected, sampler, summable=True, name=f"fixed{tuple(weights.round(6))}",
                         hard_cap=max(len(weights), 1))


def weight_model_from_dict(config: dict) -> WeightModel:
    """Build a model from ``{kind, params: {...}, epsilon, hard_cap}``."""
    kind = config.get("kind")
    params = dict(config.get("params", {}))
    extra = {key: config[key] for key in ("epsilon", "hard_cap") if key in config}
    if kind == "dp-stick-breaking":
        return StickBreakingWeights(**params, **extra)
    if kind == "logistic-normal":
        return LogisticNormalWeights(**params, **extra)
    if kind == "fixed":
        return fixed_weights(params["weights"])
    raise ValueError(f"unknown weight model kind {kind!r}")


@dataclass(frozen=True)
class WeightDraw:
    """One truncated realization ``(P_1, ..., P_H)`` plus its tail bound."""

    weights: np.ndarray
    tail_mass: float = 0.0
    seed: str = ""

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        if weights.ndim != 1 or len(weights) == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if self.tail_mass < 0 or abs(weights.sum() + self.tail_mass - 1) > 1e-12:
            raise ValueError("weights plus tail mass must sum to one")

    @property
    def horizon(self) -> int:
        return len(self.weights)


def sample_weights(model: WeightModel, seed) -> WeightDraw:
    rng = generator(seed)
    weights, tail = model.sample_batch(rng, 1)
    row = weights[0]
    # custom models may give zero-mean atoms past their support
    return WeightDraw(row[row > 0], float(tail[0]), seed_record(seed))


@dataclass(frozen=True)
class SizeBiasedPrefix:
    """First ``k`` atoms of a size-biased permutation of a :class:`WeightDraw`.

    The full pick order is fixed at construction by exponential race keys
    ``E_h / P_h`` (ascending), which is the same law as sequential picks with
    probability ``P_h / (unpicked mass)``.  :meth:`extend` reuses that order,
    so longer prefixes are consistent with shorter ones.
    """

    source: WeightDraw
    pick_indices: tuple[int, ...]
    _order: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def k(self) -> int:
        return len(self.pick_indices)

    @property
    def picked(self) -> np.ndarray:
        return self.source.weights[list(self.pick_indices)]

    @property
    def remaining_mass(self) -> float:
        mask = np.ones(self.source.horizon, dtype=bool)
        mask[list(self.pick_indices)] = False
        return float(self.source.weights[mask].sum() + self.source.tail_mass)

    def remaining_after(self) -> np.ndarray:
        """``1 - sum_{i <= j} P~_i`` for ``j = 1..k``, from the unpicked side."""
        ordered = self.source.weights[self._order]
        suffix = np.cumsum(ordered[::-1])[::-1]
        suffix = np.append(suffix, 0.0) + self.source.tail_mass
        return suffix[1 : self.k + 1]

    def extend(self, k: int) -> "SizeBiasedPrefix":
        if k > self.source.horizon:
            raise Exhausted(f"requested {k} picks from {self.source.horizon} atoms")
        return SizeBiasedPrefix(self.source, tuple(int(i) for i in self._order[:k]), self._order)


def size_biased_permutation(draw: WeightDraw, k: int, seed) -> SizeBiasedPrefix:
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > draw.horizon:
        raise Exhausted(f"requested {k} picks from {draw.horizon} atoms")
    rng = generator(seed)
    keys = rng.standard_exponential(draw.horizon) / draw.weights
    order = np.argsort(keys, kind="stable")
    return SizeBiasedPrefix(draw, tuple(int(i) for i in order[:k]), order)


def _sizes(n) -> tuple[int, ...]:
    return tuple(int(s) for s in n)


def partial_probability(n, prefix: SizeBiasedPrefix) -> float:
    """Log of ``prod_j P~_j^(n_j - 1) * prod_{j<k} (1 - sum_{i<=j} P~_i)``.

    This is the probability of one particular label sequence with
    composition ``n`` given the size-biased weights.
    """
    sizes = _sizes(n)
    k = len(sizes)
    if prefix.k < k:
        raise InsufficientPrefix(f"prefix has {prefix.k} picks, composition needs {k}")
    picked = prefix.picked[:k]
    exponents = np.array(sizes) - 1
    value = float(np.sum(np.where(exponents > 0, exponents * np.log(picked), 0.0)))
    if k > 1:
        value += float(np.sum(np.log(prefix.remaining_after()[: k - 1])))
    return value


def predictive_given_weights(n, prefix: SizeBiasedPrefix) -> np.ndarray:
    """``(P~_1, ..., P~_k, 1 - sum_j P~_j)``."""
    k = len(_sizes(n))
    if prefix.k < k:
        raise InsufficientPrefix(f"prefix has {prefix.k} picks, composition needs {k}")
    if k == 0:
        return np.array([1.0])
    rest = prefix.remaining_after()[k - 1]
    return np.append(prefix.picked[:k], rest)


def batch_size_biased(weights: np.ndarray, tail: np.ndarray, k: int, rng: np.random.Generator):
    """Vectorized size-biased prefixes for a batch of weight rows.

    Returns ``(picked, remaining)``, both ``(rows, k)``: the picked masses and
    the mass left unpicked after each pick (tail included).
    """
    rows, horizon = weights.shape
    if k > horizon:
        raise Exhausted(f"requested {k} picks from {horizon} atoms")
    with np.errstate(divide="ignore"):
        keys = rng.standard_exponential((rows, horizon)) / weights
    order = np.argsort(keys, axis=1, kind="stable")
    ordered = np.take_along_axis(weights, order, axis=1)
    suffix = np.cumsum(ordered[:, ::-1], axis=1)[:, ::-1]
    if k < horizon:
        remaining = suffix[:, 1 : k + 1]
    else:
        remaining = np.concatenate([suffix[:, 1:], np.zeros((rows, 1))], axis=1)
    return ordered[:, :k], remaining + tail[:, None]


def dp_expected_clusters(theta: float, n: int) -> float:
    """Exact ``E(k_n) = sum_{i=0}^{n-1} theta / (theta + i)`` under a DP."""
    return math.fsum(theta / (theta + i) for i in range(n))


def match_dp_mass(target: float, n: int) -> float:
    """Total mass ``theta`` whose DP prior gives ``E(k_n) == target``."""
    if not 1 < target < n:
        raise ValueError(f"target must lie strictly between 1 and n={n}")
    return brentq(lambda t: dp_expected_clusters(t, n) - target, 1e-12, 1e12, xtol=1e-14, rtol=1e-14)


def expected_clusters_given_weights(weights: np.ndarray, n: int) -> np.ndarray:
    """``E(k_n | P) = sum_h 1 - (1 - P_h)^n`` for each row of a weight batch."""
    weights = np.atleast_2d(weights)
    return -np.expm1(n * np.log1p(-weights)).sum(axis=1)


def calibrate_b(target: float, n: int, a: float = 1.0, sigma2: float = 0.25, draws: int = 20000, seed=0,
                bracket=(0.1, 50.0)) -> float:
    """Location offset ``b`` of a logistic-normal model with prior ``E(k_n) == target``.

    Uses fixed normal draws (common random numbers) and the conditional
    expectation given the weights, so the objective is smooth in ``b``.
    Returns the value only; nothing is applied to any model.
    """
    def gap(b):
        model = LogisticNormalWeights(a, b, sigma2)
        weights, _ = model.sample_batch(generator(seed), draws)
        return expected_clusters_given_weights(weights, n).mean() - target

    return brentq(gap, *bracket, xtol=1e-8)


def prior_expected_clusters(model: WeightModel, n: int, draws: int, seed, return_stderr: bool = False):
    """Monte Carlo ``E(k_n)``: sample ``n`` atoms iid from each weight draw.

    The tail mass (at most ``epsilon``) is ignored when sampling atoms.
    """
    if n < 1 or draws < 1:
        raise ValueError("n and draws must be positive")
    counts = np.empty(draws)
    block = 1024
    for b, start in enumerate(range(0, draws, block)):
        rng = generator(seed, b)
        size = min(block, draws - start)
        weights, _ = model.sample_batch(rng, size)
        cdf = np.cumsum(weights, axis=1)
        cdf /= cdf[:, -1:]
        u = rng.random((size, n))
        picks = np.empty((size, n), dtype=np.int64)
        for row in range(size):
            picks[row] = np.searchsorted(cdf[row], u[row], side="right")
        picks.sort(axis=1)
        counts[start : start + size] = 1 + np.count_nonzero(np.diff(picks, axis=1), axis=1)
    mean = float(counts.mean())
    if return_stderr:
        stderr = float(counts.std(ddof=1) / math.sqrt(draws)) if draws > 1 else math.inf
        return mean, stderr
    return mean


def mean_weights(model: WeightModel, draws: int, horizon: int, seed, sort: bool = False) -> np.ndarray:
    """Average of the first ``horizon`` weights (optionally sorted decreasingly)."""
    weights, _ = model.sample_batch(generator(seed), draws)
    if weights.shape[1] < horizon:
        weights = np.pad(weights, ((0, 0), (0, horizon - weights.shape[1])))
    if sort:
        weights = -np.sort(-weights, axis=1)
    return weights[:, :horizon].mean(axis=0)
