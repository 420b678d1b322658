"""Compositions, putative predictive probability functions and EPPF tables.

A *composition* is the vector of cluster sizes of a partition of ``[n]``
listed in order of appearance.  Cluster indices are 0-based throughout the
package: for a composition with ``k`` clusters, index ``j < k`` refers to an
existing cluster and index ``k`` to a new one.

The validators in this module are enumeration based.  They check every
composition up to a caller-supplied total size and return every witness of
failure rather than stopping at the first one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .exceptions import MissingEntry, PathDependent

DEFAULT_BOUND = 6
REL_TOL = 1e-9
ABS_TOL = 1e-300
PPF_SUM_TOL = 1e-12


def _close(x: float, y: float, rel_tol: float = REL_TOL) -> bool:
    return math.isclose(x, y, rel_tol=rel_tol, abs_tol=ABS_TOL)


@dataclass(frozen=True)
class Composition:
    """Cluster sizes ``(n_1, ..., n_k)`` in order of appearance."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes:
            raise ValueError("a composition needs at least one cluster")
        if any(s < 1 for s in sizes):
            raise ValueError(f"cluster sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def from_key(cls, key: str) -> "Composition":
        return cls(tuple(int(part) for part in key.strip().split("-")))

    @property
    def key(self) -> str:
        return "-".join(map(str, self.sizes))

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def k(self) -> int:
        return len(self.sizes)

    def increment(self, j: int) -> "Composition":
        """Add one element to cluster ``j``; ``j == k`` opens a new cluster."""
        if j == self.k:
            return Composition(self.sizes + (1,))
        if not 0 <= j < self.k:
            raise IndexError(f"cluster index {j} out of range for k={self.k}")
        sizes = list(self.sizes)
        sizes[j] += 1
        return Composition(tuple(sizes))

    def permute(self, sigma: Sequence[int]) -> "Composition":
        """Return ``(n_sigma(0), ..., n_sigma(k-1))``."""
        return Composition(tuple(self.sizes[s] for s in sigma))

    def canonical_sequence(self) -> list[int]:
        """Labels ``0,..,0,1,..,1,...`` reaching this composition in order."""
        return [j for j, size in enumerate(self.sizes) for _ in range(size)]

    def __iter__(self):
        return iter(self.sizes)

    def __len__(self):
        return len(self.sizes)

    def __getitem__(self, item):
        return self.sizes[item]

    def __str__(self):
        return f"({', '.join(map(str, self.sizes))})"


def as_composition(n) -> Composition:
    if isinstance(n, Composition):
        return n
    if isinstance(n, str):
        return Composition.from_key(n)
    return Composition(tuple(n))


def compositions(total: int) -> Iterator[Composition]:
    """Yield every composition with ``sum == total``.

    There are ``2**(total - 1)`` of them; cut points of ``total`` ones are
    enumerated in lexicographic order.
    """
    if total < 1:
        return
    for mask in range(2 ** (total - 1)):
        sizes, run = [], 1
        for bit in range(total - 1):
            if mask >> (total - 2 - bit) & 1:
                sizes.append(run)
                run = 1
            else:
                run += 1
        sizes.append(run)
        yield Composition(tuple(sizes))


def compositions_up_to(bound: int) -> Iterator[Composition]:
    for total in range(1, bound + 1):
        yield from compositions(total)


def sequence_composition(labels: Sequence[int]) -> Composition:
    """Composition of an order-of-appearance label sequence."""
    counts: dict[int, int] = {}
    for label in labels:
        counts[label] = counts.get(label, 0) + 1
    return Composition(tuple(counts[j] for j in sorted(counts)))


def sequence_count(n) -> int:
    """Number of order-of-appearance label sequences with composition ``n``."""
    sizes = as_composition(n).sizes
    remaining = sum(sizes)
    count = 1
    for size in sizes:
        count *= math.comb(remaining - 1, size - 1)
        remaining -= size
    return count


@dataclass
class PutativePpf:
    """A rule mapping a composition to ``k + 1`` nonnegative probabilities."""

    rule: Callable[[Composition], Sequence[float]]
    name: str = "ppf"

    def __call__(self, n) -> np.ndarray:
        n = as_composition(n)
        probs = np.asarray(self.rule(n), dtype=float)
        if probs.shape != (n.k + 1,):
            raise ValueError(
                f"{self.name} returned shape {probs.shape} for {n}, expected ({n.k + 1},)"
            )
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PPF_SUM_TOL:
            raise ValueError(f"{self.name} returned an invalid probability vector at {n}: {probs}")
        return probs


def dp_ppf(theta: float) -> PutativePpf:
    """Polya urn rule ``n_j / (n + theta)``, new cluster ``theta / (n + theta)``."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")

    def rule(n: Composition):
        total = n.n + theta
        return [size / total for size in n.sizes] + [theta / total]

    return PutativePpf(rule, name=f"dp(theta={theta:g})")


def linear_f_ppf(f: Callable[[int], float], theta: float, name: str | None = None) -> PutativePpf:
    """Rule proportional to ``(f(n_1), ..., f(n_k), theta)``.

    Balance holds for every bound only when ``f(m) = a * m``; anything else
    yields a witness quickly under :func:`check_balance`.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")

    def rule(n: Composition):
        scores = [float(f(size)) for size in n.sizes]
        if any(s <= 0 for s in scores):
            raise ValueError(f"f must be positive, got {scores} at {n}")
        scores.append(theta)
        total = sum(scores)
        return [s / total for s in scores]

    return PutativePpf(rule, name=name or f"f-proportional(theta={theta:g})")


def polynomial_f_ppf(coefficients: Sequence[float], theta: float) -> PutativePpf:
    """:func:`linear_f_ppf` with ``f(m) = c0 + c1*m + c2*m**2 + ...``."""
    coefficients = [float(c) for c in coefficients]

    def f(m):
        return sum(c * m**p for p, c in enumerate(coefficients))

    terms = " + ".join(f"{c:g}*m^{p}" for p, c in enumerate(coefficients) if c)
    return linear_f_ppf(f, theta, name=f"polynomial-f({terms}; theta={theta:g})")


def dp_log_eppf(n, theta: float, a: float = 1.0) -> float:
    """Log of the Dirichlet process EPPF with total mass ``theta / a``.

    ``theta**(k-1) * a**(n-k) * prod (n_i - 1)! / prod_{m=1}^{n-1} (theta + m*a)``.
    Sizes are summed in sorted order so permuted inputs give identical floats.
    """
    if not (theta > 0 and a > 0):
        raise ValueError("theta and a must be positive")
    sizes = sorted(as_composition(n).sizes)
    total, k = sum(sizes), len(sizes)
    value = (k - 1) * math.log(theta) + (total - k) * math.log(a)
    value += math.fsum(math.lgamma(s) for s in sizes)
    value -= math.fsum(math.log(theta + m * a) for m in range(1, total))
    return value


def dp_eppf(n, theta: float, a: float = 1.0) -> float:
    return math.exp(dp_log_eppf(n, theta, a))


@dataclass
class EppfTable:
    """Log partition probabilities on every composition up to ``bound``."""

    bound: int
    log_values: dict[Composition, float] = field(default_factory=dict)
    origin: str = "external"

    def __post_init__(self):
        for comp, value in self.log_values.items():
            if value > 1e-12:
                raise ValueError(f"log probability {value} > 0 at {comp}")
        one = Composition((1,))
        if one in self.log_values and abs(self.log_values[one]) > 1e-12:
            raise ValueError("p(1) must equal 1")

    @classmethod
    def from_values(cls, values: dict, bound: int | None = None, origin: str = "external"):
        log_values = {}
        for comp, p in values.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1] at {comp}")
            log_values[as_composition(comp)] = math.log(p) if p > 0 else -math.inf
        if bound is None:
            bound = max(c.n for c in log_values)
        return cls(bound, log_values, origin)

    def log_probability(self, n) -> float:
        n = as_composition(n)
        try:
            return self.log_values[n]
        except KeyError:
            raise MissingEntry(n.sizes) from None

    def __getitem__(self, n) -> float:
        return math.exp(self.log_probability(n))

    def __contains__(self, n) -> bool:
        return as_composition(n) in self.log_values

    def __len__(self):
        return len(self.log_values)

    def items(self):
        for comp, value in self.log_values.items():
            yield comp, math.exp(value)


def dp_eppf_table(theta: float, a: float = 1.0, bound: int = DEFAULT_BOUND) -> EppfTable:
    values = {c: dp_log_eppf(c, theta, a) for c in compositions_up_to(bound)}
    return EppfTable(bound, values, origin="closed-form-DP")


def ppf_from_eppf(eppf: EppfTable, n) -> np.ndarray:
    """``p_j(n) = p(n^{j+}) / p(n)`` for ``j = 0..k``."""
    n = as_composition(n)
    log_base = eppf.log_probability(n)
    if log_base == -math.inf:
        raise ZeroDivisionError(f"p{n} = 0")
    logs = np.array([eppf.log_probability(n.increment(j)) for j in range(n.k + 1)])
    return np.exp(logs - log_base)


class _Cached:
    """Memoizes a ppf by composition during one enumeration."""

    def __init__(self, ppf):
        self.ppf = ppf
        self.cache: dict[Composition, np.ndarray] = {}

    def __call__(self, n: Composition) -> np.ndarray:
        try:
            return self.cache[n]
        except KeyError:
            value = self.cache[n] = self.ppf(n)
            return value


def _path_log_probability(ppf: _Cached, labels: Sequence[int]) -> float:
    total = 0.0
    comp = Composition((1,))
    for label in labels[1:]:
        p = ppf(comp)[label]
        if p <= 0:
            return -math.inf
        total += math.log(p)
        comp = comp.increment(label)
    return total


def _alternate_sequence(labels: list[int]) -> list[int] | None:
    """Last valid adjacent transposition of an order-of-appearance sequence."""
    first_seen = {}
    for pos, label in enumerate(labels):
        first_seen.setdefault(label, pos)
    for t in range(len(labels) - 2, -1, -1):
        a, b = labels[t], labels[t + 1]
        if a == b or (first_seen[a] == t and first_seen[b] == t + 1):
            continue
        swapped = list(labels)
        swapped[t], swapped[t + 1] = b, a
        return swapped
    return None


def eppf_from_ppf(ppf: PutativePpf, bound: int = DEFAULT_BOUND) -> EppfTable:
    """Build ``p`` from ``p(1) = 1`` and ``p(n^{j+}) = p_j(n) p(n)``.

    Each value is computed along the canonical insertion order (clusters
    filled one after another) and again along one adjacent transposition of
    that order.  Disagreement beyond 1e-9 relative raises :class:`PathDependent`.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    cached = _Cached(ppf)
    log_values = {Composition((1,)): 0.0}
    for total in range(2, bound + 1):
        for comp in compositions(total):
            sizes = list(comp.sizes)
            last = comp.k - 1
            if sizes[last] == 1:
                parent = Composition(tuple(sizes[:-1]))
            else:
                sizes[last] -= 1
                parent = Composition(tuple(sizes))
            p = cached(parent)[last]
            value = log_values[parent] + math.log(p) if p > 0 else -math.inf
            log_values[comp] = value

            canonical = comp.canonical_sequence()
            alternate = _alternate_sequence(canonical)
            if alternate is None:
                continue
            other = _path_log_probability(cached, alternate)
            if not _close(math.exp(value), math.exp(other)):
                raise PathDependent(comp.sizes, math.exp(value), math.exp(other), canonical, alternate)
    return EppfTable(bound, log_values, origin="derived-from-PPF")


@dataclass(frozen=True)
class Violation:
    """One failed equality: ``lhs != rhs`` at ``composition``.

    For balance checks ``i`` and ``j`` are the two insertion indices.  For
    label-symmetry checks ``i`` is the cluster index, ``j`` the index it maps
    to under ``permutation``.
    """

    composition: tuple[int, ...]
    i: int
    j: int
    lhs: float
    rhs: float
    permutation: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        out = {
            "composition": "-".join(map(str, self.composition)),
            "i": self.i,
            "j": self.j,
            "lhs": self.lhs,
            "rhs": self.rhs,
        }
        if self.permutation is not None:
            out["permutation"] = list(self.permutation)
        return out


@dataclass
class BalanceReport:
    bound: int
    violations: list[Violation] = field(default_factory=list)
    check: str = "balance"

    @property
    def holds(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.holds

    def merge(self, other: "BalanceReport") -> "BalanceReport":
        return BalanceReport(max(self.bound, other.bound), self.violations + other.violations, self.check)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "holds": self.holds,
            "bound": self.bound,
            "violations": [v.to_dict() for v in self.violations],
        }


def check_balance(ppf: PutativePpf, bound: int = DEFAULT_BOUND) -> BalanceReport:
    """Check ``p_i(n) p_j(n^{i+}) == p_j(n) p_i(n^{j+})`` for all ``|n| <= bound``.

    Only pairs ``i < j`` are reported since swapping them swaps the two sides.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    cached = _Cached(ppf)
    report = BalanceReport(bound, check="balance")
    for comp in compositions_up_to(bound):
        p = cached(comp)
        for i, j in itertools.combinations(range(comp.k + 1), 2):
            lhs = p[i] * cached(comp.increment(i))[j]
            rhs = p[j] * cached(comp.increment(j))[i]
            if not _close(lhs, rhs):
                report.violations.append(Violation(comp.sizes, i, j, float(lhs), float(rhs)))
    return report


def check_label_symmetry(ppf: PutativePpf, bound: int = DEFAULT_BOUND) -> BalanceReport:
    """Check ``p_i(n) == p_{sigma^-1(i)}(sigma(n))`` for every permutation."""
    if bound < 1:
        raise ValueError("bound must be >= 1")
    cached = _Cached(ppf)
    report = BalanceReport(bound, check="label-symmetry")
    for comp in compositions_up_to(bound):
        if comp.k < 2:
            continue
        p = cached(comp)
        for sigma in itertools.permutations(range(comp.k)):
            permuted = cached(comp.permute(sigma))
            inverse = {s: t for t, s in enumerate(sigma)}
            for i in range(comp.k):
                if not _close(p[i], permuted[inverse[i]]):
                    report.violations.append(
                        Violation(comp.sizes, i, inverse[i], float(p[i]), float(permuted[inverse[i]]), sigma)
                    )
    return report


def check_additivity(eppf: EppfTable) -> BalanceReport:
    """Check ``p(n) == sum_j p(n^{j+})`` for every ``|n| <= bound - 1``."""
    report = BalanceReport(eppf.bound, check="additivity")
    for comp in compositions_up_to(eppf.bound - 1):
        lhs = eppf[comp]
        rhs = math.fsum(eppf[comp.increment(j)] for j in range(comp.k + 1))
        if not _close(lhs, rhs):
            report.violations.append(Violation(comp.sizes, -1, -1, lhs, rhs))
    return report


def check_symmetry(eppf: EppfTable) -> BalanceReport:
    """Check ``p(sigma(n)) == p(n)`` for every stored composition."""
    report = BalanceReport(eppf.bound, check="eppf-symmetry")
    for comp, value in eppf.items():
        for sigma in itertools.permutations(range(comp.k)):
            other = eppf[comp.permute(sigma)]
            if not _close(value, other):
                report.violations.append(Violation(comp.sizes, -1, -1, value, other, sigma))
    return report
