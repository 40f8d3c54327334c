"""Turn per-level telemetry (attempts, moves) into observation symbols 1..4."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputDomainError

__all__ = [
    "BinningRule",
    "KMeans1D",
    "bin_attempts",
    "bin_moves",
    "moves_thresholds",
    "bin_cut_points",
    "kmeans_1d",
    "apply_rule",
]

DEFAULT_COMPENSATION = 1.5
RULE_KINDS = ("attempts_fixed", "moves_expert", "kmeans_edges")


def _positive_int(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise InputDomainError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def bin_attempts(attempts):
    """Symbol for an attempts count: 1-2 -> 1, 3-4 -> 2, 5-7 -> 3, 8+ -> 4."""
    attempts = _positive_int("attempts", attempts)
    if attempts <= 2:
        return 1
    if attempts <= 4:
        return 2
    if attempts <= 7:
        return 3
    return 4


def moves_thresholds(expert_moves, alpha_c=DEFAULT_COMPENSATION):
    """Upper bounds of symbols 1..3: ``(E, ceil(a E), ceil(a^2 E))``."""
    expert_moves = _positive_int("expert_moves", expert_moves)
    if not alpha_c > 1:
        raise InputDomainError(f"compensation factor must exceed 1, got {alpha_c!r}")
    # round() strips representation error such as 1.1**2 * 100 = 121.00000000000003
    return (
        expert_moves,
        math.ceil(round(alpha_c * expert_moves, 9)),
        math.ceil(round(alpha_c**2 * expert_moves, 9)),
    )


def bin_moves(moves, expert_moves, alpha_c=DEFAULT_COMPENSATION):
    """Symbol for a move count relative to an expert's count on the same level."""
    moves = _positive_int("moves", moves)
    for symbol, bound in enumerate(moves_thresholds(expert_moves, alpha_c), start=1):
        if moves <= bound:
            return symbol
    return 4


def bin_cut_points(value, cut_points):
    """Symbol ``1 + #{cuts < value}``; a value on a cut takes the lower symbol."""
    return int(np.searchsorted(np.asarray(cut_points, dtype=float), value, side="left")) + 1


@dataclass(frozen=True, eq=False)
class KMeans1D:
    centroids: np.ndarray
    cut_points: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: tuple = field(repr=False)


def _quantile_centroids(values, uniq, k):
    q = (np.arange(k) + 0.5) / k
    init = np.quantile(values, q)
    if np.unique(init).size < k:
        init = np.quantile(uniq, q)
    if np.unique(init).size < k:
        init = uniq[np.round(np.linspace(0, uniq.size - 1, k)).astype(int)]
    return np.sort(init)


def _optimal_centroids(uniq, weights, k):
    """Centroids of the minimum-SSE partition of sorted weighted points.

    Dynamic programming over contiguous segments; each layer is filled by
    divide and conquer, which is valid because the optimal split point is
    monotone in the segment end for 1-D squared error.
    """
    n = uniq.size
    w = np.concatenate([[0.0], np.cumsum(weights)])
    s1 = np.concatenate([[0.0], np.cumsum(weights * uniq)])
    s2 = np.concatenate([[0.0], np.cumsum(weights * uniq * uniq)])

    def cost(i, j):  # segment uniq[i:j], i may be an array
        tot = s1[j] - s1[i]
        return np.maximum((s2[j] - s2[i]) - tot * tot / (w[j] - w[i]), 0.0)

    prev = np.full(n + 1, np.inf)
    prev[0] = 0.0
    splits = []
    for c in range(1, k + 1):
        cur = np.full(n + 1, np.inf)
        arg = np.zeros(n + 1, dtype=np.int64)
        stack = [(c, n, c - 1, n - 1)]
        while stack:
            lo, hi, opt_lo, opt_hi = stack.pop()
            if lo > hi:
                continue
            mid = (lo + hi) // 2
            cand = np.arange(opt_lo, min(mid - 1, opt_hi) + 1)
            vals = prev[cand] + cost(cand, mid)
            best = int(cand[np.argmin(vals)])
            cur[mid], arg[mid] = vals.min(), best
            stack.append((lo, mid - 1, opt_lo, best))
            stack.append((mid + 1, hi, best, opt_hi))
        splits.append(arg)
        prev = cur
    bounds = [n]
    for c in range(k - 1, -1, -1):
        bounds.append(int(splits[c][bounds[-1]]))
    bounds = bounds[::-1]
    return np.array([
        (s1[b] - s1[a]) / (w[b] - w[a]) for a, b in zip(bounds[:-1], bounds[1:])
    ])


def _lloyd(values, centroids, max_iters):
    history = []
    labels = None
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        cuts = (centroids[1:] + centroids[:-1]) / 2
        new_labels = np.searchsorted(cuts, values, side="left")
        history.append(float(np.sum((values - centroids[new_labels]) ** 2)))
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        sums = np.bincount(labels, weights=values, minlength=centroids.size)
        counts = np.bincount(labels, minlength=centroids.size)
        centroids = np.sort(np.where(counts > 0, sums / np.maximum(counts, 1), centroids))
    else:
        cuts = (centroids[1:] + centroids[:-1]) / 2
        labels = np.searchsorted(cuts, values, side="left")
        history.append(float(np.sum((values - centroids[labels]) ** 2)))
    return centroids, history, n_iter


def kmeans_1d(values, k, max_iters=300, seed=0, init="optimal", n_init=1):
    """One-dimensional k-means by Lloyd iterations.

    ``init="optimal"`` (default) starts Lloyd from the exact minimum
    within-cluster sum of squares partition, found by dynamic programming
    over the sorted unique values; Lloyd then only confirms the fixpoint.
    ``init="quantile"`` starts from ``k`` evenly spaced sample quantiles and
    can stop in a local minimum; ``n_init - 1`` extra runs from ``k``
    distinct values drawn with ``seed`` may be added. The run with the
    smallest objective wins (earliest on ties).

    Returns
    -------
    KMeans1D
        Ascending centroids, the midpoints between neighbours as cut points,
        and the per-iteration objective of the winning run.
    """
    values = np.asarray(values, dtype=float).ravel()
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise InputDomainError(f"k must be a positive integer, got {k!r}")
    if max_iters < 1 or n_init < 1:
        raise InputDomainError("max_iters and n_init must be >= 1")
    if init not in ("optimal", "quantile"):
        raise InputDomainError(f"init must be 'optimal' or 'quantile', got {init!r}")
    if not np.all(np.isfinite(values)):
        raise InputDomainError("k-means values must be finite")
    uniq, counts = np.unique(values, return_counts=True)
    if uniq.size < k:
        raise InputDomainError(f"need at least {k} distinct values, got {uniq.size}")
    if init == "optimal":
        starts = [_optimal_centroids(uniq, counts.astype(float), k)]
    else:
        starts = [_quantile_centroids(values, uniq, k)]
    rng = np.random.default_rng(seed)
    starts += [np.sort(rng.choice(uniq, size=k, replace=False)) for _ in range(n_init - 1)]
    best = None
    for start in starts:
        centroids, history, n_iter = _lloyd(values, start, max_iters)
        if best is None or history[-1] < best[1][-1]:
            best = (centroids, history, n_iter)
    centroids, history, n_iter = best
    return KMeans1D(
        centroids=centroids,
        cut_points=(centroids[1:] + centroids[:-1]) / 2,
        inertia=history[-1],
        n_iter=n_iter,
        inertia_history=tuple(history),
    )


@dataclass(frozen=True)
class BinningRule:
    """Serializable discretization rule.

    ``moves_expert`` needs ``expert_moves`` (level index -> expert move
    count) and uses ``alpha_c`` as the compensation factor;
    ``kmeans_edges`` needs strictly increasing ``cut_points``.
    """

    kind: str
    expert_moves: dict = None
    alpha_c: float = DEFAULT_COMPENSATION
    cut_points: tuple = ()

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ConfigurationError(f"unknown binning rule {self.kind!r}; expected one of {RULE_KINDS}")
        if self.kind == "moves_expert":
            if not self.alpha_c > 1:
                raise ConfigurationError(f"compensation factor must exceed 1, got {self.alpha_c!r}")
            experts = dict(self.expert_moves or {})
            for level, moves in experts.items():
                if isinstance(moves, bool) or int(moves) != moves or moves < 1:
                    raise ConfigurationError(f"expert_moves for level {level} must be a positive integer")
            object.__setattr__(self, "expert_moves", {int(k): int(v) for k, v in experts.items()})
        if self.kind == "kmeans_edges":
            cuts = tuple(float(c) for c in self.cut_points)
            if any(b <= a for a, b in zip(cuts, cuts[1:])):
                raise ConfigurationError("cut points must be strictly increasing")
            object.__setattr__(self, "cut_points", cuts)

    @property
    def n_symbols(self):
        return len(self.cut_points) + 1 if self.kind == "kmeans_edges" else 4

    def to_dict(self):
        doc = {"kind": self.kind}
        if self.kind == "moves_expert":
            doc["alpha_c"] = self.alpha_c
            doc["expert_moves"] = {str(k): v for k, v in sorted(self.expert_moves.items())}
        elif self.kind == "kmeans_edges":
            doc["cut_points"] = list(self.cut_points)
        return doc

    @classmethod
    def from_dict(cls, doc):
        kind = doc.get("kind")
        if kind == "moves_expert":
            experts = {int(k): v for k, v in doc.get("expert_moves", {}).items()}
            return cls(kind, expert_moves=experts, alpha_c=doc.get("alpha_c", DEFAULT_COMPENSATION))
        if kind == "kmeans_edges":
            return cls(kind, cut_points=tuple(doc.get("cut_points", ())))
        return cls(kind)


def apply_rule(rule, value, level=None):
    """Symbol for one telemetry value under ``rule``.

    ``level`` selects the expert baseline for ``moves_expert`` rules.
    """
    if rule.kind == "attempts_fixed":
        return bin_attempts(value)
    if rule.kind == "kmeans_edges":
        return bin_cut_points(value, rule.cut_points)
    if level not in rule.expert_moves:
        raise ConfigurationError(f"no expert baseline for level {level}")
    return bin_moves(value, rule.expert_moves[level], rule.alpha_c)
