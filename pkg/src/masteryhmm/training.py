"""Baum-Welch estimation from many observation sequences.

Sequences of equal length are stacked and run through the forward/backward
recursions together; expected counts are summed over all sequences (in
ascending length order, so totals are reproducible) before each M-step.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import DegenerateStateError, InputDomainError
from .hmm_core import (
    MIN_EIGENVALUE,
    DiscreteEmission,
    GaussianEmission,
    HmmModel,
    MixtureEmission,
    _backward_pass,
    _forward_pass,
    permute_states,
)

__all__ = [
    "TrainingConfig",
    "TrainingResult",
    "init_model",
    "init_continuous_model",
    "baum_welch",
    "fit_restarts",
    "fit_continuous_mstep",
    "canonical_order",
]

_log = logging.getLogger(__name__)

MIN_STATE_MASS = 1e-12


@dataclass(frozen=True)
class TrainingConfig:
    """EM stopping rule and probability floor.

    ``param_floor`` is the smallest value any entry of pi, A, B (or mixture
    weights) may take after an M-step.
    """

    max_iterations: int = 500
    rel_tolerance: float = 1e-6
    param_floor: float = 1e-6

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InputDomainError("max_iterations must be an integer >= 1")
        if not self.rel_tolerance > 0:
            raise InputDomainError("rel_tolerance must be positive")
        if not 0 <= self.param_floor < 1:
            raise InputDomainError("param_floor must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class TrainingResult:
    model: HmmModel
    loglik_history: tuple
    converged: bool
    iterations_used: int

    @property
    def loglik(self):
        """Total log-likelihood of the returned model on the training data."""
        return self.loglik_history[-1]


def _row_generator(seed, block, row):
    # Philox is counter-based; keying on (seed, block, row) makes each row an
    # independent pure function of the seed.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block, row])))


def _check_seed(seed):
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or seed < 0:
        raise InputDomainError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def _dirichlet_rows(seed, block, n_rows, width):
    rows = np.array([_row_generator(seed, block, r).dirichlet(np.ones(width)) for r in range(n_rows)])
    return floor_project(rows, min(1e-6, 0.5 / width))


def floor_project(probs, floor):
    """Constrained M-step for categorical rows.

    Given unconstrained maximum-likelihood rows ``probs``, return the rows
    that maximize the same expected log-likelihood subject to every entry
    being at least ``floor``: entries below the floor are raised to it and
    the remaining entries are rescaled to restore a unit sum, repeated until
    no free entry drops below the floor. Rows already above the floor are
    returned unchanged.
    """
    probs = np.array(probs, dtype=float)
    if floor <= 0:
        return probs
    out = probs.reshape(-1, probs.shape[-1])
    for r in range(out.shape[0]):
        row = out[r]
        if np.all(row >= floor):
            continue
        pinned = row < floor
        while True:
            free_mass = row[~pinned].sum()
            scale = (1.0 - floor * pinned.sum()) / free_mass if free_mass > 0 else 0.0
            candidate = np.where(pinned, floor, row * scale)
            newly = (~pinned) & (candidate < floor)
            if not np.any(newly):
                break
            pinned |= newly
        if free_mass <= 0:
            candidate = np.full_like(row, 1.0 / row.size)
        out[r] = candidate
    return out.reshape(probs.shape)


def init_model(num_states, n_symbols, seed):
    """Random discrete-emission model, a pure function of ``seed``.

    Every row of pi, A and B is an independent flat-Dirichlet draw.
    """
    if num_states < 1 or n_symbols < 1:
        raise InputDomainError("num_states and n_symbols must be >= 1")
    seed = _check_seed(seed)
    pi = _dirichlet_rows(seed, 0, 1, num_states)[0]
    trans = _dirichlet_rows(seed, 1, num_states, num_states)
    emis = _dirichlet_rows(seed, 2, num_states, n_symbols)
    return HmmModel(pi, trans, DiscreteEmission(emis))


def _stack_continuous(sequences):
    frames = []
    for i, seq in enumerate(sequences):
        arr = np.asarray(seq, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise InputDomainError(f"sequence {i}: expected shape (T,) or (T, D) with T >= 1")
        frames.append(arr)
    dims = {f.shape[1] for f in frames}
    if len(dims) != 1:
        raise InputDomainError(f"sequences have mixed feature dimensions {sorted(dims)}")
    return np.concatenate(frames)


def _floor_covariance(cov):
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    w, v = np.linalg.eigh(cov)
    if np.all(w >= MIN_EIGENVALUE * 1.01):
        return cov
    # Small margin above the validation threshold survives reconstruction roundoff.
    w = np.maximum(w, MIN_EIGENVALUE * 1.01)
    cov = (v * w[..., None, :]) @ np.swapaxes(v, -1, -2)
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


def init_continuous_model(num_states, sequences, seed, n_components=1):
    """Random Gaussian (``n_components == 1``) or mixture model seeded from data.

    Means are distinct observation frames picked by a seeded generator;
    every covariance starts at the pooled data covariance.
    """
    if num_states < 1 or n_components < 1:
        raise InputDomainError("num_states and n_components must be >= 1")
    seed = _check_seed(seed)
    data = _stack_continuous(sequences)
    n_frames, dim = data.shape
    pooled = np.atleast_2d(np.cov(data, rowvar=False, bias=True)) if n_frames > 1 else np.eye(dim)
    pooled = _floor_covariance(pooled + 1e-6 * np.eye(dim))
    k = num_states * n_components
    picks = _row_generator(seed, 3, 0).choice(n_frames, size=k, replace=k > n_frames)
    means = data[picks]
    pi = _dirichlet_rows(seed, 0, 1, num_states)[0]
    trans = _dirichlet_rows(seed, 1, num_states, num_states)
    if n_components == 1:
        emission = GaussianEmission(means, np.broadcast_to(pooled, (num_states, dim, dim)))
    else:
        weights = _dirichlet_rows(seed, 4, num_states, n_components)
        emission = MixtureEmission(
            weights,
            means.reshape(num_states, n_components, dim),
            np.broadcast_to(pooled, (num_states, n_components, dim, dim)),
        )
    return HmmModel(pi, trans, emission)


def _prepare_batches(emission, sequences):
    """Validate sequences and group them by length: [(indices, stacked frames)]."""
    if len(sequences) == 0:
        raise InputDomainError("at least one observation sequence is required")
    prepared = []
    for i, seq in enumerate(sequences):
        try:
            prepared.append(emission.prepare(seq))
        except InputDomainError as exc:
            raise InputDomainError(f"sequence {i}: {exc}") from None
    by_length = {}
    for i, x in enumerate(prepared):
        by_length.setdefault(x.shape[0], []).append(i)
    return [
        (np.array(idx), np.stack([prepared[i] for i in idx]))
        for _, idx in sorted(by_length.items())
    ]


@dataclass
class _Stats:
    loglik: float
    initial: np.ndarray
    transitions: np.ndarray
    gammas: list


def _e_step(model, batches):
    n = model.num_states
    loglik = 0.0
    initial = np.zeros(n)
    transitions = np.zeros((n, n))
    gammas = []
    for idx, x in batches:
        lik, offset = model.emissions.frame_likelihood(x)
        alpha, scale = _forward_pass(model.initial, model.transitions, lik, seq_ids=idx)
        beta = _backward_pass(model.transitions, lik, scale)
        loglik += float(np.sum(np.log(scale)) + np.sum(offset))
        gamma = alpha * beta
        gamma /= gamma.sum(axis=2, keepdims=True)
        gammas.append(gamma)
        initial += gamma[:, 0].sum(axis=0)
        if x.shape[1] > 1:
            weighted = lik[:, 1:] * beta[:, 1:] / scale[:, 1:, None]
            transitions += model.transitions * np.einsum("sti,stj->ij", alpha[:, :-1], weighted)
    return _Stats(loglik, initial, transitions, gammas)


def _normalize_rows(counts, fallback):
    totals = counts.sum(axis=-1, keepdims=True)
    safe = np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, counts / safe, fallback)


def _m_step(model, stats, batches, floor):
    initial = floor_project(stats.initial / stats.initial.sum(), floor)
    transitions = floor_project(_normalize_rows(stats.transitions, model.transitions), floor)
    if model.is_discrete:
        emis = model.emissions
        counts = np.zeros((model.num_states, emis.n_symbols))
        for (_, x), gamma in zip(batches, stats.gammas):
            flat = x.ravel()
            g = gamma.reshape(-1, model.num_states)
            for i in range(model.num_states):
                counts[i] += np.bincount(flat, weights=g[:, i], minlength=emis.n_symbols)
        emission = DiscreteEmission(floor_project(_normalize_rows(counts, emis.probs), floor))
    else:
        frames = np.concatenate([x.reshape(-1, x.shape[-1]) for _, x in batches])
        gamma = np.concatenate([g.reshape(-1, model.num_states) for g in stats.gammas])
        emission = _continuous_update(model.emissions, gamma, frames, floor)
    return HmmModel(initial, transitions, emission)


def _weighted_moments(resp, frames, what):
    mass = resp.sum(axis=0)
    if np.any(mass < MIN_STATE_MASS):
        bad = int(np.argmin(mass))
        raise DegenerateStateError(
            f"{what} {bad + 1} has total posterior mass {mass[bad]:.3g} < {MIN_STATE_MASS:g}"
        )
    means = (resp.T @ frames) / mass[:, None]
    covars = []
    for k in range(resp.shape[1]):
        diff = frames - means[k]
        covars.append((resp[:, k, None] * diff).T @ diff / mass[k])
    return mass, means, _floor_covariance(np.array(covars))


def _continuous_update(emission, gamma, frames, floor=0.0):
    if emission.kind == "gaussian":
        _, means, covars = _weighted_moments(gamma, frames, "state")
        return GaussianEmission(means, covars)
    n, m = emission.weights.shape
    comp = softmax(emission.component_loglik(frames), axis=-1)
    resp = (gamma[:, :, None] * comp).reshape(len(frames), n * m)
    mass, means, covars = _weighted_moments(resp, frames, "state/component")
    weights = floor_project(_normalize_rows(mass.reshape(n, m), emission.weights), floor)
    d = frames.shape[1]
    return MixtureEmission(weights, means.reshape(n, m, d), covars.reshape(n, m, d, d))


def fit_continuous_mstep(emission, posteriors, sequences):
    """Re-estimate a Gaussian or mixture emission model from state posteriors.

    Parameters
    ----------
    emission : GaussianEmission or MixtureEmission
        Current emission model; for mixtures it supplies the within-state
        component responsibilities.
    posteriors : list of arrays, shape (T_s, N)
        State posteriors from the E-step, one per sequence.
    sequences : list of arrays, shape (T_s,) or (T_s, D)

    Returns
    -------
    GaussianEmission or MixtureEmission
        Posterior-weighted means and scatter matrices (eigenvalues floored
        at 1e-8); mixture weights renormalized per state.
    """
    if emission.kind == "discrete":
        raise InputDomainError("fit_continuous_mstep needs a Gaussian or mixture emission")
    if len(posteriors) != len(sequences):
        raise InputDomainError("one posterior matrix is required per sequence")
    frames = _stack_continuous(sequences)
    gamma = np.concatenate([np.asarray(g, dtype=float) for g in posteriors])
    if gamma.shape != (frames.shape[0], emission.num_states):
        raise InputDomainError("posterior shapes do not match the sequences")
    return _continuous_update(emission, gamma, frames)


def canonical_order(model):
    """State order that puts the largest expected emission first.

    For the attempts/moves encodings a large expected symbol means many
    attempts, so state 1 becomes the lowest mastery level.
    """
    return np.argsort(-model.emissions.expected_value(), kind="stable")


def _floor_model(model, floor):
    if floor <= 0:
        return model
    emis = model.emissions
    if emis.kind == "discrete":
        emis = DiscreteEmission(floor_project(emis.probs, floor))
    elif emis.kind == "mixture":
        emis = MixtureEmission(floor_project(emis.weights, floor), emis.means, emis.covars)
    return HmmModel(floor_project(model.initial, floor), floor_project(model.transitions, floor), emis)


def baum_welch(init, sequences, config=None):
    """Fit ``init`` to ``sequences`` by expectation maximization.

    The starting model is first projected onto the floored parameter set so
    that every M-step is an exact constrained maximization and the recorded
    log-likelihoods never decrease. ``loglik_history[k]`` is the total
    log-likelihood after ``k`` M-steps; the final entry belongs to the
    returned model, whose states are relabeled by :func:`canonical_order`.
    """
    config = config or TrainingConfig()
    emis = init.emissions
    width = max(init.num_states, emis.n_symbols if emis.kind == "discrete" else 1)
    if config.param_floor >= 1.0 / width:
        raise InputDomainError(
            f"param_floor {config.param_floor:g} must be below 1/{width} for this model"
        )
    batches = _prepare_batches(emis, sequences)
    model = _floor_model(init, config.param_floor)
    history = []
    converged = False
    iterations = 0
    while True:
        stats = _e_step(model, batches)
        history.append(stats.loglik)
        if len(history) > 1:
            delta = history[-1] - history[-2]
            if delta == 0 or abs(delta) < config.rel_tolerance * abs(history[-1]):
                converged = True
                break
        if iterations == config.max_iterations:
            break
        model = _m_step(model, stats, batches, config.param_floor)
        iterations += 1
    _log.debug("baum_welch: %d iterations, loglik %.6f, converged=%s",
                iterations, history[-1], converged)
    model = permute_states(model, canonical_order(model))
    return TrainingResult(model, tuple(history), converged, iterations)


def fit_restarts(sequences, num_states, seeds, config=None, *, n_symbols=None,
                 emission="discrete", n_components=1):
    """Run :func:`baum_welch` once per seed; returns ``[(seed, result), ...]``.

    ``emission`` is ``"discrete"`` (alphabet size ``n_symbols``, default the
    largest observed symbol), ``"gaussian"`` or ``"mixture"``.
    """
    seeds = list(seeds)
    if not seeds:
        raise InputDomainError("at least one seed is required")
    if emission == "discrete":
        if n_symbols is None:
            n_symbols = max(int(np.max(np.asarray(s))) for s in sequences) if len(sequences) else 1
        make = lambda seed: init_model(num_states, n_symbols, seed)
    elif emission in ("gaussian", "mixture"):
        comps = 1 if emission == "gaussian" else n_components
        make = lambda seed: init_continuous_model(num_states, sequences, seed, comps)
    else:
        raise InputDomainError(f"unknown emission kind {emission!r}")
    return [(seed, baum_welch(make(seed), sequences, config)) for seed in seeds]
