"""Hidden Markov model container and exact inference.

States and discrete symbols are 1-based at every public boundary (trajectories,
observation sequences, JSON) and 0-based inside the numerical kernels.

Forward/backward use per-step scaling coefficients; Viterbi runs in log space.
"""

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import (
    DegenerateObservationError,
    InputDomainError,
    InvalidModelError,
    ModelFormatError,
)

__all__ = [
    "DiscreteEmission",
    "GaussianEmission",
    "MixtureEmission",
    "HmmModel",
    "StateTrajectory",
    "ForwardResult",
    "forward",
    "backward",
    "state_posteriors",
    "viterbi",
    "sample",
    "permute_states",
    "model_to_dict",
    "model_from_dict",
]

FORMAT_VERSION = 1
STOCHASTIC_ATOL = 1e-9
EMISSION_FLOOR = 1e-12
MIN_EIGENVALUE = 1e-8


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_stochastic(name, arr):
    if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise InvalidModelError(f"{name}: entries must lie in [0, 1]")
    sums = arr.sum(axis=-1)
    bad = np.abs(sums - 1.0) > STOCHASTIC_ATOL
    if np.any(bad):
        raise InvalidModelError(
            f"{name}: rows must sum to 1 within {STOCHASTIC_ATOL:g}, "
            f"got {np.atleast_1d(sums)[np.atleast_1d(bad)].tolist()}"
        )


def _check_covariances(name, covars):
    if not np.allclose(covars, np.swapaxes(covars, -1, -2), rtol=0, atol=1e-12):
        raise InvalidModelError(f"{name}: covariance matrices must be symmetric")
    eig = np.linalg.eigvalsh(covars)
    if np.any(eig < MIN_EIGENVALUE):
        raise InvalidModelError(
            f"{name}: smallest covariance eigenvalue {eig.min():.3g} "
            f"is below {MIN_EIGENVALUE:g}"
        )


def _gaussian_logpdf(x, mean, cov):
    """Log density of ``N(mean, cov)`` for ``x`` of shape (..., D)."""
    lead = x.shape[:-1]
    d = mean.shape[0]
    chol = np.linalg.cholesky(cov)
    diff = (x.reshape(-1, d) - mean).T
    z = solve_triangular(chol, diff, lower=True)
    with np.errstate(over="ignore"):
        maha = np.sum(z * z, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return (-0.5 * (d * np.log(2 * np.pi) + logdet + maha)).reshape(lead)


def _draw_categorical(cum, rows, u):
    # Inverse-CDF draw per row; equal to searchsorted(cum[row], u, "right").
    return np.minimum((cum[rows] <= u[:, None]).sum(axis=1), cum.shape[1] - 1)


def _split_offset(loglik):
    # Shift log-likelihoods per frame so the largest state value maps to 1.
    with np.errstate(invalid="ignore"):
        offset = np.max(loglik, axis=-1)
    offset = np.where(np.isfinite(offset), offset, 0.0)
    return np.exp(loglik - offset[..., None]), offset


@dataclass(frozen=True, eq=False)
class DiscreteEmission:
    """Per-state categorical emission table ``probs[i, k] = P(o = k+1 | s = i+1)``."""

    probs: np.ndarray

    kind = "discrete"

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise InvalidModelError("discrete emission table must be a non-empty 2-D array")
        _check_stochastic("emission matrix", probs)
        object.__setattr__(self, "probs", probs)

    @property
    def num_states(self):
        return self.probs.shape[0]

    @property
    def n_symbols(self):
        return self.probs.shape[1]

    def prepare(self, obs):
        """Validate 1-based symbols and return them as a 0-based int array."""
        arr = np.asarray(obs)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise InputDomainError("observation sequence must be a non-empty 1-D sequence")
        if arr.dtype.kind == "f":
            if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
                raise InputDomainError("discrete observations must be integers")
        elif arr.dtype.kind not in "iu":
            raise InputDomainError("discrete observations must be integers")
        arr = arr.astype(np.int64)
        bad = (arr < 1) | (arr > self.n_symbols)
        if np.any(bad):
            t = int(np.argmax(bad))
            raise InputDomainError(
                f"symbol {arr[t]} at position {t + 1} is outside the alphabet 1..{self.n_symbols}"
            )
        return arr - 1

    def frame_likelihood(self, x):
        lik = np.maximum(self.probs, EMISSION_FLOOR).T[x]
        return lik, np.zeros(x.shape)

    def frame_loglik(self, x):
        return np.log(np.maximum(self.probs, EMISSION_FLOOR)).T[x]

    def sample_frames(self, states, rng):
        u = rng.random(states.shape[0])
        return _draw_categorical(np.cumsum(self.probs, axis=1), states, u) + 1

    def expected_value(self):
        return self.probs @ np.arange(1, self.n_symbols + 1)

    def permuted(self, order):
        return DiscreteEmission(self.probs[order])

    def n_free_params(self):
        return self.num_states * (self.n_symbols - 1)

    def to_dict(self):
        return {"kind": self.kind, "B": self.probs.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["B"])


class _ContinuousMixin:
    """Shared handling of real-valued observation frames."""

    def prepare(self, obs):
        arr = np.asarray(obs, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise InputDomainError("continuous observations must have shape (T,) or (T, D), T >= 1")
        if arr.shape[1] != self.n_features:
            raise InputDomainError(
                f"observation dimension {arr.shape[1]} does not match model dimension {self.n_features}"
            )
        if not np.all(np.isfinite(arr)):
            raise InputDomainError("continuous observations must be finite")
        return arr

    def frame_likelihood(self, x):
        return _split_offset(self.frame_loglik(x))


@dataclass(frozen=True, eq=False)
class GaussianEmission(_ContinuousMixin):
    """Single full-covariance Gaussian per state."""

    means: np.ndarray
    covars: np.ndarray

    kind = "gaussian"

    def __post_init__(self):
        means = _frozen(self.means)
        covars = _frozen(self.covars)
        if means.ndim != 2 or covars.shape != means.shape + (means.shape[1],):
            raise InvalidModelError("gaussian emission needs means (N, D) and covars (N, D, D)")
        _check_covariances("gaussian emission", covars)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covars", covars)

    @property
    def num_states(self):
        return self.means.shape[0]

    @property
    def n_features(self):
        return self.means.shape[1]

    def frame_loglik(self, x):
        return np.stack(
            [_gaussian_logpdf(x, self.means[i], self.covars[i]) for i in range(self.num_states)],
            axis=-1,
        )

    def sample_frames(self, states, rng):
        z = rng.standard_normal((states.shape[0], self.n_features))
        chol = np.linalg.cholesky(self.covars)
        return self.means[states] + np.einsum("tij,tj->ti", chol[states], z)

    def expected_value(self):
        return self.means[:, 0].copy()

    def permuted(self, order):
        return GaussianEmission(self.means[order], self.covars[order])

    def n_free_params(self):
        d = self.n_features
        return self.num_states * (d + d * (d + 1) // 2)

    def to_dict(self):
        return {"kind": self.kind, "means": self.means.tolist(), "covars": self.covars.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["means"], doc["covars"])


@dataclass(frozen=True, eq=False)
class MixtureEmission(_ContinuousMixin):
    """Gaussian mixture per state: weights (N, M), means (N, M, D), covars (N, M, D, D)."""

    weights: np.ndarray
    means: np.ndarray
    covars: np.ndarray

    kind = "mixture"

    def __post_init__(self):
        weights = _frozen(self.weights)
        means = _frozen(self.means)
        covars = _frozen(self.covars)
        if (
            weights.ndim != 2
            or means.ndim != 3
            or means.shape[:2] != weights.shape
            or covars.shape != means.shape + (means.shape[2],)
        ):
            raise InvalidModelError(
                "mixture emission needs weights (N, M), means (N, M, D), covars (N, M, D, D)"
            )
        _check_stochastic("mixture weights", weights)
        _check_covariances("mixture emission", covars)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covars", covars)

    @property
    def num_states(self):
        return self.weights.shape[0]

    @property
    def n_components(self):
        return self.weights.shape[1]

    @property
    def n_features(self):
        return self.means.shape[2]

    def component_loglik(self, x):
        """Log of ``c_im N(x; mu_im, Sigma_im)``, shape (..., N, M)."""
        n, m = self.weights.shape
        out = np.empty(x.shape[:-1] + (n, m))
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        for i in range(n):
            for k in range(m):
                out[..., i, k] = logw[i, k] + _gaussian_logpdf(x, self.means[i, k], self.covars[i, k])
        return out

    def frame_loglik(self, x):
        return logsumexp(self.component_loglik(x), axis=-1)

    def sample_frames(self, states, rng):
        u = rng.random(states.shape[0])
        comp = _draw_categorical(np.cumsum(self.weights, axis=1), states, u)
        z = rng.standard_normal((states.shape[0], self.n_features))
        chol = np.linalg.cholesky(self.covars)
        return self.means[states, comp] + np.einsum("tij,tj->ti", chol[states, comp], z)

    def expected_value(self):
        return np.sum(self.weights * self.means[:, :, 0], axis=1)

    def permuted(self, order):
        return MixtureEmission(self.weights[order], self.means[order], self.covars[order])

    def n_free_params(self):
        n, m = self.weights.shape
        d = self.n_features
        return n * (m - 1) + n * m * (d + d * (d + 1) // 2)

    def to_dict(self):
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covars": self.covars.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["weights"], doc["means"], doc["covars"])


Emission = Union[DiscreteEmission, GaussianEmission, MixtureEmission]
_EMISSION_KINDS = {cls.kind: cls for cls in (DiscreteEmission, GaussianEmission, MixtureEmission)}


@dataclass(frozen=True, eq=False)
class HmmModel:
    """Immutable ``(initial, transitions, emissions)`` triple.

    Parameters
    ----------
    initial : array, shape (N,)
        Initial state distribution.
    transitions : array, shape (N, N)
        Row-stochastic matrix, ``transitions[i, j] = P(s_{t+1} = j | s_t = i)``.
    emissions : DiscreteEmission, GaussianEmission or MixtureEmission
        Per-state observation law; its state count must equal N.
    """

    initial: np.ndarray
    transitions: np.ndarray
    emissions: Emission

    def __post_init__(self):
        initial = _frozen(self.initial)
        transitions = _frozen(self.transitions)
        if initial.ndim != 1 or initial.shape[0] < 1:
            raise InvalidModelError("initial distribution must be a non-empty vector")
        n = initial.shape[0]
        if transitions.shape != (n, n):
            raise InvalidModelError(f"transition matrix must have shape ({n}, {n})")
        _check_stochastic("initial distribution", initial)
        _check_stochastic("transition matrix", transitions)
        if self.emissions.num_states != n:
            raise InvalidModelError(
                f"emission model has {self.emissions.num_states} states, expected {n}"
            )
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transitions", transitions)

    @property
    def num_states(self):
        return self.initial.shape[0]

    @property
    def is_discrete(self):
        return self.emissions.kind == "discrete"


class StateTrajectory(NamedTuple):
    """Most probable state path (1-based states) and its joint log-probability."""

    states: tuple
    log_prob: float

    def __len__(self):
        return len(self.states)


class ForwardResult(NamedTuple):
    alpha: np.ndarray
    scale: np.ndarray
    loglik: float


def _forward_pass(initial, transitions, lik, seq_ids=None):
    """Scaled forward recursion over a batch of equal-length sequences.

    ``lik`` has shape (S, T, N). Returns normalized alphas (S, T, N) and the
    scaling coefficients (S, T); ``sum(log(scale))`` is the log-likelihood.
    """
    n_seq, n_steps, _ = lik.shape
    alpha = np.empty_like(lik)
    scale = np.empty((n_seq, n_steps))
    a = initial * lik[:, 0]
    for t in range(n_steps):
        if t:
            a = (alpha[:, t - 1] @ transitions) * lik[:, t]
        c = a.sum(axis=1)
        dead = ~(c > 0)
        if np.any(dead):
            s = int(np.argmax(dead))
            raise DegenerateObservationError(
                t + 1, None if seq_ids is None else seq_ids[s]
            )
        scale[:, t] = c
        alpha[:, t] = a / c[:, None]
    return alpha, scale


def _backward_pass(transitions, lik, scale):
    beta = np.empty_like(lik)
    beta[:, -1] = 1.0
    for t in range(lik.shape[1] - 2, -1, -1):
        beta[:, t] = ((lik[:, t + 1] * beta[:, t + 1]) @ transitions.T) / scale[:, t + 1, None]
    return beta


def _single(model, obs):
    x = model.emissions.prepare(obs)
    lik, offset = model.emissions.frame_likelihood(x[None])
    alpha, scale = _forward_pass(model.initial, model.transitions, lik)
    return lik, offset, alpha, scale


def forward(model, obs):
    """Scaled forward algorithm.

    Returns
    -------
    ForwardResult
        ``alpha`` (T, N) with rows summing to 1, ``scale`` (T,) with
        ``alpha_raw[t] = alpha[t] * prod(scale[:t+1])``, and ``loglik``
        equal to ``log P(O | model)``.
    """
    _, offset, alpha, scale = _single(model, obs)
    log_scale = np.log(scale[0]) + offset[0]
    return ForwardResult(alpha[0], np.exp(log_scale), float(np.sum(log_scale)))


def backward(model, obs):
    """Scaled backward variables, shape (T, N).

    Scaled by the forward coefficients so that ``alpha * beta`` is the state
    posterior directly; the last row is all ones.
    """
    lik, _, _, scale = _single(model, obs)
    return _backward_pass(model.transitions, lik, scale)[0]


def state_posteriors(model, obs):
    """``gamma[t, i] = P(s_t = i+1 | O, model)``, shape (T, N)."""
    lik, _, alpha, scale = _single(model, obs)
    beta = _backward_pass(model.transitions, lik, scale)
    gamma = alpha[0] * beta[0]
    return gamma / gamma.sum(axis=1, keepdims=True)


def viterbi(model, obs):
    """Most probable state path.

    Ties between predecessors (and between final states) go to the lower
    state index.
    """
    x = model.emissions.prepare(obs)
    logb = model.emissions.frame_loglik(x)
    with np.errstate(divide="ignore"):
        log_pi = np.log(model.initial)
        log_a = np.log(model.transitions)
    n_steps, n_states = logb.shape
    backptr = np.zeros((n_steps, n_states), dtype=np.int64)
    delta = log_pi + logb[0]
    for t in range(n_steps):
        if t:
            scores = delta[:, None] + log_a
            backptr[t] = np.argmax(scores, axis=0)
            delta = scores[backptr[t], np.arange(n_states)] + logb[t]
        if not np.any(np.isfinite(delta)):
            raise DegenerateObservationError(t + 1)
    best = int(np.argmax(delta))
    log_prob = float(delta[best])
    path = np.empty(n_steps, dtype=np.int64)
    path[-1] = best
    for t in range(n_steps - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return StateTrajectory(tuple(int(s) + 1 for s in path), log_prob)


def sample(model, length, seed):
    """Draw a state path and observation sequence of ``length`` steps.

    Returns ``(states, observations)`` with 1-based states; discrete
    observations are 1-based symbols, continuous ones have shape (T, D).
    """
    if not isinstance(length, (int, np.integer)) or length < 1:
        raise InputDomainError(f"sequence length must be a positive integer, got {length!r}")
    rng = np.random.default_rng(seed)
    cum_pi = np.cumsum(model.initial)
    cum_a = np.cumsum(model.transitions, axis=1)
    u = rng.random(length)
    n = model.num_states
    states = np.empty(length, dtype=np.int64)
    s = min(int(np.searchsorted(cum_pi, u[0], side="right")), n - 1)
    states[0] = s
    for t in range(1, length):
        s = min(int(np.searchsorted(cum_a[s], u[t], side="right")), n - 1)
        states[t] = s
    obs = model.emissions.sample_frames(states, rng)
    return states + 1, obs


def permute_states(model, order):
    """Relabel states so that new state ``j`` is old state ``order[j]``."""
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(model.num_states)):
        raise InputDomainError(f"{order.tolist()} is not a permutation of 0..{model.num_states - 1}")
    return HmmModel(
        model.initial[order],
        model.transitions[np.ix_(order, order)],
        model.emissions.permuted(order),
    )


def model_to_dict(model):
    """Versioned JSON-ready document for ``model``."""
    return {
        "version": FORMAT_VERSION,
        "num_states": model.num_states,
        "emission": model.emissions.to_dict(),
        "pi": model.initial.tolist(),
        "A": model.transitions.tolist(),
    }


def model_from_dict(doc):
    """Inverse of :func:`model_to_dict`; raises ModelFormatError on bad input."""
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('version')!r}")
    try:
        emission_doc = doc["emission"]
        cls = _EMISSION_KINDS.get(emission_doc.get("kind"))
        if cls is None:
            raise ModelFormatError(f"unknown emission kind {emission_doc.get('kind')!r}")
        model = HmmModel(doc["pi"], doc["A"], cls.from_dict(emission_doc))
    except KeyError as exc:
        raise ModelFormatError(f"missing field {exc}") from None
    except InvalidModelError as exc:
        raise ModelFormatError(f"invalid model: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None
    if doc.get("num_states") != model.num_states:
        raise ModelFormatError(
            f"num_states {doc.get('num_states')!r} does not match {model.num_states} states"
        )
    return model
