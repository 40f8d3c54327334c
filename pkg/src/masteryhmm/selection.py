"""AIC/BIC scoring and (state count, seed) grid search."""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputDomainError
from .training import fit_restarts

__all__ = [
    "Candidate",
    "SelectionReport",
    "aic",
    "bic",
    "param_count",
    "count_observations",
    "select",
    "grid_search",
]

CRITERIA = ("aic", "bic")
REPORT_COLUMNS = ("num_states", "seed", "loglik", "k", "n_obs", "aic", "bic", "winner_flag")


def aic(loglik, k):
    """Akaike information criterion, ``-2 lnL + 2k``."""
    return -2.0 * loglik + 2.0 * k


def bic(loglik, k, n_obs):
    """Bayesian information criterion, ``-2 lnL + k ln(n_obs)``."""
    return -2.0 * loglik + k * math.log(n_obs)


def param_count(model):
    """Number of free parameters (each stochastic row loses one degree of freedom).

    For discrete emissions this is ``N(N-1) + N(M-1) + (N-1)``.
    """
    n = model.num_states
    return n * (n - 1) + (n - 1) + model.emissions.n_free_params()


def count_observations(sequences):
    """Total number of observation frames over all sequences."""
    return int(sum(len(s) for s in sequences))


@dataclass(frozen=True)
class Candidate:
    num_states: int
    seed: int
    loglik: float
    param_count: int
    n_obs: int

    def __post_init__(self):
        if self.param_count < 1:
            raise InputDomainError("a candidate needs at least one free parameter")
        if self.n_obs < 1:
            raise InputDomainError("a candidate needs at least one observation")

    @property
    def aic(self):
        return aic(self.loglik, self.param_count)

    @property
    def bic(self):
        return bic(self.loglik, self.param_count, self.n_obs)

    def score(self, criterion):
        return self.aic if criterion == "aic" else self.bic


@dataclass(frozen=True, eq=False)
class SelectionReport:
    """Scored candidates in input order plus the index of the winner.

    ``results`` holds the trained models behind each row when the report
    came from :func:`grid_search`.
    """

    criterion: str
    rows: tuple
    winner: int
    results: tuple = field(default=None, repr=False)

    @property
    def best(self):
        return self.rows[self.winner][0]

    @property
    def best_result(self):
        return None if self.results is None else self.results[self.winner]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for i, (cand, _) in enumerate(self.rows):
            writer.writerow([
                cand.num_states, cand.seed, repr(float(cand.loglik)), cand.param_count,
                cand.n_obs, repr(cand.aic), repr(cand.bic), int(i == self.winner),
            ])
        return buf.getvalue()


def _check_criterion(criterion):
    criterion = str(criterion).lower()
    if criterion not in CRITERIA:
        raise InputDomainError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    return criterion


def select(candidates, criterion="bic"):
    """Pick the candidate with the smallest criterion score.

    Ties go to fewer states, then to the smaller seed.
    """
    criterion = _check_criterion(criterion)
    candidates = list(candidates)
    if not candidates:
        raise InputDomainError("cannot select from an empty candidate list")
    rows = tuple((c, c.score(criterion)) for c in candidates)
    winner = min(range(len(rows)), key=lambda i: (rows[i][1], rows[i][0].num_states, rows[i][0].seed))
    return SelectionReport(criterion, rows, winner)


def grid_search(sequences, state_counts, seeds, criterion="bic", config=None, **fit_kwargs):
    """Train every ``(num_states, seed)`` cell and select by ``criterion``.

    Extra keyword arguments (``n_symbols``, ``emission``, ``n_components``)
    go to :func:`masteryhmm.training.fit_restarts`.
    """
    criterion = _check_criterion(criterion)
    state_counts = list(state_counts)
    seeds = list(seeds)
    if not state_counts or not seeds:
        raise InputDomainError("state_counts and seeds must be non-empty")
    if len(sequences) == 0:
        raise InputDomainError("at least one observation sequence is required")
    if fit_kwargs.get("emission", "discrete") == "discrete" and fit_kwargs.get("n_symbols") is None:
        fit_kwargs["n_symbols"] = max(int(np.max(np.asarray(s))) for s in sequences)
    n_obs = count_observations(sequences)
    candidates, results = [], []
    for n in state_counts:
        for seed, result in fit_restarts(sequences, n, seeds, config, **fit_kwargs):
            candidates.append(Candidate(n, seed, result.loglik, param_count(result.model), n_obs))
            results.append(result)
    report = select(candidates, criterion)
    return SelectionReport(report.criterion, report.rows, report.winner, tuple(results))
