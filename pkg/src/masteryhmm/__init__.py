"""Hidden Markov models of student mastery from per-level game telemetry.

Submodules
----------
hmm_core        model container, forward/backward, Viterbi, sampling
training        Baum-Welch with seeded restarts
selection       AIC/BIC scoring and grid search
discretization  attempts/moves binning and 1-D k-means
prediction      trajectory aggregation and class labels
evaluation      confusion matrix, precision/recall/F1, AUC
pipeline_io     CSV/JSON formats and synthetic cohorts
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .hmm_core import (  # noqa: F401
    DiscreteEmission,
    GaussianEmission,
    HmmModel,
    MixtureEmission,
    StateTrajectory,
    backward,
    forward,
    sample,
    state_posteriors,
    viterbi,
)
from .training import TrainingConfig, baum_welch, fit_restarts, init_model  # noqa: F401
from .selection import aic, bic, grid_search, param_count, select  # noqa: F401
from .discretization import BinningRule, apply_rule, bin_attempts, bin_moves, kmeans_1d  # noqa: F401
from .prediction import (  # noqa: F401
    PredictorSpec,
    predict,
    predict_average,
    predict_exp_smooth,
    predict_mode,
    predict_naive,
    predict_window,
    score_to_label,
    smoothing_weights,
)
from .evaluation import auc, confusion, evaluate, metrics  # noqa: F401
