"""Forward, backward and Viterbi on a small two-state model.

Run with ``python3 demos/01_inference_basics.py``.
"""

import numpy as np

from masteryhmm import DiscreteEmission, HmmModel, forward, sample, state_posteriors, viterbi

# State 1 struggles (many attempts, high symbols), state 2 has mastered the level.
model = HmmModel(
    initial=[0.6, 0.4],
    transitions=[[0.8, 0.2], [0.1, 0.9]],
    emissions=DiscreteEmission([[0.05, 0.15, 0.35, 0.45],
                                [0.6, 0.3, 0.08, 0.02]]),
)

obs = [4, 3, 4, 2, 1, 1, 2, 1]
print("observations       ", obs)

# Sequence likelihood; the recursion is scaled so long sequences stay finite.
fwd = forward(model, obs)
print("log P(obs)         ", round(fwd.loglik, 4))

# Per-step state posteriors, one row per level, rows sum to 1.
gamma = state_posteriors(model, obs)
print("P(state 2 | obs)   ", np.round(gamma[:, 1], 3))

# Single best path.
path = viterbi(model, obs)
print("Viterbi path       ", path.states, "log prob", round(path.log_prob, 4))

# Sampling is reproducible per seed.
states, symbols = sample(model, 10, seed=3)
print("sampled states     ", states)
print("sampled symbols    ", symbols)

# Long sequences: scaling keeps the log-likelihood finite.
_, long_obs = sample(model, 20_000, seed=4)
print("log P(20k symbols) ", round(forward(model, long_obs).loglik, 2))
