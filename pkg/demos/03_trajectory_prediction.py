"""Turn decoded mastery trajectories into scores and class labels.

Run with ``python3 demos/03_trajectory_prediction.py``.
"""

from masteryhmm import (
    predict_average,
    predict_exp_smooth,
    predict_mode,
    predict_naive,
    predict_window,
    score_to_label,
    smoothing_weights,
)

# A three-state trajectory: low mastery early, a middle stretch at level 3, then a relapse.
traj = [1] * 16 + [2] + [3] * 16 + [2] + [1] * 8

for name, score in [
    ("naive", predict_naive(traj)),
    ("average", predict_average(traj)),
    ("window p=5", predict_window(traj, 5)),
    ("exp alpha=0.1", predict_exp_smooth(traj, 0.1)),
    ("mode", predict_mode(traj)),
]:
    # With three states the label threshold sits at (1 + 3) / 2 = 2.
    print(f"{name:<14} score {score:.3f}  label {score_to_label(score, 3)}")

# How quickly exponential smoothing forgets older levels.
for alpha in (0.05, 0.5, 0.9):
    print(alpha, [round(w, 4) for w in smoothing_weights(alpha, 5)])

# Ties in the mode go to the lower (less mastered) state.
print("mode of [1, 2]:", predict_mode([1, 2]))
