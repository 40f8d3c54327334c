"""Whole pipeline on a synthetic cohort, through the command-line interface.

simulate -> discretize -> train -> predict -> evaluate, in a temporary
directory. Run with ``python3 demos/04_synthetic_cohort_pipeline.py``.
"""

import json
import tempfile
from pathlib import Path

from masteryhmm import DiscreteEmission, HmmModel
from masteryhmm.cli import main
from masteryhmm.pipeline_io import save_model

# Class 1 students need many attempts; class 2 students mostly need one or two.
class1 = HmmModel([0.8, 0.2], [[0.9, 0.1], [0.2, 0.8]],
                  DiscreteEmission([[0.05, 0.15, 0.35, 0.45], [0.2, 0.4, 0.3, 0.1]]))
class2 = HmmModel([0.3, 0.7], [[0.8, 0.2], [0.1, 0.9]],
                  DiscreteEmission([[0.3, 0.4, 0.2, 0.1], [0.6, 0.3, 0.08, 0.02]]))

with tempfile.TemporaryDirectory() as tmp:
    d = Path(tmp)
    save_model(class1, d / "c1.json")
    save_model(class2, d / "c2.json")

    steps = [
        ["simulate", "--class1-model", d / "c1.json", "--class2-model", d / "c2.json",
         "--n", "100", "--lengths", "20,50", "--seed", "7", "--out", d / "events.csv"],
        ["discretize", "--events", d / "events.csv", "--rule", "attempts", "--out", d / "seq.csv"],
        ["train", "--sequences", d / "seq.csv", "--states", "2,3", "--seeds", "1,26,35",
         "--out-model", d / "model.json", "--out-report", d / "report.csv"],
        ["predict", "--model", d / "model.json", "--sequences", d / "seq.csv",
         "--method", "average", "--out", d / "pred.csv"],
        ["evaluate", "--predictions", d / "pred.csv", "--truth", d / "events.csv",
         "--threshold", "4", "--out", d / "metrics.txt"],
    ]
    for argv in steps:
        print("$ masteryhmm", " ".join(str(a).replace(tmp, "$TMP") for a in argv))
        assert main([str(a) for a in argv]) == 0

    print((d / "report.csv").read_text())
    print((d / "metrics.txt").read_text())
    print("manifest of the train step:")
    print(json.dumps(json.loads((d / "model.json.manifest.json").read_text())["input_digests"], indent=2))
