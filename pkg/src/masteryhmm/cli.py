"""Command-line pipeline: discretize, train, predict, evaluate, simulate.

Every subcommand writes its outputs atomically and leaves a
``<output>.manifest.json`` next to its primary output recording the flags,
input digests and seeds. Reruns with an identical manifest produce
byte-identical files.
"""

import argparse
import hashlib
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .discretization import BinningRule, apply_rule, kmeans_1d
from .errors import ConfigurationError, MasteryHMMError
from .evaluation import evaluate
from .hmm_core import viterbi
from .pipeline_io import (
    EVENTS_HEADER,
    TRUTH_HEADER,
    atomic_write_text,
    export,
    generate_cohort,
    ingest,
    load_model,
    read_expert_baselines,
    read_predictions,
    read_sequences,
    read_truth,
    save_model,
    split_classes,
    to_text,
    write_history,
    write_predictions,
    write_sequences,
)
from .prediction import PredictorSpec, predict
from .selection import grid_search
from .training import TrainingConfig

_log = logging.getLogger("masteryhmm")

METHOD_ALIASES = {"naive": "naive", "average": "average", "window": "window",
                  "exp": "exp_smooth", "mode": "mode"}


class UsageError(MasteryHMMError):
    """Flag combination the parser alone cannot reject."""


@dataclass
class RunManifest:
    subcommand: str
    flags: dict
    input_digests: dict
    seeds: list = field(default_factory=list)
    artifact_version: str = __version__

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _int_list(text):
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _read(path):
    return Path(path).read_text(encoding="utf-8")


def _write_manifest(args, primary_out, inputs, seeds=()):
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    digests = {name: _digest(path) for name, path in inputs.items() if path is not None}
    manifest = RunManifest(args.command, flags, digests, list(seeds))
    atomic_write_text(f"{primary_out}.manifest.json", manifest.to_json())


def _rule_from_args(args, records):
    if args.rule == "attempts":
        return BinningRule("attempts_fixed"), "attempts"
    if args.rule == "moves":
        if args.expert_baselines is None:
            raise ConfigurationError("rule 'moves' requires --expert-baselines")
        experts = read_expert_baselines(io.StringIO(_read(args.expert_baselines)))
        return BinningRule("moves_expert", expert_moves=experts, alpha_c=args.alpha_c), "moves"
    if args.rule.startswith("kmeans:"):
        try:
            k = int(args.rule.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad rule {args.rule!r}; expected kmeans:<k>") from None
        values = [v for r in records for v in getattr(r, args.feature)()]
        if not values:
            return BinningRule("kmeans_edges", cut_points=()), args.feature
        fit = kmeans_1d(values, k, seed=args.kmeans_seed)
        return BinningRule("kmeans_edges", cut_points=tuple(fit.cut_points)), args.feature
    raise UsageError(f"unknown rule {args.rule!r}; expected attempts, moves or kmeans:<k>")


def cmd_discretize(args):
    records = ingest(io.StringIO(_read(args.events)))
    rule, feature = _rule_from_args(args, records)
    if rule.kind == "moves_expert":
        missing = sorted({lv.level_index for r in records for lv in r.levels} - set(rule.expert_moves))
        if missing:
            raise ConfigurationError(f"no expert baseline for level(s) {missing}")
    items = []
    for r in records:
        values = getattr(r, feature)()
        items.append((r.student_id, [apply_rule(rule, v, lv.level_index)
                                     for v, lv in zip(values, r.levels)]))
    atomic_write_text(args.out, to_text(write_sequences, items))
    if args.rule_out:
        atomic_write_text(args.rule_out, json.dumps(rule.to_dict(), indent=2) + "\n")
    _write_manifest(args, args.out, {"events": args.events, "expert_baselines": args.expert_baselines})
    _log.info("discretized %d students with rule %s", len(items), rule.kind)


def cmd_train(args):
    items = read_sequences(io.StringIO(_read(args.sequences)))
    if not items:
        raise ConfigurationError(f"{args.sequences} contains no sequences")
    sequences = [seq for _, seq in items]
    config = TrainingConfig(max_iterations=args.max_iterations, rel_tolerance=args.tolerance)
    report = grid_search(sequences, args.states, args.seeds, args.criterion, config,
                         n_symbols=args.n_symbols)
    best = report.best_result
    save_model(best.model, args.out_model)
    atomic_write_text(args.out_report, report.to_csv())
    if args.out_history:
        atomic_write_text(args.out_history, to_text(write_history, best.loglik_history))
    _write_manifest(args, args.out_model, {"sequences": args.sequences}, args.seeds)
    winner = report.best
    _log.info("winner: %d states, seed %d, %s %.3f", winner.num_states, winner.seed,
              report.criterion.upper(), report.rows[report.winner][1])


def _predictor(args):
    method = METHOD_ALIASES[args.method]
    if method == "window" and args.window is None:
        raise UsageError("--method window requires --window")
    if method == "exp_smooth" and args.alpha is None:
        raise UsageError("--method exp requires --alpha")
    return PredictorSpec(method, window_p=args.window, alpha=args.alpha)


def cmd_predict(args):
    spec = _predictor(args)
    model = load_model(args.model)
    items = read_sequences(io.StringIO(_read(args.sequences)))
    rows, paths = [], []
    for sid, seq in items:
        traj = viterbi(model, seq)
        pred = predict(traj, spec, model.num_states)
        rows.append((sid, args.method, pred.score, pred.label))
        paths.append((sid, traj.states))
    atomic_write_text(args.out, to_text(write_predictions, rows))
    if args.out_trajectories:
        atomic_write_text(args.out_trajectories, to_text(write_sequences, paths))
    _write_manifest(args, args.out, {"model": args.model, "sequences": args.sequences})


def _load_truth(args):
    text = _read(args.truth)
    header = tuple(h.strip() for h in text.splitlines()[0].split(",")) if text.strip() else ()
    if header == EVENTS_HEADER:
        if args.threshold is None:
            raise UsageError("--truth is an events file; --threshold is required to derive classes")
        cohort = split_classes(ingest(io.StringIO(text)), args.threshold)
        return {r.student_id: r.class_label for r in cohort.records}
    if header != TRUTH_HEADER and header:
        raise ConfigurationError(
            f"{args.truth}: expected header {','.join(TRUTH_HEADER)} or an events file"
        )
    return read_truth(io.StringIO(text))


def cmd_evaluate(args):
    predictions = read_predictions(io.StringIO(_read(args.predictions)))
    truth = _load_truth(args)
    unmatched = sorted(set(predictions) ^ set(truth))
    if unmatched:
        print(f"unmatched student ids ({len(unmatched)}): {', '.join(unmatched)}", file=sys.stderr)
        if not args.allow_partial:
            raise ConfigurationError("predictions and truth do not cover the same students")
    ids = [sid for sid in predictions if sid in truth]
    if not ids:
        raise ConfigurationError("no student appears in both predictions and truth")
    report = evaluate([truth[s] for s in ids], [predictions[s][1] for s in ids],
                      [predictions[s][0] for s in ids])
    out_json = args.out_json or str(Path(args.out).with_suffix(".json"))
    if Path(out_json) == Path(args.out):
        raise UsageError("--out and --out-json must differ")
    atomic_write_text(args.out, report.to_text())
    atomic_write_text(out_json, report.to_json())
    _write_manifest(args, args.out, {"predictions": args.predictions, "truth": args.truth})


def cmd_simulate(args):
    class1 = load_model(args.class1_model)
    class2 = load_model(args.class2_model)
    if len(args.lengths) != 2:
        raise UsageError("--lengths takes two integers: min,max")
    experts = args.expert_moves
    if args.expert_baselines:
        experts = read_expert_baselines(io.StringIO(_read(args.expert_baselines)))
    cohort = generate_cohort(class1, class2, args.n, tuple(args.lengths), args.seed,
                             expert_moves=experts, threshold=args.threshold)
    atomic_write_text(args.out, to_text(export, cohort.records))
    _write_manifest(args, args.out, {"class1_model": args.class1_model,
                                     "class2_model": args.class2_model,
                                     "expert_baselines": args.expert_baselines}, [args.seed])


def build_parser():
    parser = argparse.ArgumentParser(
        prog="masteryhmm",
        description="Hidden Markov models of student mastery from per-level game telemetry.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="bin per-level telemetry into symbol sequences")
    p.add_argument("--events", required=True)
    p.add_argument("--rule", required=True, help="attempts, moves or kmeans:<k>")
    p.add_argument("--expert-baselines", help="level_index,expert_moves CSV (rule=moves)")
    p.add_argument("--alpha-c", type=float, default=1.5, help="compensation factor (rule=moves)")
    p.add_argument("--feature", choices=("attempts", "moves"), default="attempts",
                   help="telemetry column clustered by rule=kmeans:<k>")
    p.add_argument("--kmeans-seed", type=int, default=0)
    p.add_argument("--rule-out", help="also write the fitted rule as JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("train", help="fit a (states x seeds) grid and keep the best model")
    p.add_argument("--sequences", required=True)
    p.add_argument("--states", type=_int_list, required=True)
    p.add_argument("--seeds", type=_int_list, required=True)
    p.add_argument("--criterion", choices=("bic", "aic"), default="bic")
    p.add_argument("--n-symbols", type=int, help="alphabet size (default: largest symbol seen)")
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-history", help="iteration,total_loglik CSV for the winner")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode sequences and predict class labels")
    p.add_argument("--model", required=True)
    p.add_argument("--sequences", required=True)
    p.add_argument("--method", choices=tuple(METHOD_ALIASES), required=True)
    p.add_argument("--alpha", type=float, help="smoothing constant (method=exp)")
    p.add_argument("--window", type=int, help="window length (method=window)")
    p.add_argument("--out", required=True)
    p.add_argument("--out-trajectories", help="also write decoded state paths")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="compare predictions with true class labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth", required=True, help="student_id,class_label CSV or an events CSV")
    p.add_argument("--threshold", type=float, help="posttest split when --truth is an events CSV")
    p.add_argument("--allow-partial", action="store_true")
    p.add_argument("--out", required=True, help="text table")
    p.add_argument("--out-json", help="JSON metrics (default: --out with a .json suffix)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="generate a synthetic two-class events CSV")
    p.add_argument("--class1-model", required=True)
    p.add_argument("--class2-model", required=True)
    p.add_argument("--n", type=int, required=True, help="students per class")
    p.add_argument("--lengths", type=_int_list, required=True, help="min,max levels per student")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threshold", type=float, default=4.0, help="posttest split of the synthetic scores")
    p.add_argument("--expert-moves", type=int, default=10, help="expert move count for every level")
    p.add_argument("--expert-baselines", help="per-level expert moves CSV (overrides --expert-moves)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ConfigurationError, MasteryHMMError, OSError) as exc:
        print(f"masteryhmm {args.command}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigurationError) else 1
    return 0
