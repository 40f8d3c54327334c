"""Event-log ingestion, class splitting, persistence and synthetic cohorts.

File formats (UTF-8, one header row, ``\\n`` line endings):

* events: ``student_id,level_index,attempts,moves,posttest_score``
* expert baselines: ``level_index,expert_moves``
* symbol sequences: ``student_id,sequence`` (space-separated 1-based symbols)
* predictions: ``student_id,method,score,label``
* truth labels: ``student_id,class_label``
* training telemetry: ``iteration,total_loglik``
"""

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .discretization import DEFAULT_COMPENSATION, moves_thresholds
from .errors import InputDomainError, ModelFormatError, ParseError
from .hmm_core import model_from_dict, model_to_dict, sample

__all__ = [
    "EVENTS_HEADER",
    "LevelRecord",
    "StudentRecord",
    "Cohort",
    "ingest",
    "export",
    "split_classes",
    "generate_cohort",
    "save_model",
    "load_model",
    "atomic_write_text",
    "read_expert_baselines",
    "read_sequences",
    "write_sequences",
    "read_predictions",
    "write_predictions",
    "read_truth",
    "write_history",
    "to_text",
]

EVENTS_HEADER = ("student_id", "level_index", "attempts", "moves", "posttest_score")
BASELINE_HEADER = ("level_index", "expert_moves")
SEQUENCE_HEADER = ("student_id", "sequence")
PREDICTION_HEADER = ("student_id", "method", "score", "label")
TRUTH_HEADER = ("student_id", "class_label")
HISTORY_HEADER = ("iteration", "total_loglik")

# Synthetic-only inverse of the attempts bins: a representative count per symbol.
ATTEMPTS_FOR_SYMBOL = {1: 1, 2: 3, 3: 6, 4: 9}


class LevelRecord(NamedTuple):
    level_index: int
    attempts: int
    moves: int


@dataclass(frozen=True)
class StudentRecord:
    student_id: str
    levels: tuple
    posttest: float
    class_label: Optional[int] = None

    def __post_init__(self):
        if not self.levels:
            raise InputDomainError(f"student {self.student_id}: at least one level is required")
        idx = [lv.level_index for lv in self.levels]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InputDomainError(f"student {self.student_id}: level indices must be strictly increasing")
        if any(lv.attempts < 1 or lv.moves < 1 for lv in self.levels):
            raise InputDomainError(f"student {self.student_id}: attempts and moves must be >= 1")
        if not (self.posttest >= 0 and math.isfinite(self.posttest)):
            raise InputDomainError(f"student {self.student_id}: posttest must be a finite value >= 0")
        if self.class_label not in (None, 1, 2):
            raise InputDomainError(f"student {self.student_id}: class label must be 1 or 2")

    def attempts(self):
        return [lv.attempts for lv in self.levels]

    def moves(self):
        return [lv.moves for lv in self.levels]


@dataclass(frozen=True)
class Cohort:
    records: tuple
    split_threshold: float

    def class_counts(self):
        counts = {1: 0, 2: 0}
        for r in self.records:
            counts[r.class_label] += 1
        return counts

    def labels(self):
        return [r.class_label for r in self.records]


def _reader(stream, header, what):
    reader = csv.reader(stream)
    try:
        first = next(reader)
    except StopIteration:
        raise ParseError(f"{what}: missing header row", line=1) from None
    if tuple(h.strip() for h in first) != header:
        missing = [h for h in header if h not in first]
        detail = f"missing column(s) {missing}" if missing else f"expected header {','.join(header)}"
        raise ParseError(f"{what}: {detail}", line=1)
    return reader


def _rows(reader, width):
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", line=reader.line_num)
        yield reader.line_num, [cell.strip() for cell in row]


def _parse_int(text, name, line):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{name} {text!r} is not an integer", line=line) from None


def _parse_float(text, name, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{name} {text!r} is not numeric", line=line) from None
    if not math.isfinite(value):
        raise ParseError(f"{name} {text!r} is not finite", line=line)
    return value


def ingest(stream):
    """Read an events CSV into one :class:`StudentRecord` per student.

    Students keep the order of their first row; levels are sorted by index.
    """
    text = stream.read()
    if not text.strip():
        return []
    reader = _reader(io.StringIO(text), EVENTS_HEADER, "events")
    levels, posttests = {}, {}
    for line, (sid, level, attempts, moves, post) in _rows(reader, len(EVENTS_HEADER)):
        if not sid:
            raise ParseError("empty student_id", line=line)
        level = _parse_int(level, "level_index", line)
        attempts = _parse_int(attempts, "attempts", line)
        moves = _parse_int(moves, "moves", line)
        post = _parse_float(post, "posttest_score", line)
        if attempts < 1 or moves < 1:
            raise ParseError("attempts and moves must be >= 1", line=line)
        if post < 0:
            raise ParseError("posttest_score must be >= 0", line=line)
        per_student = levels.setdefault(sid, {})
        if level in per_student:
            raise ParseError(f"duplicate level {level} for student {sid}", line=line)
        if sid in posttests and posttests[sid] != post:
            raise ParseError(f"student {sid} has conflicting posttest scores", line=line)
        posttests[sid] = post
        per_student[level] = LevelRecord(level, attempts, moves)
    return [
        StudentRecord(sid, tuple(levels[sid][k] for k in sorted(levels[sid])), posttests[sid])
        for sid in levels
    ]


def export(records, stream):
    """Write records as an events CSV; :func:`ingest` inverts this exactly."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(EVENTS_HEADER)
    for r in records:
        for lv in r.levels:
            writer.writerow([r.student_id, lv.level_index, lv.attempts, lv.moves, repr(float(r.posttest))])


def split_classes(records, threshold):
    """Label students: class 2 iff ``posttest >= threshold``.

    The threshold has no default; it must be chosen for the test at hand.
    """
    threshold = float(threshold)
    if not math.isfinite(threshold) or threshold < 0:
        raise InputDomainError(f"split threshold must be a finite value >= 0, got {threshold!r}")
    labelled = tuple(replace(r, class_label=2 if r.posttest >= threshold else 1) for r in records)
    return Cohort(labelled, threshold)


def _expert_for(expert_moves, level):
    if isinstance(expert_moves, dict):
        if level not in expert_moves:
            raise InputDomainError(f"no expert baseline for level {level}")
        return expert_moves[level]
    return expert_moves


def _moves_for_symbol(symbol, expert, alpha_c):
    bounds = moves_thresholds(expert, alpha_c)
    if symbol <= 3:
        return bounds[symbol - 1]
    return max(bounds[2] + 1, math.ceil(round(alpha_c**3 * expert, 9)))


def generate_cohort(class1_model, class2_model, n_per_class, length_range, seed,
                    expert_moves=10, alpha_c=DEFAULT_COMPENSATION, threshold=4.0, max_score=8.0):
    """Synthetic students drawn from one 4-symbol model per class.

    Each student gets a length drawn uniformly from ``length_range``
    (inclusive), a symbol sequence sampled from its class model, and
    telemetry that bins back to the same symbols: attempts 1/3/6/9, and
    moves at the compensated expert thresholds of the moves rule. Posttest
    scores fall on a half-point grid below ``threshold`` for class 1 and in
    ``[threshold, max_score]`` for class 2.
    """
    for name, model in (("class1_model", class1_model), ("class2_model", class2_model)):
        if not model.is_discrete or model.emissions.n_symbols != 4:
            raise InputDomainError(f"{name} must be a discrete model over 4 symbols")
    if isinstance(n_per_class, bool) or int(n_per_class) != n_per_class or n_per_class < 0:
        raise InputDomainError(f"n_per_class must be a non-negative integer, got {n_per_class!r}")
    lo, hi = (int(v) for v in length_range)
    if lo < 1 or hi < lo:
        raise InputDomainError(f"invalid length range {tuple(length_range)!r}")
    if not (0 < threshold <= max_score) or (2 * threshold) != int(2 * threshold):
        raise InputDomainError("threshold must be a positive multiple of 0.5 not above max_score")
    rng = np.random.default_rng(seed)
    records = []
    for label, model in ((1, class1_model), (2, class2_model)):
        for _ in range(int(n_per_class)):
            length = int(rng.integers(lo, hi + 1))
            seq_seed = int(rng.integers(0, 2**32))
            if label == 1:
                post = int(rng.integers(0, int(2 * threshold))) / 2
            else:
                post = int(rng.integers(int(2 * threshold), int(2 * max_score) + 1)) / 2
            _, symbols = sample(model, length, seq_seed)
            levels = tuple(
                LevelRecord(t, ATTEMPTS_FOR_SYMBOL[int(s)],
                            _moves_for_symbol(int(s), _expert_for(expert_moves, t), alpha_c))
                for t, s in enumerate(symbols, start=1)
            )
            records.append(StudentRecord(f"s{len(records) + 1:05d}", levels, post, label))
    return Cohort(tuple(records), float(threshold))


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temporary file and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model, path):
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(doc)


def read_expert_baselines(stream):
    """``{level_index: expert_moves}`` from a baselines CSV."""
    reader = _reader(stream, BASELINE_HEADER, "expert baselines")
    out = {}
    for line, (level, moves) in _rows(reader, 2):
        level = _parse_int(level, "level_index", line)
        moves = _parse_int(moves, "expert_moves", line)
        if moves < 1:
            raise ParseError("expert_moves must be >= 1", line=line)
        if level in out:
            raise ParseError(f"duplicate level {level}", line=line)
        out[level] = moves
    return out


def read_sequences(stream):
    """``[(student_id, symbols), ...]`` from a sequences CSV."""
    reader = _reader(stream, SEQUENCE_HEADER, "sequences")
    out, seen = [], set()
    for line, (sid, text) in _rows(reader, 2):
        if sid in seen:
            raise ParseError(f"duplicate student {sid}", line=line)
        seen.add(sid)
        symbols = [_parse_int(tok, "symbol", line) for tok in text.split()]
        if not symbols:
            raise ParseError(f"student {sid} has an empty sequence", line=line)
        out.append((sid, np.array(symbols, dtype=np.int64)))
    return out


def write_sequences(items, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SEQUENCE_HEADER)
    for sid, symbols in items:
        writer.writerow([sid, " ".join(str(int(s)) for s in symbols)])


def write_predictions(rows, stream):
    """``rows`` of ``(student_id, method, score, label)``."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(PREDICTION_HEADER)
    for sid, method, score, label in rows:
        writer.writerow([sid, method, repr(float(score)), int(label)])


def read_predictions(stream):
    """``{student_id: (score, label)}``."""
    reader = _reader(stream, PREDICTION_HEADER, "predictions")
    out = {}
    for line, (sid, _method, score, label) in _rows(reader, 4):
        if sid in out:
            raise ParseError(f"duplicate student {sid}", line=line)
        out[sid] = (_parse_float(score, "score", line), _parse_int(label, "label", line))
    return out


def read_truth(stream):
    """``{student_id: class_label}``."""
    reader = _reader(stream, TRUTH_HEADER, "truth labels")
    out = {}
    for line, (sid, label) in _rows(reader, 2):
        label = _parse_int(label, "class_label", line)
        if label not in (1, 2):
            raise ParseError(f"class_label must be 1 or 2, got {label}", line=line)
        if sid in out:
            raise ParseError(f"duplicate student {sid}", line=line)
        out[sid] = label
    return out


def write_history(history, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(HISTORY_HEADER)
    for i, value in enumerate(history):
        writer.writerow([i, repr(float(value))])


def to_text(writer_fn, *args):
    """Render one of the ``write_*`` helpers into a string."""
    buf = io.StringIO()
    writer_fn(*args, buf)
    return buf.getvalue()
