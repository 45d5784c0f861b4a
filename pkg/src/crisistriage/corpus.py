"""Message ingestion, crowd-judgment adjudication, dedup, and split building."""

from __future__ import annotations

import csv
import enum
import json
import random
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class Source(enum.Enum):
    CCSID = "CCSID"
    CRISISLEX = "CrisisLex"
    IRMA = "Irma"
    OTHER = "Other"


class InformativenessLabel(enum.IntEnum):
    """Three-level informativeness. Higher value = more informative."""

    NOT_INFORMATIVE = 0
    SOMEWHAT_INFORMATIVE = 1
    INFORMATIVE = 2


class BinaryInformativeness(enum.Enum):
    INFORMATIVE = "informative"
    NOT_INFORMATIVE = "not_informative"


@dataclass(frozen=True)
class Message:
    id: str
    text: str
    timestamp: int | None = None
    source: Source = Source.OTHER

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"message {self.id!r}: empty text")


@dataclass(frozen=True)
class Judgment:
    message_id: str
    worker_id: str
    label: InformativenessLabel


@dataclass(frozen=True)
class GoldQuestion:
    message_id: str
    correct: InformativenessLabel


class MessageSet:
    """Immutable ordered collection of messages with unique ids.

    Optionally carries binary informativeness labels (by message id) and a
    list of record-level load errors.
    """

    def __init__(
        self,
        messages: Iterable[Message],
        labels: Mapping[str, BinaryInformativeness] | None = None,
        errors: Sequence[str] = (),
    ):
        self.messages: tuple[Message, ...] = tuple(messages)
        seen: set[str] = set()
        for m in self.messages:
            if m.id in seen:
                raise ValueError(f"duplicate message id: {m.id!r}")
            seen.add(m.id)
        self.labels: dict[str, BinaryInformativeness] = dict(labels or {})
        self.errors: tuple[str, ...] = tuple(errors)

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self):
        return iter(self.messages)

    def label_of(self, message_id: str) -> BinaryInformativeness:
        return self.labels[message_id]

    def by_label(self, label: BinaryInformativeness) -> list[Message]:
        return [m for m in self.messages if self.labels.get(m.id) == label]


@dataclass(frozen=True)
class Split:
    train: MessageSet
    validation: MessageSet


# Maps substrings of CrisisLex-style label tokens; table-driven so other
# vocabularies can be added via config without code changes.
DEFAULT_LABEL_MAP = {
    "not informative": BinaryInformativeness.NOT_INFORMATIVE,
    "not_informative": BinaryInformativeness.NOT_INFORMATIVE,
    "non-informative": BinaryInformativeness.NOT_INFORMATIVE,
    "informative": BinaryInformativeness.INFORMATIVE,
}

_JUDGMENT_LABELS = {
    "informative": InformativenessLabel.INFORMATIVE,
    "somewhat": InformativenessLabel.SOMEWHAT_INFORMATIVE,
    "not": InformativenessLabel.NOT_INFORMATIVE,
}


def _map_label(token: str, label_map: Mapping[str, BinaryInformativeness]) -> BinaryInformativeness:
    low = token.strip().lower()
    # Longest-key-first so "not informative" wins over "informative".
    for key in sorted(label_map, key=len, reverse=True):
        if key in low:
            return label_map[key]
    raise ValueError(f"unmappable label token: {token!r}")


def load_crisislex_csv(
    path: str | Path,
    label_map: Mapping[str, BinaryInformativeness] | None = None,
) -> MessageSet:
    """Load a CrisisLex-style labeled CSV (tweet_id, tweet_text, label).

    Malformed rows are collected as record-level errors; if more than half
    the rows are malformed the whole file is rejected.
    """
    label_map = label_map or DEFAULT_LABEL_MAP
    messages: list[Message] = []
    labels: dict[str, BinaryInformativeness] = {}
    errors: list[str] = []
    total = 0
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return MessageSet([], {}, [])
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            total += 1
            try:
                if len(row) < 3:
                    raise ValueError(f"expected 3 columns, got {len(row)}")
                msg_id, text, label_token = row[0], row[1], row[2]
                label = _map_label(label_token, label_map)
                messages.append(Message(id=msg_id, text=text, source=Source.CRISISLEX))
                labels[msg_id] = label
            except ValueError as e:
                errors.append(f"line {lineno}: {e}")
    if total and len(errors) > total / 2:
        raise ValueError(f"{path}: {len(errors)}/{total} rows malformed")
    return MessageSet(messages, labels, errors)


def load_jsonl(path: str | Path, default_source: Source = Source.OTHER) -> MessageSet:
    """Load line-delimited message records with keys id, text, optional
    timestamp/source/label."""
    messages: list[Message] = []
    labels: dict[str, BinaryInformativeness] = {}
    errors: list[str] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                if "id" not in rec or "text" not in rec:
                    raise ValueError("missing id or text")
                source = Source(rec["source"]) if "source" in rec else default_source
                ts = int(rec["timestamp"]) if "timestamp" in rec else None
                messages.append(
                    Message(id=str(rec["id"]), text=rec["text"], timestamp=ts, source=source)
                )
                if "label" in rec:
                    labels[str(rec["id"])] = _map_label(rec["label"], DEFAULT_LABEL_MAP)
            except (ValueError, json.JSONDecodeError) as e:
                errors.append(f"line {lineno}: {e}")
    return MessageSet(messages, labels, errors)


def load_judgments(path: str | Path) -> list[Judgment]:
    """Load line-delimited judgment records: message_id, worker_id, label."""
    judgments: list[Judgment] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            try:
                label = _JUDGMENT_LABELS[rec["label"].strip().lower()]
            except KeyError:
                raise ValueError(f"line {lineno}: unknown judgment label {rec.get('label')!r}")
            judgments.append(Judgment(rec["message_id"], rec["worker_id"], label))
    return judgments


def adjudicate(judgments: Sequence[InformativenessLabel]) -> InformativenessLabel:
    """Most popular label; ties broken toward the more informative label."""
    if not judgments:
        raise ValueError("cannot adjudicate an empty judgment list")
    counts = Counter(judgments)
    best_count = max(counts.values())
    tied = [label for label, c in counts.items() if c == best_count]
    return max(tied)  # IntEnum order: more informative wins ties


def agreement(
    judgments_by_message: Mapping[str, Sequence[InformativenessLabel]],
) -> dict[InformativenessLabel, float]:
    """Per-adjudicated-category fraction of judgments matching the adjudicated label."""
    matched: Counter[InformativenessLabel] = Counter()
    totals: Counter[InformativenessLabel] = Counter()
    for msg_id, judgments in judgments_by_message.items():
        if len(judgments) < 2:
            raise ValueError(f"message {msg_id!r}: need at least 2 judgments")
        verdict = adjudicate(judgments)
        totals[verdict] += len(judgments)
        matched[verdict] += sum(1 for j in judgments if j == verdict)
    return {label: matched[label] / totals[label] for label in totals}


def overall_agreement(
    judgments_by_message: Mapping[str, Sequence[InformativenessLabel]],
) -> float:
    """Fraction of all (message, judgment) pairs matching the adjudicated label."""
    matched = total = 0
    for msg_id, judgments in judgments_by_message.items():
        if len(judgments) < 2:
            raise ValueError(f"message {msg_id!r}: need at least 2 judgments")
        verdict = adjudicate(judgments)
        total += len(judgments)
        matched += sum(1 for j in judgments if j == verdict)
    return matched / total


@dataclass(frozen=True)
class WorkerScore:
    worker_id: str
    accuracy: float
    flagged: bool


def score_gold(
    worker_id: str,
    gold: Mapping[str, GoldQuestion],
    answers: Mapping[str, InformativenessLabel],
    threshold: float = 0.7,
) -> WorkerScore:
    """Score a worker against pre-answered gold questions.

    Workers scoring below `threshold` are flagged; callers exclude flagged
    workers' judgments from adjudication.
    """
    answered = {mid: label for mid, label in answers.items() if mid in gold}
    if not answered:
        raise ValueError(f"worker {worker_id!r} answered no gold questions")
    correct = sum(1 for mid, label in answered.items() if gold[mid].correct == label)
    accuracy = correct / len(answered)
    return WorkerScore(worker_id, accuracy, flagged=accuracy < threshold)


_RT_PREFIX = re.compile(r"^rt @", re.IGNORECASE)
_URL_OR_MENTION = re.compile(r"(https?://\S+|www\.\S+|@\w+)")


def _dedupe_tokens(text: str) -> frozenset[str]:
    cleaned = _URL_OR_MENTION.sub(" ", text.lower())
    return frozenset(re.findall(r"\w+", cleaned))


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def dedupe(messages: MessageSet, threshold: float = 0.8) -> MessageSet:
    """Drop retweets and near-duplicates (token-set Jaccard >= threshold).

    Among near-duplicates the earliest message survives (timestamp order,
    falling back to input order for undated messages).
    """
    candidates = [m for m in messages if not _RT_PREFIX.match(m.text.strip())]
    order = sorted(
        range(len(candidates)),
        key=lambda i: (candidates[i].timestamp if candidates[i].timestamp is not None else 0, i),
    )
    kept: list[int] = []
    kept_tokens: list[frozenset[str]] = []
    for i in order:
        tokens = _dedupe_tokens(candidates[i].text)
        if any(jaccard(tokens, kt) >= threshold for kt in kept_tokens):
            continue
        kept.append(i)
        kept_tokens.append(tokens)
    kept.sort()  # preserve input order in the output
    survivors = [candidates[i] for i in kept]
    labels = {m.id: messages.labels[m.id] for m in survivors if m.id in messages.labels}
    return MessageSet(survivors, labels)


def collapse_labels(label: InformativenessLabel) -> BinaryInformativeness:
    """Collapse the three-level scheme to binary: somewhat-informative counts as informative."""
    if label is InformativenessLabel.NOT_INFORMATIVE:
        return BinaryInformativeness.NOT_INFORMATIVE
    return BinaryInformativeness.INFORMATIVE


VALIDATION_CCSID = 300
VALIDATION_CRISISLEX_PER_CLASS = 150


def build_split(ccsid: MessageSet, crisislex: MessageSet, seed: int) -> Split:
    """Build the train/validation split.

    Validation: 300 CCSID messages plus 150 informative and 150
    non-informative CrisisLex messages, sampled without replacement.  For
    smaller corpora all three quotas are scaled down proportionally.
    """
    cl_pos = crisislex.by_label(BinaryInformativeness.INFORMATIVE)
    cl_neg = crisislex.by_label(BinaryInformativeness.NOT_INFORMATIVE)
    scale = min(
        1.0,
        len(ccsid) / VALIDATION_CCSID,
        len(cl_pos) / VALIDATION_CRISISLEX_PER_CLASS,
        len(cl_neg) / VALIDATION_CRISISLEX_PER_CLASS,
    )
    n_ccsid = int(round(VALIDATION_CCSID * scale))
    n_per_class = int(round(VALIDATION_CRISISLEX_PER_CLASS * scale))
    if min(n_ccsid, n_per_class) < 1:
        # Name the class that drove the scale down.
        name, have = min(
            [
                ("CCSID", len(ccsid), len(ccsid) / VALIDATION_CCSID),
                ("CrisisLex informative", len(cl_pos), len(cl_pos) / VALIDATION_CRISISLEX_PER_CLASS),
                (
                    "CrisisLex non-informative",
                    len(cl_neg),
                    len(cl_neg) / VALIDATION_CRISISLEX_PER_CLASS,
                ),
            ],
            key=lambda t: t[2],
        )[:2]
        raise ValueError(f"insufficient data for validation split: {name} has {have}")

    rng = random.Random(seed)
    val_ccsid = rng.sample(list(ccsid.messages), n_ccsid)
    val_pos = rng.sample(cl_pos, n_per_class)
    val_neg = rng.sample(cl_neg, n_per_class)
    val_messages = val_ccsid + val_pos + val_neg
    val_ids = {m.id for m in val_messages}

    all_labels = {**ccsid.labels, **crisislex.labels}
    train_messages = [m for m in list(ccsid) + list(crisislex) if m.id not in val_ids]
    validation = MessageSet(
        val_messages, {m.id: all_labels[m.id] for m in val_messages if m.id in all_labels}
    )
    train = MessageSet(
        train_messages, {m.id: all_labels[m.id] for m in train_messages if m.id in all_labels}
    )
    return Split(train=train, validation=validation)
