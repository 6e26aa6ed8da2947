"""Personality-fidelity evaluation of role-playing agents.

An agent answers an open-ended questionnaire (``administer``), a judge
model turns the answers of each dimension into a score in [0, 1] toward
the dimension's first pole (``assess``), and the scores are compared with
ground-truth labels (``compute_metrics``).

Questionnaire file, one JSON object per line::

    {"id": str, "text": str, "dimension": "EI" | "SN" | ... | "O" | ..., "instrument": "MBTI" | "BFI"}

Labels file, one JSON object per line::

    {"character_id": str, "mbti_type": "INTJ" | null,
     "mbti_scores": [4 x float] | null, "bfi_scores": [5 x float] | null}
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import EmoRagError, FormatError, MissingLabelError, ParseError, UncachedVectorError
from .gateway import Message
from .personality import Instrument, PersonalityLabel, dimensions, letter_for
from .pipeline import Backends, respond
from .prompts import build_assessment_request, correction_message
from .retrieval import DEFAULT_K, RetrievalStrategy

logger = logging.getLogger(__name__)

JUDGE_FORMAT = "a single number between 0 and 1"


@dataclass(frozen=True)
class QuestionnaireItem:
    id: str
    text: str
    dimension: str


@dataclass(frozen=True)
class Questionnaire:
    instrument: Instrument
    items: tuple[QuestionnaireItem, ...] = ()

    def __post_init__(self):
        instrument = Instrument(self.instrument)
        valid = {d.key for d in dimensions(instrument)}
        items = tuple(self.items)
        for item in items:
            if item.dimension not in valid:
                raise ValueError(f"item {item.id}: {item.dimension!r} is not a {instrument.value} dimension")
        object.__setattr__(self, "instrument", instrument)
        object.__setattr__(self, "items", items)

    def __len__(self):
        return len(self.items)


def load_questionnaire(path: str | Path, instrument: str | None = None) -> Questionnaire:
    """Read a questionnaire file, keeping only ``instrument`` rows if given."""
    wanted = Instrument(instrument) if instrument is not None else None
    items, seen = [], None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                inst = Instrument(rec["instrument"])
                item = QuestionnaireItem(str(rec["id"]), rec["text"], rec["dimension"])
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"bad questionnaire record: {exc}", line=lineno) from None
            if wanted is not None and inst is not wanted:
                continue
            if seen is not None and inst is not seen:
                raise FormatError("questionnaire mixes instruments; select one explicitly", line=lineno)
            seen = inst
            if item.dimension not in {d.key for d in dimensions(inst)}:
                raise FormatError(f"{item.dimension!r} is not a {inst.value} dimension", line=lineno)
            items.append(item)
    inst = wanted or seen
    if inst is None:
        raise FormatError("empty questionnaire and no instrument given")
    return Questionnaire(inst, tuple(items))


def load_labels(path: str | Path) -> dict[str, PersonalityLabel]:
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                cid = rec["character_id"]
                labels[cid] = PersonalityLabel.from_dict(rec)
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"bad label record: {exc}", line=lineno) from None
    return labels


@dataclass(frozen=True)
class TranscriptEntry:
    item_id: str
    dimension: str
    question: str
    reply: str | None
    fragment_ids: tuple[str, ...] = ()
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class Transcript:
    character_id: str
    instrument: Instrument
    strategy: str
    entries: tuple[TranscriptEntry, ...] = ()

    @property
    def failed(self) -> list[TranscriptEntry]:
        return [e for e in self.entries if not e.ok]

    def to_dict(self) -> dict:
        return {
            "character_id": self.character_id,
            "instrument": self.instrument.value,
            "strategy": self.strategy,
            "entries": [
                {
                    "item_id": e.item_id,
                    "dimension": e.dimension,
                    "question": e.question,
                    "reply": e.reply,
                    "fragment_ids": list(e.fragment_ids),
                    "error": e.error,
                }
                for e in self.entries
            ],
        }


def administer(
    character,
    unit,
    questionnaire: Questionnaire,
    strategy: RetrievalStrategy,
    backends: Backends,
    k: int = DEFAULT_K,
) -> Transcript:
    """Put every questionnaire item to the agent; failures are recorded, not raised."""
    missing = unit.uncached_ids()
    if missing:
        raise UncachedVectorError(missing)
    entries = []
    for item in questionnaire.items:
        try:
            turn = respond(character, unit, item.text, strategy, backends, k)
        except EmoRagError as exc:
            logger.warning("item %s failed for %s: %s", item.id, character.character_id, exc)
            entries.append(TranscriptEntry(item.id, item.dimension, item.text, None, (), f"{type(exc).__name__}: {exc}"))
            continue
        entries.append(TranscriptEntry(item.id, item.dimension, item.text, turn.reply, tuple(turn.fragment_ids)))
    return Transcript(character.character_id, questionnaire.instrument, strategy.variant.value, tuple(entries))


_NUMBER = re.compile(r"(?<![\w.])([+-]?(?:\d+(?:\.\d*)?|\.\d+))(\s*%)?")


def parse_judge_score(raw: str) -> float:
    """First number in the reply, as a proportion in [0, 1]. ``80%`` reads as 0.8."""
    m = _NUMBER.search(raw or "")
    if m is None:
        raise ParseError(f"no number in judge reply {raw[:80]!r}")
    value = float(m.group(1))
    if m.group(2):
        value /= 100.0
    if not 0.0 <= value <= 1.0:
        raise ParseError(f"judge score {value} outside [0, 1]")
    return value


@dataclass(frozen=True)
class AssessmentResult:
    instrument: Instrument
    scores: Mapping[str, float]
    errors: Mapping[str, str] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return all(d.key in self.scores for d in dimensions(self.instrument))

    @property
    def letters(self) -> dict[str, str]:
        return {d.key: letter_for(d, self.scores[d.key]) for d in dimensions(self.instrument) if d.key in self.scores}

    @property
    def type_string(self) -> str | None:
        if not self.complete:
            return None
        letters = self.letters
        return "".join(letters[d.key] for d in dimensions(self.instrument))

    def ordered_scores(self) -> tuple[float, ...]:
        return tuple(self.scores[d.key] for d in dimensions(self.instrument))


def assess(
    transcript: Transcript,
    instrument,
    judge,
    *,
    lang: str = "en",
    reprompts: int = 2,
    registry=None,
) -> AssessmentResult:
    instrument = Instrument(instrument)
    scores, errors = {}, {}
    for dim in dimensions(instrument):
        answers = [(e.question, e.reply) for e in transcript.entries if e.dimension == dim.key and e.ok]
        if not answers:
            errors[dim.key] = "no answered items for this dimension"
            continue
        request = build_assessment_request(instrument.value, dim, answers, registry=registry, lang=lang)
        for attempt in range(reprompts + 1):
            try:
                reply = judge.chat(request)
            except EmoRagError as exc:
                errors[dim.key] = f"{type(exc).__name__}: {exc}"
                break
            try:
                scores[dim.key] = parse_judge_score(reply)
                break
            except ParseError as exc:
                errors[dim.key] = f"ParseError: {exc}"
                request = request.extended(
                    Message("assistant", reply),
                    Message("user", correction_message(str(exc), expected=JUDGE_FORMAT, registry=registry, lang=lang)),
                )
        if dim.key in scores:
            errors.pop(dim.key, None)
    return AssessmentResult(instrument, scores, errors)


@dataclass(frozen=True)
class Metrics:
    acc_dim: float
    acc_full: float
    mse: float
    mae: float
    n_characters: int


def compute_metrics(
    results: Mapping[str, AssessmentResult],
    labels: Mapping[str, PersonalityLabel],
    instrument,
) -> Metrics:
    instrument = Instrument(instrument)
    if not results:
        raise ValueError("no assessment results to score")
    missing = [
        c for c in results
        if c not in labels or labels[c].letters(instrument) is None or labels[c].scores(instrument) is None
    ]
    if missing:
        raise MissingLabelError(missing)
    incomplete = [c for c, r in results.items() if not r.complete]
    if incomplete:
        raise ValueError(f"incomplete assessments for: {', '.join(sorted(incomplete))}")

    dims = dimensions(instrument)
    dim_hits = full_hits = 0
    sq, ab = [], []
    for cid in sorted(results):
        result, label = results[cid], labels[cid]
        predicted = result.letters
        truth = label.letters(instrument)
        matches = [predicted[d.key] == t for d, t in zip(dims, truth)]
        dim_hits += sum(matches)
        full_hits += all(matches)
        for p, t in zip(result.ordered_scores(), label.scores(instrument)):
            sq.append((p - t) ** 2)
            ab.append(abs(p - t))
    n = len(results)
    return Metrics(
        acc_dim=dim_hits / (n * len(dims)),
        acc_full=full_hits / n,
        mse=math.fsum(sq) / len(sq),
        mae=math.fsum(ab) / len(ab),
        n_characters=n,
    )


@dataclass(frozen=True)
class CharacterCase:
    profile: object
    unit: object
    label: PersonalityLabel | None = None


@dataclass(frozen=True)
class ReportRow:
    strategy: str
    label: str
    n_characters: int
    n_scored: int
    acc_dim: float
    acc_full: float
    mse: float
    mae: float
    errors: str = ""


REPORT_COLUMNS = ("strategy", "method", "n_characters", "n_scored", "acc_dim", "acc_full", "mse", "mae", "errors")


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.4f}"


@dataclass
class StrategyReport:
    instrument: Instrument
    rows: list[ReportRow]
    results: dict[str, dict[str, AssessmentResult]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in self.rows:
            writer.writerow([r.strategy, r.label, r.n_characters, r.n_scored,
                             _fmt(r.acc_dim), _fmt(r.acc_full), _fmt(r.mse), _fmt(r.mae), r.errors])
        return buf.getvalue()

    def to_table(self) -> str:
        header = ["method", "Acc(Dim)", "Acc(Full)", "MSE", "MAE", "scored"]
        body = [[r.label, _fmt(r.acc_dim), _fmt(r.acc_full), _fmt(r.mse), _fmt(r.mae), f"{r.n_scored}/{r.n_characters}"]
                for r in self.rows]
        widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
        lines = [f"{self.instrument.value} strategy comparison"]
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        lines.append("  ".join("-" * w for w in widths))
        lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in body)
        return "\n".join(lines)


def evaluate_character(case: CharacterCase, questionnaire, strategy, backends: Backends, k: int = DEFAULT_K):
    transcript = administer(case.profile, case.unit, questionnaire, strategy, backends, k)
    result = assess(transcript, questionnaire.instrument, backends.judge, lang=backends.lang, registry=backends.registry)
    return transcript, result


def compare_strategies(
    characters: Sequence[CharacterCase],
    questionnaire: Questionnaire,
    strategies: Sequence[RetrievalStrategy],
    backends: Backends,
    k: int = DEFAULT_K,
    workers: int = 1,
) -> StrategyReport:
    """Run the whole evaluation once per strategy; one report row each.

    A character whose run or assessment fails is left out of that row's
    metrics and named in its ``errors`` cell.
    """
    instrument = questionnaire.instrument
    rows, all_results = [], {}
    for strategy in strategies:
        def run(case):
            try:
                return evaluate_character(case, questionnaire, strategy, backends, k)[1], None
            except EmoRagError as exc:
                return None, f"{type(exc).__name__}: {exc}"

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(run, characters))
        else:
            outcomes = [run(c) for c in characters]

        results, labels, problems = {}, {}, []
        for case, (result, err) in zip(characters, outcomes):
            cid = case.profile.character_id
            label = case.label if case.label is not None else getattr(case.profile, "labels", None)
            if err is not None:
                problems.append(f"{cid}: {err}")
            elif not result.complete:
                problems.append(f"{cid}: " + "; ".join(f"{k_}={v}" for k_, v in sorted(result.errors.items())))
            elif label is None or label.letters(instrument) is None:
                problems.append(f"{cid}: no {instrument.value} label")
            else:
                results[cid] = result
                labels[cid] = label
        all_results[strategy.variant.value] = results
        if results:
            m = compute_metrics(results, labels, instrument)
            values = (m.acc_dim, m.acc_full, m.mse, m.mae)
        else:
            values = (math.nan,) * 4
        rows.append(ReportRow(strategy.variant.value, strategy.label, len(characters), len(results), *values,
                              errors=" | ".join(problems)))
    return StrategyReport(instrument, rows, all_results)
