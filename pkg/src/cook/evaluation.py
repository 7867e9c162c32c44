"""Dataset ingestion, answer metrics, and the evaluation harness.

Metrics follow the common QA conventions: exact match and token F1 are
computed over normalized text (lowercase, articles and punctuation
stripped, whitespace collapsed); balanced accuracy and macro F1 average
per-class recall and per-class F1 over the classes present in the gold
labels, with 0/0 treated as 0.
"""

from __future__ import annotations

import concurrent.futures
import enum
import json
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Callable, Mapping, Sequence

from .errors import ContractError, CookError, DatasetError, TransportError
from .integration import (
    IntegrationResult,
    QueryTask,
    SelectionStrategy,
    run_bottom_up,
    run_top_down,
    run_vanilla,
)
from .providers import ProviderSet
from .registry import PipelineConfig, Registry

REPORT_VERSION = 1
_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


class DatasetFormat(enum.Enum):
    MULTIPLE_CHOICE = "multiple_choice"
    OPEN_BOOK = "open_book"
    CLASSIFICATION = "classification"


class EngineKind(enum.Enum):
    VANILLA = "vanilla"
    BOTTOM_UP = "bottom_up"
    TOP_DOWN_AUTO = "top_down_auto"
    TOP_DOWN_EXP = "top_down_exp"


@dataclass(frozen=True)
class EvalRecord:
    id: str
    question: str
    gold: str
    choices: tuple[str, ...] | None = None
    icl_group: str | None = None


def choice_letters(n: int) -> list[str]:
    return [chr(ord("A") + i) for i in range(n)]


def load_dataset(path: str | Path, format: DatasetFormat) -> list[EvalRecord]:
    """Load a line-delimited JSON dataset; any bad line aborts the load."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    records = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise DatasetError(f"{path}:{lineno}: expected a JSON object")
        unknown = set(raw) - {"id", "question", "choices", "gold", "icl_group"}
        if unknown:
            raise DatasetError(f"{path}:{lineno}: unknown field(s) {sorted(unknown)}")
        missing = {"id", "question", "gold"} - set(raw)
        if missing:
            raise DatasetError(f"{path}:{lineno}: missing field(s) {sorted(missing)}")
        question = str(raw["question"])
        if not question.strip():
            raise DatasetError(f"{path}:{lineno}: question must be non-empty")
        choices = raw.get("choices")
        if choices is not None:
            if not isinstance(choices, list) or len(choices) < 2:
                raise DatasetError(f"{path}:{lineno}: choices must list at least 2 options")
            choices = tuple(str(c) for c in choices)
            if str(raw["gold"]) not in choice_letters(len(choices)):
                raise DatasetError(
                    f"{path}:{lineno}: gold '{raw['gold']}' is not one of "
                    f"{choice_letters(len(choices))}"
                )
        if format in (DatasetFormat.MULTIPLE_CHOICE, DatasetFormat.CLASSIFICATION) \
                and choices is None:
            raise DatasetError(f"{path}:{lineno}: {format.value} records require choices")
        record = EvalRecord(
            id=str(raw["id"]),
            question=question,
            gold=str(raw["gold"]),
            choices=choices,
            icl_group=str(raw["icl_group"]) if raw.get("icl_group") is not None else None,
        )
        if record.id in seen_ids:
            raise DatasetError(f"{path}:{lineno}: duplicate record id '{record.id}'")
        seen_ids.add(record.id)
        records.append(record)
    return records


def normalize_answer(text: str) -> str:
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(prediction: str, gold: str) -> int:
    return int(normalize_answer(prediction) == normalize_answer(gold))


def token_f1(prediction: str, gold: str) -> float:
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def balanced_accuracy(outcomes: Sequence[tuple[str, str]]) -> float:
    """Mean per-class recall over the classes present in the gold labels."""
    if not outcomes:
        raise ContractError("balanced_accuracy: outcomes must be non-empty")
    totals: Counter[str] = Counter()
    hits: Counter[str] = Counter()
    for gold, predicted in outcomes:
        totals[gold] += 1
        if predicted == gold:
            hits[gold] += 1
    recalls = [hits[label] / totals[label] for label in totals]
    return sum(recalls) / len(recalls)


def macro_f1(outcomes: Sequence[tuple[str, str]]) -> float:
    """Unweighted mean of per-class F1 over the gold label set (0/0 -> 0).

    Predictions outside the gold label set count against recall of the true
    class but do not introduce classes of their own, so a degenerate engine
    that emits garbage cannot shrink the denominator.
    """
    if not outcomes:
        raise ContractError("macro_f1: outcomes must be non-empty")
    labels = sorted({gold for gold, _ in outcomes})
    scores = []
    for label in labels:
        tp = sum(1 for gold, pred in outcomes if gold == label and pred == label)
        fp = sum(1 for gold, pred in outcomes if gold != label and pred == label)
        fn = sum(1 for gold, pred in outcomes if gold == label and pred != label)
        precision = tp / (tp + fp) if (tp + fp) else 0.0
        recall = tp / (tp + fn) if (tp + fn) else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
        scores.append(f1)
    return sum(scores) / len(scores)


@dataclass
class Telemetry:
    """Counters behind the card-selection, yes/no, and factuality analyses."""

    card_selection_counts: dict[str, int] = field(default_factory=dict)
    yes_no_confusion: dict[str, int] = field(default_factory=lambda: {
        "yes_correct": 0, "yes_incorrect": 0, "no_correct": 0, "no_incorrect": 0,
    })
    factuality_histogram: dict[str, list[int]] = field(default_factory=dict)
    ambiguity_count: int = 0
    fallback_count: int = 0

    def absorb(self, result: IntegrationResult, correct: bool) -> None:
        telem = result.telemetry
        for card_id in telem.selected_cards:
            self.card_selection_counts[card_id] = self.card_selection_counts.get(card_id, 0) + 1
        for card_id, score in telem.factuality_scores:
            bucket = min(int(score * 10), 9)
            histogram = self.factuality_histogram.setdefault(card_id, [0] * 10)
            histogram[bucket] += 1
        self.ambiguity_count += telem.ambiguous_yes_no
        self.fallback_count += telem.explicit_fallbacks
        if telem.first_gate is not None:
            key = f"{telem.first_gate}_{'correct' if correct else 'incorrect'}"
            self.yes_no_confusion[key] += 1

    def to_dict(self) -> dict:
        return {
            "card_selection_counts": dict(sorted(self.card_selection_counts.items())),
            "yes_no_confusion": dict(self.yes_no_confusion),
            "factuality_histogram": {k: list(v) for k, v in sorted(self.factuality_histogram.items())},
            "ambiguity_count": self.ambiguity_count,
            "fallback_count": self.fallback_count,
        }


@dataclass
class RecordOutcome:
    record_id: str
    gold: str
    prediction: str
    correct: bool
    em: float
    token_f1: float
    error: str | None = None
    first_gate: str | None = None
    abstained: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.record_id,
            "gold": self.gold,
            "prediction": self.prediction,
            "correct": self.correct,
            "em": self.em,
            "token_f1": self.token_f1,
            "error": self.error,
            "first_gate": self.first_gate,
            "abstained": self.abstained,
        }


@dataclass
class EvalReport:
    engine: str
    seed: int
    outcomes: list[RecordOutcome]
    aggregates: dict[str, float]
    telemetry: Telemetry

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "engine": self.engine,
            "seed": self.seed,
            "dataset_size": len(self.outcomes),
            "records": [outcome.to_dict() for outcome in self.outcomes],
            "aggregates": dict(self.aggregates),
            "telemetry": self.telemetry.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def render_question(record: EvalRecord) -> str:
    """Question text as prompted, with any choices on a second line."""
    if record.choices is None:
        return record.question
    rendered = " ".join(
        f"{letter}. {choice}"
        for letter, choice in zip(choice_letters(len(record.choices)), record.choices)
    )
    return f"{record.question}\n{rendered}"


def build_task(record: EvalRecord, icl_blocks: Mapping[str, str] | None) -> QueryTask:
    icl = ""
    if record.icl_group and icl_blocks:
        icl = icl_blocks.get(record.icl_group, "")
    stop = ("\n",) if record.choices is None else ()
    return QueryTask(
        question=render_question(record),
        icl_prefix=icl,
        choices=record.choices,
        stop_sequences=stop,
    )


def record_rng(seed: int, record_id: str) -> Random:
    # String seeding hashes via SHA-512 in CPython: stable across runs.
    return Random(f"{seed}:{record_id}")


def _run_engine(
    engine: EngineKind,
    task: QueryTask,
    registry: Registry,
    providers: ProviderSet,
    config: PipelineConfig,
    rng: Random,
) -> IntegrationResult:
    if engine is EngineKind.VANILLA:
        return run_vanilla(task, providers)
    if engine is EngineKind.BOTTOM_UP:
        return run_bottom_up(task, registry, providers, config, rng)
    if engine is EngineKind.TOP_DOWN_AUTO:
        return run_top_down(task, registry, providers, config, SelectionStrategy.AUTO, rng)
    if engine is EngineKind.TOP_DOWN_EXP:
        return run_top_down(task, registry, providers, config, SelectionStrategy.EXP, rng)
    raise ContractError(f"unknown engine {engine}")


def _grade(record: EvalRecord, prediction: str) -> bool:
    if record.choices is not None:
        return prediction == record.gold
    return exact_match(prediction, record.gold) == 1


def run_eval(
    dataset: Sequence[EvalRecord],
    engine: EngineKind,
    registry: Registry,
    providers: ProviderSet,
    config: PipelineConfig | None = None,
    *,
    icl_blocks: Mapping[str, str] | None = None,
    jobs: int = 1,
    on_result: Callable[[EvalRecord, IntegrationResult], None] | None = None,
) -> EvalReport:
    """Evaluate every record with one engine and aggregate metrics.

    Per-record engine failures score as incorrect without aborting the run;
    an unreachable provider aborts, since every remaining record would fail
    the same way.
    """
    config = config or registry.pipeline
    records = list(dataset)

    def evaluate(record: EvalRecord) -> tuple[RecordOutcome, IntegrationResult | None]:
        task = build_task(record, icl_blocks)
        rng = record_rng(config.rng_seed, record.id)
        try:
            result = _run_engine(engine, task, registry, providers, config, rng)
        except TransportError:
            raise
        except CookError as exc:
            outcome = RecordOutcome(
                record_id=record.id, gold=record.gold, prediction="",
                correct=False, em=0.0, token_f1=0.0, error=str(exc),
            )
            return outcome, None
        correct = _grade(record, result.answer)
        outcome = RecordOutcome(
            record_id=record.id,
            gold=record.gold,
            prediction=result.answer,
            correct=correct,
            em=float(exact_match(result.answer, record.gold)),
            token_f1=token_f1(result.answer, record.gold),
            first_gate=result.telemetry.first_gate,
            abstained=result.abstain_path,
        )
        return outcome, result

    if jobs > 1 and len(records) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            evaluated = list(pool.map(evaluate, records))
    else:
        evaluated = [evaluate(record) for record in records]

    telemetry = Telemetry()
    outcomes = []
    for record, (outcome, result) in zip(records, evaluated):
        outcomes.append(outcome)
        if result is not None:
            telemetry.absorb(result, outcome.correct)
            if on_result is not None:
                on_result(record, result)

    class_pairs = []
    for record, outcome in zip(records, outcomes):
        if record.choices is not None:
            class_pairs.append((record.gold, outcome.prediction))
        else:
            class_pairs.append((normalize_answer(record.gold), normalize_answer(outcome.prediction)))
    aggregates = {
        "accuracy": sum(o.correct for o in outcomes) / len(outcomes) if outcomes else 0.0,
        "balanced_accuracy": balanced_accuracy(class_pairs) if class_pairs else 0.0,
        "macro_f1": macro_f1(class_pairs) if class_pairs else 0.0,
        "exact_match": sum(o.em for o in outcomes) / len(outcomes) if outcomes else 0.0,
        "token_f1": sum(o.token_f1 for o in outcomes) / len(outcomes) if outcomes else 0.0,
    }
    return EvalReport(
        engine=engine.value,
        seed=config.rng_seed,
        outcomes=outcomes,
        aggregates=aggregates,
        telemetry=telemetry,
    )
