"""Evaluation: QED precision/recall/F1, EL accuracy, end-to-end scores and sweeps."""

from __future__ import annotations

import csv
import io
import logging
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from qedl.kg import KgStore
from qedl.qed import Discoverer, train_qed
from qedl.questions import Question
from qedl.ranker import RankingExample, rank_candidates, train_ranker

log = logging.getLogger(__name__)


def safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


def f1_score(precision: float, recall: float) -> float:
    return safe_div(2 * precision * recall, precision + recall)


@dataclass(frozen=True)
class QedReport:
    precision: float
    recall: float
    f1: float
    predicted: int
    gold: int
    correct: int

    @classmethod
    def from_counts(cls, predicted: int, gold: int, correct: int) -> "QedReport":
        p, r = safe_div(correct, predicted), safe_div(correct, gold)
        return cls(p, r, f1_score(p, r), predicted, gold, correct)

    def to_dict(self) -> dict:
        return asdict(self)


def _match_count(pred: Iterable[Hashable], gold: Iterable[Hashable]) -> int:
    # exact-key one-to-one matching is a multiset intersection
    return sum((Counter(pred) & Counter(gold)).values())


def _span(m) -> tuple[int, int]:
    if hasattr(m, "span"):
        return m.span
    return (int(m[0]), int(m[1]))


def qed_metrics(predicted: Mapping[str, Iterable], gold: Mapping[str, Iterable]) -> QedReport:
    """Exact-span precision, recall and F1 over all questions.

    ``predicted`` and ``gold`` map question ids to spans (``(start, end)``
    pairs or objects with a ``span``); a prediction is correct when it is
    matched one-to-one to a gold span with identical offsets.
    """
    n_pred = n_gold = n_ok = 0
    for qid in set(predicted) | set(gold):
        p = [_span(m) for m in predicted.get(qid, ())]
        g = [_span(m) for m in gold.get(qid, ())]
        n_pred += len(p)
        n_gold += len(g)
        n_ok += _match_count(p, g)
    return QedReport.from_counts(n_pred, n_gold, n_ok)


def el_accuracy(top1: Sequence[str | None], gold_ids: Sequence[str | None]) -> float:
    """Share of correctly recognized mentions whose top-ranked entity is the gold one.

    A missing prediction (no candidates) or a missing gold id counts as wrong.
    """
    if len(top1) != len(gold_ids):
        raise ValueError("prediction and gold lists differ in length")
    ok = sum(1 for p, g in zip(top1, gold_ids) if p is not None and g is not None and p == g)
    return safe_div(ok, len(top1))


def overall_metrics(predicted: Mapping[str, Iterable[tuple[int, int, str | None]]],
                    gold: Mapping[str, Iterable[tuple[int, int, str | None]]]) -> QedReport:
    """End-to-end scores: a prediction counts only if span and entity both match."""
    n_pred = n_gold = n_ok = 0
    for qid in set(predicted) | set(gold):
        p = [tuple(x) for x in predicted.get(qid, ())]
        g = [tuple(x) for x in gold.get(qid, ())]
        n_pred += len(p)
        n_gold += len(g)
        n_ok += _match_count([x for x in p if x[2] is not None], g)
    return QedReport.from_counts(n_pred, n_gold, n_ok)


def gold_spans(questions: Iterable[Question]) -> dict[str, list[tuple[int, int]]]:
    return {q.id: q.gold_spans() for q in questions}


def gold_links(questions: Iterable[Question]) -> dict[str, list[tuple[int, int, str | None]]]:
    return {q.id: [(m.start, m.end, m.kb_id) for m in q.entities] for q in questions}


@dataclass
class EvalReport:
    qed: QedReport
    el_accuracy: float
    el_scored: int
    overall: QedReport

    def to_dict(self) -> dict:
        return {"qed": self.qed.to_dict(),
                "el": {"accuracy": self.el_accuracy, "scored": self.el_scored},
                "overall": self.overall.to_dict()}

    def to_text(self) -> str:
        rows = [
            ["QED", _pct(self.qed.precision), _pct(self.qed.recall), _pct(self.qed.f1), "",
             str(self.qed.predicted), str(self.qed.gold), str(self.qed.correct)],
            ["EL", "", "", "", _pct(self.el_accuracy), str(self.el_scored), "", ""],
            ["Overall", _pct(self.overall.precision), _pct(self.overall.recall), _pct(self.overall.f1), "",
             str(self.overall.predicted), str(self.overall.gold), str(self.overall.correct)],
        ]
        return format_table(["stage", "P(%)", "R(%)", "F1(%)", "Acc(%)", "pred", "gold", "correct"], rows)


def evaluate_links(links: Mapping[str, Sequence[tuple[int, int, str | None]]],
                   questions: Sequence[Question]) -> EvalReport:
    """QED, EL and overall reports from per-question ``(start, end, top1)`` predictions.

    EL accuracy is computed on predicted mentions whose span matches a gold
    span one-to-one.
    """
    pred_spans = {qid: [(s, e) for s, e, _ in v] for qid, v in links.items()}
    qed = qed_metrics(pred_spans, gold_spans(questions))
    top1, gold_ids = [], []
    gold_by_q = {q.id: q for q in questions}
    for qid, preds in links.items():
        q = gold_by_q.get(qid)
        if q is None:
            continue
        remaining = Counter((m.start, m.end, m.kb_id) for m in q.entities)
        pool = [(m.start, m.end, m.kb_id) for m in q.entities]
        for s, e, eid in preds:
            for g in pool:
                if (g[0], g[1]) == (s, e) and remaining[g] > 0:
                    remaining[g] -= 1
                    top1.append(eid)
                    gold_ids.append(g[2])
                    break
    acc = el_accuracy(top1, gold_ids)
    overall = overall_metrics(links, gold_links(questions))
    return EvalReport(qed, acc, len(top1), overall)


# -- ablation -------------------------------------------------------------------


FEATURE_ORDER = ("semantic", "ts_qen", "ts_qea", "popularity")


def top1_accuracy(model, examples: Sequence[RankingExample]) -> float:
    hits = []
    for ex in examples:
        ranked = rank_candidates(model, ex.candidates.items())
        hits.append(ranked[0][0] if ranked else None)
    return el_accuracy(hits, [ex.gold_id for ex in examples])


def el_ablation(train: Sequence[RankingExample], test: Sequence[RankingExample],
                **train_kw) -> dict[str, list[dict]]:
    """Cumulative feature stacks and leave-one-out runs of the ranking model."""
    cumulative, leave_out = [], []
    for k in range(1, len(FEATURE_ORDER) + 1):
        sets = FEATURE_ORDER[:k]
        model = train_ranker(train, feature_sets=sets, **train_kw)
        cumulative.append({"features": "+".join(sets), "accuracy": top1_accuracy(model, test)})
    for omitted in FEATURE_ORDER:
        sets = [s for s in FEATURE_ORDER if s != omitted]
        model = train_ranker(train, feature_sets=sets, **train_kw)
        leave_out.append({"omitted": omitted, "accuracy": top1_accuracy(model, test)})
    leave_out.sort(key=lambda r: r["accuracy"])
    return {"cumulative": cumulative, "leave_one_out": leave_out}


# -- training-size sweep -------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    size: int
    method: str
    precision: float
    recall: float
    f1: float


@dataclass
class SweepReport:
    rows: list[SweepRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["size", "method", "precision", "recall", "f1"])
        for r in self.rows:
            w.writerow([r.size, r.method, f"{r.precision:.6f}", f"{r.recall:.6f}", f"{r.f1:.6f}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows]}

    def to_text(self) -> str:
        return format_table(["size", "method", "P(%)", "R(%)", "F1(%)"],
                            [[str(r.size), r.method, _pct(r.precision), _pct(r.recall), _pct(r.f1)]
                             for r in self.rows])

    def series(self, method: str) -> list[SweepRow]:
        return [r for r in self.rows if r.method == method]


def split_holdout(questions: Sequence[Question], holdout: float | int, seed: int):
    """Seeded shuffle, then (training pool, held-out) split."""
    order = list(questions)
    random.Random(seed).shuffle(order)
    n_hold = holdout if isinstance(holdout, int) else int(round(len(order) * holdout))
    if not 0 < n_hold < len(order):
        raise ValueError(f"held-out size {n_hold} leaves no training or test data")
    return order[n_hold:], order[:n_hold]


def evaluate_qed(discover: Discoverer, questions: Sequence[Question], method: str) -> QedReport:
    pred = {q.id: [m.span for m in discover(q.text, method)] for q in questions}
    return qed_metrics(pred, gold_spans(questions))


def convergence_sweep(questions: Sequence[Question], store: KgStore, sizes: Sequence[int],
                      methods: Sequence[str] = ("crf", "ensemble"), seed: int = 0,
                      df_table: Mapping[str, int] | None = None, holdout: float | int = 0.2,
                      **train_kw) -> SweepReport:
    """Train each method on nested prefixes of one shuffle and score a fixed held-out split.

    ``methods`` may contain ``kg`` (training-free), ``crf``, ``ensemble`` and
    ``iteration`` (ensemble plus lexicon iteration).
    """
    sizes = list(sizes)
    if sizes != sorted(set(sizes)) or any(s < 1 for s in sizes):
        raise ValueError("sizes must be positive and strictly increasing")
    pool, held = split_holdout(questions, holdout, seed)
    if sizes and sizes[-1] > len(pool):
        raise ValueError(f"training size {sizes[-1]} exceeds the {len(pool)} available questions")
    report = SweepReport()
    for method in methods:
        for size in sizes:
            train = pool[:size]
            model = None
            if method in ("crf", "ensemble", "iteration"):
                kind = "crf" if method == "crf" else "ensemble"
                model = train_qed(train, store, df_table, method=kind, seed=seed, **train_kw)
            elif method != "kg":
                raise ValueError(f"unknown sweep method {method!r}")
            rep = evaluate_qed(Discoverer(store, model, df_table), held, method)
            log.info("sweep %s n=%d: P=%.3f R=%.3f F1=%.3f", method, size, rep.precision, rep.recall, rep.f1)
            report.rows.append(SweepRow(size, method, rep.precision, rep.recall, rep.f1))
    return report


# -- formatting ---------------------------------------------------------------------


def _pct(x: float) -> str:
    return f"{100 * x:.2f}"


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(header, widths))]
    lines += ["  ".join(str(c).rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
