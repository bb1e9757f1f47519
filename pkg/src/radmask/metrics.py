"""Evaluation primitives: LCS ROUGE, perplexity, masked-prediction accuracy.

All logprob handling is base 2 internally; base-e inputs are converted on
ingestion. perplexity and mean_cross_entropy share one summation path, so
2**mean_cross_entropy(x) == perplexity(x) holds to the last bit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from radmask import _kernels
from radmask.errors import RadmaskError

_LN2 = math.log(2.0)
_TOKEN_RE = re.compile(r"[^\W_]+")


class EmptyReference(RadmaskError):
    """Reference side of a ROUGE comparison has no tokens."""


class EmptyInput(RadmaskError):
    """Perplexity requested over zero log-probabilities."""


class NonFiniteLogProb(RadmaskError):
    """Log-probability is NaN, infinite, or positive."""


class PositionMismatch(RadmaskError):
    """Predicted positions do not cover a record's masked positions."""


class PairingError(RadmaskError):
    """Two record sets cannot be paired one-to-one by id."""


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Longest common subsequence length over hashable items."""
    codes: dict = {}
    enc_a = [codes.setdefault(x, len(codes)) for x in a]
    enc_b = [codes.setdefault(x, len(codes)) for x in b]
    return int(_kernels.lcs_length(enc_a, enc_b))


def metric_tokens(text: str) -> list[str]:
    """Lowercase alphanumeric runs; punctuation separates and is dropped."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class RougeScore:
    recall: float
    precision: float
    f1: float


def rouge_l(reference: str, candidate: str) -> RougeScore:
    """LCS-based recall/precision and F1 = 2*LCS / (m + n).

    An empty candidate scores zero everywhere; an empty reference is a
    caller error (EmptyReference).
    """
    ref = metric_tokens(reference)
    if not ref:
        raise EmptyReference("reference has no tokens")
    cand = metric_tokens(candidate)
    if not cand:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = lcs_length(ref, cand)
    m = len(ref)
    n = len(cand)
    return RougeScore(lcs / m, lcs / n, 2.0 * lcs / (m + n))


def _as_log2(logprobs: Iterable[float], base: str) -> list[float]:
    if base not in ("2", "e"):
        raise ValueError(f"base must be '2' or 'e', got {base!r}")
    out = []
    for lp in logprobs:
        lp = float(lp)
        if not math.isfinite(lp) or lp > 0.0:
            raise NonFiniteLogProb(f"bad log-probability {lp!r}")
        out.append(lp if base == "2" else lp / _LN2)
    return out


def mean_cross_entropy(logprobs: Iterable[float], base: str = "2") -> float:
    """Mean negative base-2 log-probability (bits per token)."""
    logs = _as_log2(logprobs, base)
    if not logs:
        raise EmptyInput("no log-probabilities")
    return -math.fsum(logs) / len(logs)


def perplexity(logprobs: Iterable[float], base: str = "2") -> float:
    """2 ** mean_cross_entropy. p=1 everywhere gives 1.0 exactly."""
    return 2.0 ** mean_cross_entropy(logprobs, base)


def pair_by_id(
    left: Iterable[Mapping], right: Iterable[Mapping], left_name: str, right_name: str
) -> list[tuple[Mapping, Mapping]]:
    """One-to-one pairing by the "id" field, preserving left order.

    Raises PairingError naming up to ten offending ids per side.
    """
    lmap: dict[str, Mapping] = {}
    for rec in left:
        rid = str(rec["id"])
        if rid in lmap:
            raise PairingError(f"duplicate id in {left_name}: {rid}")
        lmap[rid] = rec
    rmap: dict[str, Mapping] = {}
    for rec in right:
        rid = str(rec["id"])
        if rid in rmap:
            raise PairingError(f"duplicate id in {right_name}: {rid}")
        rmap[rid] = rec
    missing = [rid for rid in lmap if rid not in rmap]
    extra = [rid for rid in rmap if rid not in lmap]
    if missing or extra:
        bits = []
        if missing:
            bits.append(f"ids only in {left_name}: {', '.join(missing[:10])}")
        if extra:
            bits.append(f"ids only in {right_name}: {', '.join(extra[:10])}")
        raise PairingError("; ".join(bits))
    return [(lmap[rid], rmap[rid]) for rid in lmap]


def _accuracy_rows(
    predictions: Iterable[Mapping], examples: Iterable[Mapping]
) -> list[dict]:
    """Per-record exact-match counts at masked positions.

    predictions: {"id", "predictions": [{"position", "id"}]} records;
    examples: masked records carrying mask_positions and originals. Every
    record's predictions must cover its masked positions exactly.
    """
    rows: list[dict] = []
    for pred, ex in pair_by_id(predictions, examples, "predictions", "examples"):
        rid = str(ex["id"])
        want = list(ex["mask_positions"])
        got = [(int(p["position"]), int(p["id"])) for p in pred["predictions"]]
        if sorted(p for p, _ in got) != sorted(want):
            raise PositionMismatch(
                f"record {rid}: predicted positions {sorted(p for p, _ in got)[:10]}"
                f" != masked {sorted(want)[:10]}"
            )
        truth = dict(zip(want, ex["originals"]))
        correct = sum(1 for p, pid in got if truth[p] == pid)
        rows.append(
            {
                "id": rid,
                "masked": len(want),
                "correct": correct,
                "accuracy": (correct / len(want)) if want else 0.0,
            }
        )
    return rows


def mlm_accuracy(predictions: Iterable[Mapping], examples: Iterable[Mapping]) -> float:
    """Fraction of masked positions predicted exactly, pooled over records."""
    rows = _accuracy_rows(predictions, examples)
    total = sum(r["masked"] for r in rows)
    return (sum(r["correct"] for r in rows) / total) if total else 0.0


@dataclass
class EvalReport:
    """Per-record rows plus corpus-level aggregate for one metric kind."""

    kind: str
    rows: list[dict]
    aggregate: dict

    def format_table(self, max_rows: int = 20) -> str:
        if not self.rows:
            return f"{self.kind}: no records"
        cols = list(self.rows[0].keys())
        widths = {c: max(len(c), *(len(_cell(r[c])) for r in self.rows[:max_rows])) for c in cols}
        lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
        lines.append("  ".join("-" * widths[c] for c in cols))
        for row in self.rows[:max_rows]:
            lines.append("  ".join(_cell(row[c]).ljust(widths[c]) for c in cols))
        if len(self.rows) > max_rows:
            lines.append(f"... {len(self.rows) - max_rows} more records")
        agg = ", ".join(f"{k}={_cell(v)}" for k, v in self.aggregate.items())
        lines.append(f"aggregate: {agg}")
        return "\n".join(lines)


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def evaluate_rouge(references: Iterable[Mapping], hypotheses: Iterable[Mapping]) -> EvalReport:
    """ROUGE-L over paired corpora.

    Reference text comes from "target" (pair corpora) or "text"; hypothesis
    text from "text" or "target". A numeric "score" field on hypothesis
    records is carried through and averaged.
    """
    rows = []
    scores = []
    for ref, hyp in pair_by_id(references, hypotheses, "references", "hypotheses"):
        ref_text = ref.get("target", ref.get("text", ""))
        hyp_text = hyp.get("text", hyp.get("target", ""))
        s = rouge_l(ref_text, hyp_text)
        row = {
            "id": str(ref["id"]),
            "rouge_l_recall": s.recall,
            "rouge_l_precision": s.precision,
            "rouge_l_f1": s.f1,
        }
        if isinstance(hyp.get("score"), (int, float)):
            row["score"] = float(hyp["score"])
            scores.append(float(hyp["score"]))
        rows.append(row)
    n = len(rows)
    aggregate = {
        "records": n,
        "rouge_l_recall": sum(r["rouge_l_recall"] for r in rows) / n if n else 0.0,
        "rouge_l_precision": sum(r["rouge_l_precision"] for r in rows) / n if n else 0.0,
        "rouge_l_f1": sum(r["rouge_l_f1"] for r in rows) / n if n else 0.0,
    }
    if scores:
        aggregate["score"] = sum(scores) / len(scores)
    return EvalReport("rouge", rows, aggregate)


def evaluate_perplexity(records: Iterable[Mapping], base: str = "2") -> EvalReport:
    """Per-record and corpus perplexity from {"id","logprobs"} records.

    The corpus number pools every token, weighting records by length.
    """
    rows = []
    pooled: list[float] = []
    for rec in records:
        logs = _as_log2(rec["logprobs"], str(rec.get("base", base)))
        if not logs:
            raise EmptyInput(f"record {rec.get('id')!r} has no log-probabilities")
        rows.append({
            "id": str(rec["id"]),
            "tokens": len(logs),
            "perplexity": perplexity(logs),
        })
        pooled.extend(logs)
    if not pooled:
        raise EmptyInput("no log-probabilities in corpus")
    ce = -math.fsum(pooled) / len(pooled)
    aggregate = {
        "records": len(rows),
        "tokens": len(pooled),
        "mean_cross_entropy": ce,
        "perplexity": 2.0 ** ce,
    }
    return EvalReport("ppl", rows, aggregate)


def evaluate_mlm_accuracy(
    predictions: Iterable[Mapping], examples: Iterable[Mapping]
) -> EvalReport:
    rows = _accuracy_rows(predictions, examples)
    positions = sum(r["masked"] for r in rows)
    aggregate = {
        "records": len(rows),
        "positions": positions,
        "accuracy": (sum(r["correct"] for r in rows) / positions) if positions else 0.0,
    }
    return EvalReport("mlm-acc", rows, aggregate)
