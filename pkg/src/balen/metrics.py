"""Detection metrics, classification accuracy, and the class-wise energy gap.

Convention, enforced here and nowhere else: OOD is the positive class and
higher score means more OOD. Energy scores are used directly; max-softmax
confidence is negated before it enters a ScoreSet.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core_math import energy_score_batch, msp_score_batch
from .errors import EmptyInput, InvalidArgument


@dataclass
class ScoreSet:
    """Detection scores for the ID and OOD sides of a test set."""

    id_scores: np.ndarray
    ood_scores: np.ndarray

    def __post_init__(self):
        self.id_scores = np.asarray(self.id_scores, dtype=np.float64).ravel()
        self.ood_scores = np.asarray(self.ood_scores, dtype=np.float64).ravel()
        if self.id_scores.size == 0 or self.ood_scores.size == 0:
            raise EmptyInput("both ID and OOD scores must be nonempty")
        if not (np.isfinite(self.id_scores).all() and np.isfinite(self.ood_scores).all()):
            raise InvalidArgument("scores must be finite")


def _average_ranks(values):
    """1-based ranks, ties sharing the average rank of their group."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(scores):
    """P(ood score > id score) over all pairs, ties worth one half."""
    n, m = scores.id_scores.size, scores.ood_scores.size
    ranks = _average_ranks(np.concatenate([scores.id_scores, scores.ood_scores]))
    r_ood = ranks[n:].sum()
    return (r_ood - m * (m + 1) / 2.0) / (n * m)


def average_precision(scores):
    """Area under precision-recall with OOD positive.

    Ties are broken pessimistically: within a tie group ID samples are
    retrieved first, so equal scores can only lower the value.
    """
    n, m = scores.id_scores.size, scores.ood_scores.size
    all_scores = np.concatenate([scores.id_scores, scores.ood_scores])
    is_ood = np.concatenate([np.zeros(n, dtype=np.int64), np.ones(m, dtype=np.int64)])
    order = np.lexsort((is_ood, -all_scores))
    hits = is_ood[order]
    cum_pos = np.cumsum(hits)
    k = np.arange(1, n + m + 1)
    return float(np.sum((cum_pos / k) * hits) / m)


def fpr_at_tpr(scores, level):
    """False-positive rate at the loosest threshold reaching the target TPR.

    Thresholds are actual scores (no interpolation): t is the largest score
    with TPR(>= t) >= level, which is the ceil(level*m)-th largest OOD score.
    """
    if not 0.0 < level <= 1.0:
        raise InvalidArgument(f"level must be in (0, 1], got {level}")
    m = scores.ood_scores.size
    # tiny slack so an exactly-integer level*m is not pushed up by float dust
    c = max(1, math.ceil(level * m - 1e-9))
    t = np.sort(scores.ood_scores)[m - c]
    return float(np.mean(scores.id_scores >= t))


def accuracy(model, dataset):
    """Fraction of argmax-correct predictions on a labeled dataset."""
    from .mlp import forward

    if dataset.n == 0:
        raise EmptyInput("empty dataset")
    if dataset.labels.min() < 0:
        raise InvalidArgument("accuracy needs a labeled ID dataset")
    pred = np.argmax(forward(model, dataset.features), axis=1)
    return float(np.mean(pred == dataset.labels))


@dataclass
class GapRow:
    class_index: int
    mean_id_energy: float
    mean_ood_energy: float
    gap: float
    n_out: int
    total_gap: float


@dataclass
class EnergyGapTable:
    rows: list
    sum_total_gap: float


def energy_gap_table(model, id_test, ood_test, T=1.0):
    """Per-class mean-energy gaps, ID grouped by label, OOD by prediction.

    gap_i = mean ID energy of class i minus mean OOD energy of samples the
    model assigns to class i; total_gap_i scales that by the OOD count. A
    class missing on either side reports a null gap and total_gap 0.
    """
    from .mlp import forward

    if id_test.n == 0 or ood_test.n == 0:
        raise EmptyInput("gap table needs nonempty ID and OOD sets")
    k = model.class_count
    e_id = energy_score_batch(forward(model, id_test.features), T)
    logits_out = forward(model, ood_test.features)
    e_ood = energy_score_batch(logits_out, T)
    pred_out = np.argmax(logits_out, axis=1)

    rows = []
    total = 0.0
    for i in range(k):
        id_mask = id_test.labels == i
        out_mask = pred_out == i
        n_out = int(out_mask.sum())
        mean_id = float(e_id[id_mask].mean()) if id_mask.any() else None
        mean_ood = float(e_ood[out_mask].mean()) if n_out else None
        if mean_id is None or mean_ood is None:
            rows.append(GapRow(i, mean_id, mean_ood, None, n_out, 0.0))
        else:
            gap = mean_id - mean_ood
            rows.append(GapRow(i, mean_id, mean_ood, gap, n_out, gap * n_out))
            total += gap * n_out
    return EnergyGapTable(rows=rows, sum_total_gap=total)


@dataclass
class EvalReport:
    auroc: float
    ap: float
    fpr95: float
    acc: float
    energy_gap: EnergyGapTable
    score: str
    T: float
    seed: int = None
    config: dict = field(default_factory=dict)


def score_dataset(model, dataset, score, T=1.0):
    """Detection scores under the higher-is-more-OOD convention."""
    from .mlp import forward

    logits = forward(model, dataset.features)
    if score == "energy":
        return energy_score_batch(logits, T)
    if score == "msp":
        return -msp_score_batch(logits)
    raise InvalidArgument(f"unknown score type {score!r}")


def evaluate(model, id_test, ood_test, score="energy", T=1.0, seed=None, config=None):
    """Full detection report: AUROC, AP, FPR@95%TPR, accuracy, gap table."""
    scores = ScoreSet(score_dataset(model, id_test, score, T),
                      score_dataset(model, ood_test, score, T))
    return EvalReport(
        auroc=float(auroc(scores)),
        ap=float(average_precision(scores)),
        fpr95=float(fpr_at_tpr(scores, 0.95)),
        acc=float(accuracy(model, id_test)),
        energy_gap=energy_gap_table(model, id_test, ood_test, T),
        score=score,
        T=T,
        seed=seed,
        config=dict(config) if config else {},
    )


def report_to_doc(report):
    """JSON-ready dict with the fixed external key names."""
    return {
        "auroc": report.auroc,
        "ap": report.ap,
        "fpr95": report.fpr95,
        "acc": report.acc,
        "energy_gap": [
            {"class": r.class_index, "gap": r.gap, "n_out": r.n_out,
             "total_gap": r.total_gap}
            for r in report.energy_gap.rows
        ],
        "sum_total_gap": report.energy_gap.sum_total_gap,
        "score": report.score,
        "T": report.T,
        "seed": report.seed,
        "config": report.config,
    }


def report_csv_row(report, extra=None):
    """Flat key/value pair lists for the sweep aggregation CSV."""
    cols = dict(extra or {})
    cols.update(auroc=report.auroc, ap=report.ap, fpr95=report.fpr95,
                acc=report.acc, sum_total_gap=report.energy_gap.sum_total_gap)
    return list(cols.keys()), list(cols.values())
