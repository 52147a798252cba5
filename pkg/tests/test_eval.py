"""Detection metrics against brute-force oracles, plus the energy-gap table."""

import numpy as np
import pytest

from balen import (
    Dataset,
    EmptyInput,
    InvalidArgument,
    Mlp,
    ScoreSet,
    accuracy,
    auroc,
    average_precision,
    energy_gap_table,
    evaluate,
    fpr_at_tpr,
    report_to_doc,
    score_dataset,
)


def auroc_oracle(id_scores, ood_scores):
    """All-pairs Mann-Whitney count, ties worth one half."""
    total = 0.0
    for o in ood_scores:
        for i in id_scores:
            if o > i:
                total += 1.0
            elif o == i:
                total += 0.5
    return total / (len(id_scores) * len(ood_scores))


def ap_oracle(id_scores, ood_scores):
    """Explicit precision-recall walk; ID wins tie groups (pessimistic)."""
    items = [(s, 0) for s in id_scores] + [(s, 1) for s in ood_scores]
    items.sort(key=lambda t: (-t[0], t[1]))
    pos_seen = 0
    total = 0.0
    for k, (_, is_ood) in enumerate(items, start=1):
        if is_ood:
            pos_seen += 1
            total += pos_seen / k
    return total / len(ood_scores)


def fpr_oracle(id_scores, ood_scores, level):
    """Scan every candidate threshold, keep the loosest reaching the TPR."""
    id_scores = np.asarray(id_scores)
    ood_scores = np.asarray(ood_scores)
    best = None
    for t in sorted(set(np.concatenate([id_scores, ood_scores])), reverse=True):
        tpr = np.mean(ood_scores >= t)
        if tpr >= level - 1e-12:
            best = t
            break
    if best is None:
        best = min(np.concatenate([id_scores, ood_scores]))
    return float(np.mean(id_scores >= best))


def identity_model(k):
    return Mlp(dims=(k, k), activation="tanh",
               weights=[np.eye(k)], biases=[np.zeros(k)], frozen=[False])


def random_score_set(rng):
    """Score vectors with deliberate tie mass (quantized values)."""
    n = int(rng.integers(1, 200))
    m = int(rng.integers(1, 200))
    ids = np.round(rng.normal(0, 1, size=n), 1)
    oods = np.round(rng.normal(rng.uniform(-1, 1), 1, size=m), 1)
    return ids, oods


class TestScoreSet:
    def test_rejects_empty_side(self):
        with pytest.raises(EmptyInput):
            ScoreSet([], [1.0])
        with pytest.raises(EmptyInput):
            ScoreSet([1.0], [])

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidArgument):
            ScoreSet([np.nan], [1.0])


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc(ScoreSet([-10, -8], [-6, -5])) == 1.0

    def test_three_of_four_pairs(self):
        assert auroc(ScoreSet([-10, -8], [-9, -2])) == pytest.approx(0.75, abs=1e-12)

    def test_identical_multisets(self):
        assert auroc(ScoreSet([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])) == pytest.approx(0.5, abs=1e-12)

    def test_oracle_equivalence(self, rng):
        for _ in range(200):
            ids, oods = random_score_set(rng)
            want = auroc_oracle(ids, oods)
            assert auroc(ScoreSet(ids, oods)) == pytest.approx(want, abs=1e-12)

    def test_monotone_invariance(self, rng):
        ids, oods = random_score_set(rng)
        base = auroc(ScoreSet(ids, oods))
        assert auroc(ScoreSet(2 * ids + 1, 2 * oods + 1)) == base
        assert auroc(ScoreSet(np.exp(ids), np.exp(oods))) == base

    def test_complement_symmetry_no_ties(self, rng):
        ids = rng.normal(0, 1, size=50)
        oods = rng.normal(0.5, 1, size=60)
        a = auroc(ScoreSet(ids, oods))
        b = auroc(ScoreSet(oods, ids))
        assert a + b == pytest.approx(1.0, abs=1e-12)


class TestAveragePrecision:
    def test_perfect_two_over_two(self):
        assert average_precision(ScoreSet([0.0, 0.1], [5.0, 6.0])) == 1.0

    def test_hand_walk(self):
        want = (1 + 2 / 3) / 2
        assert average_precision(ScoreSet([2.0], [3.0, 1.0])) == pytest.approx(want, abs=1e-12)

    def test_worst_case_closed_form(self):
        # p positives all ranked below n negatives
        for p, n in [(3, 5), (1, 10), (7, 2)]:
            ids = np.arange(n) + 100.0
            oods = np.arange(p) * 1.0
            want = sum(k / (n + k) for k in range(1, p + 1)) / p
            assert average_precision(ScoreSet(ids, oods)) == pytest.approx(want, abs=1e-12)

    def test_all_tied_pessimistic(self):
        # one tie group: ID retrieved first, positives trail
        ids = np.zeros(4)
        oods = np.zeros(2)
        want = (5 / 5 * 0 + 1 / 5 + 2 / 6) / 2  # positives land at ranks 5 and 6
        assert average_precision(ScoreSet(ids, oods)) == pytest.approx(want, abs=1e-12)

    def test_oracle_equivalence(self, rng):
        for _ in range(200):
            ids, oods = random_score_set(rng)
            want = ap_oracle(ids, oods)
            assert average_precision(ScoreSet(ids, oods)) == pytest.approx(want, abs=1e-12)

    def test_monotone_invariance(self, rng):
        ids, oods = random_score_set(rng)
        base = average_precision(ScoreSet(ids, oods))
        assert average_precision(ScoreSet(2 * ids + 1, 2 * oods + 1)) == base


class TestFprAtTpr:
    def test_separated_case(self):
        assert fpr_at_tpr(ScoreSet([-10, -9, -8, -7], [-6, -5]), 0.95) == 0.0

    def test_identical_multisets_full_recall(self):
        s = ScoreSet([1.0, 2.0], [1.0, 2.0])
        assert fpr_at_tpr(s, 1.0) == 1.0

    def test_single_ood_below_everything(self):
        assert fpr_at_tpr(ScoreSet([0.0, 1.0, 2.0], [-5.0]), 0.95) == 1.0

    def test_level_validation(self):
        s = ScoreSet([0.0], [1.0])
        for bad in (0.0, -0.5, 1.5):
            with pytest.raises(InvalidArgument):
                fpr_at_tpr(s, bad)

    def test_oracle_equivalence(self, rng):
        for _ in range(200):
            ids, oods = random_score_set(rng)
            level = float(rng.choice([0.5, 0.8, 0.9, 0.95, 1.0]))
            want = fpr_oracle(ids, oods, level)
            assert fpr_at_tpr(ScoreSet(ids, oods), level) == pytest.approx(want, abs=1e-12)

    def test_monotone_invariance(self, rng):
        ids, oods = random_score_set(rng)
        base = fpr_at_tpr(ScoreSet(ids, oods), 0.95)
        assert fpr_at_tpr(ScoreSet(2 * ids + 1, 2 * oods + 1), 0.95) == base


class TestAccuracy:
    def test_one_hot_model_perfect(self):
        labels = np.array([0, 1, 2, 1, 0])
        feats = 10.0 * np.eye(3)[labels]
        d = Dataset(feats, labels, "id_test")
        assert accuracy(identity_model(3), d) == 1.0

    def test_constant_model_ties_to_class_zero(self):
        m = Mlp(dims=(2, 2), activation="tanh",
                weights=[np.zeros((2, 2))], biases=[np.zeros(2)], frozen=[False])
        d = Dataset(np.random.default_rng(0).normal(size=(10, 2)),
                    np.repeat([0, 1], 5), "id_test")
        assert accuracy(m, d) == 0.5

    def test_hand_case_two_thirds(self):
        feats = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        d = Dataset(feats, np.array([0, 1, 1]), "id_test")
        assert accuracy(identity_model(2), d) == pytest.approx(2 / 3, abs=1e-12)

    def test_unlabeled_rejected(self):
        d = Dataset(np.zeros((2, 2)), np.array([-1, -1]), "ood_test")
        with pytest.raises(InvalidArgument):
            accuracy(identity_model(2), d)


def logits_row(energy, cls, k=2):
    """Feature row for the identity model: argmax cls, energy ~ target."""
    row = np.full(k, -40.0)
    row[cls] = -energy
    return row


class TestEnergyGap:
    def test_identical_distributions_zero_gap(self):
        feats_id = np.array([logits_row(-10, 0), logits_row(-7, 1)])
        feats_ood = np.array([logits_row(-10, 0), logits_row(-7, 1)])
        id_test = Dataset(feats_id, np.array([0, 1]), "id_test")
        ood_test = Dataset(feats_ood, np.array([-1, -1]), "ood_test")
        table = energy_gap_table(identity_model(2), id_test, ood_test)
        for row in table.rows:
            assert row.gap == pytest.approx(0.0, abs=1e-9)
        assert table.sum_total_gap == pytest.approx(0.0, abs=1e-9)

    def test_hand_arithmetic(self):
        id_test = Dataset(np.array([logits_row(-10, 0), logits_row(-8, 0)]),
                          np.array([0, 0]), "id_test")
        ood_test = Dataset(np.array([logits_row(-5, 0)]),
                           np.array([-1]), "ood_test")
        table = energy_gap_table(identity_model(2), id_test, ood_test)
        row0 = table.rows[0]
        assert row0.gap == pytest.approx(-4.0, abs=1e-9)
        assert row0.n_out == 1
        assert row0.total_gap == pytest.approx(-4.0, abs=1e-9)

    def test_missing_class_contributes_zero(self):
        id_test = Dataset(np.array([logits_row(-10, 0), logits_row(-8, 0)]),
                          np.array([0, 0]), "id_test")
        ood_test = Dataset(np.array([logits_row(-5, 0)]),
                           np.array([-1]), "ood_test")
        table = energy_gap_table(identity_model(2), id_test, ood_test)
        row1 = table.rows[1]
        assert row1.gap is None
        assert row1.n_out == 0
        assert row1.total_gap == 0.0
        assert table.sum_total_gap == pytest.approx(-4.0, abs=1e-9)

    def test_total_gap_consistency(self, rng):
        # one-pass grand sum equals the per-class accumulation
        k = 4
        feats_id = rng.normal(0, 3, size=(60, k))
        labels = rng.integers(0, k, size=60)
        feats_ood = rng.normal(0, 3, size=(80, k))
        id_test = Dataset(feats_id, labels, "id_test")
        ood_test = Dataset(feats_ood, np.full(80, -1), "ood_test")
        table = energy_gap_table(identity_model(k), id_test, ood_test)
        assert table.sum_total_gap == pytest.approx(
            sum(r.total_gap for r in table.rows), abs=1e-9)
        for r in table.rows:
            if r.gap is not None:
                assert r.total_gap == r.gap * r.n_out

    def test_empty_side_rejected(self):
        id_test = Dataset(np.zeros((1, 2)), np.array([0]), "id_test")
        with pytest.raises(EmptyInput):
            energy_gap_table(identity_model(2), id_test,
                             Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int), "ood_test"))


class TestEvaluate:
    def test_separated_energies(self):
        id_test = Dataset(np.array([logits_row(-12, 0), logits_row(-11, 1)]),
                          np.array([0, 1]), "id_test")
        ood_test = Dataset(np.array([logits_row(-3, 0), logits_row(-2, 1)]),
                           np.array([-1, -1]), "ood_test")
        report = evaluate(identity_model(2), id_test, ood_test, score="energy")
        assert report.auroc == 1.0
        assert report.fpr95 == 0.0
        assert report.ap == 1.0
        assert report.acc == 1.0

    def test_random_scores_near_half(self, rng):
        feats_id = rng.normal(0, 1, size=(10000, 2))
        feats_ood = rng.normal(0, 1, size=(10000, 2))
        id_test = Dataset(feats_id, rng.integers(0, 2, size=10000), "id_test")
        ood_test = Dataset(feats_ood, np.full(10000, -1), "ood_test")
        report = evaluate(identity_model(2), id_test, ood_test)
        assert report.auroc == pytest.approx(0.5, abs=0.02)

    def test_msp_negated_orientation(self, rng):
        # confident ID, ambiguous OOD: both scores should separate the sets
        feats_id = 8.0 * np.eye(2)[rng.integers(0, 2, size=100)]
        feats_ood = rng.normal(0, 0.05, size=(100, 2))
        id_test = Dataset(feats_id, np.argmax(feats_id, axis=1), "id_test")
        ood_test = Dataset(feats_ood, np.full(100, -1), "ood_test")
        model = identity_model(2)
        for score in ("energy", "msp"):
            s_id = score_dataset(model, id_test, score)
            s_ood = score_dataset(model, ood_test, score)
            assert auroc(ScoreSet(s_id, s_ood)) > 0.99

    def test_unknown_score_rejected(self):
        d = Dataset(np.zeros((1, 2)), np.array([0]), "id_test")
        with pytest.raises(InvalidArgument):
            score_dataset(identity_model(2), d, "entropy")

    def test_config_echo_and_doc_shape(self):
        id_test = Dataset(np.array([logits_row(-12, 0)]), np.array([0]), "id_test")
        ood_test = Dataset(np.array([logits_row(-3, 0)]), np.array([-1]), "ood_test")
        report = evaluate(identity_model(2), id_test, ood_test,
                          seed=3, config={"lam": 0.1})
        assert report.seed == 3
        assert report.config == {"lam": 0.1}
        doc = report_to_doc(report)
        assert set(doc) == {"auroc", "ap", "fpr95", "acc", "energy_gap",
                            "sum_total_gap", "score", "T", "seed", "config"}
        assert doc["config"] == {"lam": 0.1}
        assert {"class", "gap", "n_out", "total_gap"} <= set(doc["energy_gap"][0])
        for key in ("auroc", "ap", "fpr95", "acc"):
            assert 0.0 <= doc[key] <= 1.0
