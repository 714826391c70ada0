import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from plstm.errors import UsageError
from plstm.evaluation import (ConfusionMatrix, accuracy, confusion, emit_report, error_rate,
                              evaluate, least_frequent, macro_f1, per_class_scores, percent)


class TestConfusion:
    def test_counts(self):
        cm = confusion([0, 1, 1, 2], [0, 1, 2, 2], 3)
        np.testing.assert_array_equal(cm.counts, [[1, 0, 0], [0, 1, 0], [0, 1, 1]])
        assert cm.total == 4

    def test_errors(self):
        with pytest.raises(UsageError):
            confusion([0, 1], [0], 2)
        with pytest.raises(UsageError):
            confusion([0, 3], [0, 1], 3)
        with pytest.raises(UsageError):
            ConfusionMatrix(np.zeros((2, 3)))
        with pytest.raises(UsageError):
            ConfusionMatrix([[-1, 0], [0, 0]])

    def test_add_and_csv(self):
        a = confusion([0, 1], [0, 0], 2, ["x", "y"])
        b = a + a
        assert b.to_csv() == "gold\\pred,x,y\nx,2,2\ny,0,0\n"


class TestMetrics:
    def test_hand_example(self):
        # gold class 0: 3 samples, 2 right; class 1: 1 sample, right; class 2 never predicted
        cm = ConfusionMatrix([[2, 1, 0], [0, 1, 0], [1, 0, 0]])
        p, r, f1 = per_class_scores(cm)
        np.testing.assert_allclose(p, [2 / 3, 1 / 2, 0])
        np.testing.assert_allclose(r, [2 / 3, 1, 0])
        np.testing.assert_allclose(f1, [2 / 3, 2 / 3, 0])
        assert macro_f1(cm) == pytest.approx(4 / 9)
        assert error_rate(cm) == pytest.approx(2 / 5)

    def test_error_rate_relation(self):
        counts = np.zeros((2, 2), dtype=int)
        counts[0, 0], counts[1, 1], counts[0, 1] = 500, 285, 215
        cm = ConfusionMatrix(counts)
        assert error_rate(cm) == pytest.approx(0.215, abs=1e-12)
        assert accuracy(cm) == pytest.approx(0.785, abs=1e-12)

    def test_empty_matrix(self):
        with pytest.raises(UsageError):
            error_rate(ConfusionMatrix(np.zeros((2, 2))))

    def test_exclusion(self):
        cm = ConfusionMatrix([[5, 0, 0], [0, 5, 0], [1, 0, 0]])
        assert macro_f1(cm, excluded={2}) > macro_f1(cm)
        with pytest.raises(UsageError):
            macro_f1(cm, excluded={0, 1, 2})

    @given(st.lists(st.integers(0, 5), min_size=2, max_size=8))
    def test_least_frequent(self, counts):
        k = len(counts) // 2
        chosen = least_frequent(counts, k)
        assert len(chosen) == k
        rest = set(range(len(counts))) - chosen
        if chosen and rest:
            assert max(counts[c] for c in chosen) <= min(counts[c] for c in rest)

    def test_least_frequent_tie_prefers_higher_index(self):
        assert least_frequent([3, 1, 1, 1], 2) == {2, 3}
        with pytest.raises(UsageError):
            least_frequent([1, 2], 2)

    def test_evaluate(self):
        cm = ConfusionMatrix([[4, 0, 0], [0, 2, 1], [0, 0, 1]], ["a", "b", "c"])
        rep = evaluate(cm, exclude_k=1)
        assert rep.excluded == ["c"]
        assert rep.n_samples == 8
        assert rep.macro_f1_excluded == pytest.approx(macro_f1(cm, {2}))


@given(st.integers(2, 7), st.data())
def test_metrics_against_direct_formulas(k, data):
    counts = data.draw(st.lists(st.lists(st.integers(0, 30), min_size=k, max_size=k),
                                min_size=k, max_size=k))
    if sum(map(sum, counts)) == 0:
        counts[0][0] = 1
    cm = ConfusionMatrix(counts)
    _, _, f1 = oracles.confusion_scores(counts)
    total = sum(map(sum, counts))
    assert macro_f1(cm) == pytest.approx(sum(f1) / k, abs=1e-12)
    assert error_rate(cm) == pytest.approx(1 - sum(counts[i][i] for i in range(k)) / total,
                                           abs=1e-12)
    assert accuracy(cm) + error_rate(cm) == pytest.approx(1.0, abs=1e-15)


class TestReport:
    def test_percent_half_up(self):
        assert percent(0.21445) == "21.45"
        assert percent(0.12345) == "12.35"
        assert percent(1.0) == "100.00"
        assert percent(0.0) == "0.00"

    def test_emit(self, tmp_path):
        cm = ConfusionMatrix([[3, 1], [0, 2]], ["x", "y"])
        rep = evaluate(cm, exclude_k=1)
        md, csv_text = emit_report({("LSTM", 2): rep, ("n-gram", 1): rep, ("LSTM", 1): rep},
                                   tmp_path)
        lines = csv_text.splitlines()
        assert lines[0] == "model,seq_size,f1,error_rate,f1_excluded"
        assert [r.split(",")[:2] for r in lines[1:]] == [["LSTM", "1"], ["n-gram", "1"], ["LSTM", "2"]]
        assert "| Seq. size | LSTM | n-gram |" in md
        assert md.count("### ") == 3
        assert (tmp_path / "metrics.csv").read_text() == csv_text
        assert (tmp_path / "metrics.md").read_text() == md

    def test_emit_nothing(self):
        with pytest.raises(UsageError):
            emit_report({})
