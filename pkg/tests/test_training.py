import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plstm.errors import NumericError, UsageError
from plstm.networks import LstmModel, PlstmModel
from plstm.training import (EpochRecord, GRADCHECK_ARCHITECTURES, Hyperparams,
                            bptt_gradients, cross_entropy, finite_diff, gradcheck,
                            random_instance, relative_error, sample_loss, sgd_step, train,
                            write_history_csv)


class TestCrossEntropy:
    def test_known_value(self):
        expected = math.log(math.exp(1) + math.exp(2) + math.exp(3)) - 3
        assert cross_entropy([1.0, 2.0, 3.0], 2) == pytest.approx(expected, abs=1e-15)
        assert cross_entropy([1.0, 2.0, 3.0], 2) == pytest.approx(0.40760596444, abs=1e-11)

    def test_large_logits_stay_finite(self):
        assert math.isfinite(cross_entropy([1000.0, -1000.0], 1))

    def test_target_range(self):
        with pytest.raises(UsageError):
            cross_entropy([0.0, 1.0], 2)

    @given(st.lists(st.floats(-30, 30), min_size=2, max_size=6), st.data())
    def test_non_negative(self, logits, data):
        t = data.draw(st.integers(0, len(logits) - 1))
        assert cross_entropy(logits, t) >= 0


class TestGradients:
    @pytest.mark.parametrize("arch", GRADCHECK_ARCHITECTURES)
    def test_gradcheck(self, arch):
        r = gradcheck(arch, range(2))
        assert r.max_rel_error < 1e-4

    def test_corruption_is_detected(self):
        r = gradcheck("lstm", [0], corrupt=True)
        assert r.max_rel_error > 1e-4
        assert r.worst_param == ("cell.wx", (0, 0, 0))

    def test_loss_matches_forward(self):
        model, sample = random_instance("plstm-2", 0)
        loss, _ = bptt_gradients(model, sample)
        assert loss == sample_loss(model, sample)

    def test_output_bias_gradient_is_softmax_residual(self):
        model, sample = random_instance("lstm", 3)
        _, g = bptt_gradients(model, sample)
        assert abs(g.b_y.sum()) < 1e-14
        assert g.b_y[sample[1]] < 0

    def test_finite_diff_eps(self):
        model, sample = random_instance("lstm", 0, hidden_size=2)
        with pytest.raises(UsageError):
            finite_diff(model, sample, eps=0)

    def test_relative_error_floor(self):
        np.testing.assert_array_equal(relative_error([0.0, 1.0], [0.0, 1.0]), [0.0, 0.0])
        assert relative_error([1e-9], [0.0])[0] == pytest.approx(0.1)


class TestSgd:
    def test_plain_step(self):
        m = LstmModel(2, 2, 2)
        g = m.zeros_like()
        g.theta[0] = 3.0
        sgd_step(m, g, Hyperparams(learning_rate=0.1))
        assert m.theta[0] == pytest.approx(-0.3)

    def test_clip_to_norm(self):
        m = LstmModel(2, 2, 2)
        g = m.zeros_like()
        g.theta[:2] = [30.0, 40.0]  # norm 50 -> scaled to 5
        sgd_step(m, g, Hyperparams(learning_rate=1.0, clip_norm=5.0))
        np.testing.assert_allclose(m.theta[:2], [-3.0, -4.0])

    def test_non_finite(self):
        m = LstmModel(2, 2, 2)
        g = m.zeros_like()
        g.theta[4] = np.nan
        with pytest.raises(NumericError, match="cell.wx"):
            sgd_step(m, g, Hyperparams())

    @pytest.mark.parametrize("kwargs", [dict(learning_rate=0), dict(max_epochs=0),
                                        dict(patience=-1), dict(clip_norm=-1.0)])
    def test_hyperparams_validated(self, kwargs):
        with pytest.raises(UsageError):
            Hyperparams(**kwargs)


def copy_task(n, rng, vocab=4, length=3):
    out = []
    for _ in range(n):
        seq = list(rng.integers(0, vocab, size=length))
        out.append(([seq], int(seq[-1])))
    return out


class TestTrain:
    def test_patience_zero_runs_one_epoch(self):
        rng = np.random.default_rng(0)
        data = copy_task(20, rng)
        _, hist = train(LstmModel.init(4, 3, 4, 0), data, data,
                        Hyperparams(max_epochs=10, patience=0))
        assert [r.epoch for r in hist] == [1]

    def test_input_model_untouched_and_deterministic(self):
        rng = np.random.default_rng(1)
        data = copy_task(30, rng)
        init = LstmModel.init(4, 3, 4, 0)
        before = init.theta.copy()
        hp = Hyperparams(max_epochs=3, patience=3, seed=4)
        a, ha = train(init, data, data, hp)
        b, hb = train(init, data, data, hp)
        np.testing.assert_array_equal(init.theta, before)
        assert a.theta.tobytes() == b.theta.tobytes()
        assert ha == hb

    def test_keeps_best_epoch(self):
        rng = np.random.default_rng(2)
        data = copy_task(40, rng)
        best, hist = train(PlstmModel.init([4], [4], 4, 1), data, data,
                           Hyperparams(max_epochs=6, patience=6, learning_rate=2.0))
        from plstm.training import error_rate_on
        assert error_rate_on(best, data) == min(r.valid_error_rate for r in hist)

    def test_empty_folds(self):
        with pytest.raises(UsageError):
            train(LstmModel(2, 2, 2), [], [([[0]], 0)], Hyperparams())

    def test_history_csv(self, tmp_path):
        path = tmp_path / "h.csv"
        write_history_csv(path, [EpochRecord(1, 0.5, 0.25), EpochRecord(2, 0.1, 0.125)])
        assert path.read_text() == ("epoch,train_loss,valid_error_rate\n"
                                    "1,0.5,0.25\n2,0.1,0.125\n")


def test_two_class_last_token_task_is_learned():
    rng = np.random.default_rng(6)
    data = copy_task(60, rng, vocab=2, length=2)
    valid = copy_task(30, rng, vocab=2, length=2)
    _, hist = train(LstmModel.init(2, 8, 2, 0), data, valid,
                    Hyperparams(max_epochs=50, patience=50))
    assert min(r.valid_error_rate for r in hist) == 0.0
