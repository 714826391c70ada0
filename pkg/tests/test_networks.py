import json

import numpy as np
import pytest

import oracles
from plstm.errors import ShapeError, SynchronizationError, UsageError, VocabularyError
from plstm.networks import (BlstmModel, LstmModel, PlstmModel, blstm_forward, forward,
                            logits_batch, lstm_forward, network_from_dict, network_to_dict,
                            plstm_forward, predict, predict_batch)


def randomize(m, seed, scale=0.5):
    m.theta[...] = np.random.default_rng(seed).uniform(-scale, scale, m.theta.size)
    return m


class TestLayout:
    def test_views_alias_theta(self):
        m = LstmModel(3, 2, 4)
        m.w_hy[1, 0] = 5.0
        assert 5.0 in m.theta
        m.theta[:] = 0
        assert m.w_hy[1, 0] == 0

    def test_plstm_one_stream_layout_matches_lstm(self):
        a = LstmModel(5, 3, 4)
        b = PlstmModel([5], [3], 4)
        assert [s for _, s in a.layout()] == [s for _, s in b.layout()]

    def test_locate(self):
        m = LstmModel(2, 3, 4)
        name, idx = m.locate(m.theta.size - 1)
        assert (name, idx) == ("b_y", (3,))
        assert m.locate(0) == ("cell.wx", (0, 0, 0))
        with pytest.raises(IndexError):
            m.locate(m.theta.size)

    def test_theta_checked(self):
        with pytest.raises(ShapeError):
            LstmModel(2, 2, 2, theta=np.zeros(3))
        with pytest.raises(ShapeError):
            LstmModel(2, 2, 2, theta=np.zeros(LstmModel(2, 2, 2).theta.size, dtype=np.float32))

    def test_init_is_seeded(self):
        a = PlstmModel.init([4, 4], [3, 3], 5, seed=7)
        b = PlstmModel.init([4, 4], [3, 3], 5, seed=7)
        np.testing.assert_array_equal(a.theta, b.theta)
        np.testing.assert_array_equal(a.b_y, 0.0)
        assert not np.array_equal(a.streams[0].cell.wx, a.streams[1].cell.wx)


class TestForwardOracles:
    def test_lstm(self):
        for seed in range(5):
            m = randomize(LstmModel(4, 3, 5), seed)
            seq = [1, 0, 3, 3, 2]
            logits, trace = lstm_forward(m, seq)
            np.testing.assert_allclose(logits, oracles.lstm_logits(m, seq), rtol=0, atol=1e-14)
            assert len(trace) == len(seq)

    def test_blstm(self):
        m = randomize(BlstmModel(4, 3, 5), 11)
        seq = [2, 0, 1]
        logits, (fwd, bwd) = blstm_forward(m, seq)
        np.testing.assert_allclose(logits, oracles.blstm_logits(m, seq), rtol=0, atol=1e-14)
        # the backward direction read the last token first
        assert bwd[0].token == seq[-1]

    def test_plstm(self):
        m = randomize(PlstmModel([4, 3, 5], [3, 2, 4], 6), 12)
        seqs = [[0, 1, 3], [2, 2, 0], [4, 1, 1]]
        logits, traces = plstm_forward(m, seqs)
        np.testing.assert_allclose(logits, oracles.plstm_logits(m, seqs), rtol=0, atol=1e-14)
        assert len(traces) == 3


class TestForwardErrors:
    def test_empty_sequence(self):
        with pytest.raises(UsageError):
            lstm_forward(LstmModel(3, 2, 2), [])

    def test_token_out_of_range(self):
        with pytest.raises(VocabularyError):
            lstm_forward(LstmModel(3, 2, 2), [0, 3])

    def test_vocab_mismatch(self):
        with pytest.raises(ShapeError):
            lstm_forward(LstmModel(3, 2, 2), [0], vocab_size=4)

    def test_stream_count(self):
        with pytest.raises(UsageError):
            plstm_forward(PlstmModel([3, 3], [2, 2], 2), [[0, 1]])

    def test_unsynchronized(self):
        with pytest.raises(SynchronizationError):
            plstm_forward(PlstmModel([3, 3], [2, 2], 2), [[0, 1], [0]])

    def test_dispatch_stream_count(self):
        with pytest.raises(UsageError):
            forward(LstmModel(3, 2, 2), [[0], [1]])


class TestPredict:
    def test_argmax_lowest_on_tie(self):
        assert predict([0.5, 2.0, 2.0, -1.0]) == 1

    def test_empty(self):
        with pytest.raises(UsageError):
            predict([])


class TestBatched:
    @pytest.mark.parametrize("make, n", [
        (lambda: LstmModel(5, 4, 3), 1),
        (lambda: BlstmModel(5, 4, 3), 1),
        (lambda: PlstmModel([5, 5, 5], [4, 4, 4], 3), 3),
    ])
    def test_matches_per_sample(self, make, n):
        m = randomize(make(), 3, scale=1.0)
        rng = np.random.default_rng(0)
        tokens = rng.integers(0, 5, size=(40, n, 6))
        batch = logits_batch(m, tokens)
        single = np.array([forward(m, [list(s) for s in row])[0] for row in tokens])
        np.testing.assert_allclose(batch, single, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(predict_batch(m, tokens, chunk=7),
                                      [predict(r) for r in single])

    def test_rejects_bad_rank(self):
        with pytest.raises(ShapeError):
            logits_batch(LstmModel(2, 2, 2), np.zeros((3, 4), dtype=int))

    def test_empty_batch(self):
        assert predict_batch(LstmModel(2, 2, 2), np.zeros((0, 1, 3), dtype=int)).size == 0


class TestSerialization:
    @pytest.mark.parametrize("model", [LstmModel(3, 2, 4), BlstmModel(3, 2, 4),
                                       PlstmModel([3, 3], [2, 2], 4)])
    def test_roundtrip_bit_exact(self, model):
        randomize(model, 5)
        d = json.loads(json.dumps(network_to_dict(model)))
        back = network_from_dict(d)
        assert type(back) is type(model)
        assert back.theta.tobytes() == model.theta.tobytes()

    def test_layout_mismatch(self):
        d = network_to_dict(LstmModel(3, 2, 4))
        d["layout"][0][1] = [9, 9, 9]
        with pytest.raises(ShapeError):
            network_from_dict(d)

    def test_unknown_kind(self):
        with pytest.raises(UsageError):
            network_from_dict({"kind": "gru"})
