import math

import numpy as np
import pytest

from olpnet.elm import batch_solve
from olpnet.errors import ArgumentError, DataFormatError, NumericOverflowError
from olpnet.numerics import solve_linear
from olpnet.olp import (
    Mode,
    load_state,
    olp_gain,
    olp_init,
    olp_normalized_error,
    olp_predict,
    olp_update,
    olp_update_adaptive,
    olp_update_block,
    olp_update_static,
    save_state,
)


def ridge_oracle(a_rows, y_rows, lam):
    """Weights and inhibition matrix from the regularized normal equations."""
    m = a_rows.shape[1]
    normal = lam * np.eye(m) + a_rows.T @ a_rows
    return solve_linear(normal, a_rows.T @ y_rows).T, solve_linear(normal, np.eye(m))


def stream(state, a_rows, y_rows):
    for a, y in zip(a_rows, y_rows):
        olp_update(state, a, y)
    return state


class TestInit:
    def test_theta_is_identity_over_m(self):
        s = olp_init(4, 2)
        np.testing.assert_array_equal(s.theta, np.diag([0.25] * 4))
        np.testing.assert_array_equal(s.w, np.zeros((2, 4)))
        assert s.k == 0

    def test_fresh_predicts_zero(self, rng):
        np.testing.assert_array_equal(olp_predict(olp_init(6, 3), rng.normal(size=6)), np.zeros(3))

    @pytest.mark.parametrize("m,n", [(0, 1), (1, 0), (-2, 3)])
    def test_rejects_zero_dims(self, m, n):
        with pytest.raises(ArgumentError):
            olp_init(m, n)

    def test_rejects_unknown_mode(self):
        with pytest.raises(ArgumentError):
            olp_init(2, 2, "fancy")


class TestGain:
    def test_zero_activation(self):
        b, denom = olp_gain(olp_init(3, 1), np.zeros(3))
        np.testing.assert_array_equal(b, np.zeros(3))
        assert denom == 1.0

    def test_scalar_case(self):
        b, denom = olp_gain(olp_init(1, 1), [1.0])
        assert denom == 2.0
        np.testing.assert_array_equal(b, [0.5])

    def test_two_dim_case(self):
        b, denom = olp_gain(olp_init(2, 1), [1.0, 1.0])
        assert denom == 2.0
        np.testing.assert_allclose(b, [0.25, 0.25])

    def test_state_untouched(self, rng):
        s = olp_init(5, 1)
        before = s.theta.copy()
        olp_gain(s, rng.normal(size=5))
        np.testing.assert_array_equal(s.theta, before)

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            olp_gain(olp_init(3, 1), np.ones(4))


class TestStaticUpdate:
    def test_scalar_hand_case(self):
        s = olp_update_static(olp_init(1, 1), [1.0], [2.0])
        assert s.w[0, 0] == 1.0
        assert s.theta[0, 0] == 0.5
        assert s.k == 1
        # closed form: w1 = y a / (1/theta0 + a^2)
        assert s.w[0, 0] == pytest.approx(2.0 * 1.0 / (1.0 + 1.0))
        assert olp_predict(s, [1.0])[0] == 1.0

    def test_zero_activation_is_noop(self, rng):
        s = stream(olp_init(4, 2), rng.uniform(size=(5, 4)), rng.uniform(size=(5, 2)))
        w, theta = s.w.copy(), s.theta.copy()
        olp_update_static(s, np.zeros(4), [3.0, -1.0])
        np.testing.assert_array_equal(s.w, w)
        np.testing.assert_array_equal(s.theta, theta)
        assert s.k == 6

    def test_matches_ridge_oracle(self, rng):
        a_rows = rng.uniform(-1, 1, size=(100, 10))
        y_rows = rng.uniform(-1, 1, size=(100, 2))
        s = stream(olp_init(10, 2), a_rows, y_rows)
        w_ref, theta_ref = ridge_oracle(a_rows, y_rows, lam=10.0)
        assert np.max(np.abs(s.w - w_ref)) < 1e-8
        assert np.max(np.abs(s.theta - theta_ref)) < 1e-8

    def test_wrong_mode(self):
        with pytest.raises(ArgumentError):
            olp_update_static(olp_init(2, 1, Mode.ADAPTIVE), [1.0, 0.0], [1.0])

    @pytest.mark.parametrize("a,y", [([1.0, 2.0, 3.0], [1.0]), ([1.0, 2.0], [1.0, 2.0]), ([np.nan, 1.0], [1.0])])
    def test_bad_inputs(self, a, y):
        with pytest.raises(ArgumentError):
            olp_update_static(olp_init(2, 1), a, y)

    def test_overflow_is_reported_and_state_kept(self):
        s = olp_init(2, 1)
        s.w[:] = 9e11
        with pytest.raises(NumericOverflowError):
            olp_update_static(s, [1.0, 1.0], [1e13])
        np.testing.assert_array_equal(s.w, [[9e11, 9e11]])
        assert s.k == 0


class TestNormalizedError:
    def test_perfect_prediction(self, rng):
        s = stream(olp_init(3, 2), rng.uniform(size=(4, 3)), rng.uniform(size=(4, 2)))
        a = rng.uniform(size=3)
        np.testing.assert_allclose(olp_normalized_error(s, a, s.w @ a), 0.0, atol=1e-15)

    def test_fresh_zero_activation(self):
        np.testing.assert_array_equal(olp_normalized_error(olp_init(3, 2), np.zeros(3), [4.0, -2.0]), [4.0, -2.0])

    def test_scalar_hand_case(self):
        assert olp_normalized_error(olp_init(1, 1), [1.0], [2.0])[0] == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ArgumentError):
            olp_normalized_error(olp_init(2, 2), [1.0, 1.0], [1.0])


class TestAdaptiveUpdate:
    def test_scalar_hand_case(self):
        s = olp_update_adaptive(olp_init(1, 1, Mode.ADAPTIVE), [1.0], [2.0])
        assert s.w[0, 0] == 1.0
        assert s.theta[0, 0] == pytest.approx(0.5 + (1.0 - math.exp(-1.0)))
        assert s.theta[0, 0] == pytest.approx(1.1321, abs=5e-5)

    def test_zero_error_equals_static(self, rng):
        a_rows, y_rows = rng.uniform(size=(20, 6)), rng.uniform(size=(20, 2))
        st = stream(olp_init(6, 2), a_rows, y_rows)
        ad = olp_init(6, 2, Mode.ADAPTIVE)
        ad.w, ad.theta = st.w.copy(), st.theta.copy()
        a = rng.uniform(size=6)
        olp_update_static(st, a, st.w @ a)
        olp_update_adaptive(ad, a, ad.w @ a)
        np.testing.assert_array_equal(ad.w, st.w)
        np.testing.assert_array_equal(ad.theta, st.theta)

    def test_error_norm_drives_forgetting(self):
        # two outputs with error (3, 4)/2: |E| = 2.5 in the Euclidean norm
        s = olp_update_adaptive(olp_init(1, 2, Mode.ADAPTIVE), [1.0], [3.0, 4.0])
        assert s.theta[0, 0] == pytest.approx(0.5 + 1.0 - math.exp(-2.5))

    def test_zero_activation_is_noop(self, rng):
        s = olp_init(4, 1, Mode.ADAPTIVE)
        stream(s, rng.uniform(size=(5, 4)), rng.uniform(size=(5, 1)))
        w, theta = s.w.copy(), s.theta.copy()
        olp_update_adaptive(s, np.zeros(4), [5.0])
        np.testing.assert_array_equal(s.w, w)
        np.testing.assert_array_equal(s.theta, theta)

    def test_tracks_a_switching_target(self):
        g = np.random.default_rng(7)
        m = 10
        before, after = g.normal(size=(1, m)), g.normal(size=(1, m))
        acts = g.uniform(0, 1, size=(1000, m))
        ys = np.where(np.arange(1000)[:, None] < 500, acts @ before.T, acts @ after.T)
        errs = {}
        for mode in Mode:
            s = olp_init(m, 1, mode)
            e = np.empty(1000)
            for i, (a, y) in enumerate(zip(acts, ys)):
                e[i] = abs(float(y[0] - s.w[0] @ a))
                olp_update(s, a, y)
            errs[mode] = e[600:1000].mean()
        assert errs[Mode.ADAPTIVE] < errs[Mode.STATIC]

    def test_wrong_mode(self):
        with pytest.raises(ArgumentError):
            olp_update_adaptive(olp_init(2, 1), [1.0, 0.0], [1.0])


class TestPredict:
    def test_identity_weights(self, rng):
        s = olp_init(4, 4)
        s.w = np.eye(4)
        a = rng.normal(size=4)
        np.testing.assert_array_equal(olp_predict(s, a), a)

    def test_mismatch(self):
        with pytest.raises(ArgumentError):
            olp_predict(olp_init(3, 1), np.ones(2))


class TestInvariants:
    @pytest.mark.parametrize("m,n,k", [(1, 1, 7), (8, 3, 200), (30, 2, 500)])
    def test_ridge_identity(self, m, n, k):
        g = np.random.default_rng(m * 1000 + k)
        a_rows, y_rows = g.uniform(-1, 1, (k, m)), g.uniform(-1, 1, (k, n))
        s = stream(olp_init(m, n), a_rows, y_rows)
        w_ref, theta_ref = ridge_oracle(a_rows, y_rows, lam=m)
        assert np.max(np.abs(s.w - w_ref)) < 1e-7
        assert np.max(np.abs(s.theta - theta_ref)) < 1e-7

    def test_approaches_least_squares(self):
        g = np.random.default_rng(11)
        m = 10
        true_w = g.normal(size=(1, m))
        a_rows = g.uniform(-1, 1, (5000, m))
        y_rows = a_rows @ true_w.T + 0.1 * g.normal(size=(5000, 1))
        s = olp_init(m, 1)
        gaps = {}
        for k in range(1, 5001):
            olp_update_static(s, a_rows[k - 1], y_rows[k - 1])
            if k in (200, 5000):
                w_ls = batch_solve(a_rows[:k], y_rows[:k], lam=0.0)
                gaps[k] = np.linalg.norm(s.w - w_ls)
        assert gaps[5000] < gaps[200]

    def test_theta_positive_definite(self, rng):
        for mode in Mode:
            s = stream(olp_init(6, 1, mode), rng.uniform(-1, 1, (300, 6)), rng.uniform(-1, 1, (300, 1)))
            for _ in range(50):
                a = rng.normal(size=6)
                assert a @ s.theta @ a > 0

    def test_trace_non_increasing_static(self, rng):
        s = olp_init(12, 2)
        prev = np.trace(s.theta)
        for a, y in zip(rng.uniform(0, 1, (500, 12)), rng.uniform(0, 1, (500, 2))):
            olp_update_static(s, a, y)
            cur = np.trace(s.theta)
            assert cur <= prev
            prev = cur

    def test_footprint_independent_of_k(self, rng):
        s = olp_init(7, 3)
        assert s.footprint == 3 * 7 + 7 * 7
        stream(s, rng.uniform(size=(400, 7)), rng.uniform(size=(400, 3)))
        assert s.footprint == 3 * 7 + 7 * 7


class TestBlockUpdate:
    @pytest.mark.parametrize("block", [1, 7, 64])
    def test_equals_sequential(self, rng, block):
        a_rows, y_rows = rng.uniform(0, 1, (150, 25)), rng.uniform(0, 1, (150, 10))
        seq = stream(olp_init(25, 10), a_rows, y_rows)
        blk = olp_init(25, 10)
        for i in range(0, 150, block):
            olp_update_block(blk, a_rows[i : i + block], y_rows[i : i + block])
        assert blk.k == seq.k == 150
        assert np.max(np.abs(blk.w - seq.w)) < 1e-10
        assert np.max(np.abs(blk.theta - seq.theta)) < 1e-12

    def test_static_only(self):
        with pytest.raises(ArgumentError):
            olp_update_block(olp_init(2, 1, Mode.ADAPTIVE), np.ones((2, 2)), np.ones((2, 1)))

    def test_empty_block(self):
        s = olp_update_block(olp_init(3, 1), np.zeros((0, 3)), np.zeros((0, 1)))
        assert s.k == 0


class TestCheckpoint:
    @pytest.mark.parametrize("mode", list(Mode))
    def test_round_trip(self, tmp_path, rng, mode):
        s = stream(olp_init(5, 2, mode), rng.uniform(size=(30, 5)), rng.uniform(size=(30, 2)))
        path = tmp_path / "state.bin"
        save_state(s, path)
        assert path.stat().st_size == 36 + 8 * (2 * 5 + 5 * 5)
        back = load_state(path)
        assert (back.m, back.n, back.mode, back.k) == (5, 2, mode, 30)
        np.testing.assert_array_equal(back.w, s.w)
        np.testing.assert_array_equal(back.theta, s.theta)

    def test_layout_is_little_endian(self, tmp_path):
        s = olp_init(1, 1)
        save_state(s, tmp_path / "s.bin")
        raw = (tmp_path / "s.bin").read_bytes()
        assert raw[:4] == b"OLP1"
        assert int.from_bytes(raw[4:12], "little") == 1
        assert np.frombuffer(raw[-8:], "<f8")[0] == 1.0

    def test_truncated(self, tmp_path):
        s = olp_init(3, 1)
        save_state(s, tmp_path / "s.bin")
        (tmp_path / "t.bin").write_bytes((tmp_path / "s.bin").read_bytes()[:-8])
        with pytest.raises(DataFormatError):
            load_state(tmp_path / "t.bin")
