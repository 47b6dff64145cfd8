import numpy as np
import numpy.testing as npt
import pytest

from rulkit import nn

# frozen oracles for a scalar one-step cell (x=0.8, h0=c0=0), computed by
# direct symbolic evaluation of the gate equations:
#   LSTM  W_i=.5 U_i=.25 b_i=.1 | W_f=.4 U_f=.2 b_f=.2
#         W_o=.3 U_o=.15 b_o=.3 | W_c=.6 U_c=.35 b_c=-.1
#   GRU   W_z=.5 U_z=.2 b_z=.1 | W_r=.4 U_r=.3 b_r=-.2 | W_h=.7 U_h=.25 b_h=.05
LSTM_STEP_H = 0.14026946864927593
GRU_STEP_H = 0.33869699004119702

# d(h)/d(param) at the same operating point (symbolic differentiation);
# everything multiplying h0 or c0 is zero
LSTM_STEP_GRADS = {
    "W_i": 0.040959805323598113,
    "b_i": 0.051199756654497641,
    "W_o": 0.041316381221934874,
    "b_o": 0.051645476527418592,
    "W_c": 0.25976408860361631,
    "b_c": 0.32470511075452038,
    "U_i": 0.0, "W_f": 0.0, "U_f": 0.0, "b_f": 0.0, "U_o": 0.0, "U_c": 0.0,
}


def scalar_lstm_params():
    s = lambda v: np.full((1, 1), v)
    b = lambda v: np.full(1, v)
    return nn.LstmParams(
        W_i=s(0.5), U_i=s(0.25), b_i=b(0.1),
        W_f=s(0.4), U_f=s(0.2), b_f=b(0.2),
        W_o=s(0.3), U_o=s(0.15), b_o=b(0.3),
        W_c=s(0.6), U_c=s(0.35), b_c=b(-0.1),
    )


def scalar_gru_params():
    s = lambda v: np.full((1, 1), v)
    b = lambda v: np.full(1, v)
    return nn.GruParams(
        W_z=s(0.5), U_z=s(0.2), b_z=b(0.1),
        W_r=s(0.4), U_r=s(0.3), b_r=b(-0.2),
        W_h=s(0.7), U_h=s(0.25), b_h=b(0.05),
    )


def zero_lstm(input_dim, hidden_dim):
    p = nn.init_lstm(input_dim, hidden_dim, np.random.default_rng(0))
    return p.zeros_like()


def zero_gru(input_dim, hidden_dim):
    p = nn.init_gru(input_dim, hidden_dim, np.random.default_rng(0))
    return p.zeros_like()


class TestLstmForward:
    def test_zero_params_give_zero_outputs(self):
        params = zero_lstm(3, 4)
        seq = np.random.default_rng(1).normal(size=(2, 5, 3))
        out, _ = nn.lstm_forward(params, seq, return_sequences=True)
        npt.assert_array_equal(out, np.zeros((2, 5, 4)))

    def test_scalar_single_step(self):
        out, cache = nn.lstm_forward(scalar_lstm_params(), np.full((1, 1, 1), 0.8))
        assert out.shape == (1, 1)
        npt.assert_allclose(out[0, 0], LSTM_STEP_H, rtol=1e-14)

    def test_return_sequences_consistency(self):
        params = nn.init_lstm(3, 4, np.random.default_rng(2))
        seq = np.random.default_rng(3).normal(size=(2, 3, 3))
        full, _ = nn.lstm_forward(params, seq, return_sequences=True)
        last, _ = nn.lstm_forward(params, seq, return_sequences=False)
        assert full.shape == (2, 3, 4)
        npt.assert_array_equal(full[:, -1], last)

    def test_forward_is_pure(self):
        params = nn.init_lstm(2, 3, np.random.default_rng(4))
        seq = np.random.default_rng(5).normal(size=(1, 4, 2))
        a, _ = nn.lstm_forward(params, seq, return_sequences=True)
        b, _ = nn.lstm_forward(params, seq, return_sequences=True)
        npt.assert_array_equal(a, b)

    def test_hidden_state_bounded(self):
        rng = np.random.default_rng(6)
        params = nn.init_lstm(3, 5, rng)
        seq = rng.normal(size=(4, 6, 3)) * 3.0
        out, _ = nn.lstm_forward(params, seq, return_sequences=True)
        assert np.all(out > -1.0) and np.all(out < 1.0)
        # under extreme saturation float64 tanh hits exactly +-1; the closed
        # bound still holds
        for _, arr in params.tensors():
            arr *= 20.0
        out, _ = nn.lstm_forward(params, seq * 10.0, return_sequences=True)
        assert np.all(out >= -1.0) and np.all(out <= 1.0)

    def test_shape_mismatch(self):
        params = nn.init_lstm(3, 4, np.random.default_rng(0))
        with pytest.raises(nn.ShapeMismatchError):
            nn.lstm_forward(params, np.zeros((2, 5, 7)))
        with pytest.raises(nn.ShapeMismatchError):
            nn.lstm_forward(params, np.zeros((2, 0, 3)))


class TestGruForward:
    def test_zero_params_give_zero_outputs(self):
        params = zero_gru(3, 4)
        seq = np.random.default_rng(1).normal(size=(2, 5, 3))
        out, _ = nn.gru_forward(params, seq, return_sequences=True)
        npt.assert_array_equal(out, np.zeros((2, 5, 4)))

    def test_scalar_single_step(self):
        out, _ = nn.gru_forward(scalar_gru_params(), np.full((1, 1, 1), 0.8))
        npt.assert_allclose(out[0, 0], GRU_STEP_H, rtol=1e-14)

    def test_return_sequences_consistency(self):
        params = nn.init_gru(3, 4, np.random.default_rng(2))
        seq = np.random.default_rng(3).normal(size=(2, 3, 3))
        full, _ = nn.gru_forward(params, seq, return_sequences=True)
        last, _ = nn.gru_forward(params, seq, return_sequences=False)
        npt.assert_array_equal(full[:, -1], last)

    def test_hidden_state_bounded(self):
        rng = np.random.default_rng(7)
        params = nn.init_gru(3, 5, rng)
        seq = rng.normal(size=(4, 6, 3)) * 3.0
        out, _ = nn.gru_forward(params, seq, return_sequences=True)
        assert np.all(out > -1.0) and np.all(out < 1.0)
        for _, arr in params.tensors():
            arr *= 20.0
        out, _ = nn.gru_forward(params, seq * 10.0, return_sequences=True)
        assert np.all(out >= -1.0) and np.all(out <= 1.0)


class TestBackwardBasics:
    def test_zero_upstream_zero_grads_lstm(self):
        params = nn.init_lstm(3, 4, np.random.default_rng(8))
        seq = np.random.default_rng(9).normal(size=(2, 5, 3))
        _, cache = nn.lstm_forward(params, seq, return_sequences=True)
        grads, d_seq = nn.lstm_backward(params, cache, np.zeros((2, 5, 4)))
        for _, arr in grads.tensors():
            npt.assert_array_equal(arr, np.zeros_like(arr))
        npt.assert_array_equal(d_seq, np.zeros_like(seq))

    def test_zero_upstream_zero_grads_gru(self):
        params = nn.init_gru(3, 4, np.random.default_rng(10))
        seq = np.random.default_rng(11).normal(size=(2, 5, 3))
        _, cache = nn.gru_forward(params, seq, return_sequences=True)
        grads, d_seq = nn.gru_backward(params, cache, np.zeros((2, 5, 4)))
        for _, arr in grads.tensors():
            npt.assert_array_equal(arr, np.zeros_like(arr))
        npt.assert_array_equal(d_seq, np.zeros_like(seq))

    def test_scalar_lstm_matches_symbolic_chain_rule(self):
        params = scalar_lstm_params()
        _, cache = nn.lstm_forward(params, np.full((1, 1, 1), 0.8))
        grads, _ = nn.lstm_backward(params, cache, np.ones((1, 1, 1)))
        for name, expected in LSTM_STEP_GRADS.items():
            actual = float(getattr(grads, name).ravel()[0])
            npt.assert_allclose(actual, expected, rtol=1e-13, atol=1e-16, err_msg=name)


class TestDense:
    def test_negative_preactivation_clips_to_zero(self):
        params = nn.DenseParams(W=np.zeros((1, 2)), b=np.array([-1.0]))
        out, _ = nn.dense_relu_forward(params, np.ones((3, 2)))
        npt.assert_array_equal(out, np.zeros((3, 1)))

    def test_identity_passthrough(self):
        params = nn.DenseParams(W=np.eye(1), b=np.zeros(1))
        out, _ = nn.dense_relu_forward(params, np.array([[0.3]]))
        npt.assert_array_equal(out, [[0.3]])

    def test_affine_value(self):
        params = nn.DenseParams(W=np.array([[2.0]]), b=np.array([-0.1]))
        out, _ = nn.dense_relu_forward(params, np.array([[0.3]]))
        npt.assert_allclose(out, [[0.5]], rtol=1e-15)

    def test_output_nonnegative(self):
        rng = np.random.default_rng(12)
        params = nn.init_dense(6, 2, rng)
        out, _ = nn.dense_relu_forward(params, rng.normal(size=(50, 6)) * 3.0)
        assert np.all(out >= 0.0)

    def test_shape_mismatch(self):
        params = nn.init_dense(4, 1, np.random.default_rng(0))
        with pytest.raises(nn.ShapeMismatchError):
            nn.dense_relu_forward(params, np.zeros((2, 5)))

    def test_backward_masks_clipped_units(self):
        params = nn.DenseParams(W=np.array([[1.0], [-1.0]]).T.copy(), b=np.zeros(1))
        # x chosen so z < 0: gradient must not flow
        params = nn.DenseParams(W=np.array([[1.0, -1.0]]), b=np.zeros(1))
        x = np.array([[0.0, 2.0]])  # z = -2
        out, cache = nn.dense_relu_forward(params, x)
        assert out[0, 0] == 0.0
        grads, dx = nn.dense_relu_backward(params, cache, np.ones((1, 1)))
        npt.assert_array_equal(grads.W, np.zeros_like(params.W))
        npt.assert_array_equal(dx, np.zeros_like(x))


class TestLoss:
    def test_perfect_predictions(self):
        value, grad = nn.loss("mse", np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert value == 0.0
        npt.assert_array_equal(grad, np.zeros(2))
        value, grad = nn.loss("mae", np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert value == 0.0
        npt.assert_array_equal(grad, np.zeros(2))

    def test_mse_value_and_gradient(self):
        value, grad = nn.loss("mse", np.array([1.0, 0.0]), np.array([0.0, 0.0]))
        assert value == 0.5
        npt.assert_array_equal(grad, [1.0, 0.0])  # 2*(p-y)/n

    def test_mae_value_and_subgradient(self):
        value, grad = nn.loss("mae", np.array([1.0, 0.0]), np.array([0.0, 0.0]))
        assert value == 0.5
        npt.assert_array_equal(grad, [0.5, 0.0])  # sign/n, 0 at equality

    def test_mae_subgradient_zero_at_tie(self):
        _, grad = nn.loss("mae", np.array([3.0]), np.array([3.0]))
        assert grad[0] == 0.0

    def test_mse_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(13)
        p = rng.normal(size=5)
        y = rng.normal(size=5)
        _, grad = nn.loss("mse", p, y)
        eps = 1e-7
        for k in range(5):
            bumped = p.copy()
            bumped[k] += eps
            up = nn.loss("mse", bumped, y)[0]
            bumped[k] -= 2 * eps
            down = nn.loss("mse", bumped, y)[0]
            npt.assert_allclose(grad[k], (up - down) / (2 * eps), rtol=1e-6)

    def test_errors(self):
        with pytest.raises(nn.LengthMismatchError):
            nn.loss("mse", np.zeros(3), np.zeros(2))
        with pytest.raises(nn.EmptyBatchError):
            nn.loss("mae", np.zeros(0), np.zeros(0))
        with pytest.raises(ValueError):
            nn.loss("huber", np.zeros(2), np.zeros(2))


class TestAdam:
    def setup_method(self):
        rng = np.random.default_rng(14)
        self.params = {"w": rng.normal(size=(3, 2)), "b": rng.normal(size=2)}
        self.state = nn.AdamState.for_params(self.params)

    def test_zero_gradient_is_noop_on_params(self):
        before = {k: v.copy() for k, v in self.params.items()}
        zeros = {k: np.zeros_like(v) for k, v in self.params.items()}
        for _ in range(5):
            nn.adam_step(self.state, self.params, zeros, lr=0.1)
        for k in self.params:
            npt.assert_array_equal(self.params[k], before[k])
        assert self.state.t == 5

    def test_first_step_magnitude(self):
        # scalar p=1, g=1, lr=0.1 -> p ~ 0.9 (bias-corrected m^/sqrt(v^) = 1)
        params = {"p": np.array([1.0])}
        state = nn.AdamState.for_params(params)
        nn.adam_step(state, params, {"p": np.array([1.0])}, lr=0.1)
        npt.assert_allclose(params["p"][0], 0.9, atol=1e-8)

    def test_deterministic(self):
        grads = {k: np.full_like(v, 0.3) for k, v in self.params.items()}
        params_b = {k: v.copy() for k, v in self.params.items()}
        state_b = self.state.copy()
        nn.adam_step(self.state, self.params, grads, lr=0.01)
        nn.adam_step(state_b, params_b, grads, lr=0.01)
        for k in self.params:
            npt.assert_array_equal(self.params[k], params_b[k])

    def test_non_finite_gradient_refused_without_mutation(self):
        before = {k: v.copy() for k, v in self.params.items()}
        grads = {k: np.full_like(v, np.nan) for k, v in self.params.items()}
        with pytest.raises(nn.NonFiniteGradientError):
            nn.adam_step(self.state, self.params, grads, lr=0.01)
        for k in self.params:
            npt.assert_array_equal(self.params[k], before[k])
        assert self.state.t == 0

    def test_shape_mismatch(self):
        grads = {"w": np.zeros((2, 3)), "b": np.zeros(2)}
        with pytest.raises(nn.ShapeMismatchError):
            nn.adam_step(self.state, self.params, grads, lr=0.01)

    def test_matches_reference_recurrence(self):
        # independent scalar recurrence for 10 steps with varying gradients
        g_seq = np.linspace(-1.0, 1.0, 10)
        p = 0.5
        m = v = 0.0
        b1, b2, eps = nn.ADAM_BETA1, nn.ADAM_BETA2, nn.ADAM_EPS
        params = {"p": np.array([0.5])}
        state = nn.AdamState.for_params(params)
        for t, g in enumerate(g_seq, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            p -= 0.05 * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
            nn.adam_step(state, params, {"p": np.array([g])}, lr=0.05)
        npt.assert_allclose(params["p"][0], p, rtol=1e-12)
