import numpy as np
import pytest

from qgf import autodiff as ad, nn
from qgf.autodiff import Tensor
from qgf.errors import (
    EmptySequenceError,
    FilterLargerThanInputError,
    InvalidProbabilityError,
    ShapeMismatchError,
)


def test_paramset_rejects_duplicates_and_tracks_counts():
    pset = nn.ParamSet(seed=0)
    pset.add("w", np.ones((2, 3)))
    with pytest.raises(ValueError):
        pset.add("w", np.ones(1))
    pset.add("b", np.zeros(3))
    assert pset.n_parameters() == 9
    assert pset.names() == ["w", "b"]


def test_paramset_load_arrays_validates_names_and_shapes():
    pset = nn.ParamSet(seed=0)
    pset.add("w", np.ones((2, 2)))
    with pytest.raises(ShapeMismatchError):
        pset.load_arrays({"other": np.ones((2, 2))})
    with pytest.raises(ShapeMismatchError):
        pset.load_arrays({"w": np.ones((3, 2))})
    pset.load_arrays({"w": np.full((2, 2), 7.0)})
    assert np.array_equal(pset["w"].data, np.full((2, 2), 7.0))


def test_xavier_limits_follow_fan_rules():
    rng = np.random.default_rng(0)
    w = nn.xavier_uniform(rng, (40, 60))
    limit = np.sqrt(6.0 / 100.0)
    assert np.abs(w).max() <= limit
    # 3-D conv filters: fan_in = in_channels * width, fan_out = out_channels * width
    f = nn.xavier_uniform(rng, (10, 1, 120))
    limit = np.sqrt(6.0 / (1 * 120 + 10 * 120))
    assert np.abs(f).max() <= limit


def test_conv_out_size_formula():
    assert nn.conv_out_size(nn.LayerGeometry(3120, 120, 5, 0)) == 601
    assert nn.conv_out_size(nn.LayerGeometry(601, 46, 3, 0)) == 186
    assert nn.conv_out_size(nn.LayerGeometry(186, 36, 3, 0)) == 51
    assert nn.conv_out_size(nn.LayerGeometry(51, 24, 3, 0)) == 10
    assert nn.conv_out_size(nn.LayerGeometry(5, 3, 1, 1)) == 5


def test_layer_geometry_rejects_oversized_filter():
    with pytest.raises(FilterLargerThanInputError):
        nn.LayerGeometry(4, 5, 1, 0)
    nn.LayerGeometry(4, 5, 1, 1)  # padding rescues it


def test_dense_affine_identity():
    pset = nn.ParamSet(seed=0)
    layer = nn.Dense(pset, "d", 3, 2, np.random.default_rng(0))
    x = np.random.default_rng(1).standard_normal((4, 3))
    out = layer(Tensor(x))
    assert np.allclose(out.data, x @ pset["d.w"].data + pset["d.b"].data)
    with pytest.raises(ShapeMismatchError):
        layer(Tensor(np.ones((4, 4))))


def test_lstm_cell_zero_weights_keep_zero_state():
    pset = nn.ParamSet(seed=0)
    cell = nn.LSTMCell(pset, "c", 3, 4, np.random.default_rng(0))
    for t in pset.tensors():
        t.data[:] = 0.0
    h, c = cell.step(Tensor(np.ones((2, 3))), cell.zero_state(2))
    # all gates sigmoid(0)=0.5, candidate tanh(0)=0 -> c stays 0, h stays 0
    assert np.array_equal(h.data, np.zeros((2, 4)))
    assert np.array_equal(c.data, np.zeros((2, 4)))


def test_lstm_cell_forget_gate_scales_carry():
    pset = nn.ParamSet(seed=0)
    cell = nn.LSTMCell(pset, "c", 1, 1, np.random.default_rng(0))
    for t in pset.tensors():
        t.data[:] = 0.0
    # bias the forget gate hard open and the rest closed
    pset["c.b"].data[:] = np.array([-40.0, 40.0, 0.0, -40.0])
    c_prev = Tensor(np.array([[2.0]]))
    h, c = cell.step(Tensor(np.zeros((1, 1))), (Tensor(np.zeros((1, 1))), c_prev))
    assert np.allclose(c.data, 2.0)   # carry preserved by open forget gate
    assert np.allclose(h.data, 0.0)   # output gate shut


def test_bilstm_output_shape_and_direction_sensitivity():
    pset = nn.ParamSet(seed=0)
    layer = nn.BiLstmLayer(pset, "bi", 2, 3, 4, np.random.default_rng(7))
    rng = np.random.default_rng(8)
    x = rng.standard_normal((5, 6, 2))
    out = layer(Tensor(x))
    assert out.shape == (5, 6, 4)
    rev = layer(Tensor(x[:, ::-1, :].copy()))
    # a genuinely bidirectional layer is not equivariant to time reversal
    assert not np.allclose(out.data, rev.data[:, ::-1, :])
    with pytest.raises(EmptySequenceError):
        layer(Tensor(np.zeros((2, 0, 2))))
    with pytest.raises(ShapeMismatchError):
        layer(Tensor(np.zeros((2, 2))))


def _loop_conv1d(x, f, b, stride, padding):
    batch, _, length = x.shape
    m, c, fs = f.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    l_out = (length + 2 * padding - fs) // stride + 1
    out = np.zeros((batch, m, l_out))
    for bi in range(batch):
        for mi in range(m):
            for li in range(l_out):
                s = li * stride
                out[bi, mi, li] = (xp[bi, :, s:s + fs] * f[mi]).sum() + b[mi]
    return out


@pytest.mark.parametrize("stride,padding", [(1, 0), (2, 0), (3, 1), (1, 2)])
def test_conv1d_matches_loop_reference(stride, padding):
    rng = np.random.default_rng(11)
    x = rng.standard_normal((2, 3, 12))
    f = rng.standard_normal((4, 3, 5))
    b = rng.standard_normal(4)
    out = nn.conv1d(Tensor(x), Tensor(f), Tensor(b), stride, padding)
    assert np.allclose(out.data, _loop_conv1d(x, f, b, stride, padding), atol=1e-12)


def test_conv1d_rejects_channel_mismatch():
    with pytest.raises(ShapeMismatchError):
        nn.conv1d(Tensor(np.ones((1, 2, 8))), Tensor(np.ones((3, 4, 2))), Tensor(np.zeros(3)), 1)


def test_maxpool1d_matches_loop_reference():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((2, 3, 11))
    out = nn.maxpool1d(Tensor(x), window=4, stride=3)
    expected = np.stack([x[:, :, s:s + 4].max(axis=2) for s in range(0, 8, 3)], axis=2)
    assert np.array_equal(out.data, expected)


def test_maxpool1d_routes_gradient_to_argmax():
    x = Tensor(np.array([[[1.0, 5.0, 2.0, 3.0]]]), requires_grad=True)
    out = nn.maxpool1d(x, window=2, stride=2)
    ad.backward(ad.tensor_sum(out))
    assert np.array_equal(x.grad, np.array([[[0.0, 1.0, 0.0, 1.0]]]))


def test_dropout_distribution_and_scaling():
    rng = np.random.default_rng(99)
    n = 100_000
    x = Tensor(np.ones(n))
    out = nn.dropout(x, 0.4, rng=rng, training=True)
    kept = out.data != 0
    assert abs(kept.mean() - 0.6) < 0.01
    assert np.allclose(out.data[kept], 1.0 / 0.6)
    # mean preserved in expectation
    assert abs(out.data.mean() - 1.0) < 0.02


def test_dropout_eval_mode_is_identity_and_validates_p():
    x = Tensor(np.ones(5))
    assert nn.dropout(x, 0.4, training=False) is x
    assert nn.dropout(x, 0.0, rng=None, training=True) is x
    with pytest.raises(InvalidProbabilityError):
        nn.dropout(x, 1.0, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        nn.dropout(x, 0.5, rng=None, training=True)


def test_softmax_rows_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(5)
    z = rng.standard_normal((6, 4)) * 50
    s = nn.softmax(Tensor(z))
    assert np.allclose(s.data.sum(axis=1), 1.0)
    shifted = nn.softmax(Tensor(z + 1000.0))
    assert np.allclose(s.data, shifted.data)
    huge = nn.softmax(Tensor(np.array([[1e4, -1e4]])))
    assert np.all(np.isfinite(huge.data))


def test_softmax_gradient_matches_jacobian():
    rng = np.random.default_rng(6)
    z = Tensor(rng.standard_normal(5), requires_grad=True)
    s = nn.softmax(z)
    w = rng.standard_normal(5)
    ad.backward(ad.tensor_sum(ad.mul(s, Tensor(w))))
    p = s.data
    jac = np.diag(p) - np.outer(p, p)
    assert np.allclose(z.grad, jac @ w)


def test_mse_half_value_and_shape_check():
    y = Tensor(np.array([1.0, 2.0]))
    x = Tensor(np.array([0.0, 0.0]))
    assert nn.mse_half(y, x).item() == pytest.approx(2.5 / 2.0)
    with pytest.raises(ShapeMismatchError):
        nn.mse_half(Tensor(np.ones(2)), Tensor(np.ones(3)))


def test_adam_zero_gradient_is_noop():
    pset = nn.ParamSet(seed=0)
    pset.add("w", np.array([1.0, -2.0]))
    before = pset["w"].data.copy()
    opt = nn.Adam(pset, lr=0.1)
    pset.zero_grad()
    opt.step()
    assert np.array_equal(pset["w"].data, before)


def test_adam_constant_gradient_step_approaches_lr():
    # with a constant gradient the bias-corrected step size tends to lr
    value = np.array([0.0])
    m = np.zeros(1)
    v = np.zeros(1)
    grad = np.array([3.0])
    prev = value
    for t in range(1, 200):
        value, m, v = nn.adam_step(value, grad, m, v, t, lr=0.01)
        if t > 150:
            assert abs(abs(prev - value)[0] - 0.01) < 1e-4
        prev = value
    with pytest.raises(ValueError):
        nn.adam_step(value, grad, m, v, 0, lr=0.01)


def test_adam_first_step_is_lr_times_sign():
    pset = nn.ParamSet(seed=0)
    p = pset.add("w", np.array([1.0, 1.0]))
    opt = nn.Adam(pset, lr=0.5)
    p.grad = np.array([10.0, -0.01])
    opt.step()
    # bias correction makes the very first step lr * sign(grad) (up to eps)
    assert np.allclose(p.data, [0.5, 1.5], atol=1e-6)


def test_check_gradients_flags_wrong_backward():
    pset = nn.ParamSet(seed=0)
    w = pset.add("w", np.array([0.3, -0.7]))

    def good():
        return ad.tensor_sum(ad.power(w, 2.0))

    assert nn.check_gradients(good, pset) < 1e-8

    def bad():
        out = ad.tensor_sum(ad.power(w, 2.0))
        broken = Tensor(out.data.copy(), requires_grad=True)
        broken._parents = (w,)
        broken._backward = lambda g: ad._accumulate(w, np.full_like(w.data, 123.0))
        return broken

    assert nn.check_gradients(bad, pset) > 1.0


def test_figure_eight_chain_dimensions():
    g1 = nn.LayerGeometry(3120, 120, 5)
    assert nn.conv_out_size(g1) == 601
    g2 = nn.LayerGeometry(601, 46, 3)
    assert nn.conv_out_size(g2) == 186
    g3 = nn.LayerGeometry(186, 36, 3)
    assert nn.conv_out_size(g3) == 51
    g4 = nn.LayerGeometry(51, 24, 3)
    assert nn.conv_out_size(g4) == 10
