import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kdgene.cells import (
    CELL_PARAM_NAMES,
    cell_param_shapes,
    interact,
    interact_backward,
    new_cell,
)

SIGMOID_HALF = 0.6224593312018546  # 1 / (1 + exp(-0.5))


def test_zero_weights_as_written_gives_half():
    cell = new_cell("lstm", d_e=3, d_r=2, output_mode="as_written")
    out, _ = interact(cell, np.array([1.0, -2.0]), np.array([0.3, 0.0, -5.0]))
    assert_allclose(out, np.full(3, 0.5))


def test_zero_weights_standard_gives_zero():
    cell = new_cell("lstm", d_e=3, d_r=2, output_mode="standard")
    out, _ = interact(cell, np.array([1.0, -2.0]), np.array([0.3, 0.0, -5.0]))
    assert_allclose(out, np.zeros(3))


def test_scalar_as_written_hand_value():
    cell = new_cell("lstm", d_e=1, d_r=1, output_mode="as_written")
    cell.weights["w_ox"][:] = 1.0
    out, _ = interact(cell, np.array([0.5]), np.array([0.0]))
    assert out[0] == pytest.approx(SIGMOID_HALF, rel=1e-12)


def test_zero_weights_gru_halves_hidden_state():
    cell = new_cell("gru", d_e=3, d_r=2)
    e_h = np.array([0.4, -1.0, 2.0])
    out, _ = interact(cell, np.array([1.0, 1.0]), e_h)
    assert_allclose(out, 0.5 * e_h)


def test_zero_weights_rnn_gives_zero():
    cell = new_cell("rnn", d_e=2, d_r=2)
    out, _ = interact(cell, np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    assert_allclose(out, np.zeros(2))


def test_shape_mismatch_is_error():
    cell = new_cell("lstm", d_e=3, d_r=2)
    with pytest.raises(ValueError, match="do not match"):
        interact(cell, np.zeros(3), np.zeros(3))


def test_unknown_kind_is_error():
    with pytest.raises(ValueError, match="unknown cell kind"):
        cell_param_shapes("peephole", 2, 2)


def _random_cell(kind, rng, d_e=4, d_r=3, output_mode="standard"):
    cell = new_cell(kind, d_e, d_r, output_mode=output_mode)
    for name in cell.weights:
        cell.weights[name][:] = rng.normal(0, 1.0, cell.weights[name].shape)
    return cell


@given(st.integers(0, 2**32 - 1), st.sampled_from(["standard", "as_written"]))
@settings(max_examples=40)
def test_lstm_gate_ranges(seed, output_mode):
    # preactivations bounded below ~8; past ~19, f64 tanh saturates to 1.0
    # exactly and the open-interval property is unobservable
    rng = np.random.default_rng(seed)
    cell = new_cell("lstm", d_e=4, d_r=3, output_mode=output_mode)
    for name in cell.weights:
        cell.weights[name][:] = rng.uniform(-1.0, 1.0, cell.weights[name].shape)
    e_r = rng.uniform(-1.0, 1.0, 3)
    e_h = rng.uniform(-1.0, 1.0, 4)
    _, trace = interact(cell, e_r, e_h)
    for gate in ("f", "i", "o"):
        assert np.all(trace.gates[gate] > 0.0)
        assert np.all(trace.gates[gate] < 1.0)
    assert np.all(trace.gates["c_tilde"] > -1.0)
    assert np.all(trace.gates["c_tilde"] < 1.0)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["lstm", "gru", "rnn"]))
@settings(max_examples=20)
def test_trace_recompute_is_bit_identical(seed, kind):
    rng = np.random.default_rng(seed)
    cell = _random_cell(kind, rng)
    e_r = rng.normal(0, 1.0, 3)
    e_h = rng.normal(0, 1.0, 4)
    out1, trace1 = interact(cell, e_r, e_h)
    out2, trace2 = interact(cell, e_r, e_h)
    assert np.array_equal(out1, out2)
    for name, arr in trace1.preact.items():
        assert np.array_equal(arr, trace2.preact[name])
    for name, arr in trace1.gates.items():
        assert np.array_equal(arr, trace2.gates[name])


def test_batched_forward_matches_per_vector():
    rng = np.random.default_rng(1)
    cell = _random_cell("lstm", rng)
    e_r = rng.normal(0, 1.0, (5, 3))
    e_h = rng.normal(0, 1.0, (5, 4))
    batched, _ = interact(cell, e_r, e_h)
    for b in range(5):
        single, _ = interact(cell, e_r[b], e_h[b])
        assert_allclose(batched[b], single, rtol=1e-15, atol=1e-15)


@pytest.mark.parametrize("kind", ["lstm", "gru", "rnn"])
@pytest.mark.parametrize("output_mode", ["standard", "as_written"])
def test_backward_matches_finite_differences(kind, output_mode):
    rng = np.random.default_rng(42)
    cell = _random_cell(kind, rng, output_mode=output_mode)
    e_r = rng.normal(0, 0.8, (2, 3))
    e_h = rng.normal(0, 0.8, (2, 4))
    weight = rng.normal(0, 1.0, (2, 4))  # project output to a scalar loss

    def loss():
        out, _ = interact(cell, e_r, e_h)
        return float((out * weight).sum())

    out, trace = interact(cell, e_r, e_h)
    d_er, d_eh, grads = interact_backward(cell, trace, weight)

    step = 1e-6
    for arr, grad in [(e_r, d_er), (e_h, d_eh)] + [
        (cell.weights[n], grads[n]) for n in CELL_PARAM_NAMES[kind]
    ]:
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            keep = arr[ix]
            arr[ix] = keep + step
            up = loss()
            arr[ix] = keep - step
            down = loss()
            arr[ix] = keep
            numeric = (up - down) / (2 * step)
            assert grad[ix] == pytest.approx(numeric, rel=1e-5, abs=1e-8)
