import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticener import numerics as nx
from latticener.crf import CrfParams, crf_loss

from conftest import central_diff, max_rel, tape_grads


def test_matmul_identity_and_dot():
    out = nx.matmul(nx.constant([[1, 0], [0, 1]]), nx.constant([[3], [4]]))
    assert out.values.tolist() == [[3], [4]]
    assert nx.matmul(nx.constant([[1, 2]]), nx.constant([[3], [4]])).values.tolist() == [[11]]


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(nx.DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
        nx.matmul(nx.constant(np.ones((2, 3))), nx.constant(np.ones((2, 2))))


def test_matmul_gradient_of_sum(rng):
    a = nx.param(rng.uniform(-1, 1, (3, 4)))
    b = nx.param(rng.uniform(-1, 1, (4, 2)))
    ga, gb = tape_grads(lambda: nx.sum_(nx.matmul(a, b)), [a, b])
    # d sum(ab) / da_ik = sum_j b_kj: every row of ga is the row-sum vector of b
    assert np.allclose(ga, np.tile(b.values.sum(axis=1), (3, 1)))
    na, nb = central_diff(lambda: float((a.values @ b.values).sum()), [a.values, b.values])
    assert max_rel(ga, na) < 1e-6
    assert max_rel(gb, nb) < 1e-6


def test_sigmoid_tanh_at_zero():
    assert nx.sigmoid(nx.constant([0.0])).values[0] == 0.5
    assert nx.tanh(nx.constant([0.0])).values[0] == 0.0


@given(st.floats(-30, 30))
def test_sigmoid_gradient_formula(x):
    t = nx.param([x])
    (g,) = tape_grads(lambda: nx.sum_(nx.sigmoid(t)), [t])
    s = 1.0 / (1.0 + np.exp(-x))
    assert g[0] == pytest.approx(s * (1 - s), rel=1e-9, abs=1e-300)


def test_sigmoid_gradient_finite_difference(rng):
    t = nx.param(rng.uniform(-3, 3, 7))
    (g,) = tape_grads(lambda: nx.sum_(nx.sigmoid(t)), [t])
    (n,) = central_diff(lambda: float((1 / (1 + np.exp(-t.values))).sum()), [t.values])
    assert max_rel(g, n) < 1e-6


def test_sigmoid_range_and_stability():
    v = nx.sigmoid(nx.constant([-800.0, -5.0, 0.0, 5.0, 800.0])).values
    assert np.all(np.isfinite(v)) and np.all((v >= 0) & (v <= 1))
    assert np.all((v[1:4] > 0) & (v[1:4] < 1))


def _rand(rng, shape):
    return nx.param(rng.uniform(-1, 1, shape))


PRIMITIVES = {
    "add": (lambda xs: nx.add(xs[0], xs[1]), [(5,), (5,)]),
    "sub": (lambda xs: nx.sub(xs[0], xs[1]), [(5,), (5,)]),
    "mul": (lambda xs: nx.mul(xs[0], xs[1]), [(5,), (5,)]),
    "sigmoid": (lambda xs: nx.sigmoid(xs[0]), [(5,)]),
    "tanh": (lambda xs: nx.tanh(xs[0]), [(5,)]),
    "concat": (lambda xs: nx.concat([xs[0], xs[1]]), [(3,), (4,)]),
    "concat_rows": (lambda xs: nx.concat([xs[0], xs[1]], axis=1), [(2, 3), (2, 2)]),
    "stack": (lambda xs: nx.stack([xs[0], xs[1]]), [(3,), (3,)]),
    "slice": (lambda xs: nx.slice_(xs[0], 1, 4), [(6,)]),
    "vecmat": (lambda xs: nx.matmul(xs[0], xs[1]), [(3,), (3, 4)]),
    "transpose": (lambda xs: nx.transpose(xs[0]), [(2, 3)]),
    "add_row": (lambda xs: nx.add_row(xs[0], xs[1]), [(3, 2), (2,)]),
    "scale": (lambda xs: nx.scale(xs[0], -2.5), [(4,)]),
    "take_row": (lambda xs: nx.take_row(xs[0], 1), [(3, 4)]),
    "max_rows": (lambda xs: nx.max_rows(xs[0]), [(4, 3)]),
    "sum_squares": (lambda xs: nx.sum_squares(xs[0]), [(2, 3)]),
    "sum_squares_rows": (lambda xs: nx.sum_squares_rows(xs[0], [0, 2, 2]), [(3, 2)]),
    "softmax": (lambda xs: nx.concat(nx.softmax_normalize([xs[0], xs[1], xs[2]])), [(4,), (4,), (4,)]),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_primitive_backward_matches_finite_differences(name, seed):
    rng = np.random.default_rng(seed)
    fn, shapes = PRIMITIVES[name]
    xs = [_rand(rng, s) for s in shapes]
    probe = rng.uniform(-1, 1, np.shape(fn(xs).values))

    def objective():
        return float(np.sum(fn(xs).values * probe))

    analytic = tape_grads(lambda: nx.sum_(nx.mul(fn(xs), nx.constant(probe))) if probe.ndim else nx.scale(fn(xs), float(probe)), xs)
    numeric = central_diff(objective, [x.values for x in xs])
    for a, n in zip(analytic, numeric):
        assert max_rel(a, n) < 1e-5


def test_concat_shape_mismatch():
    with pytest.raises(nx.DimensionError):
        nx.concat([nx.constant(np.ones((2, 3))), nx.constant(np.ones((3, 3)))], axis=1)


def test_add_shape_mismatch():
    with pytest.raises(nx.DimensionError):
        nx.add(nx.constant(np.ones(3)), nx.constant(np.ones(4)))


def test_ops_do_not_record_without_tape():
    p = nx.param(np.ones(3))
    out = nx.sigmoid(p)
    assert not out.requires_grad


def test_tape_counts_every_use_once():
    x = nx.param([2.0])
    with nx.Tape() as tape:
        y = nx.add(nx.mul(x, x), x)  # x^2 + x
        tape.backward(nx.sum_(y))
    assert x.grad[0] == pytest.approx(5.0)


def test_tape_replay_is_deterministic(rng):
    W = nx.param(rng.uniform(-1, 1, (4, 4)))
    v = nx.param(rng.uniform(-1, 1, 4))
    with nx.Tape() as tape:
        out = nx.sum_(nx.tanh(nx.matmul(nx.sigmoid(v), W)))
    tape.backward(out)
    first = W.grad.copy(), v.grad.copy()
    W.grad = v.grad = None
    tape.backward(out)
    assert np.array_equal(first[0], W.grad) and np.array_equal(first[1], v.grad)


# -- softmax_normalize ----------------------------------------------------------


def test_softmax_single_input_is_all_ones():
    (out,) = nx.softmax_normalize([nx.constant([3.0, -1.0, 7.0])])
    assert out.values.tolist() == [1.0, 1.0, 1.0]


def test_softmax_two_equal_inputs():
    a, b = nx.softmax_normalize([nx.constant([0.3, 2.0]), nx.constant([0.3, 2.0])])
    assert a.values.tolist() == [0.5, 0.5] and b.values.tolist() == [0.5, 0.5]


def test_softmax_reference_value():
    a, b = nx.softmax_normalize([nx.constant([1.0, 2.0]), nx.constant([3.0, 0.0])])
    expected = np.exp(1.0) / (np.exp(1.0) + np.exp(3.0))
    assert a.values[0] == pytest.approx(expected, abs=1e-15)
    assert a.values[0] == pytest.approx(0.11920292202211755, abs=1e-15)
    assert b.values[1] == pytest.approx(1 / (1 + np.exp(2.0)), abs=1e-15)


def test_softmax_rejects_empty():
    with pytest.raises(ValueError):
        nx.softmax_normalize([])


@given(st.lists(st.lists(st.floats(-50, 50), min_size=3, max_size=3), min_size=1, max_size=6), st.floats(-100, 100))
def test_softmax_is_distribution_and_shift_invariant(rows, shift):
    outs = nx.softmax_normalize([nx.constant(r) for r in rows])
    vals = np.stack([o.values for o in outs])
    assert np.all(vals >= 0)
    assert np.allclose(vals.sum(axis=0), 1.0, rtol=0, atol=1e-12)
    shifted = nx.softmax_normalize([nx.constant(np.array(r) + shift) for r in rows])
    assert np.allclose(np.stack([o.values for o in shifted]), vals, atol=1e-12)


# -- gradient_check -------------------------------------------------------------


def test_gradient_check_sum_of_parameter_is_exact():
    ps = nx.Params()
    p = ps.add("p", nx.param(np.arange(6.0).reshape(2, 3)))
    assert nx.gradient_check(lambda: nx.sum_(p), ps) < 1e-9


def test_gradient_check_detects_wrong_gradient():
    ps = nx.Params()
    p = ps.add("p", nx.param([0.7]))

    def broken():
        out = nx.Tensor(np.array(float(p.values[0]) ** 2))
        return nx.record(out, (p,), lambda g: nx.accumulate(p, g * 3.0 * p.values))

    assert nx.gradient_check(broken, ps) > 0.1


def test_gradient_check_rejects_non_finite():
    ps = nx.Params()
    ps.add("p", nx.param([1.0]))
    with pytest.raises(nx.NumericError):
        nx.gradient_check(lambda: nx.constant(np.array(np.nan)), ps)


def test_gradient_check_crf_only_loss(rng):
    crf = CrfParams(3, 4, rng)
    crf.transition.values = rng.uniform(-1, 1, crf.transition.shape)
    ps = nx.Params()
    crf.register(ps)
    h = [nx.constant(rng.uniform(-1, 1, 4)) for _ in range(3)]
    err = nx.gradient_check(lambda: crf_loss(crf, [(h, [0, 2, 1])], 1e-2), ps)
    assert err < 1e-6
