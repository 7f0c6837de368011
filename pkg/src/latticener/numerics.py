"""Dense float64 tensors with a dynamic reverse-mode tape.

Operations record themselves on the innermost active :class:`Tape` whenever at
least one operand requires a gradient. Outside a tape every op is a plain
numpy computation, which is how evaluation and finite differencing run.
"""
from __future__ import annotations

from collections import OrderedDict
from typing import Callable, Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "name")

    def __init__(self, values, requires_grad: bool = False, name: str = ""):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.values)

    def item(self) -> float:
        return float(self.values.reshape(-1)[0]) if self.values.size == 1 else float("nan")

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def param(values, name: str = "") -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


def constant(values) -> Tensor:
    return Tensor(values)


class _Node:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable[[np.ndarray], None]):
        self.out = out
        self.inputs = inputs
        self.backward = backward


_active: list["Tape"] = []


class Tape:
    """Ordered record of primitive applications for one forward pass."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _active.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _active.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, output: Tensor, seed: np.ndarray | None = None) -> None:
        """Accumulate d(output)/d(leaf) into every leaf's ``grad``.

        Intermediate gradients are reset first, so replaying the same tape
        twice from zeroed leaves yields identical leaf gradients.
        """
        for node in self.nodes:
            node.out.grad = None
        output.grad = np.ones_like(output.values) if seed is None else np.array(seed, dtype=np.float64)
        for node in reversed(self.nodes):
            if node.out.grad is not None:
                node.backward(node.out.grad)


def recording(*inputs: Tensor) -> bool:
    return bool(_active) and any(t.requires_grad for t in inputs)


def record(out: Tensor, inputs: Sequence[Tensor], backward: Callable[[np.ndarray], None]) -> Tensor:
    """Register ``out`` as produced from ``inputs``; used to define new primitives."""
    if recording(*inputs):
        out.requires_grad = True
        _active[-1].nodes.append(_Node(out, tuple(inputs), backward))
    return out


def accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True).reshape(t.values.shape)
    else:
        t.grad += g


def _check_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- primitives ---------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product. ``a`` may be a vector, read as a single row."""
    if b.values.ndim != 2 or a.values.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    av, bv = a.values, b.values
    out = Tensor(av @ bv)

    def backward(g):
        if a.requires_grad:
            accumulate(a, g @ bv.T)
        if b.requires_grad:
            accumulate(b, np.outer(av, g) if av.ndim == 1 else av.T @ g)

    return record(out, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.values.T)
    return record(out, (a,), lambda g: accumulate(a, g.T))


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same("add", a, b)
    out = Tensor(a.values + b.values)

    def backward(g):
        accumulate(a, g)
        accumulate(b, g)

    return record(out, (a, b), backward)


def add_row(a: Tensor, row: Tensor) -> Tensor:
    """Add a vector to every row of a matrix (bias broadcast)."""
    if a.values.ndim != 2 or row.shape != (a.shape[1],):
        raise DimensionError(f"add_row: shapes {a.shape} and {row.shape} are incompatible")
    out = Tensor(a.values + row.values)

    def backward(g):
        accumulate(a, g)
        accumulate(row, g.sum(axis=0))

    return record(out, (a, row), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same("sub", a, b)
    out = Tensor(a.values - b.values)

    def backward(g):
        accumulate(a, g)
        accumulate(b, -g)

    return record(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product."""
    _check_same("mul", a, b)
    av, bv = a.values, b.values
    out = Tensor(av * bv)

    def backward(g):
        accumulate(a, g * bv)
        accumulate(b, g * av)

    return record(out, (a, b), backward)


def scale(a: Tensor, k: float) -> Tensor:
    out = Tensor(a.values * k)
    return record(out, (a,), lambda g: accumulate(a, g * k))


def sigmoid(a: Tensor) -> Tensor:
    x = a.values
    # split by sign so neither branch overflows
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    out = Tensor(s)
    return record(out, (a,), lambda g: accumulate(a, g * s * (1.0 - s)))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.values)
    out = Tensor(t)
    return record(out, (a,), lambda g: accumulate(a, g * (1.0 - t * t)))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise DimensionError("concat: no operands")
    ndim = parts[0].values.ndim
    for p in parts[1:]:
        other = [d for i, d in enumerate(p.shape) if i != axis % ndim]
        first = [d for i, d in enumerate(parts[0].shape) if i != axis % ndim]
        if p.values.ndim != ndim or other != first:
            raise DimensionError(f"concat: shapes {parts[0].shape} and {p.shape} disagree off axis {axis}")
    if len(parts) == 1:
        return parts[0]
    sizes = [p.shape[axis] for p in parts]
    out = Tensor(np.concatenate([p.values for p in parts], axis=axis))
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            if p.requires_grad:
                accumulate(p, np.take(g, np.arange(lo, hi), axis=axis))

    return record(out, tuple(parts), backward)


def stack(rows: Sequence[Tensor]) -> Tensor:
    """Stack same-shape vectors into a matrix, one per row."""
    if not rows:
        raise DimensionError("stack: no operands")
    for r in rows[1:]:
        _check_same("stack", rows[0], r)
    out = Tensor(np.stack([r.values for r in rows]))

    def backward(g):
        for i, r in enumerate(rows):
            accumulate(r, g[i])

    return record(out, tuple(rows), backward)


def slice_(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(a.values[start:stop])

    def backward(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.values)
            a.grad[start:stop] += g

    return record(out, (a,), backward)


def take_row(matrix: Tensor, index: int) -> Tensor:
    """Row lookup; the gradient touches only that row."""
    out = Tensor(matrix.values[index].copy())

    def backward(g):
        if matrix.grad is None:
            matrix.grad = np.zeros_like(matrix.values)
        matrix.grad[index] += g

    return record(out, (matrix,), backward)


def max_rows(a: Tensor) -> Tensor:
    """Column-wise max over the rows of a matrix; ties route to the first row."""
    idx = np.argmax(a.values, axis=0)
    cols = np.arange(a.shape[1])
    out = Tensor(a.values[idx, cols])

    def backward(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.values)
        np.add.at(a.grad, (idx, cols), g)

    return record(out, (a,), backward)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when ``rng`` is None or ``rate`` is 0."""
    if rng is None or rate <= 0.0:
        return a
    keep = 1.0 - rate
    mask = (rng.random(a.shape) < keep) / keep
    out = Tensor(a.values * mask)
    return record(out, (a,), lambda g: accumulate(a, g * mask))


def sum_(a: Tensor) -> Tensor:
    out = Tensor(np.array(a.values.sum()))
    return record(out, (a,), lambda g: accumulate(a, np.full_like(a.values, float(g))))


def sum_squares(a: Tensor) -> Tensor:
    v = a.values
    out = Tensor(np.array(np.dot(v.ravel(), v.ravel())))
    return record(out, (a,), lambda g: accumulate(a, 2.0 * float(g) * v))


def sum_squares_rows(matrix: Tensor, rows: Iterable[int]) -> Tensor:
    """Squared norm restricted to the given rows of a matrix."""
    idx = np.array(sorted(set(rows)), dtype=np.int64)
    sub_ = matrix.values[idx]
    out = Tensor(np.array((sub_ * sub_).sum()))

    def backward(g):
        if matrix.grad is None:
            matrix.grad = np.zeros_like(matrix.values)
        matrix.grad[idx] += 2.0 * float(g) * sub_

    return record(out, (matrix,), backward)


def add_scalars(terms: Sequence[Tensor]) -> Tensor:
    if not terms:
        return Tensor(np.array(0.0))
    out = Tensor(np.array(sum(float(t.values) for t in terms)))

    def backward(g):
        for t in terms:
            accumulate(t, g)

    return record(out, tuple(terms), backward)


def softmax_normalize(logits: Sequence[Tensor]) -> list[Tensor]:
    """Per-dimension exponential normalization across a list of same-shape vectors.

    Output ``k`` at dimension ``d`` is ``exp(x_k[d]) / sum_j exp(x_j[d])``.
    """
    if not logits:
        raise ValueError("softmax_normalize: empty input list")
    for t in logits[1:]:
        _check_same("softmax_normalize", logits[0], t)
    z = np.stack([t.values for t in logits])
    z = z - z.max(axis=0)
    e = np.exp(z)
    alpha = e / e.sum(axis=0)
    joint = Tensor(alpha)

    def backward(g):
        inner = (alpha * g).sum(axis=0)
        grad_z = alpha * (g - inner)
        for k, t in enumerate(logits):
            accumulate(t, grad_z[k])

    record(joint, tuple(logits), backward)
    return [_row_view(joint, k) for k in range(len(logits))]


def _row_view(joint: Tensor, k: int) -> Tensor:
    out = Tensor(joint.values[k])

    def backward(g):
        if joint.grad is None:
            joint.grad = np.zeros_like(joint.values)
        joint.grad[k] += g

    return record(out, (joint,), backward)


# -- parameter collections ----------------------------------------------------


class Params(OrderedDict):
    """Named trainable tensors in a fixed registration order."""

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self:
            raise KeyError(f"duplicate parameter name {name!r}")
        tensor.name = name
        tensor.requires_grad = True
        self[name] = tensor
        return tensor

    def zero_grad(self) -> None:
        for t in self.values():
            t.grad = None

    def size(self) -> int:
        return sum(t.values.size for t in self.values())

    def state(self) -> dict[str, np.ndarray]:
        return {k: t.values.copy() for k, t in self.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self) ^ set(state)
        if missing:
            raise KeyError(f"parameter sets differ: {sorted(missing)}")
        for k, t in self.items():
            v = np.asarray(state[k], dtype=np.float64)
            if v.shape != t.shape:
                raise DimensionError(f"{k}: stored shape {v.shape} != model shape {t.shape}")
            t.values = v.copy()


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


# -- gradient checking --------------------------------------------------------


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from
    turning round-off into huge ratios."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def gradient_check(
    f: Callable[[], Tensor],
    params: Params,
    epsilon: float = 1e-5,
    floor: float = 1e-5,
    per_param: dict | None = None,
) -> float:
    """Worst relative error between tape gradients and central differences.

    ``f`` must rebuild its scalar computation on each call and be
    deterministic. When ``per_param`` is a dict it receives the worst error
    for each parameter name.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    params.zero_grad()
    with Tape() as tape:
        out = f()
        if not np.isfinite(out.values).all():
            raise NumericError("objective is not finite")
        tape.backward(out)
    analytic = {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.values)) for k, t in params.items()}

    def evaluate() -> float:
        v = float(f().values)
        if not np.isfinite(v):
            raise NumericError("objective is not finite under perturbation")
        return v

    worst = 0.0
    for name, t in params.items():
        t.values = np.ascontiguousarray(t.values)
        flat = t.values.reshape(-1)
        numeric = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = evaluate()
            flat[i] = orig - epsilon
            down = evaluate()
            flat[i] = orig
            numeric[i] = (up - down) / (2 * epsilon)
        err = relative_error(analytic[name].reshape(-1), numeric, floor)
        e = float(err.max()) if err.size else 0.0
        if per_param is not None:
            per_param[name] = e
        worst = max(worst, e)
    params.zero_grad()
    return worst
