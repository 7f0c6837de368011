import numpy as np
import pytest

from latticener import numerics as nx


def central_diff(f, arrays, eps=1e-5):
    """Numerical gradient of scalar ``f()`` w.r.t. each array, perturbed in place."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f()
            flat[i] = orig - eps
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def tape_grads(build, tensors):
    for t in tensors:
        t.grad = None
    with nx.Tape() as tape:
        out = build()
        tape.backward(out)
    return [t.grad if t.grad is not None else np.zeros_like(t.values) for t in tensors]


def max_rel(a, b, floor=1e-5):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance verdicts, echoed in the terminal summary so they survive output capture
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
