"""Linear-chain CRF with virtual START/STOP states.

Label indices run over ``0..L-1``; the transition matrix is ``(L+2) x (L+2)``
with START at row ``L`` and STOP at column ``L+1``. Only the rows/columns
that a path can actually use contribute to any score.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import numerics as nx
from .numerics import Params, Tensor


def logsumexp(x: np.ndarray, axis=None) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


class CrfParams:
    def __init__(self, n_labels: int, hidden_dim: int, rng: np.random.Generator | None = None, prefix: str = "crf"):
        if n_labels < 1:
            raise ValueError("a CRF needs at least one label")
        self.n_labels = n_labels
        self.start = n_labels
        self.stop = n_labels + 1
        if rng is None:
            emission = np.zeros((n_labels, hidden_dim))
        else:
            emission = nx.xavier_uniform(rng, hidden_dim, n_labels, (n_labels, hidden_dim))
        self.emission = nx.param(emission, f"{prefix}.emission")
        self.transition = nx.param(np.zeros((n_labels + 2, n_labels + 2)), f"{prefix}.transition")

    def register(self, params: Params, prefix: str = "crf") -> None:
        params.add(f"{prefix}.emission", self.emission)
        params.add(f"{prefix}.transition", self.transition)

    def emissions(self, hidden) -> Tensor:
        """Per-position label scores ``W_l . h_i`` as a ``tau x L`` tensor."""
        H = hidden if isinstance(hidden, Tensor) else nx.stack(list(hidden))
        return nx.matmul(H, nx.transpose(self.emission))


def _emission_matrix(params: CrfParams, hidden) -> np.ndarray:
    if isinstance(hidden, Tensor):
        H = hidden.values
    elif isinstance(hidden, np.ndarray):
        H = hidden
    else:
        H = np.stack([h.values if isinstance(h, Tensor) else np.asarray(h, dtype=np.float64) for h in hidden])
    return H @ params.emission.values.T


def path_score(E: np.ndarray, T: np.ndarray, y: Sequence[int]) -> float:
    L = E.shape[1]
    if len(y) != E.shape[0]:
        raise ValueError(f"label sequence of length {len(y)} for {E.shape[0]} positions")
    total = T[L, y[0]] + E[0, y[0]]
    # same association order as viterbi_decode so scores agree exactly
    for i in range(1, len(y)):
        total = total + T[y[i - 1], y[i]]
        total = total + E[i, y[i]]
    return float(total + T[y[-1], L + 1])


def forward_scores(E: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, float]:
    L = E.shape[1]
    trans = T[:L, :L]
    alpha = np.empty_like(E)
    alpha[0] = T[L, :L] + E[0]
    for i in range(1, E.shape[0]):
        alpha[i] = logsumexp(alpha[i - 1][:, None] + trans, axis=0) + E[i]
    log_z = float(logsumexp(alpha[-1] + T[:L, L + 1]))
    return alpha, log_z


def backward_scores(E: np.ndarray, T: np.ndarray) -> np.ndarray:
    L = E.shape[1]
    trans = T[:L, :L]
    beta = np.empty_like(E)
    beta[-1] = T[:L, L + 1]
    for i in range(E.shape[0] - 2, -1, -1):
        beta[i] = logsumexp(trans + (E[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def viterbi_decode(E: np.ndarray, T: np.ndarray, allowed: np.ndarray | None = None) -> tuple[list[int], float]:
    L = E.shape[1]
    T = T if allowed is None else np.where(allowed, T, -np.inf)
    trans = T[:L, :L]
    delta = T[L, :L] + E[0]
    back = []
    for i in range(1, E.shape[0]):
        cand = delta[:, None] + trans
        # argmax returns the first maximum: lowest previous label wins ties
        best = np.argmax(cand, axis=0)
        back.append(best)
        delta = cand[best, np.arange(L)] + E[i]
    final = delta + T[:L, L + 1]
    last = int(np.argmax(final))
    path = [last]
    for best in reversed(back):
        path.append(int(best[path[-1]]))
    path.reverse()
    return path, float(final[last])


def score(params: CrfParams, hidden, y: Sequence[int]) -> float:
    return path_score(_emission_matrix(params, hidden), params.transition.values, y)


def log_partition(params: CrfParams, hidden) -> float:
    E = _emission_matrix(params, hidden)
    if E.shape[0] < 1:
        raise ValueError("log_partition needs at least one position")
    return forward_scores(E, params.transition.values)[1]


def viterbi(params: CrfParams, hidden, allowed: np.ndarray | None = None) -> tuple[list[int], float]:
    E = _emission_matrix(params, hidden)
    if E.shape[0] < 1:
        raise ValueError("viterbi needs at least one position")
    return viterbi_decode(E, params.transition.values, allowed)


def marginals(E: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Unary marginals (tau x L), expected transition counts ((L+2) x (L+2)), log Z."""
    L = E.shape[1]
    alpha, log_z = forward_scores(E, T)
    beta = backward_scores(E, T)
    unary = np.exp(alpha + beta - log_z)
    counts = np.zeros_like(T)
    counts[L, :L] = unary[0]
    counts[:L, L + 1] = unary[-1]
    trans = T[:L, :L]
    for i in range(1, E.shape[0]):
        counts[:L, :L] += np.exp(alpha[i - 1][:, None] + trans + (E[i] + beta[i])[None, :] - log_z)
    return unary, counts, log_z


def sequence_nll(emissions: Tensor, transition: Tensor, y: Sequence[int]) -> Tensor:
    """``log Z - score(y)`` as a tape primitive over the emission and transition tensors."""
    E, T = emissions.values, transition.values
    L = E.shape[1]
    unary, counts, log_z = marginals(E, T)
    out = Tensor(np.array(log_z - path_score(E, T, y)))

    def backward(g):
        g = float(g)
        if emissions.requires_grad:
            gE = unary.copy()
            gE[np.arange(len(y)), y] -= 1.0
            nx.accumulate(emissions, g * gE)
        if transition.requires_grad:
            gT = counts.copy()
            gT[L, y[0]] -= 1.0
            for a, b in zip(y, y[1:]):
                gT[a, b] -= 1.0
            gT[y[-1], L + 1] -= 1.0
            nx.accumulate(transition, g * gT)

    return nx.record(out, (emissions, transition), backward)


def crf_loss(params: CrfParams, batch: Sequence[tuple[object, Sequence[int]]], lam: float) -> Tensor:
    """Negative log-likelihood of a batch plus ``lam/2`` times the squared CRF weights."""
    terms = [sequence_nll(params.emissions(h), params.transition, y) for h, y in batch]
    reg = nx.add_scalars([nx.sum_squares(params.emission), nx.sum_squares(params.transition)])
    return nx.add(nx.add_scalars(terms), nx.scale(reg, lam / 2.0))
