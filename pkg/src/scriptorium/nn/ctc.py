"""Connectionist Temporal Classification loss and its analytic gradient.

The loss is the negative log of the total probability of every
frame-to-label alignment: labels are interleaved with the blank class
(always the last class index) and summed over with the standard
forward-backward lattice.  All lattice arithmetic happens in float64 log
space; the gradient treats the supplied log-probability matrix entry-wise
as free variables, i.e. grad[t, k] is minus the posterior probability that
frame t emits class k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NEG_INF = -np.inf


@dataclass
class CtcResult:
    loss: float
    grad: np.ndarray | None = None
    infeasible: bool = False


def _logaddexp_many(*vals: float) -> float:
    m = max(vals)
    if m == NEG_INF:
        return NEG_INF
    return m + np.log(sum(np.exp(v - m) for v in vals))


def feasible(num_frames: int, target: list[int]) -> bool:
    """CTC admits a target iff frames cover every label plus a blank
    between each adjacent repeat."""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return num_frames >= len(target) + repeats


def ctc_loss(logits: np.ndarray, target: list[int], grad: bool = False) -> CtcResult:
    """Loss (and optionally d loss / d logits) for one label sequence.

    ``logits`` is (N, C) log-probabilities with the blank as class C-1;
    ``target`` contains charset indices < C-1.  Infeasible targets give
    loss +inf with the ``infeasible`` flag set.
    """
    y = np.asarray(logits, dtype=np.float64)
    n, c = y.shape
    blank = c - 1
    if any(t < 0 or t >= blank for t in target):
        raise ValueError("target symbol outside charset range")
    if not feasible(n, list(target)):
        return CtcResult(loss=float("inf"), grad=np.zeros_like(y) if grad else None, infeasible=True)

    ext = [blank]
    for t in target:
        ext.extend((t, blank))
    s = len(ext)

    # alpha[t, j]: log-prob of prefixes ending in lattice state j at frame t
    alpha = np.full((n, s), NEG_INF)
    alpha[0, 0] = y[0, ext[0]]
    if s > 1:
        alpha[0, 1] = y[0, ext[1]]
    for t in range(1, n):
        for j in range(s):
            terms = [alpha[t - 1, j]]
            if j >= 1:
                terms.append(alpha[t - 1, j - 1])
            if j >= 2 and ext[j] != blank and ext[j] != ext[j - 2]:
                terms.append(alpha[t - 1, j - 2])
            prev = _logaddexp_many(*terms)
            alpha[t, j] = prev + y[t, ext[j]] if prev != NEG_INF else NEG_INF

    tail = [alpha[n - 1, s - 1]]
    if s > 1:
        tail.append(alpha[n - 1, s - 2])
    log_p = _logaddexp_many(*tail)
    loss = -log_p
    if not grad:
        return CtcResult(loss=float(loss))

    # beta[t, j]: log-prob of completing from state j using frames t+1..N-1
    # (the emission at frame t itself is excluded, so alpha+beta counts each
    # frame's emission exactly once)
    beta = np.full((n, s), NEG_INF)
    beta[n - 1, s - 1] = 0.0
    if s > 1:
        beta[n - 1, s - 2] = 0.0
    for t in range(n - 2, -1, -1):
        for j in range(s):
            terms = [beta[t + 1, j] + y[t + 1, ext[j]]]
            if j + 1 < s:
                terms.append(beta[t + 1, j + 1] + y[t + 1, ext[j + 1]])
            if j + 2 < s and ext[j + 2] != blank and ext[j + 2] != ext[j]:
                terms.append(beta[t + 1, j + 2] + y[t + 1, ext[j + 2]])
            beta[t, j] = _logaddexp_many(*terms)

    grad_out = np.zeros_like(y)
    for t in range(n):
        for k in range(c):
            states = [j for j in range(s) if ext[j] == k]
            if not states:
                continue
            posterior = _logaddexp_many(*(alpha[t, j] + beta[t, j] for j in states))
            if posterior != NEG_INF:
                grad_out[t, k] = -np.exp(posterior - log_p)
    return CtcResult(loss=float(loss), grad=grad_out)
