"""Exact t-SNE: Gaussian input affinities, Student-t output kernel, gradient descent on KL(P||Q)."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

ENTROPY_TOL = 1e-5


class TsneDivergence(FloatingPointError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite gradient at iteration {iteration}")
        self.iteration = iteration


@dataclass
class TsneResult:
    Y: np.ndarray
    kl: list[float]


def _sq_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _row_distribution(d: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """Conditional probabilities for one row and their entropy in bits."""
    shifted = d - d.min()
    p = np.exp(-shifted * beta)
    s = p.sum()
    p /= s
    # H = log(s) + beta * E[d]; computed on the shifted distances
    h = (np.log(s) + beta * np.dot(shifted, p)) / np.log(2.0)
    return p, float(h)


def conditional_affinities(X: np.ndarray, perplexity: float, tol: float = ENTROPY_TOL,
                           max_steps: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic p_{j|i} with per-row precision found by bisection.

    Returns the matrix and each row's entropy in bits.
    """
    n = X.shape[0]
    D = _sq_distances(X)
    target = np.log2(perplexity)
    P = np.zeros((n, n))
    H = np.zeros(n)
    for i in range(n):
        d = np.delete(D[i], i)
        if d.size == 1:
            P[i, 1 - i] = 1.0
            continue
        lo, hi, beta = 0.0, np.inf, 1.0 / max(np.median(d), 1e-12)
        for _ in range(max_steps):
            p, h = _row_distribution(d, beta)
            if abs(h - target) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (beta + lo) / 2.0
        else:
            log.warning("row %d: entropy %.6f bits did not reach %.6f", i, h, target)
        P[i, np.arange(n) != i] = p
        H[i] = h
    return P, H


def pairwise_affinities(X, perplexity: float = 30.0, seed: int = 0) -> np.ndarray:
    """Symmetric joint affinities (P + P^T) / 2N.

    Identical rows are jittered by 1e-10 (seeded) so distances stay informative.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    if not 0 < perplexity < (n - 1) / 3:
        raise ValueError(f"perplexity {perplexity} must be in (0, {(n - 1) / 3:.3g}) for {n} points")
    _, first = np.unique(X, axis=0, return_index=True)
    if len(first) < n:
        log.warning("%d duplicate rows jittered by 1e-10", n - len(first))
        X = X + 1e-10 * np.random.default_rng(seed).standard_normal(X.shape)
    P, _ = conditional_affinities(X, perplexity)
    return (P + P.T) / (2.0 * n)


def kl_gradient(P: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    """KL(P||Q) under the Student-t kernel and its gradient with respect to Y."""
    num = 1.0 / (1.0 + _sq_distances(Y))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), 1e-300)
    mask = P > 0
    kl = float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))
    W = (P - Q) * num
    grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
    return kl, grad


def hashed_init(ids: list[str], seed: int, scale: float = 1e-4) -> np.ndarray:
    """Per-point Gaussian start keyed by id, independent of row order."""
    Y = np.empty((len(ids), 2))
    for i, pid in enumerate(ids):
        h = hashlib.sha256(f"{seed}:{pid}".encode("utf-8")).digest()
        Y[i] = np.random.default_rng(int.from_bytes(h[:8], "little")).standard_normal(2)
    return scale * Y


def tsne(X, perplexity: float = 30.0, seed: int = 0, iters: int = 1000, ids: list[str] | None = None,
         learning_rate: float = 200.0, exaggeration: float = 12.0, exaggeration_iters: int = 250,
         momentum: float = 0.5, final_momentum: float = 0.8, momentum_switch: int = 250,
         min_gain: float = 0.01, max_step_norm: float | None = 5.0) -> TsneResult:
    """Embed rows of ``X`` in two dimensions.

    Uses momentum gradient descent with per-coordinate adaptive gains; each
    point's step is capped at ``max_step_norm`` so a point whose gains have
    grown large cannot be flung away from the layout. The KL
    trace is measured against the unexaggerated affinities at every iteration.
    Rows are processed in id order, so permuting the input permutes the
    output and nothing else.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    ids = [str(i) for i in range(n)] if ids is None else [str(i) for i in ids]
    if len(ids) != n:
        raise ValueError("ids must match the number of rows")
    if len(set(ids)) != n:
        raise ValueError("ids must be unique")
    order = sorted(range(n), key=ids.__getitem__)
    result = _optimize(X[order], [ids[i] for i in order], perplexity, seed, iters, learning_rate,
                       exaggeration, exaggeration_iters, momentum, final_momentum,
                       momentum_switch, min_gain, max_step_norm)
    Y = np.empty_like(result.Y)
    Y[order] = result.Y
    return TsneResult(Y, result.kl)


def _optimize(X, ids, perplexity, seed, iters, learning_rate, exaggeration, exaggeration_iters,
              momentum, final_momentum, momentum_switch, min_gain, max_step_norm) -> TsneResult:
    P = pairwise_affinities(X, perplexity, seed)
    Y = hashed_init(ids, seed)
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trace = []
    for it in range(iters):
        exag = exaggeration if it < exaggeration_iters else 1.0
        mom = momentum if it < momentum_switch else final_momentum
        _, grad = kl_gradient(P * exag, Y)
        if not np.all(np.isfinite(grad)):
            raise TsneDivergence(it)
        # grow gains where the last step went downhill, shrink them elsewhere
        gains = np.where(update * grad < 0, gains + 0.2, gains * 0.8)
        np.maximum(gains, min_gain, out=gains)
        update = mom * update - learning_rate * gains * grad
        if max_step_norm is not None:
            norm = np.linalg.norm(update, axis=1, keepdims=True)
            update = np.where(norm > max_step_norm, update * (max_step_norm / np.maximum(norm, 1e-300)), update)
        Y = Y + update
        Y = Y - Y.mean(axis=0)
        trace.append(kl_gradient(P, Y)[0])
    return TsneResult(Y, trace)
