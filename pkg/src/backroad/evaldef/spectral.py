"""Spectral outlier scores: squared projection of centered representations on
the top right singular vector, found by power iteration."""

from __future__ import annotations

import numpy as np


def top_right_singular_vector(centered: np.ndarray, iters: int = 200,
                              tol: float = 1e-12) -> np.ndarray:
    """Power iteration on X^T X with a fixed deterministic start."""
    d = centered.shape[1]
    v = np.full(d, 1.0 / np.sqrt(d))
    gram = centered.T @ centered
    norm = np.linalg.norm(gram @ v)
    if norm == 0.0:
        return v
    for _ in range(iters):
        w = gram @ v
        n = np.linalg.norm(w)
        if n == 0.0:
            return v
        w /= n
        if np.linalg.norm(w - v) < tol:
            v = w
            break
        v = w
    return v


def spectral_scores(reps: np.ndarray) -> np.ndarray:
    """score_i = ((R_i - mu) . v)^2 with v the top right singular vector of
    the centered matrix. All-identical inputs score zero."""
    reps = np.asarray(reps, dtype=np.float64)
    if reps.ndim != 2 or reps.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least two samples")
    centered = reps - reps.mean(axis=0)
    if not np.any(centered):
        return np.zeros(reps.shape[0])
    v = top_right_singular_vector(centered)
    proj = centered @ v
    return proj * proj


def rank_auc(scores, flags) -> float | None:
    """Mann-Whitney AUC of scores as a detector of flagged samples; None when
    a class is empty."""
    scores = np.asarray(scores, dtype=np.float64)
    flags = np.asarray(flags, dtype=bool)
    pos = scores[flags]
    neg = scores[~flags]
    if len(pos) == 0 or len(neg) == 0:
        return None
    order = np.argsort(np.concatenate([neg, pos]), kind="stable")
    ranks = np.empty(len(order))
    ranks[order] = np.arange(1, len(order) + 1)
    # average ranks over ties
    allv = np.concatenate([neg, pos])
    sorted_v = allv[order]
    i = 0
    while i < len(sorted_v):
        j = i
        while j + 1 < len(sorted_v) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = ranks[order[i:j + 1]].mean()
        i = j + 1
    r_pos = ranks[len(neg):].sum()
    u = r_pos - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))
