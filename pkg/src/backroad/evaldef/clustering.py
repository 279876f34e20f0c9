"""Activation clustering: PCA whitening, FastICA rotation to 10 components,
then 2-means with k-means++ seeding and restarts."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

ICA_COMPONENTS = 10
ICA_MAX_ITER = 500
ICA_TOL = 1e-5
KMEANS_RESTARTS = 10


def whiten(X: np.ndarray, n_components: int = ICA_COMPONENTS):
    """Center and PCA-whiten to at most n_components dimensions; the output
    has identity covariance (population normalization). Returns
    (whitened, kept_components)."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    centered = X - X.mean(axis=0)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    keep = min(n_components, int((s > 1e-12 * max(s[0], 1.0)).sum()))
    if keep == 0:
        return np.zeros((n, 1)), 0
    return u[:, :keep] * np.sqrt(n), keep


def ica_reduce(Xw: np.ndarray, rng: np.random.Generator):
    """FastICA rotation (tanh contrast, symmetric decorrelation) of whitened
    data. Returns (components, converged): on non-convergence the caller
    falls back to the whitened principal components."""
    from sklearn.decomposition import FastICA
    from sklearn.exceptions import ConvergenceWarning

    seed = int(rng.integers(2 ** 31 - 1))
    ica = FastICA(n_components=Xw.shape[1], whiten=False, fun="logcosh",
                  max_iter=ICA_MAX_ITER, tol=ICA_TOL, random_state=seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        out = ica.fit_transform(Xw)
        converged = not any(issubclass(w.category, ConvergenceWarning) for w in caught)
    return out, converged


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = np.min([(np.square(X - c)).sum(axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0.0:
            centers.append(X[int(rng.integers(n))])
            continue
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r))
        centers.append(X[min(idx, n - 1)])
    return np.array(centers)


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 300):
    """Lloyd iterations to a fixed point; returns (labels, centers,
    objective_history). The objective never increases."""
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(X)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(centers.shape[0]):
            mask = labels == j
            if mask.any():
                centers[j] = X[mask].mean(axis=0)
    return labels, centers, history


def kmeans2(X: np.ndarray, rng: np.random.Generator,
            restarts: int = KMEANS_RESTARTS):
    """2-means with k-means++ seeding and restarts; keeps the best objective.
    Degenerate all-identical input yields one empty cluster."""
    best = None
    for _ in range(restarts):
        centers = kmeans_pp_init(X, 2, rng)
        labels, centers, history = lloyd(X, centers.copy())
        if best is None or history[-1] < best[2][-1]:
            best = (labels, centers, history)
    return best


@dataclass
class ClusterReport:
    sizes: tuple[int, int]
    poison_in_cluster: tuple[int, int]
    ica_converged: bool
    used_fallback: bool
    objective: float
    labels: np.ndarray = field(repr=False)

    def composition(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "poison_in_cluster": list(self.poison_in_cluster),
            "ica_converged": self.ica_converged,
            "used_fallback": self.used_fallback,
            "objective": self.objective,
        }


def activation_cluster(reps: np.ndarray, flags, rng: np.random.Generator) -> ClusterReport:
    """Whiten + ICA-reduce + 2-means; reports cluster sizes and ground-truth
    poison composition."""
    reps = np.asarray(reps, dtype=np.float64)
    if reps.shape[0] < 2:
        raise ValueError("need at least two samples to cluster")
    flags = np.asarray(flags, dtype=bool)
    Xw, keep = whiten(reps)
    used_fallback = False
    if keep == 0:
        X = Xw
        converged = True
    else:
        X, converged = ica_reduce(Xw, rng)
        if not converged:
            X = Xw
            used_fallback = True
    labels, _, history = kmeans2(X, rng)
    sizes = (int((labels == 0).sum()), int((labels == 1).sum()))
    poison = (int(flags[labels == 0].sum()), int(flags[labels == 1].sum()))
    return ClusterReport(sizes=sizes, poison_in_cluster=poison,
                         ica_converged=converged, used_fallback=used_fallback,
                         objective=history[-1], labels=labels)
