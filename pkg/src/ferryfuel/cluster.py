"""PCA and K-means for discovering the vessel's operational modes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import KTooLarge, LengthMismatch, TooFewRows, TooManyComponents
from .telemetry import TIMESTAMP, Dataset


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray          # (n_pcs, d), orthonormal rows
    explained_variance: np.ndarray  # descending

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {"mean": self.mean, "components": self.components,
                "explained_variance": self.explained_variance}

    @staticmethod
    def from_dict(d: dict) -> "PcaModel":
        return PcaModel(np.asarray(d["mean"]), np.asarray(d["components"]),
                        np.asarray(d["explained_variance"]))


def fit_pca(X) -> PcaModel:
    """Eigendecomposition of the sample covariance (``ddof=1``).

    Each component is signed so that its largest-magnitude loading is
    positive; on exact magnitude ties the first such loading wins.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows("PCA needs at least 2 rows")
    if not np.isfinite(X).all():
        raise ValueError("PCA input must not contain missing cells")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = np.maximum(vals[order], 0.0)
    comps = vecs[:, order].T.copy()
    for i, row in enumerate(comps):
        if row[np.argmax(np.abs(row))] < 0:
            comps[i] = -row
    return PcaModel(mean, comps, vals)


def transform(p: PcaModel, X, n_components: int | None = None) -> np.ndarray:
    n_components = p.n_components if n_components is None else n_components
    if n_components > p.n_components or n_components < 1:
        raise TooManyComponents(f"requested {n_components} of {p.n_components} components")
    return (np.asarray(X, dtype=np.float64) - p.mean) @ p.components[:n_components].T


def inverse_transform(p: PcaModel, scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    return scores @ p.components[: scores.shape[1]] + p.mean


# ----------------------------------------------------------------- k-means

@dataclass(frozen=True)
class KMeansModel:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int = 0
    inertia_history: tuple = ()
    seed: int = 0

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def predict(self, X) -> np.ndarray:
        return _assign(np.asarray(X, dtype=np.float64), self.centroids)[0]

    def to_dict(self) -> dict:
        return {"centroids": self.centroids, "k": self.k, "seed": self.seed,
                "inertia": self.inertia, "n_iter": self.n_iter}

    @staticmethod
    def from_dict(d: dict, assignments=None) -> "KMeansModel":
        c = np.asarray(d["centroids"])
        a = np.zeros(0, np.int64) if assignments is None else np.asarray(assignments)
        return KMeansModel(c, a, float(d["inertia"]), int(d.get("n_iter", 0)), (), int(d["seed"]))


@njit(cache=True, nogil=True)
def _assign_kernel(X, C):
    n, d = X.shape
    k = C.shape[0]
    lab = np.empty(n, dtype=np.int64)
    dmin = np.empty(n)
    for i in range(n):
        best = np.inf
        bj = 0
        for j in range(k):
            s = 0.0
            for f in range(d):
                t = X[i, f] - C[j, f]
                s += t * t
            if s < best:
                best = s
                bj = j
        lab[i] = bj
        dmin[i] = best
    return lab, dmin


@njit(cache=True, nogil=True)
def _update_kernel(X, labels, C):
    n, d = X.shape
    k = C.shape[0]
    sums = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        j = labels[i]
        counts[j] += 1
        for f in range(d):
            sums[j, f] += X[i, f]
    out = C.copy()
    for j in range(k):
        if counts[j] > 0:
            for f in range(d):
                out[j, f] = sums[j, f] / counts[j]
    return out


def _assign(X, C):
    """Nearest centroid per row (lowest index on ties) and its squared distance."""
    return _assign_kernel(np.ascontiguousarray(X, dtype=np.float64),
                          np.ascontiguousarray(C, dtype=np.float64))


def inertia(X, centroids, assignments) -> float:
    """Sum of squared distances from each row to its assigned centroid."""
    X = np.asarray(X, dtype=np.float64)
    return float(((X - centroids[assignments]) ** 2).sum())


def lloyd(X, centroids, max_iter: int = 300):
    """Alternate assignment and mean updates until assignments stop changing.

    Returns ``(centroids, labels, inertia, n_iter, history)`` where
    ``history`` holds the inertia after every assignment step. A centroid
    that loses all its rows stays where it was, which keeps the history
    non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    C = np.array(centroids, dtype=np.float64)
    labels, dmin = _assign(X, C)
    hist = [float(dmin.sum())]
    it = 0
    X = np.ascontiguousarray(X)
    for it in range(1, max_iter + 1):
        C = _update_kernel(X, labels, C)
        new, dmin = _assign(X, C)
        hist.append(float(dmin.sum()))
        if np.array_equal(new, labels):
            break
        labels = new
    return C, labels, float(dmin.sum()), it, tuple(hist)


def kmeans_pp(X, k: int, rng) -> np.ndarray:
    """k-means++ seeding: each new centre drawn with probability proportional to D^2."""
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((X - X[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        nxt = int(rng.integers(n)) if total <= 0 else int(
            min(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"), n - 1))
        idx.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[idx].copy()


def fit_kmeans(X, k: int, seed: int = 0, max_iter: int = 300, n_restarts: int = 10,
               init=None) -> KMeansModel:
    """Best of ``n_restarts`` k-means++ runs; ``init`` adds one extra run from given centroids.

    Runs are compared on ``(inertia, run index)`` so the winner does not
    depend on evaluation order. The extra run, if any, comes first.
    """
    X = np.asarray(X, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > X.shape[0]:
        raise KTooLarge(f"k={k} exceeds {X.shape[0]} rows")
    starts = [] if init is None else [np.asarray(init, dtype=np.float64)]
    for child in np.random.SeedSequence(seed).spawn(n_restarts):
        starts.append(kmeans_pp(X, k, np.random.default_rng(child)))
    best = None
    for run, C0 in enumerate(starts):
        res = lloyd(X, C0, max_iter)
        if best is None or res[2] < best[2]:
            best = res
    C, labels, inr, n_iter, hist = best
    return KMeansModel(C, labels, inr, n_iter, hist, seed)


def elbow_curve(X, k_max: int, seed: int = 0, n_restarts: int = 10, max_iter: int = 300):
    """``[(k, inertia)]`` for ``k = 1..k_max``.

    Each ``k + 1`` fit also tries the best ``k`` centroids plus the row
    farthest from them, so the curve cannot increase.
    """
    X = np.asarray(X, dtype=np.float64)
    if k_max > X.shape[0]:
        raise KTooLarge(f"k_max={k_max} exceeds {X.shape[0]} rows")
    out, prev = [], None
    for k in range(1, k_max + 1):
        init = None
        if prev is not None:
            _, dmin = _assign(X, prev.centroids)
            init = np.vstack([prev.centroids, X[int(np.argmax(dmin))]])
        prev = fit_kmeans(X, k, seed + k, max_iter, n_restarts, init=init)
        out.append((k, prev.inertia))
    return out


def elbow_k(curve) -> int:
    """The ``k`` with the largest relative inertia drop from ``k - 1``."""
    if len(curve) < 2:
        return curve[0][0]
    best_k, best = curve[1][0], -np.inf
    for (_, a), (k, b) in zip(curve, curve[1:]):
        drop = (a - b) / a if a > 0 else 0.0
        if drop > best:
            best_k, best = k, drop
    return best_k


def compare_partitions(a, b):
    """``(Var(a), mean|a - b|, Var(a - b))`` after aligning ``b``'s labels to ``a``.

    Population variances. ``b`` is flipped when that agrees with ``a`` on
    more rows.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise LengthMismatch("partitions differ in length")
    for v in (a, b):
        if not np.isin(v, (0, 1)).all():
            raise ValueError("partitions must be binary")
    a = a.astype(float)
    b = b.astype(float)
    if np.mean(a == b) < 0.5:
        b = 1.0 - b
    diff = a - b
    return float(a.var()), float(np.abs(diff).mean()), float(diff.var())


# ------------------------------------------------------------ mode finding

@dataclass(frozen=True)
class ModeClustering:
    columns: tuple
    center: np.ndarray
    scale: np.ndarray
    pca: PcaModel
    n_pcs: int
    kmeans: KMeansModel
    mode1_label: int
    elbow: list = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        return self.kmeans.assignments

    @property
    def is_mode1(self) -> np.ndarray:
        return self.kmeans.assignments == self.mode1_label


def standardized_matrix(d: Dataset, columns=None):
    """Standardize numeric columns with mean-filled gaps; constant columns become 0."""
    columns = tuple(c for c in (columns or d.names) if c != TIMESTAMP)
    V = np.column_stack([d.values(c) for c in columns])
    mu = np.nanmean(V, axis=0)
    mu = np.where(np.isfinite(mu), mu, 0.0)
    V = np.where(np.isfinite(V), V, mu)
    sd = V.std(axis=0, ddof=1) if V.shape[0] > 1 else np.zeros(V.shape[1])
    sd = np.where(sd > 0, sd, 1.0)
    return columns, mu, sd, (V - mu) / sd


def cruise_cluster(labels, pitch, k: int | None = None) -> int:
    """Cluster with the largest share of rows whose pitch exceeds half its maximum."""
    labels = np.asarray(labels)
    pitch = np.asarray(pitch, dtype=np.float64)
    k = int(labels.max()) + 1 if k is None else k
    high = pitch > 0.5 * np.nanmax(pitch)
    shares = [high[labels == j].mean() if (labels == j).any() else -1.0 for j in range(k)]
    return int(np.argmax(shares))


def find_modes(d: Dataset, n_pcs: int = 6, k: int = 2, seed: int = 0, *, k_max: int = 0,
               pitch_columns=("PITCH_1", "PITCH_2"), n_restarts: int = 10) -> ModeClustering:
    """PCA on standardized telemetry, K-means on the leading scores, cruise labelling."""
    columns, mu, sd, Z = standardized_matrix(d)
    pca = fit_pca(Z)
    n_pcs = min(n_pcs, pca.n_components)
    S = transform(pca, Z, n_pcs)
    curve = elbow_curve(S, k_max, seed, n_restarts) if k_max else []
    km = fit_kmeans(S, k, seed, n_restarts=n_restarts)
    pitch = np.nanmean(np.column_stack([d.values(c) for c in pitch_columns]), axis=1)
    pitch = np.where(np.isfinite(pitch), pitch, -np.inf)
    return ModeClustering(columns, mu, sd, pca, n_pcs, km, cruise_cluster(km.assignments, pitch, k),
                          curve)
