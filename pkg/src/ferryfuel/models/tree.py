"""CART regression trees on top of the compiled growth kernel."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..errors import DimensionMismatch
from . import _treekernel

# relative gain floor; keeps roundoff from producing splits on constant targets
REL_TOL = 1e-12


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


@dataclass(frozen=True)
class Leaf:
    value: float
    n_samples: float


TreeNode = Union[Split, Leaf]


def presort(X: np.ndarray):
    """Column-major copy of ``X`` and the stable per-feature sort order.

    Ensembles call this once and reuse the result for every member tree.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Xt = np.ascontiguousarray(X.T)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int32))
    return Xt, order


def resolve_max_features(max_features, n_features: int) -> int:
    """'auto'/None -> all features, 'sqrt' -> floor(sqrt(d)), float -> fraction, int -> as is."""
    if max_features is None or max_features == "auto":
        return n_features
    if max_features == "sqrt":
        return max(1, int(np.sqrt(n_features)))
    if max_features == "log2":
        return max(1, int(np.log2(n_features)))
    if isinstance(max_features, float):
        return max(1, int(max_features * n_features))
    return max(1, min(int(max_features), n_features))


@dataclass
class Tree:
    """Flat array representation of a fitted tree.

    ``left[i] == -1`` marks a leaf. ``value`` holds the prediction of every
    node (internal nodes included), ``n_samples`` the multiplicity-weighted
    sample count and ``gain`` the objective reduction of each split.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    hessian: np.ndarray
    gain: np.ndarray
    n_features: int
    importance_raw: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.left < 0))

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            nd, dep = stack.pop()
            if self.left[nd] < 0:
                best = max(best, dep)
            else:
                stack.append((int(self.left[nd]), dep + 1))
                stack.append((int(self.right[nd]), dep + 1))
        return best

    def node(self, i: int = 0) -> TreeNode:
        """Recursive Split/Leaf view of the subtree rooted at node ``i``."""
        if self.left[i] < 0:
            return Leaf(float(self.value[i]), float(self.n_samples[i]))
        return Split(int(self.feature[i]), float(self.threshold[i]),
                     self.node(int(self.left[i])), self.node(int(self.right[i])))

    @property
    def root(self) -> TreeNode:
        return self.node(0)

    def _check(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        return _treekernel.predict(X, self.feature, self.threshold, self.left,
                                   self.right, self.value)

    def apply(self, X) -> np.ndarray:
        X = self._check(X)
        return _treekernel.apply(X, self.feature, self.threshold, self.left, self.right)

    def feature_importances(self) -> Optional[np.ndarray]:
        total = self.importance_raw.sum()
        if total <= 0:
            return None
        return self.importance_raw / total

    def shifted(self, offset: float, scale: float = 1.0) -> "Tree":
        """Copy with every node value mapped to ``offset + scale * value``."""
        return Tree(self.feature, self.threshold, self.left, self.right,
                    offset + scale * self.value, self.n_samples, self.hessian,
                    self.gain, self.n_features, self.importance_raw)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature, "threshold": self.threshold,
            "left": self.left, "right": self.right, "value": self.value,
            "n_samples": self.n_samples, "hessian": self.hessian,
            "gain": self.gain, "n_features": self.n_features,
            "importance_raw": self.importance_raw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], np.int32),
            threshold=np.asarray(d["threshold"], np.float64),
            left=np.asarray(d["left"], np.int32),
            right=np.asarray(d["right"], np.int32),
            value=np.asarray(d["value"], np.float64),
            n_samples=np.asarray(d["n_samples"], np.float64),
            hessian=np.asarray(d["hessian"], np.float64),
            gain=np.asarray(d["gain"], np.float64),
            n_features=int(d["n_features"]),
            importance_raw=np.asarray(d["importance_raw"], np.float64),
        )


def grow_gradient_tree(presorted, grad, hess, counts=None, *, max_depth=30,
                       min_samples_split=2, min_samples_leaf=1,
                       min_child_weight=0.0, reg_lambda=0.0, gamma=0.0,
                       half=1.0, max_features=None, features=None,
                       seed=0) -> Tree:
    """Grow one tree from per-sample gradients and hessians.

    ``features`` restricts the candidate columns for the whole tree (column
    subsampling); ``max_features`` subsamples among them at every split.
    """
    Xt, order = presorted
    d, n = Xt.shape
    grad = np.ascontiguousarray(grad, np.float64)
    hess = np.ascontiguousarray(hess, np.float64)
    if counts is None:
        counts = np.ones(n)
    counts = np.ascontiguousarray(counts, np.float64)
    allowed = np.arange(d, dtype=np.int64) if features is None else np.sort(
        np.asarray(features, np.int64))
    k = resolve_max_features(max_features, len(allowed))
    out = _treekernel.grow(Xt, order, grad, hess, counts, allowed,
                           int(max_depth), float(min_samples_split),
                           float(min_samples_leaf), float(min_child_weight),
                           float(reg_lambda), float(gamma), float(half), int(k),
                           int(seed) % (2**32), REL_TOL)
    return Tree(*out[:8], n_features=d, importance_raw=out[8])


def fit_tree(X, y, hp: Optional[dict] = None, *, sample_weight=None, counts=None,
             presorted=None, features=None, seed: int = 0) -> Tree:
    """Fit a CART regression tree by greedy weighted-SSE reduction.

    Stops on ``max_depth``, ``min_samples_split``, ``min_samples_leaf`` or a
    node with zero target spread. Leaves predict the weighted mean. Candidate
    thresholds are midpoints between consecutive distinct values; ties go to
    the lowest feature index, then the lowest threshold.
    """
    hp = dict(hp or {})
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X {X.shape} incompatible with y {y.shape}")
    n = X.shape[0]
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, np.float64)
    c = np.ones(n) if counts is None else np.asarray(counts, np.float64)
    wc = w * c
    # centring leaves split scores unchanged and keeps the tolerance meaningful
    total = wc.sum()
    center = float(np.dot(wc, y) / total) if total > 0 else 0.0
    presorted = presorted if presorted is not None else presort(X)
    tree = grow_gradient_tree(
        presorted, -wc * (y - center), wc, c,
        max_depth=hp.get("max_depth", 30),
        min_samples_split=hp.get("min_samples_split", 2),
        min_samples_leaf=hp.get("min_samples_leaf", 1),
        max_features=hp.get("max_features"),
        features=features, seed=seed)
    return tree.shifted(center)
