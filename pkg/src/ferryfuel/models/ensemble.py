"""Bagging and boosting ensembles of regression trees.

Every member tree draws its randomness from its own child of a master
``SeedSequence``, so results do not depend on how many trees are grown at
once or in what order.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DimensionMismatch
from .tree import fit_tree, grow_gradient_tree, presort

log = logging.getLogger(__name__)


def substreams(seed: int, n: int):
    """``n`` independent generators plus a 32-bit kernel seed for each."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [(np.random.default_rng(ch), int(ch.generate_state(1)[0])) for ch in children]


def _stack_predictions(trees, X):
    return np.stack([t.predict(X) for t in trees])


def _check_dims(trees, X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if trees and X.shape[1] != trees[0].n_features:
        raise DimensionMismatch(f"expected {trees[0].n_features} features, got {X.shape[1]}")
    return X


def _normalise(v):
    total = v.sum()
    return v / total if total > 0 else None


@dataclass
class Forest:
    trees: list

    def predict_members(self, X) -> np.ndarray:
        return _stack_predictions(self.trees, _check_dims(self.trees, X))

    def predict(self, X) -> np.ndarray:
        return self.predict_members(X).mean(axis=0)

    def feature_importances(self) -> Optional[np.ndarray]:
        return _normalise(sum(t.importance_raw for t in self.trees))


def fit_forest(X, y, hp: dict, n_trees: int = 200, seed: int = 0, *,
               bootstrap: bool = True, n_jobs: int = 1) -> Forest:
    """Bagged CART trees with per-split feature subsampling (``max_features``)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    ps = presort(X)
    streams = substreams(seed, n_trees)

    def grow_one(stream):
        rng, kseed = stream
        counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(float) if bootstrap else None
        return fit_tree(X, y, hp, counts=counts, presorted=ps, seed=kseed)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(grow_one, streams))
    else:
        trees = [grow_one(s) for s in streams]
    return Forest(trees)


@dataclass
class AdaBoost:
    trees: list
    weights: np.ndarray
    train_rmse: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = _check_dims(self.trees, X)
        preds = _stack_predictions(self.trees, X).T  # (n, m)
        order = np.argsort(preds, axis=1, kind="stable")
        cdf = np.cumsum(self.weights[order], axis=1)
        pick = np.argmax(cdf >= 0.5 * cdf[:, -1:], axis=1)
        rows = np.arange(X.shape[0])
        return preds[rows, order[rows, pick]]

    def feature_importances(self) -> Optional[np.ndarray]:
        acc = np.zeros(self.trees[0].n_features)
        for t, w in zip(self.trees, self.weights):
            imp = t.feature_importances()
            if imp is not None:
                acc += w * imp
        return _normalise(acc)


_ADA_LOSSES = {
    "linear": lambda e: e,
    "square": lambda e: e * e,
    "exponential": lambda e: 1.0 - np.exp(-e),
}


def fit_adaboost(X, y, hp: dict, n_estimators: int = 100, seed: int = 0) -> AdaBoost:
    """AdaBoost.R2 with weighted tree fits and weighted-median prediction.

    A round whose weighted average loss reaches 0.5 ends training and is
    discarded unless it is the first. A round with zero loss ends training
    and keeps that estimator with unit weight.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    lr = float(hp.get("learning_rate", 1.0))
    loss_fn = _ADA_LOSSES[hp.get("loss", "exponential")]
    ps = presort(X)
    w = np.full(n, 1.0 / n)
    trees, alphas, curve = [], [], []
    for rnd, (_, kseed) in enumerate(substreams(seed, n_estimators)):
        tree = fit_tree(X, y, hp, sample_weight=w * n, presorted=ps, seed=kseed)
        pred = tree.predict(X)
        err = np.abs(y - pred)
        emax = err.max()
        if emax <= 0:
            trees.append(tree)
            alphas.append(1.0)
            break
        L = loss_fn(err / emax)
        Lbar = float(w @ L)
        if Lbar <= 0:
            trees.append(tree)
            alphas.append(1.0)
            break
        if Lbar >= 0.5:
            log.info("adaboost round %d degenerate (mean loss %.3f); stopping", rnd, Lbar)
            if not trees:
                trees.append(tree)
                alphas.append(1.0)
            break
        beta = Lbar / (1.0 - Lbar)
        trees.append(tree)
        alphas.append(lr * np.log(1.0 / beta))
        w = w * np.power(beta, (1.0 - L) * lr)
        w /= w.sum()
        curve.append(float(np.sqrt(np.mean((AdaBoost(trees, np.array(alphas)).predict(X) - y) ** 2)))
                     if hp.get("track_rmse") else np.nan)
    return AdaBoost(trees, np.asarray(alphas, dtype=float), curve)


@dataclass
class Boosted:
    """Additive tree model: ``base + learning_rate * sum(tree values)``."""
    base: float
    learning_rate: float
    trees: list
    train_rmse: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = _check_dims(self.trees, X)
        out = np.full(X.shape[0], self.base)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def feature_importances(self) -> Optional[np.ndarray]:
        if not self.trees:
            return None
        return _normalise(sum(t.importance_raw for t in self.trees))


def fit_gbm(X, y, hp: dict, n_estimators: int = 200, seed: int = 0) -> Boosted:
    """Squared-error gradient boosting on residuals with row subsampling."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    lr = float(hp.get("learning_rate", 0.1))
    subsample = float(hp.get("subsample", 1.0))
    ps = presort(X)
    F = np.full(n, y.mean())
    model = Boosted(float(y.mean()), lr, [])
    for rng, kseed in substreams(seed, n_estimators):
        counts = None
        if subsample < 1.0:
            take = rng.choice(n, size=max(1, int(round(subsample * n))), replace=False)
            counts = np.zeros(n)
            counts[take] = 1.0
        tree = fit_tree(X, y - F, hp, counts=counts, presorted=ps, seed=kseed)
        F += lr * tree.predict(X)
        model.trees.append(tree)
        model.train_rmse.append(float(np.sqrt(np.mean((y - F) ** 2))))
    return model


def fit_xgb(X, y, hp: dict, n_estimators: int = 200, seed: int = 0) -> Boosted:
    """Second-order boosting for squared error.

    Gradient convention: loss ``0.5*(y - F)^2`` so ``g = F - y`` and
    ``h = 1``. A leaf takes ``-G/(H + reg_lambda)``; a split is kept only if
    ``0.5*[G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)] - gamma > 0`` and both
    children carry hessian at least ``min_child_weight``. Each tree sees a
    random ``colsample_bytree`` fraction of the columns.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    lr = float(hp.get("learning_rate", 0.1))
    colsample = float(hp.get("colsample_bytree", 1.0))
    n_cols = max(1, int(colsample * d))
    ps = presort(X)
    base = float(y.mean())
    F = np.full(n, base)
    h = np.ones(n)
    model = Boosted(base, lr, [])
    for rng, kseed in substreams(seed, n_estimators):
        cols = None if n_cols >= d else np.sort(rng.choice(d, size=n_cols, replace=False))
        tree = grow_gradient_tree(
            ps, F - y, h,
            max_depth=hp.get("max_depth", 6),
            min_child_weight=hp.get("min_child_weight", 1.0),
            reg_lambda=hp.get("reg_lambda", 1.0),
            gamma=hp.get("gamma", 0.0),
            half=0.5, features=cols, seed=kseed)
        F += lr * tree.predict(X)
        model.trees.append(tree)
        model.train_rmse.append(float(np.sqrt(np.mean((y - F) ** 2))))
    return model
