"""The regression zoo behind one trained-predictor interface.

``fit_model(kind, X, y)`` returns a :class:`TrainedModel` for any of the ten
kinds in :data:`KINDS`; every member is implemented in this subpackage.
"""
from __future__ import annotations

import copy
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .. import artifacts
from ..errors import DimensionMismatch
from .ensemble import AdaBoost, Boosted, Forest, fit_adaboost, fit_forest, fit_gbm, fit_xgb
from .linear import LinearWeights, expand_poly2, fit_linear, poly2_param_count, poly2_terms
from .mlp import MLP, fit_mlp, layer_sizes, loss_and_grad, param_count
from .tree import Leaf, Split, Tree, fit_tree, presort

KINDS = ("linear", "lasso", "ridge", "poly2", "decision_tree", "random_forest",
         "adaboost", "gradient_boosting", "xgb", "mlp")

# defaults per kind; ensemble sizes are a free choice
DEFAULT_HYPERPARAMS = {
    "linear": {},
    "lasso": {"alpha": 0.1},
    "ridge": {"alpha": 10.0},
    "poly2": {},
    "decision_tree": {"max_depth": 30, "max_features": "auto",
                      "min_samples_leaf": 12, "min_samples_split": 40},
    "random_forest": {"max_depth": 25, "max_features": "auto", "min_samples_leaf": 6,
                      "min_samples_split": 40, "n_estimators": 200, "bootstrap": True},
    "adaboost": {"max_depth": 40, "max_features": "auto", "min_samples_leaf": 2,
                 "min_samples_split": 40, "learning_rate": 0.3, "loss": "exponential",
                 "n_estimators": 100},
    "gradient_boosting": {"max_depth": 35, "max_features": "sqrt", "min_samples_leaf": 12,
                          "min_samples_split": 10, "learning_rate": 0.1, "subsample": 0.5,
                          "n_estimators": 200},
    "xgb": {"max_depth": 35, "learning_rate": 0.1, "min_child_weight": 1.0, "gamma": 0.2,
            "colsample_bytree": 0.7, "reg_lambda": 1.0, "n_estimators": 200},
    "mlp": {"hidden": [30, 20], "activation": "logistic", "epochs": 1000,
            "learning_rate": 1e-3, "batch_size": 128, "tol": 1e-4, "n_iter_no_change": 10},
}

_COUNT_KEYS = ("max_depth", "min_samples_leaf", "min_samples_split", "n_estimators",
               "epochs", "batch_size", "n_iter_no_change")
_RATE_KEYS = ("learning_rate",)


def hyperparams(kind: str, overrides: Optional[dict] = None) -> dict:
    """Defaults for ``kind`` merged with ``overrides`` and sanity checked."""
    if kind not in DEFAULT_HYPERPARAMS:
        raise ValueError(f"unknown model kind {kind!r}; choose from {KINDS}")
    hp = copy.deepcopy(DEFAULT_HYPERPARAMS[kind])
    hp.update(overrides or {})
    for key in _COUNT_KEYS:
        if key in hp and int(hp[key]) < 1:
            raise ValueError(f"{kind}.{key} must be >= 1")
    for key in _RATE_KEYS:
        if key in hp and not float(hp[key]) > 0:
            raise ValueError(f"{kind}.{key} must be > 0")
    for key in ("alpha", "gamma", "min_child_weight", "reg_lambda"):
        if key in hp and float(hp[key]) < 0:
            raise ValueError(f"{kind}.{key} must be >= 0")
    return hp


class LinearPredictor:
    """Linear model, optionally over standardised degree-2 expansions."""

    def __init__(self, weights: LinearWeights, n_inputs: int, poly: bool = False,
                 mean=None, scale=None, x_std=None):
        self.weights = weights
        self.n_inputs = n_inputs
        self.poly = poly
        self.mean = mean
        self.scale = scale
        self.x_std = x_std

    def design(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_inputs:
            raise DimensionMismatch(f"expected {self.n_inputs} features, got {X.shape[1]}")
        if not self.poly:
            return X
        return (expand_poly2(X) - self.mean) / self.scale

    def predict(self, X):
        return self.weights.predict(self.design(X))

    def feature_importances(self):
        if self.poly:
            d = self.n_inputs
            mag = np.abs(self.weights.w)
            acc = mag[:d].copy()
            for k, (i, j) in enumerate(poly2_terms(d)):
                acc[i] += 0.5 * mag[d + k]
                acc[j] += 0.5 * mag[d + k]
        else:
            acc = np.abs(self.weights.w) * self.x_std
        total = acc.sum()
        return acc / total if total > 0 else None

    def to_dict(self):
        return {"w0": self.weights.w0, "w": self.weights.w, "n_inputs": self.n_inputs,
                "poly": self.poly, "mean": self.mean, "scale": self.scale, "x_std": self.x_std}

    @classmethod
    def from_dict(cls, d):
        return cls(LinearWeights(float(d["w0"]), np.asarray(d["w"])), int(d["n_inputs"]),
                   bool(d["poly"]), d.get("mean"), d.get("scale"), d.get("x_std"))


class TreePredictor:
    def __init__(self, tree: Tree):
        self.tree = tree

    def predict(self, X):
        return self.tree.predict(X)

    def feature_importances(self):
        return self.tree.feature_importances()


class MLPPredictor:
    def __init__(self, net: MLP):
        self.net = net

    def predict(self, X):
        return self.net.predict(X)

    def feature_importances(self):
        return None


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    hyperparams: dict
    estimator: object
    n_features: int
    param_count: Optional[int]
    feature_importances: Optional[np.ndarray]
    fit_seconds: float
    predict_seconds: float = 0.0
    seed: int = 0
    feature_names: Optional[tuple] = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"{self.kind} expects {self.n_features} features, got {X.shape[1]}")
        return self.estimator.predict(X)

    def timed_predict(self, X):
        """Predictions and a copy of the model carrying the wall-clock predict time."""
        t0 = time.perf_counter()
        out = self.predict(X)
        return out, replace(self, predict_seconds=time.perf_counter() - t0)


def predict(m: TrainedModel, x) -> np.ndarray:
    return m.predict(x)


def _fit_estimator(kind, X, y, hp, seed, n_jobs):
    d = X.shape[1]
    if kind in ("linear", "ridge", "lasso"):
        ridge = hp["alpha"] if kind == "ridge" else 0.0
        lasso = hp["alpha"] if kind == "lasso" else 0.0
        w = fit_linear(X, y, ridge=ridge, lasso=lasso)
        est = LinearPredictor(w, d, x_std=X.std(axis=0))
        nnz = int(np.count_nonzero(w.w)) if kind == "lasso" else d
        return est, nnz + 1
    if kind == "poly2":
        E = expand_poly2(X)
        mean = E.mean(axis=0)
        scale = E.std(axis=0)
        scale[scale == 0] = 1.0
        w = fit_linear((E - mean) / scale, y)
        return LinearPredictor(w, d, poly=True, mean=mean, scale=scale), poly2_param_count(d)
    if kind == "decision_tree":
        return TreePredictor(fit_tree(X, y, hp, seed=seed)), None
    if kind == "random_forest":
        return fit_forest(X, y, hp, hp["n_estimators"], seed, bootstrap=hp.get("bootstrap", True),
                          n_jobs=n_jobs), None
    if kind == "adaboost":
        return fit_adaboost(X, y, hp, hp["n_estimators"], seed), None
    if kind == "gradient_boosting":
        return fit_gbm(X, y, hp, hp["n_estimators"], seed), None
    if kind == "xgb":
        return fit_xgb(X, y, hp, hp["n_estimators"], seed), None
    if kind == "mlp":
        net = fit_mlp(X, y, hidden=tuple(hp["hidden"]), activation=hp["activation"],
                      epochs=hp["epochs"], learning_rate=hp["learning_rate"],
                      batch_size=hp["batch_size"], tol=hp["tol"],
                      n_iter_no_change=hp["n_iter_no_change"], seed=seed)
        return MLPPredictor(net), net.n_params
    raise ValueError(f"unknown model kind {kind!r}")


def fit_model(kind: str, X, y, hp: Optional[dict] = None, *, seed: int = 0, n_jobs: int = 1,
              feature_names=None) -> TrainedModel:
    """Fit one model kind; ``hp`` overrides the defaults for that kind."""
    params = hyperparams(kind, hp)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X {X.shape} incompatible with y {y.shape}")
    t0 = time.perf_counter()
    est, n_params = _fit_estimator(kind, X, y, params, seed, n_jobs)
    elapsed = time.perf_counter() - t0
    imp = est.feature_importances()
    return TrainedModel(kind, params, est, X.shape[1], n_params, imp, elapsed, 0.0, seed,
                        tuple(feature_names) if feature_names is not None else None)


# ---------------------------------------------------------------- serialisation

def _estimator_to_dict(est):
    if isinstance(est, LinearPredictor):
        return {"type": "linear", **est.to_dict()}
    if isinstance(est, TreePredictor):
        return {"type": "tree", "tree": est.tree.to_dict()}
    if isinstance(est, Forest):
        return {"type": "forest", "trees": [t.to_dict() for t in est.trees]}
    if isinstance(est, AdaBoost):
        return {"type": "adaboost", "weights": est.weights,
                "trees": [t.to_dict() for t in est.trees]}
    if isinstance(est, Boosted):
        return {"type": "boosted", "base": est.base, "learning_rate": est.learning_rate,
                "trees": [t.to_dict() for t in est.trees]}
    if isinstance(est, MLPPredictor):
        n = est.net
        return {"type": "mlp", "params": n.params, "activation": n.activation,
                "x_mean": n.x_mean, "x_scale": n.x_scale, "y_mean": n.y_mean, "y_scale": n.y_scale}
    raise TypeError(f"cannot serialise {type(est).__name__}")


def _estimator_from_dict(d):
    t = d["type"]
    if t == "linear":
        return LinearPredictor.from_dict(d)
    if t == "tree":
        return TreePredictor(Tree.from_dict(d["tree"]))
    if t == "forest":
        return Forest([Tree.from_dict(x) for x in d["trees"]])
    if t == "adaboost":
        return AdaBoost([Tree.from_dict(x) for x in d["trees"]], np.asarray(d["weights"]))
    if t == "boosted":
        return Boosted(float(d["base"]), float(d["learning_rate"]),
                       [Tree.from_dict(x) for x in d["trees"]])
    if t == "mlp":
        return MLPPredictor(MLP(list(d["params"]), d["activation"], d["x_mean"], d["x_scale"],
                                float(d["y_mean"]), float(d["y_scale"])))
    raise ValueError(f"unknown estimator type {t!r}")


def model_to_dict(m: TrainedModel, extra: Optional[dict] = None) -> dict:
    out = {
        "kind": m.kind, "hyperparams": m.hyperparams, "n_features": m.n_features,
        "param_count": m.param_count, "feature_importances": m.feature_importances,
        "fit_seconds": m.fit_seconds, "seed": m.seed,
        "feature_names": list(m.feature_names) if m.feature_names else None,
        "schema_fingerprint": artifacts.fingerprint(m.feature_names) if m.feature_names else None,
        "estimator": _estimator_to_dict(m.estimator),
    }
    out.update(extra or {})
    return out


def model_from_dict(d: dict) -> TrainedModel:
    names = d.get("feature_names")
    return TrainedModel(d["kind"], d["hyperparams"], _estimator_from_dict(d["estimator"]),
                        int(d["n_features"]), d.get("param_count"), d.get("feature_importances"),
                        float(d.get("fit_seconds", 0.0)), 0.0, int(d.get("seed", 0)),
                        tuple(names) if names else None)


def save_model(path, m: TrainedModel, extra: Optional[dict] = None):
    return artifacts.save(path, "ferryfuel.model", model_to_dict(m, extra))


def load_model(path):
    """Returns ``(TrainedModel, raw artifact dict)``."""
    raw = artifacts.load(path, "ferryfuel.model")
    return model_from_dict(raw), raw


__all__ = [
    "KINDS", "DEFAULT_HYPERPARAMS", "TrainedModel", "LinearWeights", "Tree", "Split", "Leaf",
    "hyperparams", "fit_model", "predict", "fit_linear", "expand_poly2", "poly2_param_count",
    "fit_tree", "fit_forest", "fit_adaboost", "fit_gbm", "fit_xgb", "fit_mlp", "presort",
    "layer_sizes", "param_count", "loss_and_grad", "save_model", "load_model",
    "model_to_dict", "model_from_dict",
]
