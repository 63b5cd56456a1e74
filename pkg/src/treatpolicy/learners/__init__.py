"""Learner menu: linear models, boosted trees, calibration, metrics.

The menu is addressed through :class:`LearnerSpec` (kind + hyperparameters).
Linear kinds are fit on per-fit z-scored covariates; the fitted wrapper
stores the centering so predictions are consistent on raw inputs.  Tree
kinds take raw values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .calibration import CalibratedClassifier, calibrate
from .linear import LinearModel, fit_linear, sigmoid
from .metrics import (
    auroc,
    brier,
    calibration_curve,
    eval_metrics,
    kendall_tau,
    mae,
    pearson,
    r_squared,
    rmse,
)
from .serialize import (
    decode_model,
    encode_model,
    load_model,
    register_codec,
    save_model,
)
from .trees import BoostedTreesModel, Tree, fit_gbt

__all__ = [
    "LearnerSpec",
    "FittedModel",
    "fit_regressor",
    "fit_classifier",
    "LinearModel",
    "fit_linear",
    "BoostedTreesModel",
    "Tree",
    "fit_gbt",
    "CalibratedClassifier",
    "calibrate",
    "eval_metrics",
    "rmse",
    "mae",
    "r_squared",
    "brier",
    "auroc",
    "calibration_curve",
    "pearson",
    "kendall_tau",
    "sigmoid",
    "encode_model",
    "decode_model",
    "save_model",
    "load_model",
    "register_codec",
]

REGRESSOR_KINDS = ("ols", "ridge", "lasso", "gbt")
CLASSIFIER_KINDS = ("logistic", "gbt")

_LINEAR_KEYS = {"lam", "tol", "max_iter", "fit_intercept"}
_LOGISTIC_KEYS = _LINEAR_KEYS | {"penalty"}
_GBT_KEYS = {"n_trees", "max_depth", "learning_rate", "min_samples_leaf"}


@dataclass(frozen=True)
class LearnerSpec:
    """Names one learner from the menu with its hyperparameters."""

    kind: str
    params: tuple = ()

    @classmethod
    def make(cls, kind: str, **params) -> "LearnerSpec":
        return cls(kind=kind, params=tuple(sorted(params.items())))

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind is None:
            raise ConfigError("learner spec needs a 'kind'")
        spec = cls(kind=kind, params=tuple(sorted(d.items())))
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        return {"kind": self.kind, **dict(self.params)}

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def validate(self, task: str | None = None) -> None:
        all_kinds = set(REGRESSOR_KINDS) | set(CLASSIFIER_KINDS)
        if self.kind not in all_kinds:
            raise ConfigError(f"unknown learner kind {self.kind!r}")
        if task == "regression" and self.kind not in REGRESSOR_KINDS:
            raise ConfigError(f"learner {self.kind!r} cannot fit a regression target")
        if task == "classification" and self.kind not in CLASSIFIER_KINDS:
            raise ConfigError(f"learner {self.kind!r} cannot fit a classification target")
        allowed = {
            "ols": {"fit_intercept"},
            "ridge": _LINEAR_KEYS,
            "lasso": _LINEAR_KEYS,
            "logistic": _LOGISTIC_KEYS,
            "gbt": _GBT_KEYS,
        }[self.kind]
        extra = set(self.param_dict) - allowed
        if extra:
            raise ConfigError(
                f"learner {self.kind!r} got unknown parameter(s) {sorted(extra)}"
            )


@dataclass
class FittedModel:
    """A fitted learner plus the standardization applied at fit time."""

    family: str
    task: str
    model: object
    center: np.ndarray | None = None
    scale: np.ndarray | None = None

    def _transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.center is None:
            return X
        return (X - self.center) / self.scale

    def predict(self, X) -> np.ndarray:
        return self.model.predict(self._transform(X))

    def predict_proba(self, X) -> np.ndarray:
        return self.model.predict_proba(self._transform(X))


def _standardizer(X: np.ndarray):
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return center, scale


def fit_regressor(spec: LearnerSpec, X, y, seed: int | None = None) -> FittedModel:
    """Fit the named regressor; linear kinds are standardized internally."""
    spec.validate(task="regression")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = spec.param_dict
    if spec.kind == "gbt":
        model = fit_gbt(X, y, loss="squared", seed=seed, **p)
        return FittedModel(family=spec.kind, task="regression", model=model)
    center, scale = _standardizer(X)
    Z = (X - center) / scale
    penalty = {"ols": "none", "ridge": "l2", "lasso": "l1"}[spec.kind]
    model = fit_linear(Z, y, family="least-squares", penalty=penalty, seed=seed, **p)
    return FittedModel(
        family=spec.kind, task="regression", model=model, center=center, scale=scale
    )


def fit_classifier(spec: LearnerSpec, X, y, seed: int | None = None) -> FittedModel:
    """Fit the named probabilistic classifier on 0/1 labels."""
    spec.validate(task="classification")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = spec.param_dict
    if spec.kind == "gbt":
        model = fit_gbt(X, y, loss="logistic", seed=seed, **p)
        return FittedModel(family=spec.kind, task="classification", model=model)
    p.setdefault("penalty", "l2")
    p.setdefault("lam", 1.0)
    center, scale = _standardizer(X)
    Z = (X - center) / scale
    model = fit_linear(Z, y, family="logistic", seed=seed, **p)
    return FittedModel(
        family=spec.kind, task="classification", model=model, center=center, scale=scale
    )


def _encode_linear(m: LinearModel) -> dict:
    return m.to_dict()


def _encode_gbt(m: BoostedTreesModel) -> dict:
    return m.to_dict()


def _encode_calibrated(m: CalibratedClassifier) -> dict:
    return {
        "slope": float(m.slope),
        "offset": float(m.offset),
        "base": encode_model(m.base),
    }


def _decode_calibrated(d: dict) -> CalibratedClassifier:
    return CalibratedClassifier(
        base=decode_model(d["base"]), slope=float(d["slope"]), offset=float(d["offset"])
    )


def _encode_fitted(m: FittedModel) -> dict:
    return {
        "family": m.family,
        "task": m.task,
        "model": encode_model(m.model),
        "center": None if m.center is None else [float(v) for v in m.center],
        "scale": None if m.scale is None else [float(v) for v in m.scale],
    }


def _decode_fitted(d: dict) -> FittedModel:
    return FittedModel(
        family=d["family"],
        task=d["task"],
        model=decode_model(d["model"]),
        center=None if d["center"] is None else np.asarray(d["center"], dtype=float),
        scale=None if d["scale"] is None else np.asarray(d["scale"], dtype=float),
    )


register_codec("linear", LinearModel, _encode_linear, LinearModel.from_dict)
register_codec("gbt", BoostedTreesModel, _encode_gbt, BoostedTreesModel.from_dict)
register_codec("calibrated", CalibratedClassifier, _encode_calibrated, _decode_calibrated)
register_codec("fitted", FittedModel, _encode_fitted, _decode_fitted)
