"""Evaluation metrics and the prediction mappings they consume.

Occurrence is scored against the true event indicator in simulation mode
and against the recorded indicator on real data; size metrics condition
on the rows where an event (or a record) exists and compare against each
model's conditional-mean prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .baselines import TwoPartModel
from .model import Dataset
from .selection import PuOmmModel, observed_occurrence_prob

CSV_COLUMNS = (
    "method",
    "trial",
    "rmse_beta",
    "rmse_theta",
    "brier",
    "misclassification",
    "mad",
    "rmse_pred",
    "smape",
    "n_eval",
    "n_eval_size",
)


@dataclass
class MetricsReport:
    """Scores of one method on one trial; serializes to a single CSV row."""

    method_name: str
    trial_id: int
    rmse_beta: float | None
    rmse_theta: float | None
    brier: float
    misclassification: float
    mad: float
    rmse_pred: float
    smape: float
    n_eval: int
    n_eval_size: int

    def to_csv_row(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, int):
                return str(v)
            return repr(float(v))

        return [
            self.method_name,
            str(self.trial_id),
            fmt(self.rmse_beta),
            fmt(self.rmse_theta),
            fmt(self.brier),
            fmt(self.misclassification),
            fmt(self.mad),
            fmt(self.rmse_pred),
            fmt(self.smape),
            str(self.n_eval),
            str(self.n_eval_size),
        ]

    def as_dict(self) -> dict:
        return {
            "method": self.method_name,
            "trial": self.trial_id,
            "rmse_beta": self.rmse_beta,
            "rmse_theta": self.rmse_theta,
            "brier": self.brier,
            "misclassification": self.misclassification,
            "mad": self.mad,
            "rmse_pred": self.rmse_pred,
            "smape": self.smape,
            "n_eval": self.n_eval,
            "n_eval_size": self.n_eval_size,
        }


def rmse_params(est: np.ndarray, truth: np.ndarray) -> float:
    """l2 norm of the coefficient error (not scaled by dimension)."""
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError("estimate and truth must have equal length")
    return float(np.linalg.norm(est - truth))


def _check_paired(labels, probs):
    labels = np.asarray(labels, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if labels.shape != probs.shape:
        raise ValueError("labels and probabilities must have equal length")
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return labels, probs


def brier(labels, probs) -> float:
    """Mean squared difference between probabilities and binary outcomes."""
    labels, probs = _check_paired(labels, probs)
    return float(np.mean((probs - labels) ** 2))


def misclassification(labels, probs) -> float:
    """Mean disagreement of the strict threshold-at-0.5 classifier."""
    labels, probs = _check_paired(labels, probs)
    return float(np.mean((probs > 0.5).astype(float) != labels))


def _check_pair_lengths(y, yhat):
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError("realized and predicted vectors must have equal length")
    return y, yhat


def mad(y, yhat) -> float:
    y, yhat = _check_pair_lengths(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def rmse_pred(y, yhat) -> float:
    y, yhat = _check_pair_lengths(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def smape(y, yhat) -> float:
    """Symmetric mean absolute percentage error in [0, 2]; 0/0 pairs count as 0."""
    y, yhat = _check_pair_lengths(y, yhat)
    denom = np.abs(y) + np.abs(yhat)
    terms = np.zeros(y.shape[0])
    ok = denom > 0
    terms[ok] = 2.0 * np.abs(y[ok] - yhat[ok]) / denom[ok]
    return float(np.mean(terms))


def predict_occurrence(model, x):
    """True-occurrence probability (not the recorded-occurrence probability)."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, PuOmmModel):
        return expit(x @ model.theta)
    if isinstance(model, TwoPartModel):
        return expit(x @ model.occurrence_coef)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def predict_magnitude(model, x):
    """Conditional mean event size given occurrence."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, PuOmmModel):
        return np.exp(x @ model.beta)
    if isinstance(model, TwoPartModel):
        eta = x @ model.magnitude_coef
        if model.magnitude_family == "lognormal":
            return np.exp(eta + 0.5 * (model.aux or 0.0))
        return np.exp(eta)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _recorded_occurrence_prob(model, x):
    # Real data has no true labels; score everything on the recorded scale.
    if isinstance(model, PuOmmModel):
        return observed_occurrence_prob(model.omega_hat, model.lambda_hat, x)
    return predict_occurrence(model, x)


def _coef_pair(model):
    if isinstance(model, PuOmmModel):
        return model.beta, model.theta
    return model.magnitude_coef, model.occurrence_coef


def evaluate_trial(
    models: dict[str, object],
    test: Dataset,
    truth: tuple[np.ndarray, np.ndarray] | None = None,
    trial_id: int = 0,
    mode: str = "auto",
) -> list[MetricsReport]:
    """Score every model on one held-out dataset.

    Simulation mode needs the latent columns: occurrence is scored on
    1{y > 0} over all rows and size on the y > 0 rows against the true
    magnitudes.  Real-data mode scores occurrence against 1{z > 0} with
    each model's recorded-occurrence predictor and size on the z > 0 rows.
    """
    if mode == "auto":
        mode = "simulation" if test.has_latent else "observed"
    if mode not in ("simulation", "observed"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "simulation" and not test.has_latent:
        raise ValueError("simulation-mode evaluation needs latent y")

    reports = []
    if mode == "simulation":
        labels = (test.y > 0).astype(float)
        size_mask = test.y > 0
        size_truth = test.y[size_mask]
    else:
        labels = (test.z > 0).astype(float)
        size_mask = test.z > 0
        size_truth = test.z[size_mask]

    for name, model in models.items():
        if mode == "simulation":
            probs = predict_occurrence(model, test.x)
        else:
            probs = _recorded_occurrence_prob(model, test.x)
        yhat = predict_magnitude(model, test.x[size_mask])

        rb = rt = None
        if truth is not None and mode == "simulation":
            beta0, theta0 = truth
            est_beta, est_theta = _coef_pair(model)
            rb = rmse_params(est_beta, beta0)
            rt = rmse_params(est_theta, theta0)

        reports.append(
            MetricsReport(
                method_name=name,
                trial_id=trial_id,
                rmse_beta=rb,
                rmse_theta=rt,
                brier=brier(labels, probs),
                misclassification=misclassification(labels, probs),
                mad=mad(size_truth, yhat),
                rmse_pred=rmse_pred(size_truth, yhat),
                smape=smape(size_truth, yhat),
                n_eval=test.n,
                n_eval_size=int(size_mask.sum()),
            )
        )
    return reports
