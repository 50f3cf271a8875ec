"""Comparison fits: oracle two-part GLMs and observed-data mixtures.

The oracle sees the unmasked magnitudes; the observed-data mixtures fit a
logistic stage on 1{z > 0} plus a Gamma or log-normal size stage on the
recorded positives.  All fitters are deterministic damped-Newton solvers
with explicit tolerances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, expit, log_expit, polygamma

from .model import Dataset
from .simulate import SimOutput

GRAD_TOL = 1e-8
MAX_NEWTON = 100


class SeparationWarning(UserWarning):
    """Logistic labels are (nearly) separable; coefficients were clamped."""


class DegenerateFitWarning(UserWarning):
    """Too little data to estimate a stage; returned a degenerate fit."""


@dataclass
class TwoPartModel:
    """Occurrence logistic stage plus a log-link magnitude stage.

    aux carries the Gamma shape or the log-normal residual variance;
    flags records degeneracies (separation, rank deficiency, ...).
    """

    occurrence_coef: np.ndarray
    magnitude_coef: np.ndarray
    magnitude_family: str  # "exponential" | "gamma" | "lognormal"
    aux: float | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.magnitude_family not in ("exponential", "gamma", "lognormal"):
            raise ValueError(f"unknown magnitude family {self.magnitude_family!r}")
        if len(self.occurrence_coef) != len(self.magnitude_coef):
            raise ValueError("stage coefficient lengths differ")
        if self.aux is not None and self.aux < 0:
            raise ValueError("aux must be nonnegative when present")


def _damped_newton(w0, grad_fn, hess_fn, obj_fn, clamp_radius=None, max_iter=MAX_NEWTON):
    """Minimize a smooth convex objective; returns (w, clamped) flag.

    Newton direction with step halving on the objective; falls back to a
    plain gradient step when the Hessian solve fails.  If clamp_radius is
    set, iterates are projected back onto that l2 ball and the projection
    is reported (used to contain separation divergence).
    """
    w = np.asarray(w0, dtype=float).copy()
    clamped = False
    f = obj_fn(w)
    for _ in range(max_iter):
        g = grad_fn(w)
        if np.linalg.norm(g) <= GRAD_TOL:
            break
        try:
            step = np.linalg.solve(hess_fn(w), g)
            if not np.isfinite(step).all():
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = g
        t = 1.0
        while t >= 1e-12:
            w_new = w - t * step
            if clamp_radius is not None:
                norm = np.linalg.norm(w_new)
                if norm > clamp_radius:
                    w_new = w_new * (clamp_radius / norm)
            f_new = obj_fn(w_new)
            if np.isfinite(f_new) and f_new <= f:
                break
            t *= 0.5
        else:
            break
        if clamp_radius is not None and np.linalg.norm(w - t * step) > clamp_radius + 1e-12:
            clamped = True
        delta = np.linalg.norm(w_new - w)
        w, f = w_new, f_new
        if delta <= 1e-14:
            break
    return w, clamped


def fit_logistic(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Logistic regression MLE by damped Newton.

    Separable (or all-equal) labels push the MLE to infinity; such fits
    are clamped to the ball of radius 5*sqrt(p) and flagged with a
    SeparationWarning instead of raising.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("features must be (n, p) with a matching label vector")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be binary")
    n, p = X.shape
    clamp = 5.0 * np.sqrt(p)

    def obj(w):
        s = X @ w
        return float(-np.mean(y * log_expit(s) + (1 - y) * log_expit(-s)))

    def grad(w):
        return X.T @ (expit(X @ w) - y) / n

    def hess(w):
        mu = expit(X @ w)
        wts = mu * (1 - mu)
        return (X * wts[:, None]).T @ X / n

    w, clamped = _damped_newton(np.zeros(p), grad, hess, obj, clamp_radius=clamp)
    if clamped or np.linalg.norm(grad(w)) > 1e-4:
        warnings.warn("labels are separable or nearly so; coefficients clamped", SeparationWarning)
    return w


def fit_exponential_glm(features: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """MLE of the exponential size model y ~ Exp(rate exp(-x.beta)).

    Minimizes mean(exp(-x.beta) y + x.beta); the Hessian is positive
    definite whenever all sizes are positive.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(sizes, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("features must be (n, p) with a matching size vector")
    if np.any(y <= 0):
        raise ValueError("sizes must be strictly positive")
    n = X.shape[0]

    def obj(w):
        s = X @ w
        return float(np.mean(np.exp(-s) * y + s))

    def grad(w):
        return X.T @ (1.0 - np.exp(-(X @ w)) * y) / n

    def hess(w):
        wts = np.exp(-(X @ w)) * y
        return (X * wts[:, None]).T @ X / n

    w, _ = _damped_newton(np.zeros(X.shape[1]), grad, hess, obj)
    return w


def fit_gamma_glm(features: np.ndarray, sizes: np.ndarray) -> tuple[np.ndarray, float]:
    """Log-link Gamma regression: mean-model coefficients plus profile-MLE shape.

    The mean-model score does not involve the shape, so the coefficients
    coincide with the exponential-GLM fit; the shape then solves
    log(a) - digamma(a) = s by scalar Newton.
    """
    coef = fit_exponential_glm(features, sizes)
    y = np.asarray(sizes, dtype=float)
    mu = np.exp(np.asarray(features, dtype=float) @ coef)
    s = -1.0 - float(np.mean(np.log(y / mu) - y / mu))
    if s <= 1e-12:
        warnings.warn("degenerate Gamma shape (perfect mean fit)", DegenerateFitWarning)
        return coef, np.inf
    # Minka's starting point, then Newton on log(a) - digamma(a) - s = 0.
    a = (3.0 - s + np.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(MAX_NEWTON):
        g = np.log(a) - digamma(a) - s
        if abs(g) <= 1e-8:
            break
        a -= g / (1.0 / a - polygamma(1, a))
    return coef, float(a)


def fit_lognormal(features: np.ndarray, sizes: np.ndarray) -> tuple[np.ndarray, float]:
    """Least squares of log(size) on the features; aux is the MLE residual variance.

    Rank-deficient designs get the minimum-norm solution and a warning.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(sizes, dtype=float)
    if np.any(y <= 0):
        raise ValueError("sizes must be strictly positive")
    logy = np.log(y)
    coef, _, rank, _ = np.linalg.lstsq(X, logy, rcond=None)
    if rank < X.shape[1]:
        warnings.warn("rank-deficient design; minimum-norm solution", DegenerateFitWarning)
    resid = logy - X @ coef
    return coef, float(np.mean(resid**2))


def fit_oracle(sim: SimOutput | Dataset) -> TwoPartModel:
    """Two GLMs on the unmasked training responses: logistic on 1{y>0}, exponential on y>0.

    Accepts either a simulator output (its train split is used) or a
    dataset that carries latent magnitudes.
    """
    train = sim.train if isinstance(sim, SimOutput) else sim
    if train.y is None:
        raise ValueError("oracle fit needs latent magnitudes")
    u = (train.y > 0).astype(float)
    if not u.any():
        raise ValueError("no positive responses; cannot fit the magnitude stage")
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        occ = fit_logistic(train.x, u)
    if any(issubclass(w.category, SeparationWarning) for w in caught):
        flags.append("separation")
    mag = fit_exponential_glm(train.x[train.y > 0], train.y[train.y > 0])
    return TwoPartModel(
        occurrence_coef=occ,
        magnitude_coef=mag,
        magnitude_family="exponential",
        flags=tuple(flags),
    )


def fit_observed_mixture(train: Dataset, family: str) -> TwoPartModel:
    """Logistic stage on 1{z>0} plus the requested size family on recorded positives."""
    if family not in ("gamma", "lognormal", "exponential"):
        raise ValueError(f"unknown magnitude family {family!r}")
    if train.n < 1:
        raise ValueError("training data must be nonempty")
    v = (train.z > 0).astype(float)
    if not v.any():
        raise ValueError("no positive observations; cannot fit the magnitude stage")
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        occ = fit_logistic(train.x, v)
        pos = train.z > 0
        Xp, zp = train.x[pos], train.z[pos]
        aux = None
        if pos.sum() <= Xp.shape[1]:
            warnings.warn("too few positives for the magnitude stage", DegenerateFitWarning)
        if family == "gamma":
            mag, aux = fit_gamma_glm(Xp, zp)
        elif family == "lognormal":
            mag, aux = fit_lognormal(Xp, zp)
        else:
            mag = fit_exponential_glm(Xp, zp)
    for w in caught:
        if issubclass(w.category, SeparationWarning):
            flags.append("separation")
        elif issubclass(w.category, DegenerateFitWarning):
            flags.append("degenerate_magnitude")
    return TwoPartModel(
        occurrence_coef=occ,
        magnitude_coef=mag,
        magnitude_family=family,
        aux=aux,
        flags=tuple(dict.fromkeys(flags)),
    )
