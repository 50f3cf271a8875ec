"""Projected gradient descent on an l2 ball with backtracking line search.

The loss is non-convex, but within a large enough ball a projected
first-order method with a sufficient-decrease test converges to the
estimator; iterates never leave the ball and the loss trace is monotone
non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import Dataset, DetectionParam, ParamPair, make_objective

STEP_FLOOR = 1e-16


@dataclass
class FitConfig:
    """Optimizer settings.

    radius is the l2 search-ball radius; the step is reset to init_step
    each iteration and halved until the projected sufficient-decrease
    test passes.
    """

    radius: float
    init_step: float = 1.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    max_iter: int = 10000
    tol: float = 1e-8
    record_iterates: bool = False

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if self.init_step <= 0:
            raise ValueError("init_step must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class FitResult:
    """Fitted parameters plus the convergence trace.

    trace rows are (iteration, loss, step_size, iterate_change); losses
    are non-increasing.  iterates (one row per iterate, including the
    start) is populated only when FitConfig.record_iterates is set.
    """

    omega_hat: ParamPair
    converged: bool
    iterations: int
    final_loss: float
    trace: list[tuple[int, float, float, float]] = field(default_factory=list)
    iterates: np.ndarray | None = None


def project_l2_ball(v: np.ndarray, r: float) -> np.ndarray:
    """Euclidean projection onto the centered l2 ball of radius r."""
    if r <= 0:
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= r:
        return v
    return v * (r / norm)


def _backtrack(
    w: np.ndarray,
    grad: np.ndarray,
    loss_w: float,
    loss_vec: Callable[[np.ndarray], float],
    cfg: FitConfig,
) -> tuple[np.ndarray, float, float]:
    """Largest step eta = init_step * factor^k passing the projected decrease test.

    Accepts w_plus = P(w - eta * grad) when
    loss(w_plus) <= loss(w) - (armijo_c / eta) * ||w_plus - w||^2.
    Returns (w, 0, loss(w)) if no eta >= STEP_FLOOR qualifies.
    """
    eta = cfg.init_step
    while eta >= STEP_FLOOR:
        candidate = project_l2_ball(w - eta * grad, cfg.radius)
        decrease = np.sum((candidate - w) ** 2) * (cfg.armijo_c / eta)
        loss_c = loss_vec(candidate)
        if not np.isfinite(loss_c):
            raise FloatingPointError(f"non-finite loss {loss_c} during line search at step {eta}")
        if loss_c <= loss_w - decrease:
            return candidate, eta, loss_c
        eta *= cfg.backtrack_factor
    return w.copy(), 0.0, loss_w


def armijo_step(
    omega: ParamPair,
    grad: np.ndarray,
    loss_fn: Callable[[ParamPair], float],
    cfg: FitConfig,
) -> tuple[ParamPair, float]:
    """One projected gradient step from omega with backtracking step selection."""
    w = omega.as_vector()
    loss_vec = lambda v: loss_fn(ParamPair.from_vector(v))
    candidate, eta, _ = _backtrack(w, np.asarray(grad, dtype=float), loss_vec(w), loss_vec, cfg)
    return ParamPair.from_vector(candidate), eta


def fit(
    data: Dataset,
    d: DetectionParam,
    cfg: FitConfig,
    omega0: ParamPair | None = None,
) -> FitResult:
    """Minimize the mean negative log-likelihood over the l2 ball.

    Stops when the iterate change drops to cfg.tol or max_iter is
    reached; exhausting max_iter is reported through converged=False,
    not an error.  A failed line search (no admissible step) also
    returns the current iterate with converged=False.
    """
    if omega0 is None:
        omega0 = ParamPair.zeros(data.p)
    w = omega0.as_vector()
    if np.linalg.norm(w) > cfg.radius:
        raise ValueError("initial point lies outside the search ball")

    loss_vec, loss_and_grad = make_objective(data, d)
    loss_w, grad = loss_and_grad(w)
    trace = [(0, loss_w, 0.0, 0.0)]
    iterates = [w.copy()] if cfg.record_iterates else None

    converged = False
    iterations = 0
    for t in range(1, cfg.max_iter + 1):
        candidate, eta, loss_c = _backtrack(w, grad, loss_w, loss_vec, cfg)
        if eta == 0.0:
            break
        change = float(np.linalg.norm(candidate - w))
        w, loss_w = candidate, loss_c
        iterations = t
        trace.append((t, loss_w, eta, change))
        if iterates is not None:
            iterates.append(w.copy())
        if change <= cfg.tol:
            converged = True
            break
        loss_w, grad = loss_and_grad(w)

    return FitResult(
        omega_hat=ParamPair.from_vector(w),
        converged=converged,
        iterations=iterations,
        final_loss=loss_w,
        trace=trace,
        iterates=None if iterates is None else np.asarray(iterates),
    )
