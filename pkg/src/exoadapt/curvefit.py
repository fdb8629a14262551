"""Damped Gauss-Newton (Levenberg-Marquardt) fit of the assistance law
``payload = a * exp(b * assist) + c``."""

from __future__ import annotations

import warnings

import numpy as np

from .errors import ConvergenceError, InsufficientDataError

DEFAULT_INIT = (1.0, 1.0, 0.0)
MAX_ITER = 500
STEP_TOL = 1e-10


class NearSingularFitWarning(UserWarning):
    """The normal equations were close to singular (model unidentifiable)."""


def _residuals(params, assist, payload):
    a, b, c = params
    return payload - (a * np.exp(b * assist) + c)


def _jacobian(params, assist):
    a, b, _ = params
    e = np.exp(b * assist)
    return np.column_stack([-e, -a * assist * e, -np.ones_like(assist)])


def fit_payload_exponential(
    assist,
    payload,
    init=DEFAULT_INIT,
    max_iter=MAX_ITER,
    step_tol=STEP_TOL,
):
    """Least-squares (a, b, c) for payload = a*exp(b*assist) + c.

    Deterministic: fixed initial guess, Levenberg damping adapted by
    accept/reject, terminates when the accepted step norm drops below
    step_tol. Returns (params, residual_rms, n_iter).

    Raises ConvergenceError (carrying the best parameters seen) if the
    step never shrinks below tolerance within max_iter iterations.
    """
    assist = np.asarray(assist, dtype=float).ravel()
    payload = np.asarray(payload, dtype=float).ravel()
    if assist.size != payload.size:
        raise InsufficientDataError("assist and payload lengths differ")
    if assist.size < 3:
        raise InsufficientDataError("need at least 3 points to fit 3 parameters")

    params = np.asarray(init, dtype=float)
    lam = 1e-3
    best = params.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        r = _residuals(params, assist, payload)
        cost = float(r @ r)
        best_cost = cost
        for it in range(1, max_iter + 1):
            J = _jacobian(params, assist)
            JtJ = J.T @ J
            g = J.T @ r
            try:
                step = np.linalg.solve(JtJ + lam * np.eye(3), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + step
            r_trial = _residuals(trial, assist, payload)
            cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost:
                params, r, cost = trial, r_trial, cost_trial
                if cost < best_cost:
                    best, best_cost = params.copy(), cost
                lam = max(lam * 0.5, 1e-14)
                if float(np.linalg.norm(step)) < step_tol:
                    rms = float(np.sqrt(cost / assist.size))
                    cond = float(np.linalg.cond(JtJ))
                    if not np.isfinite(cond) or cond > 1e12:
                        warnings.warn(
                            f"normal equations nearly singular (cond={cond:.2e}); "
                            "parameters may be unidentifiable",
                            NearSingularFitWarning,
                        )
                    return tuple(float(v) for v in params), rms, it
            else:
                lam *= 2.0
                if lam > 1e14:
                    break
    raise ConvergenceError(
        f"no convergence within {max_iter} iterations",
        best_params=tuple(float(v) for v in best),
        residual_rms=float(np.sqrt(best_cost / assist.size)),
    )
