"""Damped Gauss-Newton for small nonlinear least-squares problems.

One solver covers the package's three uses: latent-space collision search,
invariant-based recovery, and on-manifold root finding for the codimension
probe. Steps are Levenberg-Marquardt damped solutions of the augmented
system [J; sqrt(lam) I] delta = [-r; 0], which handles under- and
over-determined Jacobians alike (for underdetermined systems the undamped
limit is the minimal-norm step). A retraction hook lets callers step on a
manifold instead of in coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["GaussNewtonResult", "damped_gauss_newton"]


@dataclass
class GaussNewtonResult:
    x: object
    f: float            # final sum of squared residuals
    iterations: int
    converged: bool


def damped_gauss_newton(
    residual: Callable,
    jacobian: Callable,
    x0,
    retract: Callable | None = None,
    max_iter: int = 500,
    f_tol: float = 1e-28,
    step_tol: float = 1e-14,
    lam0: float = 1e-8,
    lam_max: float = 1e12,
    callback: Callable | None = None,
) -> GaussNewtonResult:
    """Minimize ||residual(x)||^2 from x0.

    residual(x) -> (m,) array; jacobian(x) -> (m, d) array in the step
    coordinates; retract(x, delta) -> new point (default: x + delta).
    ``callback(x, r)`` is invoked once per accepted iterate (including the
    start), which collision search uses to track candidate pairs.

    Convergence means the final objective dropped below ``f_tol``; a result
    with ``converged=False`` still carries the best iterate found.
    """
    if retract is None:
        retract = lambda x, delta: x + delta

    x = x0
    lam = lam0
    r = np.asarray(residual(x), dtype=float)
    f = float(r @ r)
    if callback is not None:
        callback(x, r)
    it = 0
    for it in range(1, max_iter + 1):
        if f <= f_tol:
            return GaussNewtonResult(x, f, it - 1, True)
        J = np.asarray(jacobian(x), dtype=float)
        d = J.shape[1]
        accepted = False
        while lam <= lam_max:
            J_aug = np.vstack([J, np.sqrt(lam) * np.eye(d)])
            rhs = np.concatenate([-r, np.zeros(d)])
            step = np.linalg.lstsq(J_aug, rhs, rcond=None)[0]
            if np.linalg.norm(step) <= step_tol:
                break
            x_new = retract(x, step)
            r_new = np.asarray(residual(x_new), dtype=float)
            f_new = float(r_new @ r_new)
            if f_new < f:
                x, r, f = x_new, r_new, f_new
                lam = max(lam / 10.0, 1e-14)
                accepted = True
                if callback is not None:
                    callback(x, r)
                break
            lam *= 10.0
        if not accepted:
            return GaussNewtonResult(x, f, it, f <= f_tol)
    return GaussNewtonResult(x, f, it, f <= f_tol)
