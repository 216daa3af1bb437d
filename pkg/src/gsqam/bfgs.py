"""Dense BFGS minimiser with finite-difference gradients.

Small problems only (a few dozen variables); the inverse Hessian is kept as
a full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BfgsResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    n_evals: int
    message: str = ""


def central_gradient(fun, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return g


def five_point_gradient(fun, x, step=1e-4):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (-fun(x + 2 * e) + 8 * fun(x + e) - 8 * fun(x - e) + fun(x - 2 * e)) / (12.0 * step)
    return g


def minimize_bfgs(
    fun,
    x0,
    grad=None,
    gtol: float = 1e-7,
    max_iter: int = 500,
    fd_step: float = 1e-6,
    c1: float = 1e-4,
    max_backtracks: int = 60,
) -> BfgsResult:
    """Minimise ``fun`` from ``x0``.

    Stops when the gradient infinity-norm drops below ``gtol`` (converged),
    after ``max_iter`` iterations, or when the backtracking line search
    cannot find a sufficient decrease. Every accepted step strictly lowers
    the objective, so the returned value never exceeds ``fun(x0)``.
    """
    n_evals = 0

    def f(x):
        nonlocal n_evals
        n_evals += 1
        return float(fun(x))

    if grad is None:
        def g_of(x):
            nonlocal n_evals
            n_evals += 2 * x.size
            return central_gradient(fun, x, fd_step)
    else:
        def g_of(x):
            return np.asarray(grad(x), dtype=float)

    x = np.array(x0, dtype=float)
    fx = f(x)
    g = g_of(x)
    n = x.size
    h_inv = np.eye(n)
    scaled = False

    for it in range(max_iter):
        if np.max(np.abs(g), initial=0.0) < gtol:
            return BfgsResult(x, fx, g, it, True, n_evals, "gradient tolerance reached")
        d = -h_inv @ g
        slope = float(g @ d)
        if slope >= 0:
            # lost descent direction; restart from steepest descent
            h_inv = np.eye(n)
            d = -g
            slope = float(g @ d)

        alpha = 1.0
        for _ in range(max_backtracks):
            x_new = x + alpha * d
            f_new = f(x_new)
            if np.isfinite(f_new) and f_new <= fx + c1 * alpha * slope:
                break
            alpha *= 0.5
        else:
            return BfgsResult(x, fx, g, it, False, n_evals, "line search failed")
        if not f_new < fx:
            return BfgsResult(x, fx, g, it, False, n_evals, "no further decrease")

        g_new = g_of(x_new)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                h_inv = np.eye(n) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            hy = h_inv @ y
            h_inv = (
                h_inv
                - rho * (np.outer(s, hy) + np.outer(hy, s))
                + (rho * rho * float(y @ hy) + rho) * np.outer(s, s)
            )
        x, fx, g = x_new, f_new, g_new

    converged = np.max(np.abs(g), initial=0.0) < gtol
    return BfgsResult(x, fx, g, max_iter, bool(converged), n_evals, "iteration limit")
