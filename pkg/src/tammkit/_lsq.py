"""Small damped Gauss-Newton (Levenberg-Marquardt) least-squares solver.

Used by the Drude and decay fits, which are both tiny smooth problems where a
hand-rolled solver gives us projection onto bounds and best-so-far reporting
on failure.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError


@dataclass
class LSQResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    residual: np.ndarray
    n_iter: int


def _numerical_jacobian(fun, x, f0):
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = 1e-7 * max(abs(x[j]), 1e-3)
        xp = x.copy()
        xp[j] += h
        jac[:, j] = (fun(xp) - f0) / h
    return jac


def levenberg_marquardt(fun, x0, jac=None, lower=None, xtol=1e-10, ftol=1e-15,
                        max_iter=200, lam0=1e-3):
    """Minimise ``0.5*sum(fun(x)**2)``.

    ``lower`` is an optional array of lower bounds enforced by projection after
    every trial step. Convergence is declared when the relative step falls
    below ``xtol`` or the relative cost reduction below ``ftol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    lower = None if lower is None else np.asarray(lower, dtype=float)
    if lower is not None:
        x = np.maximum(x, lower)
    jac = jac or (lambda p: _numerical_jacobian(fun, p, fun(p)))
    f = fun(x)
    cost = 0.5 * float(f @ f)
    lam = lam0
    for it in range(1, max_iter + 1):
        J = jac(x)
        g = J.T @ f
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        free = np.ones(x.size, dtype=bool)
        if lower is not None:
            # variables pinned at a bound with the gradient pushing outward
            free = ~((x <= lower) & (g > 0))
        accepted = False
        for _ in range(40):
            try:
                step = np.zeros_like(x)
                Af = (A + lam * np.diag(diag))[np.ix_(free, free)]
                step[free] = np.linalg.solve(Af, -g[free])
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            x_new = x + step
            if lower is not None:
                x_new = np.maximum(x_new, lower)
            f_new = fun(x_new)
            cost_new = 0.5 * float(f_new @ f_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 10
        if not accepted:
            # no descent direction left: we are at a (bounded) minimum
            return LSQResult(x, cost, J, f, it)
        dx = np.linalg.norm(x_new - x)
        dcost = cost - cost_new
        x, f, cost = x_new, f_new, cost_new
        lam = max(lam / 10, 1e-12)
        if dx <= xtol * (np.linalg.norm(x) + xtol) or dcost <= ftol * max(cost, 1e-300):
            return LSQResult(x, cost, jac(x), f, it)
    raise ConvergenceError(
        f"least squares did not converge in {max_iter} iterations",
        best=x, diagnostics={"cost": cost, "iterations": max_iter})
