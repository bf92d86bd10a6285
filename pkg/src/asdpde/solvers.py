"""Shared smooth convex minimization drivers.

All solvers work on plain (unweighted) gradients; callers convert from
w-form gradients by multiplying with the quadrature weights.  The main
entry point runs L-BFGS and, when a Hessian-vector product is supplied,
polishes with Newton-CG.  Objective values along the way are recorded so
descent monotonicity can be audited.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse.linalg as spla

__all__ = ["SolveResult", "SolveError", "minimize_smooth"]


class SolveError(RuntimeError):
    """Minimization failed; carries the best value and gradient norm."""

    def __init__(self, message: str, best_value: float, grad_norm: float) -> None:
        super().__init__(
            f"{message} (best value {best_value:.6e}, grad norm {grad_norm:.3e})"
        )
        self.best_value = best_value
        self.grad_norm = grad_norm


@dataclass
class SolveResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def _newton_polish(fun_grad, x, val, hessp, history, max_steps=30,
                   gtol=1e-15):
    """Inexact Newton refinement: CG on the Hessian system + backtracking."""
    n = x.shape[0]
    steps = 0
    for _ in range(max_steps):
        cur_val, grad = fun_grad(x)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= gtol:
            break
        H = spla.LinearOperator((n, n), matvec=lambda d: hessp(x, d))
        d, _ = spla.cg(H, -grad, rtol=1e-10, atol=0.0, maxiter=10 * n)
        # backtracking line search on the objective
        t = 1.0
        improved = False
        for _ in range(40):
            cand = x + t * d
            cand_val = fun_grad(cand)[0]
            if cand_val <= cur_val:
                x, val = cand, float(cand_val)
                history.append(val)
                improved = True
                break
            t *= 0.5
        steps += 1
        if not improved:
            break
    return x, val, steps


def minimize_smooth(fun_grad, x0, *, value_target=None, gtol=1e-12,
                    max_iter=2000, hessp=None,
                    accept_stall=False) -> SolveResult:
    """Minimize a smooth convex objective.

    Parameters
    ----------
    fun_grad:
        Callable returning ``(value, plain_gradient)``.
    value_target:
        If given, the solve is declared converged as soon as the
        objective reaches this value (useful when the infimum is known).
    hessp:
        Optional ``hessp(x, d)`` plain Hessian-vector product; enables a
        Newton-CG polishing pass after L-BFGS.
    """
    history: list[float] = []

    def wrapped(x):
        val, grad = fun_grad(x)
        history.append(float(val))
        return val, grad

    res = scipy.optimize.minimize(
        wrapped,
        np.asarray(x0, dtype=float),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "ftol": 1e-18, "gtol": 1e-14},
    )
    x, val = res.x, float(res.fun)
    nit = int(res.nit)

    done = value_target is not None and val <= value_target
    if hessp is not None and not done:
        x, val, polish_it = _newton_polish(
            fun_grad, x, val, hessp, history
        )
        nit += polish_it

    grad_norm = float(np.linalg.norm(fun_grad(x)[1]))
    converged = bool(
        (value_target is not None and val <= value_target)
        or grad_norm <= gtol
        or (accept_stall and bool(res.success))
    )
    return SolveResult(
        x=x,
        fun=val,
        grad_norm=grad_norm,
        iterations=nit,
        converged=converged,
        history=history,
    )
