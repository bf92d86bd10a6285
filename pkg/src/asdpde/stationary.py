"""Stationary transport problems as certified convex minimizations.

Two variants are supported.

Pure transport minimizes

    I(u) = phi(u) + phi*(A u) + ½‖b1 u‖² + ½‖b2 u‖²

with the nodewise potential

    g_i(u) = (alpha_i / p)|u|^p + (beta_i / 2) u² + e^{tau_i} f_i u,
    alpha_i = e^{(2-p) tau_i},
    beta_i  = (a·∇tau)_i + ½(div_h a + a0)_i ,

whose minimizer u solves  A u ∈ ∂phi(u)  with the zero outflow trace
emerging unconstrained; v = e^{-tau} u then solves the transport
equation  a·∇v − (a0/2) v = v|v|^{p-2} + f.

Viscous transport minimizes  I(u) = phi(u) + phi*(A u)  over fields
vanishing on the boundary, with

    phi(u) = (1/p_visc) Σ w_cell |G u|^{p_visc}
             + Σ w [ (1/m)|u|^m + ¼(div_h a + a0) u² + f u ],

whose minimizer solves  −Δ_p u + ½ a0 u + u|u|^{m-2} + f = a·∇u.

In both cases the infimum is exactly zero, so the attained value is a
correctness certificate: I(û) = fenchel gap + outflow trace mass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .asd import BasicLagrangian
from .convex import FieldFunctional, GradientTerm, PointwisePotential
from .expressions import Expression
from .mesh import Grid, VectorFieldSpec
from .operators import SkewOperator, build_transport
from .solvers import SolveError, SolveResult, minimize_smooth

__all__ = [
    "StationaryProblem",
    "Certificate",
    "FeasibilityError",
    "assemble_I",
    "solve_stationary",
    "resolvent_map_X",
]

PURE_TRANSPORT = "pure_transport"
VISCOUS = "viscous"


class FeasibilityError(ValueError):
    """Semi-positivity precondition violated; names the worst node."""

    def __init__(self, message: str, node: int, value: float) -> None:
        super().__init__(f"{message}: worst node {node} with value {value:.6e}")
        self.node = node
        self.value = value


@dataclass
class Certificate:
    """Zero-minimum certificate for a stationary solve."""

    I_total: float
    fenchel_gap: float
    inflow_trace_sq: float
    outflow_trace_sq: float
    trace_part: float
    pde_residual_linf: float
    iterations: int
    converged: bool

    def as_dict(self) -> dict:
        return {
            "I_total": self.I_total,
            "fenchel_gap": self.fenchel_gap,
            "inflow_trace_sq": self.inflow_trace_sq,
            "outflow_trace_sq": self.outflow_trace_sq,
            "pde_residual_linf": self.pde_residual_linf,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass
class StationaryProblem:
    grid: Grid
    a: VectorFieldSpec
    a0: Expression
    f: Expression
    tau: Expression | None = None
    p: float = 2.0
    m: float = 2.0
    visc_p: float = 2.0
    variant: str = PURE_TRANSPORT

    def __post_init__(self):
        if self.variant not in (PURE_TRANSPORT, VISCOUS):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.p > 1:
            raise ValueError("p must be > 1")

    # -- assembly

    def build_operator(self, *, inconsistent_divergence: bool = False) -> SkewOperator:
        return build_transport(
            self.grid, self.a, inconsistent_divergence=inconsistent_divergence
        )

    def feasibility_field(self, op: SkewOperator) -> np.ndarray:
        """a·∇tau + ½(div_h a + a0) at nodes (the (semi) quantity)."""
        grid = self.grid
        a0 = grid.eval_expression(self.a0)
        if self.tau is None:
            adv_tau = np.zeros(grid.n_nodes)
        else:
            from .operators import _derivative_matrices

            tau = grid.eval_expression(self.tau)
            adv_tau = np.zeros(grid.n_nodes)
            for D_k, a_k in zip(_derivative_matrices(grid), op.a_values):
                adv_tau += a_k * (D_k @ tau)
        return adv_tau + 0.5 * (op.div_h + a0)

    def check_feasibility(self, op: SkewOperator) -> np.ndarray:
        beta = self.feasibility_field(op)
        worst = int(np.argmin(beta))
        if self.variant == PURE_TRANSPORT:
            if self.p < 2.0:
                if beta[worst] <= 0.0:
                    raise FeasibilityError(
                        "a·∇tau + (div a + a0)/2 must be strictly positive "
                        "for 1 < p < 2",
                        worst,
                        float(beta[worst]),
                    )
            elif beta[worst] < -1e-12:
                raise FeasibilityError(
                    "a·∇tau + (div a + a0)/2 must be nonnegative",
                    worst,
                    float(beta[worst]),
                )
        else:
            if beta[worst] < -1e-12:
                raise FeasibilityError(
                    "(div a + a0)/2 must be nonnegative for the viscous "
                    "variant",
                    worst,
                    float(beta[worst]),
                )
        return np.maximum(beta, 0.0)

    def build_functional(self, op: SkewOperator) -> FieldFunctional:
        grid = self.grid
        f = grid.eval_expression(self.f)
        beta = self.check_feasibility(op)
        if self.variant == PURE_TRANSPORT:
            tau = (
                np.zeros(grid.n_nodes)
                if self.tau is None
                else grid.eval_expression(self.tau)
            )
            alpha = np.exp((2.0 - self.p) * tau)
            pot = (
                PointwisePotential.power(alpha, self.p)
                + PointwisePotential.quadratic(beta)
                + PointwisePotential.linear(np.exp(tau) * f)
            )
            return FieldFunctional.on_grid(grid, pot)
        pot = (
            PointwisePotential.power(np.ones(grid.n_nodes), self.m)
            + PointwisePotential.quadratic(beta)
            + PointwisePotential.linear(f)
        )
        return FieldFunctional.on_grid(
            grid,
            pot,
            grad_term=GradientTerm.for_grid(grid, self.visc_p),
            dirichlet_mask=grid.boundary_mask(),
        )


def assemble_I(problem: StationaryProblem, op: SkewOperator | None = None,
               phi: FieldFunctional | None = None):
    """Objective I and its plain gradient, plus an optional hessp.

    Returns ``(objective, gradient, hessp)`` where objective and
    gradient are callables of the nodal field and hessp may be None when
    no cheap Hessian-vector product is available.
    """
    if op is None:
        op = problem.build_operator()
    if phi is None:
        phi = problem.build_functional(op)
    w = phi.weights
    boundary = problem.variant == PURE_TRANSPORT

    def objective(u):
        val = phi.value(u) + phi.conjugate_value(op.apply(u))
        if boundary:
            val += 0.5 * (op.trace_norm_sq_plus(u) + op.trace_norm_sq_minus(u))
        return val

    def grad_w(u):
        z = phi.conjugate_arg(op.apply(u))
        g = phi.grad_w(u) + op.apply_adjoint_w(z)
        if boundary:
            g = g + op.trace_grad_w(u)
        if phi.dirichlet_mask is not None:
            g = np.where(phi.dirichlet_mask, 0.0, g)
        return g

    def fun_grad(u):
        return objective(u), w * grad_w(u)

    hessp = None
    if problem.variant == PURE_TRANSPORT and problem.p >= 2.0:
        trace_diag = op.trace_hess_diag_w()

        def hessp(u, d, _td=trace_diag):
            z = phi.conjugate_arg(op.apply(u))
            curv = np.maximum(phi.pointwise_hess_diag(z), 1e-12)
            hd = (
                phi.pointwise_hess_diag(u) * d
                + op.apply_adjoint_w((op.apply(d)) / curv)
                + _td * d
            )
            return w * hd

    elif problem.variant == VISCOUS and phi.is_quadratic:

        def hessp(u, d):
            free = phi._free()
            Hd = phi._quadratic_plain_hessian() @ d / w
            Ad = op.apply(d)
            t = phi._quadratic_solve(w * Ad)
            out = np.where(free, Hd + op.apply_adjoint_w(t), 0.0)
            return w * out

    return objective, fun_grad, hessp


def _pde_residual(problem: StationaryProblem, op: SkewOperator,
                  u: np.ndarray) -> float:
    """Strong-form residual on interior nodes, after v = e^{-tau} u."""
    from .operators import _derivative_matrices

    grid = problem.grid
    a0 = grid.eval_expression(problem.a0)
    f = grid.eval_expression(problem.f)
    interior = ~grid.boundary_mask()
    if problem.variant == PURE_TRANSPORT:
        tau = (
            np.zeros(grid.n_nodes)
            if problem.tau is None
            else grid.eval_expression(problem.tau)
        )
        v = np.exp(-tau) * u
        adv = np.zeros(grid.n_nodes)
        for D_k, a_k in zip(_derivative_matrices(grid), op.a_values):
            adv += a_k * (D_k @ v)
        r = adv - 0.5 * a0 * v - np.abs(v) ** (problem.p - 2.0) * v - f
    else:
        phi = problem.build_functional(op)
        # a·∇u − (−Δ_p u + ½ a0 u + u|u|^{m−2} + f) on interior nodes
        adv = np.zeros(grid.n_nodes)
        for D_k, a_k in zip(_derivative_matrices(grid), op.a_values):
            adv += a_k * (D_k @ u)
        r = adv - phi.grad_w(u) + 0.5 * op.div_h * u
    if not np.any(interior):
        return 0.0
    return float(np.max(np.abs(r[interior])))


def solve_stationary(problem: StationaryProblem, tol: float = 1e-9,
                     max_iter: int = 5000, u0: np.ndarray | None = None):
    """Minimize the certificate functional; returns (û, Certificate).

    Raises :class:`SolveError` when neither the value target nor the
    gradient criterion is met within the iteration budget.
    """
    op = problem.build_operator()
    phi = problem.build_functional(op)
    objective, fun_grad, hessp = assemble_I(problem, op, phi)

    if u0 is None:
        u0 = problem.grid.zeros()
    res: SolveResult = minimize_smooth(
        fun_grad,
        u0,
        value_target=tol,
        gtol=np.sqrt(tol),
        max_iter=max_iter,
        hessp=hessp,
    )
    if not res.converged:
        raise SolveError(
            "stationary solve did not converge", res.fun, res.grad_norm
        )

    u = res.x
    from .convex import fenchel_gap

    gap = fenchel_gap(phi, u, op.apply(u))
    inflow = op.trace_norm_sq_minus(u)
    outflow = op.trace_norm_sq_plus(u)
    trace_part = outflow if problem.variant == PURE_TRANSPORT else 0.0
    cert = Certificate(
        I_total=float(res.fun),
        fenchel_gap=float(gap),
        inflow_trace_sq=float(inflow),
        outflow_trace_sq=float(outflow),
        trace_part=float(trace_part),
        pde_residual_linf=_pde_residual(problem, op, u),
        iterations=res.iterations,
        converged=res.converged,
    )
    return u, cert


def resolvent_map_X(L: BasicLagrangian, p_field: np.ndarray):
    """X(p) = argmin_x { L(x,p) + <x,p>_w }; returns (X, attained value).

    For a basic Lagrangian the minimizer is ∇phi*(-p) in closed form and
    the attained minimum is the Fenchel gap at the dual pair, hence ≈ 0.
    """
    if not isinstance(L, BasicLagrangian) or L.dual_sign != -1.0:
        raise TypeError("resolvent_map_X expects a basic ASD Lagrangian")
    p_field = np.asarray(p_field, dtype=float)
    x = L.phi.conjugate_arg(-p_field)
    value = L.value(x, p_field) + L.phi.inner(x, p_field)
    return x, float(value)


def certificate_to_json(cert: Certificate) -> str:
    return json.dumps(cert.as_dict(), indent=2, sort_keys=True)
