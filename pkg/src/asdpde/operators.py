"""Discrete transport operators that are exactly skew modulo the boundary.

The derivative matrices are SBP(2,1): central differences in the
interior, one-sided first-order closures, paired with the trapezoid mass
matrix W so that  W D + D^T W = B  holds exactly, where B is the
boundary quadrature (±1 at the endpoints of each grid line, scaled by
the transverse weight in 2-D).

The advective operator  A u = a·∇u + ½(∇·a) u  is assembled in the
symmetrized split form

    A = sum_k  ½ ( diag(a_k) D_k + D_k diag(a_k) ),

which agrees with the unsplit form up to the discrete Leibniz defect and
— unlike the unsplit form — satisfies the Green identity

    <v, A u>_w + <u, A v>_w = <b1 u, b1 v> - <b2 u, b2 v>

to machine precision for arbitrary coefficient fields.  The unsplit
assembly is kept behind a debug flag as a negative control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Grid, SigmaDecomposition, VectorFieldSpec, sigma_decompose

__all__ = [
    "SkewOperator",
    "DirichletPLaplacian",
    "build_transport",
    "green_residual",
    "plap_subgrad",
    "sbp_derivative_1d",
    "dump_coo",
]


def sbp_derivative_1d(n: int, h: float) -> sp.csr_matrix:
    """SBP(2,1) first-derivative matrix on n nodes with spacing h."""
    Q = sp.diags([-0.5, 0.5], [-1, 1], shape=(n, n)).tolil()
    Q[0, 0] = -0.5
    Q[n - 1, n - 1] = 0.5
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return (sp.diags(1.0 / w) @ Q.tocsr()).tocsr()


def _derivative_matrices(grid: Grid) -> tuple[sp.csr_matrix, ...]:
    """Per-axis derivative matrices acting on flattened nodal fields."""
    if grid.dim == 1:
        return (sbp_derivative_1d(grid.counts[0], grid.spacings[0]),)
    nx, ny = grid.counts
    hx, hy = grid.spacings
    Dx = sbp_derivative_1d(nx, hx)
    Dy = sbp_derivative_1d(ny, hy)
    Ix = sp.identity(nx, format="csr")
    Iy = sp.identity(ny, format="csr")
    return (
        sp.kron(Dx, Iy, format="csr"),
        sp.kron(Ix, Dy, format="csr"),
    )


@dataclass
class SkewOperator:
    """Discrete transport operator with boundary trace pair (b1, b2)."""

    grid: Grid
    mat: sp.csr_matrix
    sigma: SigmaDecomposition
    a_values: np.ndarray        # (dim, n_nodes)
    div_h: np.ndarray           # discrete divergence at nodes

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.mat @ u

    def apply_adjoint_w(self, v: np.ndarray) -> np.ndarray:
        """A^w v = W^{-1} A^T W v."""
        return (self.mat.T @ (self.weights * v)) / self.weights

    def b1(self, u: np.ndarray) -> np.ndarray:
        """Trace values on Σ+ facets."""
        return u[self.grid.facet_nodes[self.sigma.plus_facets]]

    def b2(self, u: np.ndarray) -> np.ndarray:
        """Trace values on Σ− facets."""
        return u[self.grid.facet_nodes[self.sigma.minus_facets]]

    def trace_inner_plus(self, u, v) -> float:
        w = self.sigma.weights[self.sigma.plus_facets]
        return float(np.sum(w * self.b1(u) * self.b1(v)))

    def trace_inner_minus(self, u, v) -> float:
        w = self.sigma.weights[self.sigma.minus_facets]
        return float(np.sum(w * self.b2(u) * self.b2(v)))

    def trace_norm_sq_plus(self, u) -> float:
        return self.trace_inner_plus(u, u)

    def trace_norm_sq_minus(self, u) -> float:
        return self.trace_inner_minus(u, u)

    def trace_grad_w(self, u) -> np.ndarray:
        """w-gradient of ½‖b1 u‖² + ½‖b2 u‖²."""
        out = np.zeros(self.grid.n_nodes)
        np.add.at(out, self.grid.facet_nodes, self.sigma.weights * u[self.grid.facet_nodes])
        return out / self.weights

    def trace_hess_diag_w(self) -> np.ndarray:
        out = np.zeros(self.grid.n_nodes)
        np.add.at(out, self.grid.facet_nodes, self.sigma.weights)
        return out / self.weights


def build_transport(grid: Grid, a: VectorFieldSpec, *,
                    inconsistent_divergence: bool = False) -> SkewOperator:
    """Assemble the transport operator  u ↦ a·∇u + ½(∇·a) u.

    With ``inconsistent_divergence=True`` the operator is assembled in
    the unsplit form diag(a)·D + ½diag(D a), whose discrete Leibniz
    defect breaks the exact Green identity; it exists as a negative
    control for the skew check.
    """
    a_values = a.at_nodes(grid)
    mats = _derivative_matrices(grid)
    div_h = np.zeros(grid.n_nodes)
    for D_k, a_k in zip(mats, a_values):
        div_h += D_k @ a_k

    A = None
    for D_k, a_k in zip(mats, a_values):
        diag_a = sp.diags(a_k)
        if inconsistent_divergence:
            term = diag_a @ D_k
        else:
            term = 0.5 * (diag_a @ D_k + D_k @ diag_a)
        A = term if A is None else A + term
    if inconsistent_divergence:
        A = A + 0.5 * sp.diags(div_h)

    sigma = sigma_decompose(grid, a)
    return SkewOperator(
        grid=grid, mat=A.tocsr(), sigma=sigma, a_values=a_values, div_h=div_h
    )


def green_residual(op: SkewOperator, u: np.ndarray, v: np.ndarray) -> float:
    """|<v,Au>_w + <u,Av>_w − <b1u,b1v> + <b2u,b2v>|."""
    w = op.weights
    lhs = float(np.sum(w * v * op.apply(u))) + float(np.sum(w * u * op.apply(v)))
    rhs = op.trace_inner_plus(u, v) - op.trace_inner_minus(u, v)
    return abs(lhs - rhs)


@dataclass
class DirichletPLaplacian:
    """Discrete p-Dirichlet energy (1/p)Σ w_cell |G u|^p with zero trace."""

    grid: Grid
    p: float
    grad_term: object
    mask: np.ndarray            # True on Dirichlet (boundary) nodes

    @classmethod
    def for_grid(cls, grid: Grid, p: float) -> "DirichletPLaplacian":
        from .convex import GradientTerm

        if not p > 1:
            raise ValueError("p must be > 1")
        return cls(
            grid=grid,
            p=float(p),
            grad_term=GradientTerm.for_grid(grid, p),
            mask=grid.boundary_mask(),
        )

    def energy(self, u: np.ndarray) -> float:
        return self.grad_term.value(u)

    def subgrad(self, u: np.ndarray) -> np.ndarray:
        """w-gradient of the energy, zeroed on Dirichlet nodes.

        On interior nodes this is the discrete −Δ_p u.
        """
        g = self.grad_term.grad_plain(u) / self.grid.weights
        return np.where(self.mask, 0.0, g)


def plap_subgrad(op: DirichletPLaplacian, u: np.ndarray) -> np.ndarray:
    return op.subgrad(u)


def dump_coo(mat, path) -> None:
    """Write a sparse matrix as 'row col value' triples, one per line."""
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {float(v)!r}\n")
