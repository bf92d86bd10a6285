"""Structured grids with trapezoid quadrature and boundary facets.

Grids are tensor-product boxes in one or two dimensions.  Nodes carry
trapezoid quadrature weights, which pair exactly with the
summation-by-parts derivative stencils in :mod:`asdpde.operators`.  The
boundary is enumerated as a list of facets, one per (node, outward side):
corner nodes of a 2-D grid appear twice, once per touching edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expressions import Expression, parse_field_expression

__all__ = [
    "Grid",
    "VectorFieldSpec",
    "SigmaDecomposition",
    "build_grid",
    "sigma_decompose",
]


@dataclass(frozen=True)
class Grid:
    """A structured 1-D or 2-D grid with trapezoid quadrature.

    Nodes of a 2-D grid are flattened in row-major order with the x index
    slowest: node ``(i, j)`` lives at flat index ``i * counts[1] + j``.
    """

    dim: int
    extents: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]
    coords: np.ndarray          # (n_nodes, dim) node coordinates
    weights: np.ndarray         # (n_nodes,) quadrature weights
    axis_coords: tuple[np.ndarray, ...]
    axis_weights: tuple[np.ndarray, ...]
    facet_nodes: np.ndarray     # (n_facets,) flat node index per facet
    facet_normals: np.ndarray   # (n_facets, dim) outward unit normals
    facet_dsigma: np.ndarray    # (n_facets,) surface quadrature weights

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n - 1)
            for (lo, hi), n in zip(self.extents, self.counts)
        )

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_nodes)

    def eval_expression(self, expr: Expression) -> np.ndarray:
        """Evaluate an expression at all grid nodes."""
        if self.dim == 1:
            return expr(self.coords[:, 0])
        return expr(self.coords[:, 0], self.coords[:, 1])

    def boundary_mask(self) -> np.ndarray:
        """Boolean mask of nodes lying on the boundary."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.facet_nodes] = True
        return mask


def build_grid(dim: int, extents, counts) -> Grid:
    """Build a structured grid with trapezoid weights and boundary facets.

    Parameters
    ----------
    dim:
        1 or 2.
    extents:
        Sequence of ``dim`` intervals ``(lo, hi)`` with ``lo < hi``.
    counts:
        Nodes per axis, each at least 2.
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    extents = tuple((float(lo), float(hi)) for lo, hi in extents)
    counts = tuple(int(c) for c in counts)
    if len(extents) != dim or len(counts) != dim:
        raise ValueError("extents/counts length must match dim")
    for (lo, hi), c in zip(extents, counts):
        if c < 2:
            raise ValueError(f"need at least 2 nodes per axis, got {c}")
        if not hi > lo:
            raise ValueError(f"degenerate extent ({lo}, {hi})")

    axis_coords = []
    axis_weights = []
    for (lo, hi), c in zip(extents, counts):
        xs = np.linspace(lo, hi, c)
        h = (hi - lo) / (c - 1)
        w = np.full(c, h)
        w[0] = w[-1] = h / 2
        axis_coords.append(xs)
        axis_weights.append(w)

    if dim == 1:
        coords = axis_coords[0][:, None]
        weights = axis_weights[0].copy()
        facet_nodes = np.array([0, counts[0] - 1])
        facet_normals = np.array([[-1.0], [1.0]])
        facet_dsigma = np.array([1.0, 1.0])
    else:
        nx, ny = counts
        X, Y = np.meshgrid(axis_coords[0], axis_coords[1], indexing="ij")
        coords = np.column_stack([X.ravel(), Y.ravel()])
        weights = np.outer(axis_weights[0], axis_weights[1]).ravel()

        nodes, normals, dsig = [], [], []

        def add(i, j, normal, ds):
            nodes.append(i * ny + j)
            normals.append(normal)
            dsig.append(ds)

        for j in range(ny):                      # x = lo and x = hi edges
            add(0, j, (-1.0, 0.0), axis_weights[1][j])
            add(nx - 1, j, (1.0, 0.0), axis_weights[1][j])
        for i in range(nx):                      # y = lo and y = hi edges
            add(i, 0, (0.0, -1.0), axis_weights[0][i])
            add(i, ny - 1, (0.0, 1.0), axis_weights[0][i])

        facet_nodes = np.array(nodes)
        facet_normals = np.array(normals)
        facet_dsigma = np.array(dsig)

    return Grid(
        dim=dim,
        extents=extents,
        counts=counts,
        coords=coords,
        weights=weights,
        axis_coords=tuple(axis_coords),
        axis_weights=tuple(axis_weights),
        facet_nodes=facet_nodes,
        facet_normals=facet_normals,
        facet_dsigma=facet_dsigma,
    )


@dataclass(frozen=True)
class VectorFieldSpec:
    """A coefficient vector field given componentwise by expressions."""

    components: tuple[Expression, ...]

    @classmethod
    def from_strings(cls, *texts: str) -> "VectorFieldSpec":
        return cls(tuple(parse_field_expression(t) for t in texts))

    def at_nodes(self, grid: Grid) -> np.ndarray:
        """Evaluate components at nodes; returns shape (dim, n_nodes)."""
        if len(self.components) != grid.dim:
            raise ValueError(
                f"vector field has {len(self.components)} components "
                f"but grid is {grid.dim}-D"
            )
        return np.stack([grid.eval_expression(c) for c in self.components])

    def normal_component_at_facets(self, grid: Grid) -> np.ndarray:
        """a·n̂ at each boundary facet."""
        values = self.at_nodes(grid)[:, grid.facet_nodes]
        return np.einsum("kf,fk->f", values, grid.facet_normals)


@dataclass(frozen=True)
class SigmaDecomposition:
    """Boundary split into outflow (Σ+) and inflow (Σ−) facet sets.

    Facets with a·n̂ = 0 land in Σ+; their weight vanishes, so the
    assignment is value-irrelevant but keeps outputs deterministic.
    """

    plus_facets: np.ndarray    # facet indices with a·n̂ >= 0
    minus_facets: np.ndarray   # facet indices with a·n̂ < 0
    weights: np.ndarray        # |a·n̂| dσ per facet (all facets)
    a_dot_n: np.ndarray

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))


def sigma_decompose(grid: Grid, a: VectorFieldSpec) -> SigmaDecomposition:
    """Partition the boundary by the sign of a·n̂, with weights |a·n̂|dσ."""
    a_dot_n = a.normal_component_at_facets(grid)
    plus = np.flatnonzero(a_dot_n >= 0.0)
    minus = np.flatnonzero(a_dot_n < 0.0)
    weights = np.abs(a_dot_n) * grid.facet_dsigma
    return SigmaDecomposition(
        plus_facets=plus, minus_facets=minus, weights=weights, a_dot_n=a_dot_n
    )
