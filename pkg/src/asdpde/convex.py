"""Convex calculus: pointwise potentials and field-level functionals.

Pointwise potentials are sums of power, quadratic and linear pieces,

    g(u) = sum_j (alpha_j / p_j) |u|^{p_j} + (beta/2) u^2 + f u,

with alpha_j > 0, p_j > 1, beta >= 0, so g is convex and (given a power
or quadratic piece) superlinear.  Coefficients may be scalars or per-node
arrays; every operation is vectorized over numpy arrays.

Field functionals are quadrature sums of pointwise potentials plus an
optional discrete gradient p-norm term, an optional strong-convexity
quadratic, an optional linear term and an optional argument offset:

    phi(u) = sum_i w_i g_i(u_i + s_i) + gradient term at (u + s)
             + (eps/2) ||u||_w^2 + <c, u>_w.

All inner products are weighted: <u, v>_w = sum_i w_i u_i v_i, so
conjugates of pointwise functionals reduce to nodewise conjugates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "PointwisePotential",
    "GradientTerm",
    "FieldFunctional",
    "ConjugateSolveError",
    "potential_eval",
    "potential_grad",
    "potential_conjugate",
    "potential_conjugate_grad",
    "potential_prox",
    "functional_eval",
    "functional_grad",
    "functional_conjugate",
    "moreau_envelope",
    "fenchel_gap",
    "lipschitz_subgrad_check",
]

_ROOT_TOL = 1e-12
_ROOT_MAX_ITER = 200


class ConjugateSolveError(RuntimeError):
    """Inner conjugate/prox solve did not reach tolerance."""

    def __init__(self, message: str, achieved: float) -> None:
        super().__init__(f"{message} (achieved residual {achieved:.3e})")
        self.achieved = achieved


# --- pointwise potentials --------------------------------------------------


@dataclass(frozen=True)
class PointwisePotential:
    """g(u) = sum_j (alpha_j/p_j)|u|^{p_j} + (beta/2)u^2 + f u."""

    powers: tuple[tuple[object, float], ...] = ()   # (alpha, p) pairs
    beta: object = 0.0
    lin: object = 0.0

    # -- constructors

    @classmethod
    def power(cls, alpha, p) -> "PointwisePotential":
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha <= 0):
            raise ValueError("power coefficient alpha must be > 0")
        if not p > 1:
            raise ValueError("power exponent p must be > 1")
        if p == 2.0:
            return cls(beta=+alpha)
        return cls(powers=((alpha, float(p)),))

    @classmethod
    def quadratic(cls, beta) -> "PointwisePotential":
        beta = np.asarray(beta, dtype=float)
        if np.any(beta < 0):
            raise ValueError("quadratic coefficient beta must be >= 0")
        return cls(beta=beta)

    @classmethod
    def linear(cls, f) -> "PointwisePotential":
        return cls(lin=np.asarray(f, dtype=float))

    @classmethod
    def zero(cls) -> "PointwisePotential":
        return cls()

    def __add__(self, other: "PointwisePotential") -> "PointwisePotential":
        powers = {}
        for alpha, p in self.powers + other.powers:
            if p in powers:
                powers[p] = powers[p] + alpha
            else:
                powers[p] = alpha
        return PointwisePotential(
            powers=tuple((a, p) for p, a in sorted(powers.items())),
            beta=np.asarray(self.beta) + np.asarray(other.beta),
            lin=np.asarray(self.lin) + np.asarray(other.lin),
        )

    @property
    def is_superlinear(self) -> bool:
        return bool(self.powers) or bool(np.all(np.asarray(self.beta) > 0))

    @property
    def is_quadratic(self) -> bool:
        return not self.powers

    # -- primal calculus

    def value(self, u):
        u = np.asarray(u, dtype=float)
        out = 0.5 * np.asarray(self.beta) * u * u + np.asarray(self.lin) * u
        for alpha, p in self.powers:
            out = out + (np.asarray(alpha) / p) * np.abs(u) ** p
        return out

    def deriv(self, u):
        u = np.asarray(u, dtype=float)
        out = np.asarray(self.beta) * u + np.asarray(self.lin) * np.ones_like(u)
        for alpha, p in self.powers:
            out = out + np.asarray(alpha) * np.sign(u) * np.abs(u) ** (p - 1.0)
        return out

    def deriv2(self, u):
        """Second derivative; may be +inf for p < 2 at u = 0."""
        u = np.asarray(u, dtype=float)
        out = np.asarray(self.beta) * np.ones_like(u)
        for alpha, p in self.powers:
            with np.errstate(divide="ignore"):
                out = out + np.asarray(alpha) * (p - 1.0) * np.abs(u) ** (p - 2.0)
        return out

    # -- dual calculus

    def _invert_deriv(self, r, extra_beta=0.0):
        """Solve  sum_j alpha_j |u|^{p_j - 2} u + (beta + extra_beta) u = r.

        The left side is strictly increasing and odd; solved by bracketed
        Newton with bisection safeguard, vectorized over r.
        """
        r = np.asarray(r, dtype=float)
        beta = np.asarray(self.beta, dtype=float) + extra_beta

        if not self.powers:
            if np.any(beta <= 0):
                raise ValueError("potential is not superlinear: conjugate undefined")
            return r / beta

        if len(self.powers) == 1 and np.all(beta == 0.0):
            alpha, p = self.powers[0]
            alpha = np.asarray(alpha, dtype=float)
            return np.sign(r) * (np.abs(r) / alpha) ** (1.0 / (p - 1.0))

        def m(u):
            out = beta * u
            for alpha, p in self.powers:
                out = out + np.asarray(alpha) * np.sign(u) * np.abs(u) ** (p - 1.0)
            return out

        def mp(u):
            out = beta * np.ones_like(u)
            for alpha, p in self.powers:
                with np.errstate(divide="ignore"):
                    out = out + np.asarray(alpha) * (p - 1.0) * np.abs(u) ** (p - 2.0)
            return out

        # bracket: each piece alone reaches |r| at its own inverse
        absr = np.abs(r)
        hi = np.zeros_like(absr)
        for alpha, p in self.powers:
            alpha = np.asarray(alpha, dtype=float)
            hi = np.maximum(hi, (absr / alpha) ** (1.0 / (p - 1.0)))
        with np.errstate(divide="ignore", invalid="ignore"):
            hi = np.maximum(hi, np.where(beta > 0, absr / np.where(beta > 0, beta, 1.0), 0.0))
        lo = np.zeros_like(absr)
        u = 0.5 * hi
        scale = np.maximum(1.0, absr)
        for _ in range(_ROOT_MAX_ITER):
            f = m(u) - absr
            if np.all(np.abs(f) <= _ROOT_TOL * scale):
                break
            hi = np.where(f > 0, u, hi)
            lo = np.where(f <= 0, u, lo)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = f / mp(u)
            newton = u - np.where(np.isfinite(step), step, 0.0)
            mid = 0.5 * (lo + hi)
            inside = (newton > lo) & (newton < hi) & (newton != u)
            u = np.where(inside, newton, mid)
        else:
            worst = float(np.max(np.abs(m(u) - absr)))
            raise ConjugateSolveError(
                f"derivative inversion stalled (bracket [{float(np.min(lo))}, "
                f"{float(np.max(hi))}])",
                worst,
            )
        return np.sign(r) * u

    def conjugate_grad(self, y):
        """argmax_u { u y - g(u) }, i.e. (g')^{-1}(y)."""
        if not self.is_superlinear:
            raise ValueError("potential is not superlinear: conjugate undefined")
        y = np.asarray(y, dtype=float)
        return self._invert_deriv(y - np.asarray(self.lin))

    def conjugate(self, y):
        """g*(y) = sup_u { u y - g(u) }."""
        u = self.conjugate_grad(y)
        return np.asarray(y) * u - self.value(u)

    def prox(self, lam, z):
        """argmin_u { g(u) + (u - z)^2 / (2 lam) }."""
        if not lam > 0:
            raise ValueError("prox parameter lam must be > 0")
        z = np.asarray(z, dtype=float)
        r = z / lam - np.asarray(self.lin)
        return self._invert_deriv(r, extra_beta=1.0 / lam)


def potential_eval(g: PointwisePotential, u):
    return g.value(u)


def potential_grad(g: PointwisePotential, u):
    return g.deriv(u)


def potential_conjugate(g: PointwisePotential, y):
    return g.conjugate(y)


def potential_conjugate_grad(g: PointwisePotential, y):
    return g.conjugate_grad(y)


def potential_prox(g: PointwisePotential, lam, z):
    return g.prox(lam, z)


# --- gradient term ---------------------------------------------------------


def _axis_difference_matrices(grid):
    """Forward cell-difference matrices per axis with cell weights."""
    mats, weights = [], []
    if grid.dim == 1:
        n = grid.counts[0]
        h = grid.spacings[0]
        D = sp.diags([-1.0, 1.0], [0, 1], shape=(n - 1, n), format="csr") / h
        mats.append(D)
        weights.append(np.full(n - 1, h))
    else:
        nx, ny = grid.counts
        hx, hy = grid.spacings
        wx, wy = grid.axis_weights
        Dx1 = sp.diags([-1.0, 1.0], [0, 1], shape=(nx - 1, nx), format="csr") / hx
        Dy1 = sp.diags([-1.0, 1.0], [0, 1], shape=(ny - 1, ny), format="csr") / hy
        Ix = sp.identity(nx, format="csr")
        Iy = sp.identity(ny, format="csr")
        mats.append(sp.kron(Dx1, Iy, format="csr"))
        weights.append(np.outer(np.full(nx - 1, hx), wy).ravel())
        mats.append(sp.kron(Ix, Dy1, format="csr"))
        weights.append(np.outer(wx, np.full(ny - 1, hy)).ravel())
    return tuple(mats), tuple(weights)


@dataclass
class GradientTerm:
    """(1/p) sum_axes sum_cells w_cell |G_k u|^p on forward-difference cells."""

    p: float
    matrices: tuple
    cell_weights: tuple

    @classmethod
    def for_grid(cls, grid, p: float) -> "GradientTerm":
        if not p > 1:
            raise ValueError("gradient exponent p must be > 1")
        mats, weights = _axis_difference_matrices(grid)
        return cls(p=float(p), matrices=mats, cell_weights=weights)

    def value(self, u) -> float:
        total = 0.0
        for G, wc in zip(self.matrices, self.cell_weights):
            g = G @ u
            total += float(np.sum(wc * np.abs(g) ** self.p)) / self.p
        return total

    def grad_plain(self, u):
        out = np.zeros_like(np.asarray(u, dtype=float))
        for G, wc in zip(self.matrices, self.cell_weights):
            g = G @ u
            out += G.T @ (wc * np.sign(g) * np.abs(g) ** (self.p - 1.0))
        return out

    def quadratic_matrix(self):
        """Plain-form Hessian sum_k G_k^T diag(w_cell) G_k (p = 2 only)."""
        if self.p != 2.0:
            raise ValueError("quadratic matrix only available for p = 2")
        H = None
        for G, wc in zip(self.matrices, self.cell_weights):
            M = G.T @ sp.diags(wc) @ G
            H = M if H is None else H + M
        return H.tocsc()


# --- field functionals -----------------------------------------------------


@dataclass
class FieldFunctional:
    """phi(u) = sum w g(u+s) + grad term(u+s) + (eps/2)||u||_w^2 + <c,u>_w."""

    weights: np.ndarray
    potential: PointwisePotential
    grad_term: GradientTerm | None = None
    eps: float = 0.0
    offset: np.ndarray | None = None
    linear: np.ndarray | None = None
    dirichlet_mask: np.ndarray | None = None
    grid: object = None
    _warm: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def on_grid(cls, grid, potential, **kwargs) -> "FieldFunctional":
        return cls(weights=grid.weights, potential=potential, grid=grid, **kwargs)

    @classmethod
    def half_sq_norm(cls, weights) -> "FieldFunctional":
        """phi = (1/2)||u||_w^2."""
        return cls(
            weights=np.asarray(weights, dtype=float),
            potential=PointwisePotential.quadratic(1.0),
        )

    # -- helpers

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def _shifted(self, u):
        return u if self.offset is None else u + self.offset

    def _free(self) -> np.ndarray:
        if self.dirichlet_mask is None:
            return np.ones(self.n, dtype=bool)
        return ~self.dirichlet_mask

    def inner(self, u, v) -> float:
        return float(np.sum(self.weights * u * v))

    def norm_sq(self, u) -> float:
        return self.inner(u, u)

    @property
    def is_quadratic(self) -> bool:
        pointwise_ok = self.potential.is_quadratic
        grad_ok = self.grad_term is None or self.grad_term.p == 2.0
        return pointwise_ok and grad_ok

    # -- evaluation

    def value(self, u) -> float:
        u = np.asarray(u, dtype=float)
        t = self._shifted(u)
        total = float(np.sum(self.weights * self.potential.value(t)))
        if self.grad_term is not None:
            total += self.grad_term.value(t)
        if self.eps:
            total += 0.5 * self.eps * self.norm_sq(u)
        if self.linear is not None:
            total += self.inner(self.linear, u)
        return total

    def grad_w(self, u) -> np.ndarray:
        """Gradient with respect to the weighted inner product."""
        u = np.asarray(u, dtype=float)
        t = self._shifted(u)
        g = self.potential.deriv(t) * np.ones_like(u)
        if self.grad_term is not None:
            g = g + self.grad_term.grad_plain(t) / self.weights
        if self.eps:
            g = g + self.eps * u
        if self.linear is not None:
            g = g + self.linear
        if self.dirichlet_mask is not None:
            g = np.where(self.dirichlet_mask, 0.0, g)
        return g

    def grad_plain(self, u) -> np.ndarray:
        return self.weights * self.grad_w(u)

    def pointwise_hess_diag(self, u) -> np.ndarray:
        """Diagonal w-form Hessian of the pointwise + eps parts."""
        t = self._shifted(np.asarray(u, dtype=float))
        return self.potential.deriv2(t) * np.ones_like(t) + self.eps

    # -- conjugate / prox / Moreau

    def _conjugate_pointwise_arg(self, v):
        """Maximizer of <v,u>_w - phi(u) for pointwise functionals."""
        v = np.asarray(v, dtype=float)
        r = v.copy()
        if self.linear is not None:
            r = r - self.linear
        if self.offset is not None:
            r = r + self.eps * self.offset
        t = self.potential._invert_deriv(
            r - np.asarray(self.potential.lin), extra_beta=self.eps
        )
        u = t if self.offset is None else t - self.offset
        if self.dirichlet_mask is not None:
            u = np.where(self.dirichlet_mask, 0.0, u)
        return u

    def _quadratic_plain_hessian(self):
        """Plain-form Hessian W diag(beta + eps) + gradient-term matrix."""
        beta = np.asarray(self.potential.beta) + self.eps
        H = sp.diags(self.weights * (beta * np.ones(self.n))).tocsc()
        if self.grad_term is not None:
            H = H + self.grad_term.quadratic_matrix()
        return H

    def _quadratic_solve(self, plain_rhs):
        """Solve plain-Hessian system on free dofs, cached factorization."""
        key = ("quad_factor", float(self.eps))
        free = self._free()
        if key not in self._warm:
            H = self._quadratic_plain_hessian()
            if self.dirichlet_mask is not None:
                H = H[free][:, free].tocsc()
            self._warm[key] = spla.factorized(H)
        out = np.zeros(self.n)
        out[free] = self._warm[key](plain_rhs[free])
        return out

    def _inner_minimize(self, objective_grad, x0, tol, what):
        """Minimize a smooth strongly convex inner objective via L-BFGS."""
        res = scipy.optimize.minimize(
            objective_grad,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 2000, "ftol": 1e-18, "gtol": 1e-14},
        )
        gnorm = float(np.linalg.norm(res.jac))
        if gnorm > tol:
            raise ConjugateSolveError(f"inner {what} solve did not converge", gnorm)
        return res.x

    def conjugate(self, v):
        """phi*(v) = sup_u { <v,u>_w - phi(u) }; returns (value, argmax)."""
        v = np.asarray(v, dtype=float)
        if self.grad_term is None:
            u = self._conjugate_pointwise_arg(v)
        elif self.is_quadratic:
            rhs = self.weights * v - self.grad_plain(np.zeros(self.n))
            u = self._quadratic_solve(rhs)
        else:
            def h(u):
                return (
                    self.value(u) - self.inner(v, u),
                    self.grad_plain(u) - self.weights * v * self._free(),
                )

            x0 = self._warm.get("conjugate", np.zeros(self.n))
            u = self._inner_minimize(h, x0, 1e-9, "conjugate")
            self._warm["conjugate"] = u
        return self.inner(v, u) - self.value(u), u

    def conjugate_value(self, v) -> float:
        return self.conjugate(v)[0]

    def conjugate_arg(self, v) -> np.ndarray:
        return self.conjugate(v)[1]

    def prox(self, lam, x) -> np.ndarray:
        """argmin_z { phi(z) + ||x - z||_w^2 / (2 lam) }."""
        if not lam > 0:
            raise ValueError("lam must be > 0")
        x = np.asarray(x, dtype=float)
        shifted = replace(
            self,
            eps=self.eps + 1.0 / lam,
            linear=(x / -lam if self.linear is None else self.linear - x / lam),
            _warm=self._warm,
        )
        if self.grad_term is None or self.is_quadratic:
            # minimizer solves grad_w(shifted) = 0, i.e. conjugate arg at 0
            return shifted.conjugate_arg(np.zeros(self.n)) if self.grad_term is None \
                else shifted._quadratic_solve(-shifted.grad_plain(np.zeros(self.n)))
        def h(z):
            return shifted.value(z), shifted.grad_plain(z)

        x0 = self._warm.get("prox", x.copy())
        z = self._inner_minimize(h, x0, 1e-10, "prox")
        self._warm["prox"] = z
        return z

    def moreau(self, lam, x):
        """Moreau envelope; returns (value, prox_point)."""
        x = np.asarray(x, dtype=float)
        z = self.prox(lam, x)
        val = self.value(z) + self.norm_sq(x - z) / (2.0 * lam)
        return val, z


    # -- block (batched) evaluation for pointwise functionals
    #
    # These evaluate over arrays whose last axis runs over nodes, with
    # arbitrary leading axes, and are used by the brute-force duality
    # verifier.  Only available when no gradient term is present.

    def _require_pointwise(self) -> None:
        if self.grad_term is not None:
            raise ValueError("block evaluation requires a pointwise functional")

    def value_block(self, U) -> np.ndarray:
        self._require_pointwise()
        U = np.asarray(U, dtype=float)
        T = self._shifted(U)
        vals = self.potential.value(T)
        if self.eps:
            vals = vals + 0.5 * self.eps * U * U
        if self.linear is not None:
            vals = vals + self.linear * U
        return np.sum(self.weights * vals, axis=-1)

    def conjugate_block(self, V):
        """phi*(V) over the last axis; returns (values, argmax block)."""
        self._require_pointwise()
        V = np.asarray(V, dtype=float)
        r = V.copy()
        if self.linear is not None:
            r = r - self.linear
        if self.offset is not None:
            r = r + self.eps * self.offset
        t = self.potential._invert_deriv(
            r - np.asarray(self.potential.lin), extra_beta=self.eps
        )
        U = t if self.offset is None else t - self.offset
        if self.dirichlet_mask is not None:
            U = np.where(self.dirichlet_mask, 0.0, U)
        vals = np.sum(self.weights * V * U, axis=-1) - self.value_block(U)
        return vals, U

    def moreau_block(self, lam, X):
        """Moreau envelope over the last axis; returns (values, prox block)."""
        self._require_pointwise()
        X = np.asarray(X, dtype=float)
        shifted = replace(
            self,
            eps=self.eps + 1.0 / lam,
            linear=(-X / lam if self.linear is None else self.linear - X / lam),
            _warm={},
        )
        Z = shifted.conjugate_block(np.zeros_like(X))[1]
        vals = self.value_block(Z) + np.sum(
            self.weights * (X - Z) ** 2, axis=-1
        ) / (2.0 * lam)
        return vals, Z


def functional_eval(phi: FieldFunctional, u) -> float:
    return phi.value(u)


def functional_grad(phi: FieldFunctional, u) -> np.ndarray:
    return phi.grad_w(u)


def functional_conjugate(phi: FieldFunctional, v):
    return phi.conjugate(v)


def moreau_envelope(phi: FieldFunctional, lam, x):
    return phi.moreau(lam, x)


def fenchel_gap(phi: FieldFunctional, u, v) -> float:
    """phi(u) + phi*(v) - <u,v>_w >= 0, zero iff v in the subdifferential."""
    return phi.value(u) + phi.conjugate_value(v) - phi.inner(u, v)


def lipschitz_subgrad_check(phi: FieldFunctional, eps: float, samples,
                            rng=None) -> float:
    """Max of eps ||grad phi(x1) - grad phi(x2)||_w / ||x1 - x2||_w.

    For phi whose conjugate is eps-strongly convex the subgradient map is
    Lipschitz with modulus 1/eps, so the returned ratio is <= 1 (+ tol).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n = phi.n
    worst = 0.0
    for _ in range(int(samples)):
        x1 = rng.standard_normal(n)
        x2 = rng.standard_normal(n)
        num = np.sqrt(phi.norm_sq(phi.grad_w(x1) - phi.grad_w(x2)))
        den = np.sqrt(phi.norm_sq(x1 - x2))
        if den > 0:
            worst = max(worst, eps * num / den)
    return worst
