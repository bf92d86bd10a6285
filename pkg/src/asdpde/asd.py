"""Anti-selfdual Lagrangian algebra.

A Lagrangian here is a convex function L(x, p) of a primal field x and a
dual field p over the same weighted dof space.  The central property is
anti-selfduality: L*(p, x) = L(-x, -p), where the conjugate is taken in
the weighted pairing.  Every constructor in this module preserves it:

* ``make_basic(phi)``          L(x,p) = phi(x) + phi*(-p)
* ``compose_skew_boundary``    M(x,p) = L0(x, Ax + p) + ½‖b1x‖² + ½‖b2x‖²
* ``compose_antisym(phi, A)``  M(x,p) = phi(x) + phi*(Ax - p)
* ``regularize(L0, lam)``      Moreau smoothing in x plus (lam/2)‖p‖²

``asd_verify`` checks the identity by brute-force conjugation over a
sampled box; it is the oracle the algebra is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import FieldFunctional

__all__ = [
    "BasicLagrangian",
    "ComposedBoundaryLagrangian",
    "ComposedAntisymLagrangian",
    "RegularizedLagrangian",
    "make_basic",
    "make_broken_sign",
    "compose_skew_boundary",
    "compose_antisym",
    "regularize",
    "resolvent_J",
    "asd_verify",
    "default_probes",
]


@dataclass
class BasicLagrangian:
    """L(x, p) = phi(x) + phi*(dual_sign * p); anti-selfdual for sign −1.

    ``dual_sign=+1`` deliberately breaks the identity and serves as the
    negative control in verification.
    """

    phi: FieldFunctional
    dual_sign: float = -1.0

    @property
    def weights(self) -> np.ndarray:
        return self.phi.weights

    def value(self, x, p) -> float:
        return self.phi.value(x) + self.phi.conjugate_value(self.dual_sign * p)

    def d1(self, x, p) -> np.ndarray:
        return self.phi.grad_w(x)

    def d2(self, x, p) -> np.ndarray:
        return self.dual_sign * self.phi.conjugate_arg(self.dual_sign * p)

    def pair_values(self, X, P) -> np.ndarray:
        """Matrix L(X[j], P[k]) for row-stacked sample fields."""
        fx = self.phi.value_block(X)
        fp = self.phi.conjugate_block(self.dual_sign * P)[0]
        return fx[:, None] + fp[None, :]


@dataclass
class ComposedAntisymLagrangian:
    """M(x, p) = phi(x) + phi*(A x − p) for skew A (w-pairing)."""

    phi: FieldFunctional
    A: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return self.phi.weights

    def value(self, x, p) -> float:
        return self.phi.value(x) + self.phi.conjugate_value(self.A @ x - p)

    def d1(self, x, p) -> np.ndarray:
        w = self.weights
        z = self.phi.conjugate_arg(self.A @ x - p)
        Aw_z = (self.A.T @ (w * z)) / w
        return self.phi.grad_w(x) + Aw_z

    def d2(self, x, p) -> np.ndarray:
        return -self.phi.conjugate_arg(self.A @ x - p)

    def pair_values(self, X, P) -> np.ndarray:
        fx = self.phi.value_block(X)
        AX = np.asarray(X) @ np.asarray(self.A).T
        V = AX[:, None, :] - np.asarray(P)[None, :, :]
        return fx[:, None] + self.phi.conjugate_block(V)[0]


@dataclass
class ComposedBoundaryLagrangian:
    """M(x, p) = L0(x, A x + p) + ½‖b1 x‖² + ½‖b2 x‖²."""

    base: BasicLagrangian
    op: object  # SkewOperator

    @property
    def weights(self) -> np.ndarray:
        return self.base.weights

    def _trace_sq(self, x) -> float:
        return 0.5 * (
            self.op.trace_norm_sq_plus(x) + self.op.trace_norm_sq_minus(x)
        )

    def value(self, x, p) -> float:
        return self.base.value(x, self.op.apply(x) + p) + self._trace_sq(x)

    def d1(self, x, p) -> np.ndarray:
        q = self.op.apply(x) + p
        z = self.base.d2(x, q)         # ∂/∂q of L0(x, q)
        return (
            self.base.d1(x, q)
            + self.op.apply_adjoint_w(z)
            + self.op.trace_grad_w(x)
        )

    def d2(self, x, p) -> np.ndarray:
        return self.base.d2(x, self.op.apply(x) + p)

    def pair_values(self, X, P) -> np.ndarray:
        phi = self.base.phi
        fx = phi.value_block(X)
        X = np.asarray(X)
        traces = np.array([self._trace_sq(x) for x in X])
        AX = X @ self.op.mat.T.toarray()
        V = self.base.dual_sign * (AX[:, None, :] + np.asarray(P)[None, :, :])
        return (fx + traces)[:, None] + phi.conjugate_block(V)[0]


@dataclass
class RegularizedLagrangian:
    """L_lam(x,p) = Moreau_lam(phi)(x) + phi*(-p) + (lam/2)‖p‖²_w."""

    phi: FieldFunctional
    lam: float

    @property
    def weights(self) -> np.ndarray:
        return self.phi.weights

    def value(self, x, p) -> float:
        env, _ = self.phi.moreau(self.lam, x)
        return (
            env
            + self.phi.conjugate_value(-np.asarray(p))
            + 0.5 * self.lam * self.phi.norm_sq(p)
        )

    def d1(self, x, p) -> np.ndarray:
        prox = self.phi.prox(self.lam, x)
        return (np.asarray(x) - prox) / self.lam

    def d2(self, x, p) -> np.ndarray:
        p = np.asarray(p)
        return -self.phi.conjugate_arg(-p) + self.lam * p

    def resolvent(self, x, p=None) -> np.ndarray:
        return self.phi.prox(self.lam, x)

    def pair_values(self, X, P) -> np.ndarray:
        fx = self.phi.moreau_block(self.lam, X)[0]
        P = np.asarray(P)
        fp = self.phi.conjugate_block(-P)[0] + 0.5 * self.lam * np.sum(
            self.weights * P * P, axis=-1
        )
        return fx[:, None] + fp[None, :]


# --- constructors ----------------------------------------------------------


def make_basic(phi: FieldFunctional) -> BasicLagrangian:
    return BasicLagrangian(phi=phi)


def make_broken_sign(phi: FieldFunctional) -> BasicLagrangian:
    """Negative control: phi(x) + phi*(+p) is *not* anti-selfdual."""
    return BasicLagrangian(phi=phi, dual_sign=+1.0)


def compose_skew_boundary(L0: BasicLagrangian, op) -> ComposedBoundaryLagrangian:
    if not isinstance(L0, BasicLagrangian):
        raise TypeError("boundary composition requires a basic Lagrangian")
    return ComposedBoundaryLagrangian(base=L0, op=op)


def compose_antisym(phi: FieldFunctional, A) -> ComposedAntisymLagrangian:
    return ComposedAntisymLagrangian(phi=phi, A=np.asarray(A, dtype=float))


def regularize(L0, lam: float) -> RegularizedLagrangian:
    """Moreau regularization; requires a basic-type kernel."""
    if not lam > 0:
        raise ValueError("lam must be > 0")
    if isinstance(L0, BasicLagrangian):
        if L0.dual_sign != -1.0:
            raise ValueError("cannot regularize a broken-sign Lagrangian")
        phi = L0.phi
    elif isinstance(L0, ComposedAntisymLagrangian):
        if np.any(L0.A != 0.0):
            raise ValueError(
                "regularization of composed Lagrangians with A != 0 "
                "is not supported"
            )
        phi = L0.phi
    else:
        raise TypeError("regularize expects Basic or ComposedAntisym (A=0)")
    return RegularizedLagrangian(phi=phi, lam=float(lam))


def resolvent_J(L0, lam: float, x, p=None) -> np.ndarray:
    """J_lam(x,p) = argmin_z { L0(z,p) + ‖x−z‖²_w/(2 lam) } = prox_{lam phi}(x)."""
    return regularize(L0, lam).resolvent(x, p)


# --- brute-force verification ---------------------------------------------


def default_probes(n_dofs: int, radius: float, count: int = 8, seed: int = 42):
    """Deterministic probe pairs (p_star, x) well inside the sample box.

    Probes are kept within radius/4 so that the maximizers of the
    conjugate stay inside the sampled box for composed instances.
    """
    rng = np.random.default_rng(seed)
    half = radius / 4.0
    return [
        (
            rng.uniform(-half, half, size=n_dofs),
            rng.uniform(-half, half, size=n_dofs),
        )
        for _ in range(count)
    ]


def asd_verify(L, box_radius: float, samples_per_axis: int, n_dofs: int,
               probes=None, chunk: int = 512) -> float:
    """Max |L*(p,x) − L(−x,−p)| over probe points, by brute force.

    The conjugate L*(p,x) = sup {<p,x'>_w + <x,p'>_w − L(x',p')} is
    approximated by exhaustive maximization over a uniform box with
    ``samples_per_axis`` points per dof and axis; the residual decreases
    as sampling is refined.  Cost is samples^(2·n_dofs).
    """
    if n_dofs > 3:
        raise ValueError("brute-force verification is limited to <= 3 dofs")
    if L.weights.shape[0] != n_dofs:
        raise ValueError("Lagrangian dof count does not match n_dofs")
    if probes is None:
        probes = default_probes(n_dofs, box_radius)

    axis = np.linspace(-box_radius, box_radius, samples_per_axis)
    grids = np.meshgrid(*([axis] * n_dofs), indexing="ij")
    X = np.column_stack([g.ravel() for g in grids])
    P = X.copy()
    w = L.weights

    cx = np.array([X @ (w * ps) for ps, _ in probes])   # (n_probes, m)
    cp = np.array([P @ (w * xs) for _, xs in probes])
    best = np.full(len(probes), -np.inf)
    for start in range(0, X.shape[0], chunk):
        sl = slice(start, start + chunk)
        M = L.pair_values(X[sl], P)                     # (c, m)
        for i in range(len(probes)):
            cand = cx[i][sl][:, None] + cp[i][None, :] - M
            best[i] = max(best[i], float(np.max(cand)))

    residuals = [
        abs(best[i] - L.value(-xs, -ps))
        for i, (ps, xs) in enumerate(probes)
    ]
    return float(max(residuals))
