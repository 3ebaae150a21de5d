"""Constraint geometry and the constrained dynamical field.

A distribution D in TQ is the kernel of k independent constraint one-forms,
stacked as the rows of A(q). For kinetic-plus-potential Hamiltonians the
momentum image of D is the surface c(q, p) = A(q) G(q)^{-1} p = 0, and the
admissible subspace at a point of that surface collects tangent vectors
whose base part stays in D and which are tangent to the surface. The
constrained field is computed two independent ways (restricted solve and
Lagrange multipliers) so each can serve as the other's oracle.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    CompatibilityError,
    DegenerateConstraintError,
    DegenerateFormError,
    NumericalDomainError,
    OffConstraintError,
    SectionImageError,
)
from .geometry import PhasePoint, TangentPhaseVector, ensure_config, fd_jacobian
from .dynamics import magnetic_vector_field
from .linalg import max_abs, null_space, rank_of

RANK_RCOND = 1e-10


class ConstraintDistribution:
    """k constraint one-forms on R^n, with optional analytic row Jacobians.

    ``rows_fn(q)`` returns the (k, n) coefficient matrix A(q);
    ``rows_grad_fn(q)`` returns the stacked (n, k, n) partials, indexed by
    the differentiation direction first.
    """

    def __init__(self, n, k, rows_fn, rows_grad_fn=None, step=1e-6):
        self.n = n
        self.k = k
        self._rows_fn = rows_fn
        self._rows_grad_fn = rows_grad_fn
        self._step = step
        if k >= n and k > 0:
            raise DegenerateConstraintError("need k < n independent constraints")

    @classmethod
    def unconstrained(cls, n):
        return cls(n, 0, lambda q: np.zeros((0, n)))

    @classmethod
    def constant(cls, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        k, n = rows.shape
        return cls(n, k, lambda q: rows, lambda q: np.zeros((n, k, n)))

    def matrix(self, q):
        rows = np.asarray(self._rows_fn(np.asarray(q, dtype=float)), dtype=float)
        rows = rows.reshape(self.k, self.n)
        if not np.all(np.isfinite(rows)):
            raise NumericalDomainError("constraint rows are non-finite")
        if self.k > 0:
            s = np.linalg.svd(rows, compute_uv=False)
            if s[-1] <= RANK_RCOND * s[0]:
                raise DegenerateConstraintError(
                    f"constraint rows rank deficient at q={np.asarray(q)}")
        return rows

    def rows_gradient(self, q):
        """Stacked partials dA/dq_c with shape (n, k, n)."""
        q = np.asarray(q, dtype=float)
        if self._rows_grad_fn is not None:
            return np.asarray(self._rows_grad_fn(q), dtype=float)
        flat = fd_jacobian(lambda x: self._rows_fn(x).reshape(-1), q, self._step)
        return flat.T.reshape(self.n, self.k, self.n)

    def basis(self, q):
        """Orthonormal columns spanning D_q = ker A(q)."""
        if self.k == 0:
            return np.eye(self.n)
        return null_space(self.matrix(q))


def constraint_residual(dist, ham, z):
    """c(q, p) = A(q) G(q)^{-1} p; zero on the constraint surface."""
    if dist.k == 0:
        return np.zeros(0)
    if not ham.is_quadratic:
        raise NumericalDomainError(
            "constraint surface needs a kinetic-plus-potential Hamiltonian")
    return dist.matrix(z.q) @ ham.velocity(z.q, z.p)


def constraint_jacobian(dist, ham, z):
    """Full derivative of c at z, shape (k, 2n): [dc/dq | A G^{-1}]."""
    rows = dist.matrix(z.q)
    inverse = ham.mass_inverse(z.q)
    velocity = inverse @ z.p
    jac = np.zeros((dist.k, 2 * dist.n))
    jac[:, dist.n:] = rows @ inverse
    grads = dist.rows_gradient(z.q)
    for c in range(dist.n):
        jac[:, c] = grads[c] @ velocity
    if ham._mass_fn is not None:
        if ham._mass_grad_fn is not None:
            mass_grads = np.asarray(ham._mass_grad_fn(z.q), dtype=float)
            for c in range(dist.n):
                d_inverse = -inverse @ mass_grads[c] @ inverse
                jac[:, c] += rows @ d_inverse @ z.p
        else:
            def c_of_q(qq):
                return dist.matrix(qq) @ np.linalg.solve(ham.mass_matrix(qq), z.p)

            jac[:, : dist.n] = fd_jacobian(c_of_q, z.q, dist._step)
    return jac


def project_to_constraint(dist, ham, z):
    """Minimal momentum change, in the G^{-1} metric, landing on c = 0."""
    if dist.k == 0:
        return z
    rows = dist.matrix(z.q)
    inverse = ham.mass_inverse(z.q)
    gram = rows @ inverse @ rows.T
    try:
        shift = rows.T @ np.linalg.solve(gram, rows @ inverse @ z.p)
    except np.linalg.LinAlgError:
        raise DegenerateConstraintError("projection Gram matrix is singular") from None
    return PhasePoint(z.q, z.p - shift)


def require_on_constraint(dist, ham, z, tol):
    residual = max_abs(constraint_residual(dist, ham, z))
    if residual > tol:
        raise OffConstraintError(
            f"constraint residual {residual:.3e} exceeds {tol:.1e}")
    return residual


def admissible_basis(dist, ham, z, tol=1e-8):
    """Orthonormal basis of the admissible subspace at a surface point.

    Stacks the base condition A(q) dq = 0 with tangency Dc(z) (dq, dp) = 0
    and takes the null space. With no constraints this is the identity on
    the full 2n-dimensional tangent space.
    """
    if dist.k == 0:
        return np.eye(2 * dist.n)
    require_on_constraint(dist, ham, z, tol)
    rows = dist.matrix(z.q)
    stacked = np.zeros((2 * dist.k, 2 * dist.n))
    stacked[: dist.k, : dist.n] = rows
    stacked[dist.k:] = constraint_jacobian(dist, ham, z)
    return null_space(stacked)


@dataclass
class CompatibilityReport:
    dim_f: int
    dim_tm: int
    dim_k: int
    sigma_min: float
    intersection_dim: int
    passed: bool

    def as_dict(self):
        return {
            "dim_f": self.dim_f,
            "dim_tm": self.dim_tm,
            "dim_k": self.dim_k,
            "sigma_min": self.sigma_min,
            "intersection_dim": self.intersection_dim,
            "passed": self.passed,
        }


def compatibility_report(dist, ham, mag, z, sigma_tol=1e-8):
    """Diagnose solvability of the constrained structure equation at z.

    Reports the dimensions of the velocity-admissible cone, the surface
    tangent, and their intersection, checks that the twisted-orthogonal of
    the first meets the second only at zero, and measures non-degeneracy of
    the restricted form through its smallest singular value.
    """
    n = dist.n
    omega = mag.form_matrix(z.q)
    if dist.k == 0:
        sigma = float(np.linalg.svd(omega, compute_uv=False)[-1])
        return CompatibilityReport(2 * n, 2 * n, 2 * n, sigma, 0,
                                   bool(sigma > sigma_tol))
    try:
        rows = dist.matrix(z.q)
    except DegenerateConstraintError:
        return CompatibilityReport(-1, -1, -1, 0.0, -1, False)
    base_condition = np.zeros((dist.k, 2 * n))
    base_condition[:, :n] = rows
    f_basis = null_space(base_condition)
    tm_basis = null_space(constraint_jacobian(dist, ham, z))
    f_perp = null_space(f_basis.T @ omega)
    intersection = tm_basis.shape[1] + f_perp.shape[1] - rank_of(
        np.hstack([tm_basis, f_perp]))
    k_basis = admissible_basis(dist, ham, z)
    restricted = k_basis.T @ omega @ k_basis
    if restricted.size:
        sigma = float(np.linalg.svd(restricted, compute_uv=False)[-1])
    else:
        sigma = 0.0
    passed = bool(sigma > sigma_tol and intersection == 0)
    return CompatibilityReport(f_basis.shape[1], tm_basis.shape[1],
                               k_basis.shape[1], sigma, int(intersection), passed)


@dataclass
class ConstrainedField:
    """The constrained dynamical vector plus solve by-products."""

    vector: TangentPhaseVector
    multipliers: np.ndarray = None
    basis: np.ndarray = None


def constrained_field_restricted(dist, ham, mag, z, basis=None):
    """Solve the structure equation restricted to the admissible subspace.

    Writes X = W xi over an orthonormal basis W and solves the m x m system
    omega(X, w_b) = dH(w_b). The answer is basis independent.
    """
    if basis is None:
        basis = admissible_basis(dist, ham, z)
    omega = mag.form_matrix(z.q)
    grad = ham.gradient(z)
    pairings = basis.T @ omega @ basis
    rhs = basis.T @ grad
    try:
        xi = np.linalg.solve(pairings.T, rhs)
    except np.linalg.LinAlgError:
        raise DegenerateFormError("restricted structure matrix is singular") from None
    x = basis @ xi
    return ConstrainedField(TangentPhaseVector.from_vec(x), basis=basis)


def constrained_field_multiplier(dist, ham, mag, z):
    """Lagrange-multiplier route: X = X_free + sum_a lambda_a Z_a.

    The correction directions Z_a are the vertical lifts (0, -A_a); the
    multipliers make X tangent to the constraint surface.
    """
    free = magnetic_vector_field(ham, mag, z)
    if dist.k == 0:
        return ConstrainedField(free, multipliers=np.zeros(0))
    jac_c = constraint_jacobian(dist, ham, z)
    rows = dist.matrix(z.q)
    lifts = np.zeros((2 * dist.n, dist.k))
    lifts[dist.n:, :] = -rows.T
    gram = jac_c @ lifts
    try:
        lam = np.linalg.solve(gram, -jac_c @ free.vec)
    except np.linalg.LinAlgError:
        raise CompatibilityError("multiplier matrix is singular") from None
    x = free.vec + lifts @ lam
    return ConstrainedField(TangentPhaseVector.from_vec(x), multipliers=lam)


def constrained_field(dist, ham, mag, z):
    """Default constrained field (multiplier route; cheapest per point)."""
    return constrained_field_multiplier(dist, ham, mag, z).vector


def field_tangency_residual(section, dist, ham, mag, qs, image_tol=1e-8):
    """Velocities of the free field along a surface-valued section stay in D.

    Raises SectionImageError when the section leaves the constraint surface,
    since the statement asserts nothing there.
    """
    worst = 0.0
    for q in qs:
        q = ensure_config(q, dist.n)
        z = PhasePoint(q, section.value(q))
        residual = max_abs(constraint_residual(dist, ham, z))
        if residual > image_tol:
            raise SectionImageError(
                f"section leaves the constraint surface at q={q} "
                f"(residual {residual:.3e})")
        x = magnetic_vector_field(ham, mag, z)
        worst = max(worst, max_abs(dist.matrix(q) @ x.dq))
    return worst
