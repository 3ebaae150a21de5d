"""Magnetic Hamiltonian dynamics on the flat cotangent bundle.

The bilinear evaluation matrix of the magnetic symplectic structure at
z = (q, p), acting on stacked (dq, dp) vectors, is

    Omega(q) = [[-B(q), I], [-I, 0]],

so that omega(u, v) = u^T Omega v = u_q . v_p - u_p . v_q - u_q^T B(q) v_q.
The dynamical field solves Omega^T X = grad H, which in components is
X = (H_p, -H_q + B H_p); the closed-form path below carries exactly that
convention and a unit test pins it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFormError, NumericalDomainError
from .geometry import (
    DEFAULT_FD_STEP,
    PhasePoint,
    TangentPhaseVector,
    TwoFormField,
    fd_gradient,
    fd_jacobian,
)

SOLVER_TOL = 1e-10


class HamiltonianSpec:
    """Hamiltonian data: either kinetic-plus-potential or a general function.

    The quadratic flavour stores a mass matrix G(q) and potential V(q) with
    H = p^T G(q)^{-1} p / 2 + V(q); analytic derivative callbacks are used
    when available, central differences otherwise. The general flavour wraps
    an arbitrary scalar on phase space.
    """

    def __init__(self, n, mass_fn=None, potential_fn=None, mass_grad_fn=None,
                 potential_grad_fn=None, general_fn=None, general_grad_fn=None,
                 step=1e-6):
        self.n = n
        self._mass_fn = mass_fn
        self._potential_fn = potential_fn
        self._mass_grad_fn = mass_grad_fn
        self._potential_grad_fn = potential_grad_fn
        self._general_fn = general_fn
        self._general_grad_fn = general_grad_fn
        self._step = step

    @classmethod
    def quadratic(cls, n, mass_fn=None, potential_fn=None, mass_grad_fn=None,
                  potential_grad_fn=None, step=1e-6):
        return cls(n, mass_fn=mass_fn, potential_fn=potential_fn,
                   mass_grad_fn=mass_grad_fn, potential_grad_fn=potential_grad_fn,
                   step=step)

    @classmethod
    def free(cls, n):
        """Kinetic-energy-only Hamiltonian with unit masses."""
        return cls(n)

    @classmethod
    def general(cls, n, value_fn, grad_fn=None, step=1e-6):
        return cls(n, general_fn=value_fn, general_grad_fn=grad_fn, step=step)

    @property
    def is_quadratic(self):
        return self._general_fn is None

    def mass_matrix(self, q):
        if self._mass_fn is None:
            return np.eye(self.n)
        return np.asarray(self._mass_fn(np.asarray(q, dtype=float)), dtype=float)

    def mass_inverse(self, q):
        mass = self.mass_matrix(q)
        try:
            np.linalg.cholesky(mass)
        except np.linalg.LinAlgError:
            raise NumericalDomainError("mass matrix is not positive definite") from None
        return np.linalg.inv(mass)

    def velocity(self, q, p):
        """Legendre velocity G(q)^{-1} p (quadratic Hamiltonians only)."""
        if self._mass_fn is None:
            return np.asarray(p, dtype=float)
        return np.linalg.solve(self.mass_matrix(q), np.asarray(p, dtype=float))

    def potential(self, q):
        if self._potential_fn is None:
            return 0.0
        return float(self._potential_fn(np.asarray(q, dtype=float)))

    def value(self, z):
        if self._general_fn is not None:
            return float(self._general_fn(z.q, z.p))
        kinetic = 0.5 * float(z.p @ self.velocity(z.q, z.p))
        value = kinetic + self.potential(z.q)
        if not np.isfinite(value):
            raise NumericalDomainError("Hamiltonian is non-finite at the point")
        return value

    def gradient(self, z):
        """Full phase-space gradient (dH/dq, dH/dp) as a 2n vector."""
        if self._general_fn is not None:
            if self._general_grad_fn is not None:
                grad = np.asarray(self._general_grad_fn(z.q, z.p), dtype=float)
            else:
                fn = self._general_fn
                grad = fd_gradient(
                    lambda v: fn(v[: self.n], v[self.n:]), z.vec, self._step)
        else:
            grad = np.empty(2 * self.n)
            grad[self.n:] = self.velocity(z.q, z.p)
            grad[: self.n] = self._grad_q(z.q, z.p)
        if not np.all(np.isfinite(grad)):
            raise NumericalDomainError("Hamiltonian gradient is non-finite")
        return grad

    def _grad_q(self, q, p):
        if self._potential_grad_fn is not None:
            potential_part = np.asarray(self._potential_grad_fn(q), dtype=float)
        elif self._potential_fn is not None:
            potential_part = fd_gradient(self._potential_fn, q, self._step)
        else:
            potential_part = np.zeros(self.n)
        if self._mass_fn is None:
            return potential_part
        inverse = self.mass_inverse(q)
        velocity = inverse @ p
        if self._mass_grad_fn is not None:
            stacked = np.asarray(self._mass_grad_fn(q), dtype=float)
            kinetic_part = np.array(
                [-0.5 * velocity @ stacked[k] @ velocity for k in range(self.n)])
        else:
            mass_fn = self._mass_fn

            def kinetic(qq):
                return 0.5 * p @ np.linalg.solve(np.asarray(mass_fn(qq), float), p)

            kinetic_part = fd_gradient(kinetic, q, self._step)
        return kinetic_part + potential_part


class MagneticStructure:
    """Point-wise assembly of the twisted symplectic evaluation matrix."""

    def __init__(self, b_field):
        self.b_field = b_field
        self.n = b_field.n

    @classmethod
    def canonical(cls, n):
        return cls(TwoFormField.zero(n))

    def b_matrix(self, q):
        return self.b_field.matrix(q)

    def form_matrix(self, q):
        n = self.n
        omega = np.zeros((2 * n, 2 * n))
        omega[:n, :n] = -self.b_matrix(q)
        omega[:n, n:] = np.eye(n)
        omega[n:, :n] = -np.eye(n)
        return omega

    def pairing(self, q, u, v):
        """omega(u, v) for stacked 2n tangent vectors at base point q."""
        return float(np.asarray(u) @ self.form_matrix(q) @ np.asarray(v))


def magnetic_vector_field(ham, mag, z):
    """Dynamical vector field by dense solve of the structure equation.

    This is the convention-free ground truth: the returned X satisfies
    omega(X, .) = dH(.) at z up to solver tolerance.
    """
    grad = ham.gradient(z)
    omega = mag.form_matrix(z.q)
    try:
        x = np.linalg.solve(omega.T, grad)
    except np.linalg.LinAlgError:
        raise DegenerateFormError("magnetic structure matrix is singular") from None
    residual = np.linalg.norm(omega.T @ x - grad)
    if not residual <= SOLVER_TOL * (1.0 + np.linalg.norm(grad)):
        raise DegenerateFormError(
            f"structure solve residual {residual:.3e} exceeds tolerance")
    return TangentPhaseVector.from_vec(x)


def coordinate_formula_field(ham, mag, z):
    """Closed-form field (H_p, -H_q + B H_p); cross-checks the dense solve."""
    grad = ham.gradient(z)
    n = ham.n
    hq, hp = grad[:n], grad[n:]
    return TangentPhaseVector(hp, -hq + mag.b_matrix(z.q) @ hp)


@dataclass
class PhaseMap:
    """A smooth map of the cotangent bundle with Jacobian access."""

    eval_fn: object
    jacobian_fn: object = None
    step: float = DEFAULT_FD_STEP

    def value(self, z):
        image = np.asarray(self.eval_fn(z.vec), dtype=float)
        if not np.all(np.isfinite(image)):
            raise NumericalDomainError("phase map evaluation is non-finite")
        return PhasePoint.from_vec(image)

    def jacobian(self, z):
        if self.jacobian_fn is not None:
            return np.asarray(self.jacobian_fn(z.vec), dtype=float)
        return fd_jacobian(self.eval_fn, z.vec, self.step)

    @classmethod
    def identity(cls, n):
        return cls(lambda v: v, lambda v: np.eye(2 * n))

    @classmethod
    def translation(cls, shift_q, shift_p=None):
        shift_q = np.asarray(shift_q, dtype=float)
        shift_p = np.zeros_like(shift_q) if shift_p is None else np.asarray(shift_p)
        shift = np.concatenate([shift_q, shift_p])
        dim = shift.size
        return cls(lambda v: v + shift, lambda v: np.eye(dim))


def symplectic_residual(phase_map, mag, z):
    """Pullback defect |J^T Omega(eps(z)) J - Omega(z)| of a phase map."""
    jac = phase_map.jacobian(z)
    image = phase_map.value(z)
    defect = jac.T @ mag.form_matrix(image.q) @ jac - mag.form_matrix(z.q)
    return float(np.max(np.abs(defect)))


def energy_rate(ham, mag, z):
    """dH(X) at z; antisymmetry of the structure forces this to vanish."""
    x = magnetic_vector_field(ham, mag, z)
    return float(ham.gradient(z) @ x.vec)


def pullback_hamiltonian(ham, phase_map):
    """The composed Hamiltonian H(eps(z)) with chain-rule gradient."""

    def value(q, p):
        return ham.value(phase_map.value(PhasePoint(q, p)))

    def grad(q, p):
        z = PhasePoint(q, p)
        jac = phase_map.jacobian(z)
        return jac.T @ ham.gradient(phase_map.value(z))

    return HamiltonianSpec.general(ham.n, value, grad)
