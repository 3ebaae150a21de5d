"""Residual checks for the two Hamilton-Jacobi equation types.

A Type I check asks whether a covector section reproduces the dynamical
field through its own base flow; a Type II check compares two pushforward
relations attached to a structure-preserving phase map. Each check reports
a hypothesis residual and equation residual(s) per sample: when the
hypothesis fails the verdict is VACUOUS and the equation numbers are
informational only.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    magnetic_vector_field,
    pullback_hamiltonian,
    symplectic_residual,
)
from .errors import SectionImageError, SectionTangentError
from .geometry import (
    PhasePoint,
    TwoFormField,
    ensure_config,
    exterior_derivative,
    magnetic_match_residual,
)
from .linalg import max_abs
from .nonholonomic import (
    admissible_basis,
    constrained_field,
    constraint_residual,
    require_on_constraint,
)
from .tolerances import DEFAULT_TOLERANCES, STATUS_BAND_FACTOR

PASS = "PASS"
FAIL = "FAIL"
VACUOUS = "VACUOUS"


@dataclass
class HJReport:
    check: str
    verdict: str
    hypothesis_residual: float
    equation_residual: float = None
    residual_a: list = None
    residual_b: list = None
    per_sample: list = field(default_factory=list)
    defects: list = field(default_factory=list)

    def as_dict(self):
        out = {
            "check": self.check,
            "verdict": self.verdict,
            "hypothesis_residual": self.hypothesis_residual,
            "defects": list(self.defects),
            "per_sample": list(self.per_sample),
        }
        if self.equation_residual is not None:
            out["equation_residual"] = self.equation_residual
        if self.residual_a is not None:
            out["residual_a"] = list(self.residual_a)
            out["residual_b"] = list(self.residual_b)
        return out


def _tol(tolerances, name):
    return (tolerances or DEFAULT_TOLERANCES).get(name)


def status_of(value, tol):
    return "zero" if value < tol else "nonzero"


def in_band(value, tol):
    return tol <= value < STATUS_BAND_FACTOR * tol


def _refined(obj):
    """Copy of a section or map with a 10x smaller finite-difference step."""
    if getattr(obj, "jacobian_fn", None) is None and hasattr(obj, "step"):
        return dataclasses.replace(obj, step=obj.step / 10.0)
    return obj


def section_flow(section, ham, mag, q):
    """The base flow of the free field seen through the section.

    Returns (X^gamma, full field at the section point).
    """
    z = PhasePoint(q, section.value(q))
    x = magnetic_vector_field(ham, mag, z)
    return x.dq, x


def tangent_lift(section, q, base_vector):
    """Tangent image (x, J(q) x) of a base vector under the section."""
    jac = section.jacobian(q)
    base_vector = np.asarray(base_vector, dtype=float)
    return np.concatenate([base_vector, jac @ base_vector])


def section_tangent_residual(section, dist, ham, q, image_tol=1e-8):
    """How far the section's tangent images of D stray from the admissible
    subspace at the section point."""
    q = ensure_config(q, dist.n)
    z = PhasePoint(q, section.value(q))
    basis = admissible_basis(dist, ham, z, tol=image_tol)
    projector = basis @ basis.T
    worst = 0.0
    for column in dist.basis(q).T:
        lifted = tangent_lift(section, q, column)
        worst = max(worst, max_abs(lifted - projector @ lifted))
    return worst


def type1_magnetic(section, ham, mag, samples, tolerances=None):
    """Type I check for the unconstrained magnetic system.

    Hypothesis: d(gamma) = -B on all of TQ. Equation: the section maps its
    own base flow onto the dynamical field.
    """
    hyp_tol = _tol(tolerances, "hypothesis")
    eq_tol = _tol(tolerances, "equation")
    rows = []
    hyp_worst = 0.0
    eq_worst = 0.0
    for q in samples:
        q = ensure_config(q, ham.n)
        hyp = magnetic_match_residual(section, mag.b_field, q)
        flow, x = section_flow(section, ham, mag, q)
        defect = max_abs(tangent_lift(section, q, flow) - x.vec)
        rows.append({"q": q.tolist(), "hypothesis": hyp, "equation": defect})
        hyp_worst = max(hyp_worst, hyp)
        eq_worst = max(eq_worst, defect)
    if hyp_worst > hyp_tol:
        verdict = VACUOUS
        defects = ["hypothesis: d(gamma) + B does not vanish"]
    else:
        verdict = PASS if eq_worst < eq_tol else FAIL
        defects = []
    return HJReport("hj1-magnetic", verdict, hyp_worst, equation_residual=eq_worst,
                    per_sample=rows, defects=defects)


def type1_constrained(section, dist, ham, mag, samples, tolerances=None):
    """Type I check for the constrained system.

    Raises SectionImageError / SectionTangentError when the section leaves
    the constraint surface or its tangent images leave the admissible
    subspace; those are scenario defects, not theorem hypotheses.
    """
    hyp_tol = _tol(tolerances, "hypothesis")
    eq_tol = _tol(tolerances, "equation")
    image_tol = _tol(tolerances, "constraint")
    membership_tol = 1e-8
    rows = []
    hyp_worst = 0.0
    eq_worst = 0.0
    for q in samples:
        q = ensure_config(q, dist.n)
        z = PhasePoint(q, section.value(q))
        image_residual = max_abs(constraint_residual(dist, ham, z))
        if image_residual > image_tol:
            raise SectionImageError(
                f"section image off constraint surface at q={q} "
                f"(residual {image_residual:.3e})")
        tangent_residual = section_tangent_residual(
            section, dist, ham, q, image_tol=image_tol)
        if tangent_residual > membership_tol:
            raise SectionTangentError(
                f"section tangents leave the admissible subspace at q={q} "
                f"(residual {tangent_residual:.3e})")
        hyp = magnetic_match_residual(section, mag.b_field, q, basis=dist.basis(q))
        flow, x_free = section_flow(section, ham, mag, q)
        x_con = constrained_field(dist, ham, mag, z)
        defect = max_abs(tangent_lift(section, q, flow) - x_con.vec)
        rows.append({"q": q.tolist(), "hypothesis": hyp, "equation": defect,
                     "image": image_residual, "tangent": tangent_residual})
        hyp_worst = max(hyp_worst, hyp)
        eq_worst = max(eq_worst, defect)
    if hyp_worst > hyp_tol:
        verdict = VACUOUS
        defects = ["hypothesis: d(gamma) + B does not vanish on the distribution"]
    else:
        verdict = PASS if eq_worst < eq_tol else FAIL
        defects = []
    return HJReport("hj1-constrained", verdict, hyp_worst, equation_residual=eq_worst,
                    per_sample=rows, defects=defects)


def _type2_residuals(section, phase_map, ham, mag, z, dist=None,
                     constraint_tol=1e-8):
    """The two Type II residual vectors at one sample point."""
    pulled = pullback_hamiltonian(ham, phase_map)
    image = phase_map.value(z)
    if dist is not None:
        require_on_constraint(dist, ham, image, constraint_tol)
    jac_eps = phase_map.jacobian(z)
    x_pull = magnetic_vector_field(pulled, mag, z)
    x_image = magnetic_vector_field(ham, mag, image)
    lam_push = tangent_lift(section, image.q, x_image.dq)
    pushed = jac_eps @ x_pull.vec
    if dist is None:
        res_a = max_abs(pushed - lam_push)
        res_b = max_abs(lam_push - x_image.vec)
    else:
        basis = admissible_basis(dist, ham, image, tol=constraint_tol)
        projector = basis @ basis.T
        res_a = max_abs(projector @ pushed - lam_push)
        x_con = constrained_field(dist, ham, mag, image)
        res_b = max_abs(lam_push - x_con.vec)
    return res_a, res_b


def _type2_report(check_name, section, phase_map, ham, mag, samples,
                  tolerances, dist=None):
    status_tol = _tol(tolerances, "status")
    hyp_tol = _tol(tolerances, "hypothesis")
    constraint_tol = _tol(tolerances, "constraint")
    rows = []
    res_a = []
    res_b = []
    hyp_worst = 0.0
    agree = True
    for z in samples:
        hyp = symplectic_residual(phase_map, mag, z)
        hyp_worst = max(hyp_worst, hyp)
        a, b = _type2_residuals(section, phase_map, ham, mag, z, dist=dist,
                                constraint_tol=constraint_tol)
        if in_band(a, status_tol) or in_band(b, status_tol):
            a, b = _type2_residuals(_refined(section), _refined(phase_map),
                                    ham, mag, z, dist=dist,
                                    constraint_tol=constraint_tol)
        status_a = status_of(a, status_tol)
        status_b = status_of(b, status_tol)
        agree = agree and (status_a == status_b)
        res_a.append(a)
        res_b.append(b)
        rows.append({"z": z.vec.tolist(), "symplectic": hyp,
                     "residual_a": a, "residual_b": b,
                     "status_a": status_a, "status_b": status_b})
    if hyp_worst > hyp_tol:
        verdict = VACUOUS
        defects = ["hypothesis: phase map is not structure preserving"]
    else:
        verdict = PASS if agree else FAIL
        defects = [] if agree else ["statuses of the two residuals disagree"]
    return HJReport(check_name, verdict, hyp_worst, residual_a=res_a,
                    residual_b=res_b, per_sample=rows, defects=defects)


def type2_magnetic(section, phase_map, ham, mag, samples, tolerances=None):
    """Type II check for the unconstrained magnetic system.

    The claim is an equivalence, so the verdict compares the zero/nonzero
    status of the two residuals at every sample instead of their values.
    """
    return _type2_report("hj2-magnetic", section, phase_map, ham, mag,
                         samples, tolerances)


def type2_constrained(section, phase_map, dist, ham, mag, samples,
                      tolerances=None):
    """Type II check for the constrained system.

    Samples must be chosen so the phase map lands on the constraint
    surface; the image-side section hypotheses are checked like in Type I.
    """
    image_tol = _tol(tolerances, "constraint")
    for z in samples:
        image = phase_map.value(z)
        on_surface = PhasePoint(image.q, section.value(image.q))
        res = max_abs(constraint_residual(dist, ham, on_surface))
        if res > image_tol:
            raise SectionImageError(
                f"section image off constraint surface at q={image.q} "
                f"(residual {res:.3e})")
        tangent_res = section_tangent_residual(section, dist, ham, image.q,
                                               image_tol=image_tol)
        if tangent_res > 1e-8:
            raise SectionTangentError(
                f"section tangents leave the admissible subspace at "
                f"q={image.q} (residual {tangent_res:.3e})")
    return _type2_report("hj2-constrained", section, phase_map, ham, mag,
                         samples, tolerances, dist=dist)


def induced_magnetic_field(section, n):
    """The two-form -d(gamma); pairing it with gamma satisfies the Type I
    hypothesis identically (the constructive direction)."""
    return TwoFormField.from_matrix_fn(
        lambda q: -exterior_derivative(section, q), n, check=False)
