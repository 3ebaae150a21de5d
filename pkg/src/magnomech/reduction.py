"""Symmetry reduction for translation groups acting on cyclic coordinates.

The quotient drops the cyclic configuration coordinates and keeps every
momentum, so reduced points are (q_bar, p) stacked into one vector. The
subspace that descends is found inside the admissible subspace by pairing
against the vertical directions with the twisted structure; the reduced
field solves the structure equation in a basis of the pushed-down subspace.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import magnetic_vector_field, pullback_hamiltonian, symplectic_residual
from .errors import DegenerateFormError, NumericalDomainError
from .geometry import PhasePoint, ensure_config
from .hj import (
    FAIL,
    PASS,
    VACUOUS,
    HJReport,
    in_band,
    section_tangent_residual,
    status_of,
    tangent_lift,
)
from .linalg import column_space, max_abs, null_space
from .nonholonomic import (
    admissible_basis,
    constrained_field,
    constraint_residual,
    require_on_constraint,
)
from .tolerances import DEFAULT_TOLERANCES


class TranslationSymmetry:
    """Translations along a set of cyclic coordinates.

    ``cyclic`` holds zero-based coordinate indices; every piece of system
    data is expected to be independent of them, which callers verify
    numerically rather than trust.
    """

    def __init__(self, cyclic, n):
        cyclic = sorted(set(int(i) for i in cyclic))
        if any(i < 0 or i >= n for i in cyclic):
            raise NumericalDomainError("cyclic index out of range")
        self.cyclic = cyclic
        self.n = n
        self.m = len(cyclic)
        self.kept = [i for i in range(n) if i not in cyclic]

    @property
    def reduced_dim(self):
        return 2 * self.n - self.m

    def selection(self):
        """Matrix of the quotient's tangent map: drops cyclic dq rows."""
        rows = self.kept + [self.n + i for i in range(self.n)]
        s = np.zeros((len(rows), 2 * self.n))
        for out_row, in_row in enumerate(rows):
            s[out_row, in_row] = 1.0
        return s

    def project_point(self, z):
        return np.concatenate([z.q[self.kept], z.p])

    def lift_point(self, zbar, fill=None):
        """A representative phase point over a reduced point.

        ``fill`` supplies values for the cyclic coordinates (zeros by
        default); every reduced quantity must not depend on it.
        """
        zbar = np.asarray(zbar, dtype=float)
        q = np.zeros(self.n)
        q[self.kept] = zbar[: len(self.kept)]
        if fill is not None:
            q[self.cyclic] = np.asarray(fill, dtype=float)
        return PhasePoint(q, zbar[len(self.kept):])

    def generators(self):
        """Columns (e_c, 0) spanning the group directions in phase space."""
        gen = np.zeros((2 * self.n, self.m))
        for j, c in enumerate(self.cyclic):
            gen[c, j] = 1.0
        return gen


def data_invariance_residual(sym, dist, ham, mag, probes, shift=0.37):
    """Largest change of system data under finite cyclic translations.

    Exact invariance gives exactly zero, so a generous shift is fine and
    avoids differencing noise.
    """
    worst = 0.0
    for z in probes:
        for c in sym.cyclic:
            moved = z.q.copy()
            moved[c] += shift
            worst = max(worst, max_abs(mag.b_matrix(moved) - mag.b_matrix(z.q)))
            worst = max(worst, max_abs(ham.mass_matrix(moved) - ham.mass_matrix(z.q)))
            worst = max(worst, abs(ham.value(PhasePoint(moved, z.p)) - ham.value(z)))
            if dist is not None and dist.k > 0:
                worst = max(worst, max_abs(dist.matrix(moved) - dist.matrix(z.q)))
    return worst


def section_invariance_residual(sym, section, probes, shift=0.37):
    worst = 0.0
    for q in probes:
        for c in sym.cyclic:
            moved = np.asarray(q, dtype=float).copy()
            moved[c] += shift
            worst = max(worst, max_abs(section.value(moved) - section.value(q)))
    return worst


def map_equivariance_residual(sym, phase_map, probes, shift=0.37):
    """Deviation of a phase map from commuting with the group translations."""
    worst = 0.0
    for z in probes:
        base = phase_map.value(z).vec
        for c in sym.cyclic:
            offset = np.zeros(2 * sym.n)
            offset[c] = shift
            moved = phase_map.value(PhasePoint.from_vec(z.vec + offset)).vec
            worst = max(worst, max_abs(moved - base - offset))
    return worst


def vertical_basis(sym, dist, ham, z):
    """Orthonormal basis of the group directions inside the admissible
    subspace (possibly empty)."""
    generators = sym.generators()
    if dist is None or dist.k == 0:
        return generators
    rows = dist.matrix(z.q)
    base_parts = generators[: sym.n]
    conditions = rows @ base_parts
    coeffs = null_space(conditions)
    return generators @ coeffs


def descent_basis(sym, dist, ham, mag, z):
    """Basis of the subspace of admissible vectors that push down.

    These are admissible vectors whose twisted pairing with every vertical
    admissible direction vanishes.
    """
    basis = admissible_basis(dist, ham, z)
    vertical = vertical_basis(sym, dist, ham, z)
    if vertical.shape[1] == 0:
        return basis
    omega = mag.form_matrix(z.q)
    pairings = vertical.T @ omega @ basis
    coeffs = null_space(pairings)
    return basis @ coeffs


@dataclass
class ReducedFrame:
    """Reduced basis, lifts and the reduced structure matrix at one point."""

    sym: TranslationSymmetry
    point: PhasePoint
    selection: np.ndarray
    basis: np.ndarray
    lifts: np.ndarray
    omega: np.ndarray

    @property
    def dim(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis @ self.basis.T

    def sigma_min(self):
        if self.omega.size == 0:
            return 0.0
        return float(np.linalg.svd(self.omega, compute_uv=False)[-1])


def reduced_frame(sym, dist, ham, mag, z):
    descent = descent_basis(sym, dist, ham, mag, z)
    selection = sym.selection()
    pushed = selection @ descent
    basis = column_space(pushed)
    coeffs, *_ = np.linalg.lstsq(pushed, basis, rcond=None)
    lifts = descent @ coeffs
    omega = lifts.T @ mag.form_matrix(z.q) @ lifts
    return ReducedFrame(sym, z, selection, basis, lifts, omega)


def reduced_field(sym, dist, ham, mag, z, frame=None):
    """The reduced dynamical vector at the class of z, as a reduced vector."""
    if frame is None:
        frame = reduced_frame(sym, dist, ham, mag, z)
    grad_bar = frame.selection @ ham.gradient(z)
    rhs = frame.basis.T @ grad_bar
    try:
        xi = np.linalg.solve(frame.omega.T, rhs)
    except np.linalg.LinAlgError:
        raise DegenerateFormError("reduced structure matrix is singular") from None
    return frame.basis @ xi, frame


def reduced_energy(sym, ham, zbar, fill=None):
    """The quotient Hamiltonian evaluated through an arbitrary lift."""
    return ham.value(sym.lift_point(zbar, fill=fill))


def relatedness_residual(sym, dist, ham, mag, samples, tolerances=None):
    """Pushforward of the constrained field versus the reduced field."""
    tolerances = tolerances or DEFAULT_TOLERANCES
    selection = sym.selection()
    worst = 0.0
    for z in samples:
        require_on_constraint(dist, ham, z, tolerances.get("constraint"))
        full = constrained_field(dist, ham, mag, z)
        reduced, _ = reduced_field(sym, dist, ham, mag, z)
        worst = max(worst, max_abs(selection @ full.vec - reduced))
    return worst


def relatedness_check(sym, dist, ham, mag, samples, tolerances=None):
    """Verdict-style wrapper around the relatedness residual.

    Broken invariance makes the comparison meaningless, so it yields
    VACUOUS rather than FAIL.
    """
    tolerances = tolerances or DEFAULT_TOLERANCES
    invariance = data_invariance_residual(sym, dist, ham, mag, samples)
    if invariance > tolerances.get("invariance"):
        return VACUOUS, {"invariance_residual": invariance,
                         "defects": ["system data varies along cyclic coordinates"]}
    residual = relatedness_residual(sym, dist, ham, mag, samples,
                                    tolerances=tolerances)
    verdict = PASS if residual < tolerances.get("related") else FAIL
    return verdict, {"invariance_residual": invariance,
                     "relatedness_residual": residual}


def _tol(tolerances, name):
    return (tolerances or DEFAULT_TOLERANCES).get(name)


def _reduced_hypotheses(section, sym, dist, ham, mag, qs, tolerances):
    """Shared hypothesis battery for the reduced checks.

    Returns (worst twist residual, defect strings); any defect makes the
    verdict VACUOUS since the theorems assert nothing without it.
    """
    from .geometry import magnetic_match_residual

    defects = []
    probes = [PhasePoint(ensure_config(q, sym.n), section.value(q)) for q in qs]
    inv = data_invariance_residual(sym, dist, ham, mag, probes)
    if inv > _tol(tolerances, "invariance"):
        defects.append(f"system data varies along cyclic coordinates ({inv:.3e})")
    ginv = section_invariance_residual(sym, section, qs)
    if ginv > _tol(tolerances, "invariance"):
        defects.append(f"section varies along cyclic coordinates ({ginv:.3e})")
    image_tol = _tol(tolerances, "constraint")
    hyp_worst = 0.0
    image_worst = 0.0
    tangent_worst = 0.0
    for q, z in zip(qs, probes):
        image_worst = max(image_worst, max_abs(constraint_residual(dist, ham, z)))
        hyp_worst = max(hyp_worst, magnetic_match_residual(
            section, mag.b_field, q, basis=dist.basis(q)))
    if image_worst > image_tol:
        defects.append(f"section image off constraint surface ({image_worst:.3e})")
    else:
        for q in qs:
            tangent_worst = max(tangent_worst, section_tangent_residual(
                section, dist, ham, q, image_tol=image_tol))
        if tangent_worst > 1e-8:
            defects.append(
                f"section tangents leave admissible subspace ({tangent_worst:.3e})")
    if hyp_worst > _tol(tolerances, "hypothesis"):
        defects.append("d(gamma) + B does not vanish on the distribution")
    return hyp_worst, defects


def type1_reduced(section, sym, dist, ham, mag, samples, tolerances=None):
    """Type I check for the reduced system.

    All hypothesis failures produce a VACUOUS verdict with a named defect,
    so scenario authors can tell which assumption broke.
    """
    qs = [ensure_config(q, sym.n) for q in samples]
    hyp_worst, defects = _reduced_hypotheses(
        section, sym, dist, ham, mag, qs, tolerances)
    if defects:
        return HJReport("hj1-reduced", VACUOUS, hyp_worst, equation_residual=None,
                        defects=defects)
    eq_tol = _tol(tolerances, "equation")
    rows = []
    eq_worst = 0.0
    selection = sym.selection()
    for q in qs:
        z = PhasePoint(q, section.value(q))
        free = magnetic_vector_field(ham, mag, z)
        lhs = selection @ tangent_lift(section, q, free.dq)
        rhs, _ = reduced_field(sym, dist, ham, mag, z)
        defect = max_abs(lhs - rhs)
        rows.append({"q": q.tolist(), "equation": defect})
        eq_worst = max(eq_worst, defect)
    verdict = PASS if eq_worst < eq_tol else FAIL
    return HJReport("hj1-reduced", verdict, hyp_worst, equation_residual=eq_worst,
                    per_sample=rows)


def _type2_reduced_residuals(section, phase_map, sym, dist, ham, mag, z,
                             constraint_tol):
    pulled = pullback_hamiltonian(ham, phase_map)
    image = phase_map.value(z)
    require_on_constraint(dist, ham, image, constraint_tol)
    selection = sym.selection()
    frame = reduced_frame(sym, dist, ham, mag, image)
    x_pull = magnetic_vector_field(pulled, mag, z)
    x_image = magnetic_vector_field(ham, mag, image)
    pushed = frame.projector() @ (selection @ (phase_map.jacobian(z) @ x_pull.vec))
    lam_push = selection @ tangent_lift(section, image.q, x_image.dq)
    res_a = max_abs(pushed - lam_push)
    reduced, _ = reduced_field(sym, dist, ham, mag, image, frame=frame)
    res_b = max_abs(lam_push - reduced)
    return res_a, res_b


def type2_reduced(section, phase_map, sym, dist, ham, mag, samples,
                  tolerances=None):
    """Type II check for the reduced system (status agreement per sample)."""
    qs = [phase_map.value(z).q for z in samples]
    hyp_worst, defects = _reduced_hypotheses(
        section, sym, dist, ham, mag, qs, tolerances)
    symp_worst = 0.0
    for z in samples:
        symp_worst = max(symp_worst, symplectic_residual(phase_map, mag, z))
    if symp_worst > _tol(tolerances, "hypothesis"):
        defects.append(f"phase map is not structure preserving ({symp_worst:.3e})")
    equi = map_equivariance_residual(sym, phase_map, samples)
    if equi > _tol(tolerances, "invariance"):
        defects.append(f"phase map is not translation equivariant ({equi:.3e})")
    if defects:
        return HJReport("hj2-reduced", VACUOUS, max(hyp_worst, symp_worst),
                        defects=defects)
    status_tol = _tol(tolerances, "status")
    constraint_tol = _tol(tolerances, "constraint")
    rows = []
    res_a = []
    res_b = []
    agree = True
    for z in samples:
        a, b = _type2_reduced_residuals(section, phase_map, sym, dist, ham,
                                        mag, z, constraint_tol)
        if in_band(a, status_tol) or in_band(b, status_tol):
            a, b = _type2_reduced_residuals(section, phase_map, sym, dist,
                                            ham, mag, z, constraint_tol)
        status_a = status_of(a, status_tol)
        status_b = status_of(b, status_tol)
        agree = agree and (status_a == status_b)
        res_a.append(a)
        res_b.append(b)
        rows.append({"z": z.vec.tolist(), "residual_a": a, "residual_b": b,
                     "status_a": status_a, "status_b": status_b})
    verdict = PASS if agree else FAIL
    return HJReport("hj2-reduced", verdict, hyp_worst, residual_a=res_a,
                    residual_b=res_b, per_sample=rows,
                    defects=[] if agree else ["statuses disagree"])


def type2_level_agreement(section, phase_map, sym, dist, ham, mag, samples,
                          tolerances=None):
    """Joint run of the constrained and reduced Type II checks.

    Returns (constrained report, reduced report, statuses agree sample-wise).
    The agreement of verdict data across the two levels is the content of
    the reduction equivalence for Type II solutions.
    """
    from .hj import type2_constrained

    full = type2_constrained(section, phase_map, dist, ham, mag, samples,
                             tolerances=tolerances)
    reduced = type2_reduced(section, phase_map, sym, dist, ham, mag, samples,
                            tolerances=tolerances)
    agree = full.verdict == VACUOUS or reduced.verdict == VACUOUS
    if full.per_sample and reduced.per_sample:
        agree = all(
            fr["status_a"] == rr["status_a"] and fr["status_b"] == rr["status_b"]
            for fr, rr in zip(full.per_sample, reduced.per_sample))
    return full, reduced, agree
