import numpy as np
import pytest

from magnomech import (
    ConstraintDistribution,
    HamiltonianSpec,
    MagneticStructure,
    OneFormSection,
    PhaseMap,
    PhasePoint,
    TranslationSymmetry,
    TwoFormField,
    descent_basis,
    integrate,
    project_to_constraint,
    reduced_field,
    reduced_frame,
    relatedness_check,
    relatedness_residual,
    type1_reduced,
    type2_level_agreement,
    vertical_basis,
)
from magnomech.reduction import reduced_energy
from magnomech.sampling import config_samples, newton_preimage
from conftest import free_particle_constraint

BOX3 = np.array([[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]])


def reduced_test_system(b=0.4):
    """Constraint dq3 = q1 dq2, two-form in the q1-q3 plane, matched
    constant-component section; q2 and q3 are cyclic."""
    dist = free_particle_constraint()
    matrix = np.zeros((3, 3))
    matrix[0, 2] = b
    matrix[2, 0] = -b
    mag = MagneticStructure(TwoFormField.constant(matrix))
    ham = HamiltonianSpec.quadratic(
        3, potential_fn=lambda q: -0.5 * b * b * q[0] ** 2,
        potential_grad_fn=lambda q: np.array([-b * b * q[0], 0.0, 0.0]))
    section = OneFormSection(
        lambda q: np.array([0.0, -b, -b * q[0]]),
        lambda q: np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0],
                            [-b, 0.0, 0.0]]))
    sym = TranslationSymmetry([1, 2], 3)
    return section, sym, dist, ham, mag


def surface_points(dist, ham, count, seed=0):
    rng = np.random.default_rng(seed)
    return [project_to_constraint(
        dist, ham, PhasePoint(rng.normal(size=3), rng.normal(size=3)))
        for _ in range(count)]


def test_vertical_basis_unconstrained_single_cyclic():
    sym = TranslationSymmetry([0], 2)
    dist = ConstraintDistribution.unconstrained(2)
    ham = HamiltonianSpec.free(2)
    basis = vertical_basis(sym, dist, ham, PhasePoint([0, 0], [1, 1]))
    assert basis.shape == (4, 1)
    assert basis[:, 0] == pytest.approx([1.0, 0.0, 0.0, 0.0])


def test_vertical_basis_intersects_constraint():
    _, sym, dist, ham, _ = reduced_test_system()
    z = PhasePoint([0.7, 0.0, 0.0], [0.3, 0.2, 0.7 * 0.2])
    basis = vertical_basis(sym, dist, ham, z)
    assert basis.shape[1] == 1
    direction = basis[:3, 0]
    # the admissible cyclic direction is e2 + q1 e3, normalized
    expected = np.array([0.0, 1.0, 0.7]) / np.linalg.norm([0.0, 1.0, 0.7])
    assert np.abs(direction @ expected) == pytest.approx(1.0, abs=1e-12)
    assert basis[3:, 0] == pytest.approx([0.0, 0.0, 0.0])


def test_vertical_basis_empty_without_cyclic_coordinates():
    sym = TranslationSymmetry([], 3)
    dist = free_particle_constraint()
    ham = HamiltonianSpec.free(3)
    basis = vertical_basis(sym, dist, ham, PhasePoint([0, 0, 0], [1, 0, 0]))
    assert basis.shape == (6, 0)


def test_descent_basis_orthogonality():
    _, sym, dist, ham, mag = reduced_test_system()
    for z in surface_points(dist, ham, 10, seed=3):
        vertical = vertical_basis(sym, dist, ham, z)
        descent = descent_basis(sym, dist, ham, mag, z)
        assert descent.shape[1] == 4 - vertical.shape[1]
        omega = mag.form_matrix(z.q)
        assert np.max(np.abs(vertical.T @ omega @ descent)) < 1e-10


def test_descent_is_whole_space_without_vertical_part():
    sym = TranslationSymmetry([2], 3)  # q3 cyclic but e3 not admissible
    dist = free_particle_constraint()
    ham = HamiltonianSpec.free(3)
    mag = MagneticStructure.canonical(3)
    z = PhasePoint([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    vertical = vertical_basis(sym, dist, ham, z)
    assert vertical.shape[1] == 0
    assert descent_basis(sym, dist, ham, mag, z).shape[1] == 4


def test_descent_unconstrained_single_cyclic():
    sym = TranslationSymmetry([0], 3)
    dist = ConstraintDistribution.unconstrained(3)
    ham = HamiltonianSpec.free(3)
    mag = MagneticStructure.canonical(3)
    basis = descent_basis(sym, dist, ham, mag, PhasePoint([0, 0, 0], [0.3, 0, 0]))
    assert basis.shape[1] == 2 * 3 - 1


def test_reduced_frame_dimensions_and_nondegeneracy():
    _, sym, dist, ham, mag = reduced_test_system()
    for z in surface_points(dist, ham, 5, seed=5):
        frame = reduced_frame(sym, dist, ham, mag, z)
        assert frame.dim == 2
        assert frame.sigma_min() > 1e-8


def test_reduced_structure_pulls_back():
    # the reduced pairing of pushed vectors equals the full pairing
    _, sym, dist, ham, mag = reduced_test_system()
    z = surface_points(dist, ham, 1, seed=7)[0]
    frame = reduced_frame(sym, dist, ham, mag, z)
    descent = descent_basis(sym, dist, ham, mag, z)
    omega = mag.form_matrix(z.q)
    rng = np.random.default_rng(0)
    for _ in range(5):
        u = descent @ rng.normal(size=descent.shape[1])
        w = descent @ rng.normal(size=descent.shape[1])
        pushed_u = frame.basis.T @ (frame.selection @ u)
        pushed_w = frame.basis.T @ (frame.selection @ w)
        reduced_value = float(pushed_u @ frame.omega @ pushed_w)
        assert reduced_value == pytest.approx(float(u @ omega @ w), abs=1e-9)


def test_reduced_field_classical_cyclic_elimination():
    # unconstrained, no two-form, q1 cyclic: the reduced flow is the
    # canonical one in q2 with p1 frozen as a parameter
    sym = TranslationSymmetry([0], 2)
    dist = ConstraintDistribution.unconstrained(2)
    ham = HamiltonianSpec.quadratic(
        2, potential_fn=lambda q: np.cos(q[1]),
        potential_grad_fn=lambda q: np.array([0.0, -np.sin(q[1])]))
    mag = MagneticStructure.canonical(2)
    z = PhasePoint([0.4, 1.1], [0.7, -0.2])
    reduced, _ = reduced_field(sym, dist, ham, mag, z)
    # reduced coordinates: (q2, p1, p2)
    assert reduced == pytest.approx([-0.2, 0.0, np.sin(1.1)], abs=1e-10)


def test_lift_independence():
    _, sym, dist, ham, mag = reduced_test_system()
    rng = np.random.default_rng(21)
    for z in surface_points(dist, ham, 5, seed=9):
        zbar = sym.project_point(z)
        fills = [rng.normal(size=2), rng.normal(size=2)]
        results = []
        energies = []
        omegas = []
        for fill in fills:
            lift = sym.lift_point(zbar, fill=fill)
            vec, frame = reduced_field(sym, dist, ham, mag, lift)
            results.append(vec)
            omegas.append(frame.omega)
            energies.append(reduced_energy(sym, ham, zbar, fill=fill))
        assert np.max(np.abs(results[0] - results[1])) < 1e-10
        assert np.max(np.abs(omegas[0] - omegas[1])) < 1e-10
        assert abs(energies[0] - energies[1]) < 1e-10


def test_reduced_field_conserves_reduced_energy():
    _, sym, dist, ham, mag = reduced_test_system()
    for z in surface_points(dist, ham, 10, seed=11):
        vec, frame = reduced_field(sym, dist, ham, mag, z)
        grad_bar = frame.selection @ ham.gradient(z)
        assert abs(float(grad_bar @ vec)) < 1e-10


def test_relatedness_residual_small():
    _, sym, dist, ham, mag = reduced_test_system()
    samples = surface_points(dist, ham, 20, seed=13)
    assert relatedness_residual(sym, dist, ham, mag, samples) < 1e-8


def test_relatedness_against_projected_trajectory():
    # independent oracle: push a short constrained trajectory through the
    # quotient and difference it in time
    _, sym, dist, ham, mag = reduced_test_system()
    z = surface_points(dist, ham, 1, seed=15)[0]
    dt = 2e-4
    traj = integrate(ham, mag, z, 2 * dt, dt, dist=dist, kind="distributional")
    projected = [sym.project_point(traj.state(i)) for i in range(3)]
    fd_velocity = (projected[2] - projected[0]) / (2 * dt)
    # the difference is centered on the middle state of the three
    reduced, _ = reduced_field(sym, dist, ham, mag, traj.state(1))
    assert np.max(np.abs(fd_velocity - reduced)) < 1e-6


def test_relatedness_check_vacuous_when_invariance_broken():
    # declare q1 cyclic even though the constraint and potential use it
    _, _, dist, ham, mag = reduced_test_system()
    sym = TranslationSymmetry([0], 3)
    samples = surface_points(dist, ham, 5, seed=2)
    verdict, data = relatedness_check(sym, dist, ham, mag, samples)
    assert verdict == "VACUOUS"
    assert data["invariance_residual"] > 1e-6


def test_type1_reduced_passes():
    section, sym, dist, ham, mag = reduced_test_system()
    report = type1_reduced(section, sym, dist, ham, mag,
                           config_samples(BOX3, 30))
    assert report.verdict == "PASS"
    assert report.hypothesis_residual < 1e-10
    assert report.equation_residual < 1e-7


def test_type1_reduced_classical_cyclic_case():
    # no constraints, no two-form, exact section from a cyclic-free W with
    # the stationarity potential: the classical reduced situation
    sym = TranslationSymmetry([0], 2)
    dist = ConstraintDistribution.unconstrained(2)
    mag = MagneticStructure.canonical(2)
    c = 0.6
    section = OneFormSection(
        lambda q: np.array([0.0, 2 * c * q[1]]),
        lambda q: np.array([[0.0, 0.0], [0.0, 2 * c]]))
    ham = HamiltonianSpec.quadratic(
        2, potential_fn=lambda q: -2 * c * c * q[1] ** 2,
        potential_grad_fn=lambda q: np.array([0.0, -4 * c * c * q[1]]))
    box = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    report = type1_reduced(section, sym, dist, ham, mag,
                           config_samples(box, 20))
    assert report.verdict == "PASS"
    assert report.equation_residual < 1e-8


def test_type1_reduced_vacuous_for_varying_section():
    _, sym, dist, ham, mag = reduced_test_system()
    varying = OneFormSection(
        lambda q: np.array([0.0, -0.4 + 0.1 * q[1], (-0.4 + 0.1 * q[1]) * q[0]]))
    report = type1_reduced(varying, sym, dist, ham, mag,
                           config_samples(BOX3, 10))
    assert report.verdict == "VACUOUS"
    assert any("cyclic" in d for d in report.defects)


def test_type2_level_agreement_both_scenarios():
    section, sym, dist, ham, mag = reduced_test_system()
    eps = PhaseMap.translation([0.3, 0.0, 0.0])
    qs = config_samples(BOX3, 6)
    targets = [PhasePoint(q, section.value(q)) for q in qs[:3]]
    targets += surface_points(dist, ham, 3, seed=19)
    samples = [newton_preimage(eps, w) for w in targets]
    full, reduced, agree = type2_level_agreement(
        section, eps, sym, dist, ham, mag, samples)
    assert full.verdict == "PASS"
    assert reduced.verdict == "PASS"
    assert agree
