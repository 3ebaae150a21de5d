"""Declarative scenario files: parsing, validation and compiled systems.

A scenario is a JSON document describing one system: dimension, mass
matrix, potential, magnetic two-form, constraint rows, optional covector
section, phase map and cyclic coordinates. Entries may be numbers or
expression strings in the small language of :mod:`magnomech.expressions`.
Structural problems raise ScenarioError with a stable code and the field
path; semantic probes (positive definiteness, antisymmetry of expression
matrices, declared invariance) run when the system is built.
"""

import json
import time
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import expressions as ex
from .dynamics import HamiltonianSpec, MagneticStructure, PhaseMap
from .errors import ExpressionError, ScenarioError
from .geometry import OneFormSection, PhasePoint, TwoFormField
from .nonholonomic import ConstraintDistribution
from .reduction import TranslationSymmetry, data_invariance_residual
from .sampling import sobol_points
from .tolerances import DEFAULTS as TOLERANCE_NAMES
from .tolerances import Tolerances

SCHEMA_VERSION = 1

_KNOWN_FIELDS = {
    "name", "n", "mass_matrix", "potential", "b_field", "constraints",
    "gamma", "epsilon", "symmetry", "sample_box", "tolerances",
    "initial_state", "general_h", "description",
}


@dataclass
class ScenarioSpec:
    """Validated, normalized scenario data (still declarative)."""

    name: str
    n: int
    mass_matrix: object = "identity"
    potential: object = 0.0
    b_field: list = None
    constraints: list = dataclass_field(default_factory=list)
    gamma: list = None
    epsilon: list = None
    symmetry: list = None
    sample_box: list = None
    tolerances: dict = dataclass_field(default_factory=dict)
    initial_state: dict = None
    general_h: str = None
    description: str = None

    def to_dict(self):
        out = {"name": self.name, "n": self.n}
        if self.description is not None:
            out["description"] = self.description
        if self.mass_matrix != "identity":
            out["mass_matrix"] = self.mass_matrix
        if self.potential not in (0.0, "0"):
            out["potential"] = self.potential
        if self.b_field is not None:
            out["b_field"] = self.b_field
        if self.constraints:
            out["constraints"] = self.constraints
        if self.gamma is not None:
            out["gamma"] = self.gamma
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        if self.symmetry is not None:
            out["symmetry"] = self.symmetry
        out["sample_box"] = self.sample_box
        if self.tolerances:
            out["tolerances"] = self.tolerances
        if self.initial_state is not None:
            out["initial_state"] = self.initial_state
        if self.general_h is not None:
            out["general_h"] = self.general_h
        return out


def _require(condition, code, message, field=None):
    if not condition:
        raise ScenarioError(code, message, field=field)


def _parse_entry(value, names, field):
    """Accept a number or an expression string; return the AST."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return ex.Num(float(value))
    _require(isinstance(value, str), "expression",
             f"expected number or expression string, got {type(value).__name__}",
             field)
    try:
        node = ex.parse(value)
        ex.check_variables(node, names)
    except ExpressionError as err:
        raise ScenarioError("expression", str(err), field=field) from None
    return node


def _entry_is_literal(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def parse_scenario(text):
    """Parse and structurally validate a scenario document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError("parse", f"invalid JSON: {err}") from None
    _require(isinstance(raw, dict), "parse", "top level must be an object")
    unknown = sorted(set(raw) - _KNOWN_FIELDS)
    _require(not unknown, "unknown_field", f"unknown field(s): {unknown}")
    _require("name" in raw and isinstance(raw["name"], str) and raw["name"],
             "missing_field", "scenario needs a non-empty name", "name")
    _require("n" in raw, "missing_field", "scenario needs a dimension n", "n")
    n = raw["n"]
    _require(isinstance(n, int) and not isinstance(n, bool) and n >= 1,
             "bad_dimension", "n must be an integer >= 1", "n")

    qn = ex.config_names(n)
    pn = ex.phase_names(n)

    mass = raw.get("mass_matrix", "identity")
    if mass != "identity":
        _require(isinstance(mass, list) and len(mass) == n,
                 "dimension_mismatch", f"mass_matrix must have {n} rows",
                 "mass_matrix")
        for i, row in enumerate(mass):
            _require(isinstance(row, list) and len(row) == n,
                     "dimension_mismatch", f"row {i} must have {n} entries",
                     f"mass_matrix[{i}]")
            for j, entry in enumerate(row):
                _parse_entry(entry, qn, f"mass_matrix[{i}][{j}]")

    potential = raw.get("potential", 0.0)
    _parse_entry(potential, qn, "potential")

    b_field = raw.get("b_field")
    if b_field is not None:
        _require(isinstance(b_field, list) and len(b_field) == n,
                 "dimension_mismatch", f"b_field must have {n} rows", "b_field")
        for i, row in enumerate(b_field):
            _require(isinstance(row, list) and len(row) == n,
                     "dimension_mismatch", f"row {i} must have {n} entries",
                     f"b_field[{i}]")
            for j, entry in enumerate(row):
                _parse_entry(entry, qn, f"b_field[{i}][{j}]")
        all_literal = all(_entry_is_literal(v) for row in b_field for v in row)
        if all_literal:
            matrix = np.asarray(b_field, dtype=float)
            bad = np.argwhere(np.abs(matrix + matrix.T) > 0)
            _require(bad.size == 0, "antisymmetry",
                     "b_field is not antisymmetric; offending entries "
                     + ", ".join(f"[{i}][{j}]" for i, j in bad[:4]),
                     "b_field")

    constraints = raw.get("constraints", [])
    _require(isinstance(constraints, list), "dimension_mismatch",
             "constraints must be a list of rows", "constraints")
    _require(len(constraints) < n or not constraints, "constraint_count",
             f"need fewer than n={n} constraint rows", "constraints")
    for a, row in enumerate(constraints):
        _require(isinstance(row, list) and len(row) == n,
                 "dimension_mismatch", f"constraint row {a} must have {n} entries",
                 f"constraints[{a}]")
        for j, entry in enumerate(row):
            _parse_entry(entry, qn, f"constraints[{a}][{j}]")

    gamma = raw.get("gamma")
    if gamma is not None:
        _require(isinstance(gamma, list) and len(gamma) == n,
                 "dimension_mismatch", f"gamma must have {n} components", "gamma")
        for i, entry in enumerate(gamma):
            _parse_entry(entry, qn, f"gamma[{i}]")

    epsilon = raw.get("epsilon")
    if epsilon is not None:
        _require(isinstance(epsilon, list) and len(epsilon) == 2 * n,
                 "dimension_mismatch", f"epsilon must have {2 * n} components",
                 "epsilon")
        for i, entry in enumerate(epsilon):
            _parse_entry(entry, pn, f"epsilon[{i}]")

    symmetry = raw.get("symmetry")
    if symmetry is not None:
        _require(isinstance(symmetry, list) and symmetry, "symmetry_index",
                 "symmetry must be a non-empty list of 1-based indices",
                 "symmetry")
        for idx in symmetry:
            _require(isinstance(idx, int) and 1 <= idx <= n, "symmetry_index",
                     f"cyclic index {idx!r} outside 1..{n}", "symmetry")
        _require(len(set(symmetry)) == len(symmetry), "symmetry_index",
                 "cyclic indices must be distinct", "symmetry")
        symmetry = sorted(symmetry)

    box = raw.get("sample_box")
    if box is None:
        box = [[-1.0, 1.0] for _ in range(n)]
    _require(isinstance(box, list) and len(box) == n, "dimension_mismatch",
             f"sample_box must have {n} coordinate ranges", "sample_box")
    for i, pair in enumerate(box):
        _require(isinstance(pair, list) and len(pair) == 2
                 and all(_entry_is_literal(v) for v in pair)
                 and pair[0] < pair[1],
                 "dimension_mismatch", "each range must be [lo, hi] with lo < hi",
                 f"sample_box[{i}]")
    box = [[float(lo), float(hi)] for lo, hi in box]

    overrides = raw.get("tolerances", {})
    _require(isinstance(overrides, dict), "tolerance",
             "tolerances must be an object", "tolerances")
    for key, value in overrides.items():
        _require(key in TOLERANCE_NAMES, "tolerance",
                 f"unknown tolerance {key!r}", "tolerances")
        _require(_entry_is_literal(value) and value > 0, "tolerance",
                 f"tolerance {key!r} must be a positive number", "tolerances")

    state = raw.get("initial_state")
    if state is not None:
        _require(isinstance(state, dict) and set(state) == {"q", "p"},
                 "initial_state", "initial_state needs exactly q and p arrays",
                 "initial_state")
        for part in ("q", "p"):
            values = state[part]
            _require(isinstance(values, list) and len(values) == n
                     and all(_entry_is_literal(v) for v in values),
                     "initial_state", f"{part} must be {n} numbers",
                     f"initial_state.{part}")
        state = {"q": [float(v) for v in state["q"]],
                 "p": [float(v) for v in state["p"]]}

    general_h = raw.get("general_h")
    if general_h is not None:
        _require(isinstance(general_h, str), "expression",
                 "general_h must be an expression string", "general_h")
        _parse_entry(general_h, pn, "general_h")
        _require(not constraints, "general_h_with_constraints",
                 "general Hamiltonians cannot be combined with constraints: "
                 "the constraint surface needs the kinetic-energy form",
                 "general_h")

    return ScenarioSpec(
        name=raw["name"], n=n, mass_matrix=mass, potential=potential,
        b_field=b_field, constraints=constraints, gamma=gamma, epsilon=epsilon,
        symmetry=symmetry, sample_box=box, tolerances=dict(overrides),
        initial_state=state, general_h=general_h,
        description=raw.get("description"))


def scenario_violations(text):
    """All schema violations in a document, each with code and field path.

    Repeatedly re-validates with offending fields removed, so independent
    problems are reported together; an empty list means the document parses.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        return [ScenarioError("parse", f"invalid JSON: {err}")]
    violations = []
    for _ in range(len(_KNOWN_FIELDS) + 1):
        try:
            parse_scenario(json.dumps(raw))
            break
        except ScenarioError as err:
            violations.append(err)
            field = (err.field or "").split("[")[0].split(".")[0]
            if not isinstance(raw, dict) or field not in raw:
                break
            del raw[field]
    return violations


def serialize_scenario(spec):
    return json.dumps(spec.to_dict(), indent=2, sort_keys=False) + "\n"


def load_scenario(path):
    with open(path) as fh:
        return parse_scenario(fh.read())


# -- compilation to a runnable system ----------------------------------------


def _compile_scalar(value, names):
    node = _parse_entry(value, names, "<scalar>")
    return ex.compile_node(node), node


def _compile_matrix(rows, names):
    compiled = [[_compile_scalar(v, names) for v in row] for row in rows]
    fns = [[c[0] for c in row] for row in compiled]
    nodes = [[c[1] for c in row] for row in compiled]

    def evaluate(q):
        return np.array([[f(q) for f in row] for row in fns])

    return evaluate, nodes


def _matrix_gradient(nodes, n):
    """Compiled stacked derivative (by direction) of a matrix of ASTs.

    Returns None when any entry cannot be differentiated symbolically;
    callers then fall back to finite differences.
    """
    try:
        stacked = [
            [[ex.compile_node(ex.derivative(node, f"q{c + 1}")) for node in row]
             for row in nodes]
            for c in range(n)
        ]
    except ExpressionError:
        return None

    def evaluate(q):
        return np.array([[[f(q) for f in row] for row in layer]
                         for layer in stacked])

    return evaluate


def _vector_gradient(nodes, names):
    try:
        stacked = [[ex.compile_node(ex.derivative(node, name)) for name in names]
                   for node in nodes]
    except ExpressionError:
        return None
    return stacked


@dataclass
class System:
    """A compiled scenario ready for checks and integration."""

    spec: ScenarioSpec
    ham: HamiltonianSpec
    mag: MagneticStructure
    dist: ConstraintDistribution
    gamma: OneFormSection = None
    epsilon: PhaseMap = None
    symmetry: TranslationSymmetry = None
    tolerances: Tolerances = None
    initial_state: PhasePoint = None

    @property
    def name(self):
        return self.spec.name

    @property
    def n(self):
        return self.spec.n

    @property
    def sample_box(self):
        return np.asarray(self.spec.sample_box, dtype=float)

    @property
    def constrained(self):
        return self.dist.k > 0


def _probe_points(box, count=5):
    box = np.asarray(box, dtype=float)
    points = list(sobol_points(box, count - 1))
    points.append(box.mean(axis=1))
    return points


def build_system(spec):
    """Compile a ScenarioSpec and run the load-time semantic probes."""
    n = spec.n
    qn = ex.config_names(n)
    pn = ex.phase_names(n)
    probes = _probe_points(spec.sample_box)

    # Hamiltonian
    if spec.general_h is not None:
        fn, node = _compile_scalar(spec.general_h, pn)
        grads = _vector_gradient([node], pn)

        def value(q, p):
            return fn(q, p)

        if grads is not None:
            row = grads[0]

            def grad(q, p):
                return np.array([g(q, p) for g in row])
        else:
            grad = None
        ham = HamiltonianSpec.general(n, value, grad)
    else:
        mass_fn = None
        mass_grad = None
        if spec.mass_matrix != "identity":
            mass_fn, mass_nodes = _compile_matrix(spec.mass_matrix, qn)
            mass_grad = _matrix_gradient(mass_nodes, n)
            for q in probes:
                matrix = mass_fn(q)
                if np.max(np.abs(matrix - matrix.T)) > 1e-12 * (1 + np.max(np.abs(matrix))):
                    raise ScenarioError("mass_not_spd",
                                        "mass matrix is not symmetric",
                                        field="mass_matrix")
                try:
                    np.linalg.cholesky(matrix)
                except np.linalg.LinAlgError:
                    raise ScenarioError(
                        "mass_not_spd",
                        f"mass matrix is not positive definite at q={q}",
                        field="mass_matrix") from None
        potential_fn, potential_node = _compile_scalar(spec.potential, qn)
        potential_grads = _vector_gradient([potential_node], qn)
        if potential_grads is not None:
            grad_row = potential_grads[0]

            def potential_grad(q):
                return np.array([g(q) for g in grad_row])
        else:
            potential_grad = None
        ham = HamiltonianSpec.quadratic(
            n, mass_fn=mass_fn, potential_fn=potential_fn,
            mass_grad_fn=mass_grad, potential_grad_fn=potential_grad)

    # Magnetic two-form
    if spec.b_field is None:
        b_field = TwoFormField.zero(n)
    else:
        all_literal = all(_entry_is_literal(v) for row in spec.b_field for v in row)
        if all_literal:
            b_field = TwoFormField.constant(np.asarray(spec.b_field, dtype=float))
        else:
            matrix_fn, _ = _compile_matrix(spec.b_field, qn)
            for q in probes:
                matrix = matrix_fn(q)
                defect = np.max(np.abs(matrix + matrix.T))
                if defect > 1e-9 * (1 + np.max(np.abs(matrix))):
                    bad = np.argwhere(np.abs(matrix + matrix.T) > 1e-12)
                    names = ", ".join(f"[{i}][{j}]" for i, j in bad[:4])
                    raise ScenarioError(
                        "antisymmetry",
                        f"b_field is not antisymmetric at q={q}; entries {names}",
                        field="b_field")

            def upper(q, _fn=matrix_fn):
                return np.triu(_fn(q), 1)

            b_field = TwoFormField(upper, n)
    mag = MagneticStructure(b_field)

    # Constraints
    if spec.constraints:
        rows_fn, rows_nodes = _compile_matrix(spec.constraints, qn)
        rows_grad = _matrix_gradient(rows_nodes, n)
        dist = ConstraintDistribution(n, len(spec.constraints), rows_fn,
                                      rows_grad_fn=rows_grad)
    else:
        dist = ConstraintDistribution.unconstrained(n)

    # Optional section and phase map
    gamma = None
    if spec.gamma is not None:
        compiled = [_compile_scalar(v, qn) for v in spec.gamma]
        fns = [c[0] for c in compiled]
        grads = _vector_gradient([c[1] for c in compiled], qn)

        def gamma_eval(q, _fns=fns):
            return np.array([f(q) for f in _fns])

        jac_fn = None
        if grads is not None:
            def jac_fn(q, _grads=grads):
                return np.array([[g(q) for g in row] for row in _grads])

        gamma = OneFormSection(gamma_eval, jac_fn)

    epsilon = None
    if spec.epsilon is not None:
        compiled = [_compile_scalar(v, pn) for v in spec.epsilon]
        fns = [c[0] for c in compiled]
        grads = _vector_gradient([c[1] for c in compiled], pn)

        def eps_eval(vec, _fns=fns):
            q, p = vec[:n], vec[n:]
            return np.array([f(q, p) for f in _fns])

        eps_jac = None
        if grads is not None:
            def eps_jac(vec, _grads=grads):
                q, p = vec[:n], vec[n:]
                return np.array([[g(q, p) for g in row] for row in _grads])

        epsilon = PhaseMap(eps_eval, eps_jac)

    symmetry = None
    if spec.symmetry is not None:
        symmetry = TranslationSymmetry([i - 1 for i in spec.symmetry], n)
        phase_probes = [PhasePoint(q, np.linspace(0.1, 0.7, n)) for q in probes]
        residual = data_invariance_residual(symmetry, dist, ham, mag, phase_probes)
        if residual > Tolerances(spec.tolerances).get("invariance"):
            raise ScenarioError(
                "invariance",
                f"declared cyclic coordinates are not cyclic (residual "
                f"{residual:.3e})", field="symmetry")

    initial_state = None
    if spec.initial_state is not None:
        initial_state = PhasePoint(spec.initial_state["q"], spec.initial_state["p"])

    return System(spec=spec, ham=ham, mag=mag, dist=dist, gamma=gamma,
                  epsilon=epsilon, symmetry=symmetry,
                  tolerances=Tolerances(spec.tolerances),
                  initial_state=initial_state)


def load_system(path):
    return build_system(load_scenario(path))


# -- induced-field construction ----------------------------------------------


def construct_induced_scenario(spec):
    """New scenario whose two-form is minus the section's exterior derivative.

    The potential is replaced so the Hamiltonian is constant along the
    section; together with the induced two-form this makes the section an
    exact Type I solution of the new system. Requires a constant mass
    matrix (identity or numeric) so the matched potential stays a closed
    form.
    """
    if spec.gamma is None:
        raise ScenarioError("missing_field",
                            "construct-b needs a scenario with gamma", "gamma")
    n = spec.n
    qn = ex.config_names(n)
    if spec.mass_matrix == "identity":
        inverse = np.eye(n)
    else:
        all_literal = all(_entry_is_literal(v) for row in spec.mass_matrix
                          for v in row)
        if not all_literal:
            raise ScenarioError(
                "unsupported", "construct-b needs a constant mass matrix",
                "mass_matrix")
        inverse = np.linalg.inv(np.asarray(spec.mass_matrix, dtype=float))
    nodes = [_parse_entry(v, qn, f"gamma[{i}]") for i, v in enumerate(spec.gamma)]
    partials = [[ex.derivative(nodes[i], f"q{j + 1}") for j in range(n)]
                for i in range(n)]

    b_rows = []
    for i in range(n):
        row = []
        for j in range(n):
            if i == j:
                row.append("0")
            else:
                # induced two-form entry: d(gamma_i)/dq_j - d(gamma_j)/dq_i
                node = ex.subtract(partials[i][j], partials[j][i])
                row.append(ex.to_text(node))
        b_rows.append(row)

    matched = ex.Num(0.0)
    for i in range(n):
        for j in range(n):
            if inverse[i, j] == 0.0:
                continue
            term = ex.multiply(ex.Num(-0.5 * inverse[i, j]),
                               ex.multiply(nodes[i], nodes[j]))
            matched = ex.add(matched, term)

    raw = spec.to_dict()
    raw["name"] = spec.name + "-induced"
    raw["b_field"] = b_rows
    raw["potential"] = ex.to_text(matched)
    new_spec = parse_scenario(json.dumps(raw))
    try:
        system = build_system(new_spec)
    except ScenarioError as err:
        if err.code != "invariance":
            raise
        raw.pop("symmetry", None)
        new_spec = parse_scenario(json.dumps(raw))
        system = build_system(new_spec)
    return new_spec, system


# -- check reports -------------------------------------------------------------


@dataclass
class CheckReport:
    """One check's outcome on one scenario, serializable both ways."""

    scenario: str
    check: str
    verdict: str
    data: dict
    wall_time_s: float = 0.0

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "check": self.check,
            "verdict": self.verdict,
            "data": self.data,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(raw["scenario"], raw["check"], raw["verdict"],
                   raw["data"], raw.get("wall_time_s", 0.0))

    def table_row(self):
        return f"{self.scenario:<24} {self.check:<16} {self.verdict:<8}"


def reports_to_json(reports):
    counts = {"PASS": 0, "FAIL": 0, "VACUOUS": 0}
    for report in reports:
        counts[report.verdict] = counts.get(report.verdict, 0) + 1
    payload = {
        "schema_version": SCHEMA_VERSION,
        "summary": counts,
        "reports": [report.to_dict() for report in reports],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def reports_from_json(text):
    payload = json.loads(text)
    return [CheckReport.from_dict(raw) for raw in payload["reports"]]


class timed_check:
    """Context manager stamping wall time onto a freshly built report."""

    def __init__(self):
        self.start = None
        self.elapsed = 0.0

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False


# public alias for the expression evaluator (part of the file-format surface)
expression_eval = ex.evaluate_text
