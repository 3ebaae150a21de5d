import pytest

from magnomech import expression_eval
from magnomech.errors import ExpressionError
from magnomech import expressions as ex


def test_phase_expression_value():
    value = expression_eval("q1*p2 + sin(q2)", [0.0, 1.5707963], [0.0, 3.0])
    assert value == pytest.approx(1.0, abs=1e-9)


def test_fd_gradient_by_repeated_calls():
    # the file-format contract: differentiation is possible by re-evaluating
    h = 1e-6
    q = [1.0, 2.0, 3.0]
    grad = []
    for i in range(3):
        up = list(q)
        down = list(q)
        up[i] += h
        down[i] -= h
        grad.append((expression_eval("q3 - q1*q2", up)
                     - expression_eval("q3 - q1*q2", down)) / (2 * h))
    assert grad == pytest.approx([-2.0, -1.0, 1.0], abs=1e-6)


def test_parse_error_carries_position():
    with pytest.raises(ExpressionError) as err:
        ex.parse("q1 +")
    assert err.value.position == 4


def test_unknown_identifier_rejected():
    with pytest.raises(ExpressionError, match="unknown identifier"):
        expression_eval("q1 + bogus", [1.0])


def test_unknown_function_rejected():
    with pytest.raises(ExpressionError, match="unknown function"):
        ex.parse("tan(q1)")


def test_division_by_zero_reported():
    with pytest.raises(ExpressionError, match="division by zero"):
        expression_eval("1/q1", [0.0])


@pytest.mark.parametrize("text,expected", [
    ("2^3^2", 512.0),          # right associative power
    ("2*3 + 4", 10.0),
    ("-2^2", -4.0),            # unary minus binds below the power
    ("2^-2", 0.25),
    ("6/3/2", 1.0),            # left associative division
    ("1 - 2 - 3", -4.0),
    ("cos(0) + exp(0)", 2.0),
])
def test_precedence_and_associativity(text, expected):
    assert expression_eval(text, [0.0]) == pytest.approx(expected)


@pytest.mark.parametrize("text", [
    "q1^3 - 2*q2*q1 + sin(q1*q2)",
    "exp(-(q1^2)) * cos(q2)",
    "(q1 + q2)^4 / (1 + q1^2)",
])
def test_symbolic_derivative_matches_finite_differences(text):
    node = ex.parse(text)
    fn = ex.compile_node(node)
    d1 = ex.compile_node(ex.derivative(node, "q1"))
    h = 1e-6
    for q in ([0.3, -0.8], [1.1, 0.4]):
        fd = (fn([q[0] + h, q[1]]) - fn([q[0] - h, q[1]])) / (2 * h)
        assert d1(q) == pytest.approx(fd, rel=1e-7, abs=1e-7)


def test_nonconstant_exponent_has_no_symbolic_derivative():
    with pytest.raises(ExpressionError, match="exponent"):
        ex.derivative(ex.parse("q1^q2"), "q1")


@pytest.mark.parametrize("text", [
    "q1*p2 + sin(q2)",
    "-(q1 - q2)^3 / 2 + exp(q1/4)",
    "1.5e-3 * q1 - 0.25",
    "2^3^2 - q1*(q2 - 3)",
])
def test_printer_round_trips(text):
    node = ex.parse(text)
    assert ex.parse(ex.to_text(node)) == node


def test_evaluation_is_deterministic():
    args = ("q1^2 - sin(q2)*exp(q1)", [0.37, -1.22])
    assert expression_eval(*args) == expression_eval(*args)


def test_compiled_matches_tree_walker():
    node = ex.parse("q1^3 - 2*p1*q2 + cos(q1)")
    fn = ex.compile_node(node)
    env = {"q1": 0.7, "q2": -0.3, "p1": 1.2}
    assert fn([0.7, -0.3], [1.2]) == pytest.approx(ex.evaluate(node, env))


def test_constant_folding_keeps_value():
    node = ex.parse("0*q1 + 1*(q2 - 0) + 2*3")
    assert ex.evaluate(node, {"q1": 9.0, "q2": 4.0}) == pytest.approx(10.0)
