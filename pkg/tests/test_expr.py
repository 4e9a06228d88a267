import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from condlab.errors import SchemaError
from condlab.expr import Expression, matrix_field, parse, radial_profile, to_text


@pytest.mark.parametrize(
    "src,env,value",
    [
        ("1 + 2*3", {}, 7.0),
        ("2^3^2", {}, 512.0),
        ("-x1^2", {"x1": 3.0}, -9.0),
        ("exp(log(x1))", {"x1": 2.5}, 2.5),
        ("sqrt(x1) * cosh(0) - sinh(0)", {"x1": 16.0}, 4.0),
        ("sin(pi/2) + cos(pi)", {}, 0.0),
        ("x1 ** 2 / 4", {"x1": 2.0}, 1.0),
    ],
)
def test_evaluation(src, env, value):
    e = Expression.compile(src, ("x1",))
    assert float(e(**env)) == pytest.approx(value)


@pytest.mark.parametrize(
    "src",
    ["__import__('os')", "x1.real", "x1[0]", "lambda: 1", "abs(x1)", "exp(x1, 2)", "x1 if x1 else 0", "y + 1",
     "x1 % 2", "", "1 +", "'text'", "True"],
)
def test_rejects_outside_grammar(src):
    with pytest.raises(SchemaError):
        parse(src, ("x1",))


def test_symbolic_derivatives():
    e = Expression.compile("t^3 + exp(2*t) * sin(t) + log(t) + sqrt(t) + t^t", ("t",))
    d = e.derivative("t")
    t = 1.3
    want = 3 * t * t + math.exp(2 * t) * (2 * math.sin(t) + math.cos(t)) + 1 / t + 0.5 / math.sqrt(t) \
        + t**t * (math.log(t) + 1)
    assert float(d(t=t)) == pytest.approx(want, rel=1e-12)


_atoms = st.sampled_from(["t", "2", "0.5", "(t + 1)"])
_unary = st.sampled_from(["exp", "sin", "cos", "sinh", "cosh"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0:
        return draw(_atoms)
    kind = draw(st.integers(0, 3))
    if kind == 0:
        return draw(_atoms)
    if kind == 1:
        return f"{draw(_unary)}({draw(expressions(depth=depth - 1))})"
    op = draw(st.sampled_from(["+", "-", "*"]))
    return f"({draw(expressions(depth=depth - 1))} {op} {draw(expressions(depth=depth - 1))})"


@given(expressions(), st.floats(-0.8, 0.8))
def test_derivative_matches_finite_difference(src, t):
    e = Expression.compile(src, ("t",))
    d = e.derivative("t")
    h = 1e-5
    fd = (float(e(t=t + h)) - float(e(t=t - h))) / (2 * h)
    exact = float(d(t=t))
    assert exact == pytest.approx(fd, rel=1e-5, abs=1e-5 * max(1.0, abs(float(e(t=t)))))


@given(expressions())
def test_printed_form_round_trips(src):
    e = Expression.compile(src, ("t",))
    again = Expression.compile(to_text(e.node), ("t",))
    for t in (-0.5, 0.1, 0.7):
        assert float(again(t=t)) == pytest.approx(float(e(t=t)), rel=1e-12, abs=1e-12)


def test_radial_profile_derivatives():
    p = radial_profile("sinh(t) + t^3/10")
    t = np.array([0.5, 1.0, 2.0])
    assert np.allclose(p(t), np.sinh(t) + t**3 / 10)
    assert np.allclose(p.d1(t), np.cosh(t) + 0.3 * t * t)
    assert np.allclose(p.d2(t), np.sinh(t) + 0.6 * t)
    assert np.allclose(radial_profile("r^2").d1(t), 2 * t)
    assert np.allclose(radial_profile("3").d2(t), 0.0)
    with pytest.raises(SchemaError):
        radial_profile("r + t")


def test_matrix_field():
    W = matrix_field([["1 + x1^2", "x2"], ["x2", "exp(r)"]], 2)
    x = np.array([[1.0, 2.0], [0.0, 0.0]])
    out = W(x)
    assert out.shape == (2, 2, 2)
    assert np.allclose(out[0], [[2.0, 2.0], [2.0, math.exp(math.sqrt(5))]])
    assert np.allclose(out[1], [[1.0, 0.0], [0.0, 1.0]])
    polar = matrix_field([["1", "0"], ["0", "r^2"]], 2, radius=lambda y: y[..., 0])
    assert np.allclose(polar(np.array([3.0, 1.0])), np.diag([1.0, 9.0]))
    with pytest.raises(SchemaError):
        matrix_field([["1", "0"]], 2)
