import itertools

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from hypcs.exprcalc import (ExprDomainError, ExprSyntaxError, Jet,
                            UndeclaredVariableError, evaluate, jet_eval,
                            parse_expr, pretty)
from hypcs.exprcalc import jets


def test_grammar_smoke():
    e = parse_expr("x^2/2", ["x"])
    assert evaluate(e, {"x": 3.0}) == pytest.approx(4.5)


def test_guarded_division_raises_domain_error():
    e = parse_expr("1/y2", ["y1", "y2"])
    with pytest.raises(ExprDomainError) as info:
        evaluate(e, {"y1": 0.0, "y2": 0.0})
    assert "division" in str(info.value)


def test_exp_log_value():
    e = parse_expr("exp(2*log(y2))", ["y2"])
    assert evaluate(e, {"y2": 3.0}) == pytest.approx(9.0, abs=1e-12)


@pytest.mark.parametrize("source, offset", [
    ("x +* 2", 3),
    ("(x + 1", 6),
    ("x $ 2", 2),
    ("-x^2", 2),
    ("sin x", 4),
])
def test_syntax_error_offsets(source, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr(source, ["x"])
    assert info.value.offset == offset


def test_undeclared_variable_named():
    with pytest.raises(UndeclaredVariableError) as info:
        parse_expr("y1 + w", ["y1", "y2"])
    assert info.value.name == "w"
    assert info.value.offset == 5


@pytest.mark.parametrize("source", ["log(y2 - 1)", "sqrt(y2 - 1)",
                                    "y1/(y2 - 1)", "(y2 - 1)^(-2)"])
def test_domain_errors_name_the_node(source):
    e = parse_expr(source, ["y1", "y2"])
    with pytest.raises(ExprDomainError) as info:
        jet_eval(e, {"y1": 0.5, "y2": 1.0})
    assert "y2" in str(info.value)


def test_reserved_names_rejected():
    with pytest.raises(ValueError):
        parse_expr("i", ["i"])


@pytest.mark.parametrize("source", [
    "x^2/2", "-log(y2)", "exp(2*pi*i*x)*3.5e-2", "re(x)+im(y2)*conj(x)",
    "-(x^2)", "(-x)^3", "sinh(cosh(x))/sqrt(y2)", "1-2-3", "8/4/2",
])
def test_pretty_round_trip(source):
    e = parse_expr(source, ["x", "y2"])
    again = parse_expr(pretty(e), ["x", "y2"])
    assert again == e


def test_left_associativity():
    assert evaluate(parse_expr("1-2-3", []), {}) == -4
    assert evaluate(parse_expr("8/4/2", []), {}) == 1


def test_jet_of_variable():
    j = jet_eval(parse_expr("y2", ["y2"]), {"y2": 5.0}, 2)
    assert j.value == 5 and j.d(0) == 1 and j.d(0, 0) == 0


def test_inverse_square_jet():
    j = jet_eval(parse_expr("1/y2^2", ["y2"]), {"y2": 2.0}, 2)
    assert j.value == pytest.approx(0.25)
    assert j.d(0) == pytest.approx(-0.25)
    assert j.d(0, 0) == pytest.approx(0.375)


def test_sin_cosh_jet():
    j = jet_eval(parse_expr("sin(y1)*cosh(y2)", ["y1", "y2"]),
                 {"y1": 0.0, "y2": 0.0}, 2)
    assert abs(j.value) == 0
    assert j.d(0) == pytest.approx(1.0)
    assert abs(j.d(1)) == 0


def _random_poly(rng, names, degree):
    terms = []
    for exps in itertools.product(range(degree + 1), repeat=len(names)):
        if sum(exps) <= degree and rng.random() < 0.6:
            coef = int(rng.integers(-5, 6))
            mono = "*".join(f"{n}^{k}" for n, k in zip(names, exps) if k)
            terms.append(f"({coef})" + (f"*{mono}" if mono else ""))
    return " + ".join(terms) or "0"


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("order", [2, 3])
def test_polynomial_jets_match_symbolic(seed, order):
    rng = np.random.default_rng(seed)
    names = ["x", "y", "z"]
    src = _random_poly(rng, names, 4)
    point = {n: int(rng.integers(-3, 4)) for n in names}
    j = jet_eval(parse_expr(src, names), point, order)
    syms = sympy.symbols(names)
    poly = sympy.sympify(src.replace("^", "**"), locals=dict(zip(names, syms)))
    subs = {s: point[n] for s, n in zip(syms, names)}
    for m in j.space.monomials:
        expected = sympy.diff(poly, *[s for s, k in zip(syms, m)
                                      for _ in range(k)]) if sum(m) else poly
        assert j.partial(m) == complex(int(expected.subs(subs)))


SMOOTH = ["exp(x)*sin(y)", "log(x)*cosh(y) + sqrt(x)/y", "x^3*y - y^2/x",
          "sinh(x*y)*cos(x)", "(x+2*y)^(1.5)", "exp(i*x*y)/(1+x^2)"]


@pytest.mark.parametrize("src", SMOOTH)
def test_jets_agree_with_central_differences(src):
    e = parse_expr(src, ["x", "y"])
    p = {"x": 1.3, "y": 0.7}
    j = jet_eval(e, p, 1)
    h = 1e-5
    for k, name in enumerate(["x", "y"]):
        up, dn = dict(p), dict(p)
        up[name] += h
        dn[name] -= h
        fd = (evaluate(e, up) - evaluate(e, dn)) / (2 * h)
        assert abs(j.d(k) - fd) <= 1e-8 * (1 + abs(j.d(k)))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-2.0, 2.0))
def test_leibniz_and_chain_rules(x, y):
    sp = jets.jet_space(2, 3)
    u = Jet.variable(sp, 0, x)
    v = Jet.variable(sp, 1, y)
    f = jets.exp(u * v)
    g = jets.log(u) * jets.sin(v)
    lhs = f * g
    assert lhs.d(0) == pytest.approx(f.d(0) * g.value + f.value * g.d(0))
    assert lhs.d(0, 1) == pytest.approx(
        f.d(0, 1) * g.value + f.d(0) * g.d(1) + f.d(1) * g.d(0)
        + f.value * g.d(0, 1))
    # chain rule on exp(u v): d/dx = v e^{uv}, d2/dx2 = v^2 e^{uv}
    assert f.d(0, 0, 1) == pytest.approx(
        (2 * y + x * y * y) * np.exp(x * y))


def test_matrix_inverse_jet():
    sp = jets.jet_space(2, 3)
    x, y = Jet.variable(sp, 0, 0.3), Jet.variable(sp, 1, -0.4)
    m = jets.stack([jets.stack([1 + x * x, y]), jets.stack([x * y, 2 + jets.sin(y)])])
    prod = jets.inv(m) @ m
    assert np.allclose(prod.c[0], np.eye(2))
    assert np.allclose(prod.c[1:], 0, atol=1e-13)


def test_batched_jets():
    e = parse_expr("x^2*y", ["x", "y"])
    xs = np.linspace(1, 2, 5)
    j = jet_eval(e, {"x": xs, "y": 3.0 * np.ones(5)}, 2)
    assert np.allclose(j.d(0), 6 * xs)
    assert np.allclose(j.d(0, 0), 6.0)


def test_diff_lowers_order_exactly():
    sp = jets.jet_space(2, 3)
    x, y = Jet.variable(sp, 0, 0.5), Jet.variable(sp, 1, 0.25)
    f = jets.exp(x) * y ** 3
    fx = f.diff(0)
    assert fx.order == 2
    assert fx.d(1, 1) == pytest.approx(f.d(0, 1, 1))
