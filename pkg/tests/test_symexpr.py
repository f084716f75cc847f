import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from mlm.symexpr import (
    PI, X, add, call, const_eq, differentiate, div, eval_interval,
    eval_point, format_expr, interval, mul, neg, parse_expr, pow_int, rat,
    simplify, sub, substitute, var, NonDifferentiableError,
)


def poly_cos_taylor():
    # 1 - x^2/2 + x^4/24
    return add(sub(rat(1), div(pow_int(X, 2), rat(2))), div(pow_int(X, 4), rat(24)))


def test_eval_cos_at_zero():
    assert eval_point(call("cos", X), {"x": 0}, 256) == 1


def test_eval_taylor_poly_at_half_pi():
    # independent oracle: raw mpmath arithmetic, no Expr machinery
    with mp.workprec(300):
        t = mpmath.pi / 2
        expected = 1 - t ** 2 / 2 + t ** 4 / 24
    with mp.workprec(256):
        x = +mpmath.pi / 2
    got = eval_point(poly_cos_taylor(), {"x": x}, 256)
    assert abs(got - expected) < mpf(2) ** -240
    assert mpmath.nstr(got, 8) == "0.019968958"


def test_eval_simplifies_to_4pi_squared():
    # 16*pi*x - 16*x^2 at x = pi/2 equals 4 pi^2
    e = sub(mul(mul(rat(16), PI), X), mul(rat(16), pow_int(X, 2)))
    with mp.workprec(280):
        x = +mpmath.pi / 2
        expected = 4 * mpmath.pi ** 2
    got = eval_point(e, {"x": x}, 256)
    assert abs(got - expected) < mpf(2) ** -240


def test_eval_domain_errors_are_tagged():
    assert eval_point(call("log", X), {"x": -1}, 256) is None
    assert eval_point(div(rat(1), X), {"x": 0}, 256) is None
    assert eval_point(call("sqrt", X), {"x": -4}, 256) is None
    assert eval_point(call("asin", X), {"x": 2}, 256) is None


def test_eval_stability_double_precision():
    # rounding the 2p-bit result to p bits matches the p-bit result
    exprs = [
        poly_cos_taylor(),
        call("sin", mul(PI, X)),
        call("exp", sub(X, rat(1))),
        div(call("log", add(rat(1), X)), add(rat(2), X)),
    ]
    for e in exprs:
        for xv in ("0.125", "0.7", "1.375"):
            hi = eval_point(e, {"x": mpf(xv)}, 512)
            lo = eval_point(e, {"x": mpf(xv)}, 256)
            with mp.workprec(256):
                assert +hi == lo


def test_interval_integer_power_is_range_tight():
    r = eval_interval(pow_int(X, 2), {"x": (-1, 2)}, 256)
    assert r.lo <= 0 and r.hi >= 4
    assert abs(r.lo) < mpf(2) ** -200 and r.hi - 4 < mpf(2) ** -200


def test_interval_naive_product_may_be_loose():
    r = eval_interval(mul(X, X), {"x": (-1, 2)}, 256)
    assert r.lo <= -2 + mpf(2) ** -200 and r.hi >= 4 - mpf(2) ** -200


def test_interval_sin_over_half_period():
    with mp.workprec(280):
        hi = +mpmath.pi
    r = eval_interval(call("sin", X), {"x": (0, hi)}, 256)
    assert abs(r.lo) < mpf(2) ** -40
    assert abs(r.hi - 1) < mpf(2) ** -40


def test_interval_flags_singularities():
    r = eval_interval(div(rat(1), X), {"x": (-1, 1)}, 256)
    assert r.bad
    r = eval_interval(call("log", X), {"x": (0, 1)}, 256)
    assert r.bad


def test_differentiate_cos():
    d = differentiate(call("cos", X), "x")
    assert d == neg(call("sin", X))


def test_differentiate_product_rule():
    d = differentiate(mul(X, call("exp", X)), "x")
    assert d == add(call("exp", X), mul(X, call("exp", X)))


def test_differentiate_matches_finite_differences():
    e = call("log", add(rat(1), X))
    d = differentiate(e, "x")
    x0 = mpf("0.7")
    with mp.workprec(300):
        h = mpf(2) ** -40
        f = lambda t: eval_point(e, {"x": t}, 300)
        fd = (f(x0 + h) - f(x0 - h)) / (2 * h)
    sym = eval_point(d, {"x": x0}, 300)
    assert abs(sym - fd) / abs(sym) < mpf(10) ** -6
    with mp.workprec(300):
        # x0 is the double nearest 0.7, so compare at double-rounding scale
        assert abs(sym - mpf(10) / 17) < mpf(10) ** -15


def test_differentiate_floor_rejected():
    with pytest.raises(NonDifferentiableError):
        differentiate(call("floor", X), "x")


def test_substitute_examples():
    assert substitute(call("cos", X), "x", neg(X)) == call("cos", neg(X))
    assert substitute(X, "x", X) == X
    s = var("s")
    f = var("f")
    core = sub(call("log", add(rat(1), s)), call("log", sub(rat(1), s)))
    got = substitute(core, "s", div(f, add(rat(2), f)))
    red = div(f, add(rat(2), f))
    assert got == sub(call("log", add(rat(1), red)), call("log", sub(rat(1), red)))


def test_substitute_then_eval_composes():
    e = mul(X, add(X, rat(1)))
    r = call("exp", var("u"))
    composed = substitute(e, "x", r)
    uv = mpf("0.3")
    direct = eval_point(composed, {"u": uv}, 256)
    inner = eval_point(r, {"u": uv}, 256)
    outer = eval_point(e, {"x": inner}, 256)
    assert abs(direct - outer) < mpf(2) ** -240


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["sin", "cos", "exp", "sqrt", "asin"]),
    st.floats(min_value=-0.9, max_value=0.9),
    st.floats(min_value=0.01, max_value=0.5),
)
def test_interval_encloses_points(fn, center, halfwidth):
    lo, hi = center - halfwidth, center + halfwidth
    if fn in ("sqrt",) and lo < 0:
        lo = 0.0
        hi = max(hi, 1e-6)
    e = call(fn, X)
    box = eval_interval(e, {"x": (lo, hi)}, 128)
    for t in (lo, (lo + hi) / 2, hi):
        v = eval_point(e, {"x": mpf(t)}, 128)
        if v is not None:
            assert box.lo <= v <= box.hi


def test_parse_format_roundtrip():
    for text in [
        "(- 1 (cos x))",
        "(+ (- 1 (/ (pow x 2) 2)) (/ (pow x 4) 24))",
        "(ldexp y k)",
        "(fma (neg s) f f)",
        "3/4",
        "(* 2 pi)",
        "-inf",
    ]:
        e = parse_expr(text)
        canon = format_expr(e)
        assert format_expr(parse_expr(canon)) == canon


def test_parse_decimals_exactly():
    assert parse_expr("0.25") == rat("1/4")
    assert parse_expr("1.5e-3") == rat("3/2000")
    assert parse_expr("-0.5") == rat("-1/2")


def test_simplify_folds_rationals():
    assert simplify(add(rat(1), rat(1))) == rat(2)
    assert simplify(mul(X, rat(1))) == X
    assert simplify(add(X, rat(0))) == X
    assert simplify(neg(neg(X))) == X


def test_const_eq_symbolic():
    assert const_eq(div(PI, rat(2)), mul(rat("1/2"), PI))
    assert not const_eq(div(PI, rat(2)), PI)
    assert const_eq(rat("1/3"), div(rat(1), rat(3)))


def test_interval_midpoint():
    iv = interval(0, div(PI, rat(2)))
    m = iv.midpoint()
    assert const_eq(m, div(PI, rat(4)))
