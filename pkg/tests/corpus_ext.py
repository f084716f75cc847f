"""Fitted, full-pipeline implementations shared by compiler, bench, and
acceptance tests.  Builders are cached: fitting runs once per session."""

from fractions import Fraction
from functools import lru_cache

import mpmath
from mpmath import mp, mpf

from mlm.checker import CheckConfig, infnorm
from mlm.dsl import (
    Approx, Arith, Compose, Left, Logarithmic, Periodic, Polynomial, Rewrite,
    Right, SplitDom, TuningParams, polynomial,
)
from mlm.polyfit import FitRequest, remez_fit
from mlm.symexpr import (
    Expr, LOG2, PI, X, Y, add, call, div, interval, mpf_to_expr, mul, neg,
    pow_int, rat, sub, var,
)


def _poly_from_fit(coeffs) -> Polynomial:
    return Polynomial(tuple(sorted((p, mpf_to_expr(c)) for p, c in coeffs.items())))


@lru_cache(maxsize=None)
def exp_periodic():
    """exp over the full line: periodic reduction by log 2, ldexp rebuild."""
    dom = interval(0, LOG2)
    r = remez_fit(FitRequest(call("exp", X), dom, degree=13, parity="any"))
    body = Approx(call("exp", X), dom, mpf_to_expr(r.error_bound), _poly_from_fit(r.coefficients))
    return Periodic(LOG2, body, Expr("ldexp", (Y, var("k"))))


@lru_cache(maxsize=None)
def sin_quadrant():
    """sin over the full line with a mod-2 reconstruction switch."""
    half_pi = div(PI, rat(2))
    dom = interval(0, half_pi)
    r = remez_fit(FitRequest(call("sin", X), dom, powers=[1, 3, 5, 7, 9, 11, 13]))
    core = Approx(call("sin", X), dom, mpf_to_expr(r.error_bound), _poly_from_fit(r.coefficients))
    body = Right(sub(PI, X), core, Y)  # sin(pi - x) = sin(x)
    return Periodic(PI, body, mul(Y, call("cos", mul(PI, var("k")))))


@lru_cache(maxsize=None)
def asin_right():
    """asin on [0, 1]: the classic sqrt((1-x)/2) fold onto [0, 1/2]."""
    dom = interval(0, rat("1/2"))
    r = remez_fit(FitRequest(call("asin", X), dom, powers=[1, 3, 5, 7, 9, 11]))
    core = Approx(call("asin", X), dom, mpf_to_expr(r.error_bound), _poly_from_fit(r.coefficients))
    s = call("sqrt", div(sub(rat(1), X), rat(2)))
    t = sub(div(PI, rat(2)), mul(rat(2), Y))
    return Right(s, core, t)


@lru_cache(maxsize=None)
def log_like_fdlibm():
    """Natural log structured like fdlibm: exponent split, f = x - 1,
    s = f/(2+f), odd core with the leading 2s evaluated by fma rewrite,
    double-double core arithmetic, y + k log 2 reconstruction."""
    sqrt2 = call("sqrt", rat(2))
    x_dom = interval(div(rat(1), sqrt2), sqrt2)
    f = var("f")
    s = var("s")
    f_lo = sub(div(rat(1), sqrt2), rat(1))
    f_hi = sub(sqrt2, rat(1))
    f_dom = interval(f_lo, f_hi)
    s_dom = interval(rat("-18/100"), rat("18/100"))

    # core target in s: log(1+s) - log(1-s), odd; fix the leading 2s term
    core_target = sub(call("log", add(rat(1), s)), call("log", sub(rat(1), s)))
    fit = remez_fit(
        FitRequest(core_target, s_dom, powers=[3, 5, 7, 9, 11, 13, 15], fixed={1: rat(2)}, var="s")
    )
    # R(s) = (core - 2s)/s uses the same coefficients shifted down a power
    r_coeffs = {p - 1: c for p, c in fit.coefficients.items() if p != 1}
    r_poly = _poly_from_fit(r_coeffs)
    r_target = div(sub(core_target, mul(rat(2), s)), s)
    r_eps = infnorm(
        sub(r_target, _poly_expr_in(r_coeffs, "s")), s_dom, CheckConfig(), "s"
    ).lower * (1 + mpf(2) ** -20) + mpf(2) ** -200

    dd = TuningParams(prec="dd")
    two_s = Approx(mul(rat(2), s), s_dom, rat(0), polynomial({1: 2}))
    ident_s = Approx(s, s_dom, rat(0), polynomial({1: 1}))
    r_impl = Approx(r_target, s_dom, mpf_to_expr(r_eps), r_poly)
    core_sum = Arith("+", two_s, Arith("*", ident_s, r_impl, dd), dd)
    core = Approx(core_target, s_dom, mpf_to_expr(fit.error_bound), core_sum)
    core_rw = Rewrite(core, mul(rat(2), s), Expr("fma", (neg(s), f, f)))

    # s = f / (2 + f)
    s_of_f = Approx(
        div(f, add(rat(2), f)), f_dom, rat(0),
        Arith(
            "/",
            Approx(f, f_dom, rat(0), polynomial({1: 1})),
            Approx(add(rat(2), f), f_dom, rat(0), polynomial({0: 2, 1: 1})),
        ),
    )
    wide = Approx(call("log", add(rat(1), f)), f_dom, mpf_to_expr(mpf(2) ** -200),
                  Compose("s", s_of_f, core_rw))

    tiny_dom = interval(rat("-19/20000000"), rat("19/20000000"))
    tiny = Approx(
        call("log", add(rat(1), f)), tiny_dom, rat(Fraction(3, 10 ** 25)),
        polynomial({1: 1, 2: "-1/2", 3: "1/3"}),
    )
    split = SplitDom(((tiny_dom, tiny), (f_dom, wide)))

    f_of_x = Approx(sub(X, rat(1)), x_dom, rat(0), polynomial({0: -1, 1: 1}))
    body = Compose("f", f_of_x, split)
    recon = add(Y, mul(var("k"), LOG2))
    return Logarithmic(rat(2), body, recon, dd)


def _poly_expr_in(coeffs, v):
    acc = rat(0)
    xv = var(v)
    for p in sorted(coeffs):
        acc = add(acc, mul(mpf_to_expr(coeffs[p]), pow_int(xv, p)))
    return acc


@lru_cache(maxsize=None)
def vdt_cos_pair():
    """The quadrant-core cos polynomial two ways: the correct split=1
    evaluation and the mis-associated largest-to-smallest variant."""
    q = div(PI, rat(4))
    dom = interval(neg(q), q)
    cos = call("cos", X)
    tail_target = add(sub(cos, rat(1)), div(pow_int(X, 2), rat(2)))
    fit = remez_fit(FitRequest(tail_target, dom, powers=[4, 6, 8, 10, 12, 14]))
    tail_coeffs = dict(fit.coefficients)

    full = dict(tail_coeffs)
    full[0] = mpf(1)
    full[2] = mpf("-0.5")
    correct_poly = Polynomial(
        tuple(sorted((p, mpf_to_expr(c)) for p, c in full.items())),
        TuningParams(split=1),
    )
    eps = _measured_eps(full, dom)
    correct = Approx(cos, dom, mpf_to_expr(eps), correct_poly)

    lead = Approx(
        sub(rat(1), div(pow_int(X, 2), rat(2))), dom, rat(0),
        polynomial({0: 1, 2: "-1/2"}),
    )
    tail_impl = Approx(tail_target, dom, mpf_to_expr(fit.error_bound), _poly_from_fit(tail_coeffs))
    buggy_sum = Arith("+", lead, tail_impl)
    buggy = Approx(cos, dom, mpf_to_expr(eps), buggy_sum)
    return correct, buggy


def _measured_eps(coeffs, dom):
    resid = sub(call("cos", X), _poly_expr_in(coeffs, "x"))
    r = infnorm(resid, dom, CheckConfig())
    return r.lower * (1 + mpf(2) ** -20) + mpf(2) ** -200


@lru_cache(maxsize=None)
def all_corpus():
    from corpus import impl5, impl6

    return {
        "cos_reduced": impl5,
        "cos_split": impl6,
        "exp_periodic": exp_periodic(),
        "sin_quadrant": sin_quadrant(),
        "asin_right": asin_right(),
        "log_fdlibm": log_like_fdlibm(),
        "vdt_cos_correct": vdt_cos_pair()[0],
        "vdt_cos_buggy": vdt_cos_pair()[1],
    }
