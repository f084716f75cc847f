import mpmath
import pytest
from mpmath import mp, mpf

from corpus import (
    COS_X, SIN_X, HALF_PI, I_0_HALfPI, I_SYM_PI, impl1, impl2, impl3, impl4,
    impl5, impl6, impl_s, I_TINY,
)
from mlm.checker import (
    CheckConfig, CheckError, Obligation, check, infnorm, obligations_of,
    sample_check,
)
from mlm.dsl import Approx, Left, Periodic, Right, SplitDom, polynomial, type_of
from mlm.symexpr import (
    Expr, X, Y, add, call, interval, mul, neg, rat, sub, var, PI, LOG2,
)

FAST = CheckConfig(sample_points=512, grid_points=513, segments=64, bisections=40)


def statuses(report):
    return {r.obligation.origin: r.status for r in report.results}


def test_impl2_approx_accepted_at_002():
    rep = check(impl2, FAST)
    assert rep.verdict == "ok"


def test_impl2_rejected_at_001():
    tight = Approx(COS_X, I_0_HALfPI, rat("1/100"), impl1)
    rep = check(tight, FAST)
    assert rep.verdict == "failed"
    (res,) = rep.results
    assert res.status == "failed" and res.witness is not None
    # witness is a concrete counterexample: |cos - p| > 0.01 there
    x = res.witness["x"]
    err = abs(mpf(res.witness["error"]))
    assert err > mpf("0.01")


def test_impl5_all_obligations_pass():
    rep = check(impl5, FAST)
    assert rep.verdict == "ok"
    assert all(r.status in ("proven", "passed-unsound") for r in rep.results)


def test_impl6_split_coverage():
    rep = check(impl6, FAST)
    assert rep.verdict == "ok"
    kinds = [r.obligation.kind for r in rep.results]
    assert "coverage" in kinds


def test_sign_flipped_reconstruction_fails_with_witness():
    bad = Left(neg(X), impl2, neg(Y))  # cos is even: t must be y, not -y
    rep = check(bad, FAST)
    assert rep.verdict == "failed"
    eq = [r for r in rep.results if r.obligation.kind == "equality"][0]
    assert eq.status == "failed"
    assert eq.witness is not None


def test_wrong_reduction_direction_fails():
    bad = Right(neg(X), impl2, Y)  # -x maps [pi/2, pi] outside [0, pi/2]
    rep = check(bad, FAST)
    assert rep.verdict == "failed"
    cont = [r for r in rep.results if r.obligation.kind == "containment"][0]
    assert cont.status == "failed"


def test_split_gap_detected():
    gap = SplitDom(
        (
            (I_TINY, impl_s),
            (
                interval(1, PI),
                Approx(COS_X, interval(1, PI), rat(1), polynomial({0: 0})),
            ),
        )
    )
    rep = check(gap, FAST)
    cov = [r for r in rep.results if r.obligation.kind == "coverage"][0]
    assert cov.status == "failed"


def test_obligations_preorder_and_complete():
    obs = obligations_of(impl5)
    kinds = [(o.kind, o.origin) for o in obs]
    assert kinds[0][1].startswith("left")
    assert kinds[2][1].startswith("right")
    assert kinds[-1] == ("bound", "approx error bound")
    assert len(obs) == 5


def test_periodic_obligation_k_quantified():
    body = Approx(EXP := call("exp", X), interval(0, LOG2), rat(1), polynomial({0: 1}))
    term = Periodic(LOG2, body, Expr("ldexp", (Y, var("k"))))
    obs = obligations_of(term)
    per = [o for o in obs if o.origin.startswith("periodic")][0]
    assert per.int_var == "k"
    rep = check(term, FAST)
    per_res = [r for r in rep.results if r.obligation.origin.startswith("periodic")][0]
    assert per_res.status == "proven"  # exp(x + k log 2) = 2^k exp(x) via rules


def test_infnorm_taylor_cos():
    taylor = type_of(impl1).target
    r = infnorm(Expr("-", (COS_X, taylor)), I_0_HALfPI)
    assert abs(r.lower - mpf("0.019968957712")) < mpf("1e-9")
    assert r.lower <= r.upper
    with mp.workprec(256):
        assert abs(r.argmax - mpmath.pi / 2) < mpf("1e-6")


def test_infnorm_x_minus_sin():
    r = infnorm(Expr("-", (X, SIN_X)), interval("-1/10", "1/10"), FAST)
    assert abs(r.lower - mpf("1.6658335e-4")) < mpf("1e-9")


def test_infnorm_zero():
    r = infnorm(rat(0), interval(0, 1), FAST)
    assert r.lower == 0
    assert r.upper < mpf(2) ** -100


def test_infnorm_bounds_analytic_corpus():
    cases = [
        (mul(X, X), interval(-1, 2), mpf(4)),  # x^2, max at 2
        (SIN_X, interval(0, PI), mpf(1)),
        (X, interval("-1/2", "1/4"), mpf("0.5")),
    ]
    for e, iv, true_max in cases:
        r = infnorm(e, iv, FAST)
        assert r.lower <= true_max * (1 + mpf(2) ** -40)
        assert r.upper >= true_max * (1 - mpf(2) ** -40)


def test_infnorm_singular_expression_raises():
    with pytest.raises(CheckError):
        infnorm(call("log", neg(mul(X, X))), interval(1, 2), FAST)


def test_sampling_passes_true_identity():
    ob = Obligation(
        "equality", "test", "x", I_SYM_PI, SIN_X, neg(call("sin", neg(X)))
    )
    res = sample_check(ob, FAST)
    assert res.status == "passed-unsound"


def test_sampling_finds_witness():
    ob = Obligation("equality", "test", "x", interval(-1, 1), SIN_X, X)
    res = sample_check(ob, FAST)
    assert res.status == "failed"
    assert abs(res.witness["x"]) > mpf("0.1")  # sin(x) ~ x near 0; witness away from it


def test_sampling_deterministic():
    ob = Obligation("equality", "test", "x", interval(-1, 1), SIN_X, X)
    r1 = sample_check(ob, FAST)
    r2 = sample_check(ob, FAST)
    assert r1.witness == r2.witness


def test_report_json_shape():
    rep = check(impl3, FAST)
    js = rep.to_json()
    assert js["verdict"] == "ok"
    assert all({"kind", "quantifier", "status", "backend"} <= set(o) for o in js["obligations"])
