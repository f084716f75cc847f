import mpmath
import numpy as np
import pytest
from mpmath import mp, mpf

from mlm.checker import CheckConfig, check, infnorm
from mlm.dsl import Approx, type_of
from mlm.polyfit import (
    FitError, FitRequest, chebyshev_fit, detect_parity, fit, fit_candidates,
    remez_fit, resolve_powers, round_coefficients, run_tool, taylor_fit,
)
from mlm.symexpr import (
    PI, X, add, call, div, eval_point, interval, mul, neg, parse_expr, rat,
    sub, var,
)

COS = call("cos", X)
SIN = call("sin", X)
EXP = call("exp", X)
I_HALF_PI = interval(0, div(PI, rat(2)))


def test_taylor_cos_coefficients_exact():
    r = taylor_fit(FitRequest(COS, I_HALF_PI, tool="taylor", powers=[0, 2, 4]))
    with mp.workprec(256):
        assert abs(r.coefficients[0] - 1) < mpf(2) ** -200
        assert abs(r.coefficients[2] + mpf(1) / 2) < mpf(2) ** -200
        assert abs(r.coefficients[4] - mpf(1) / 24) < mpf(2) ** -200
        assert abs(r.error_bound - mpf("0.0199689577")) < mpf("1e-8")


def test_taylor_identity_is_exact():
    r = taylor_fit(FitRequest(X, interval(-1, 1), tool="taylor", powers=[1]))
    with mp.workprec(256):
        assert abs(r.coefficients[1] - 1) < mpf(2) ** -200
        assert r.error_bound < mpf(2) ** -250


def test_taylor_log1p_leading_terms():
    f = parse_expr("(log (+ 1 x))")
    r = taylor_fit(FitRequest(f, interval("-17/100", "17/100"), tool="taylor", powers=[1, 2, 3]))
    with mp.workprec(256):
        assert abs(r.coefficients[1] - 1) < mpf(2) ** -200
        assert abs(r.coefficients[2] + mpf(1) / 2) < mpf(2) ** -200
        assert abs(r.coefficients[3] - mpf(1) / 3) < mpf(2) ** -200


def test_remez_fig2_coefficient():
    req = FitRequest(COS, I_HALF_PI, powers=[4], fixed={0: rat(1), 2: rat("-1/2")})
    r = remez_fit(req)
    with mp.workprec(256):
        assert abs(r.coefficients[4] - mpf("0.0387248842917668")) < mpf("1e-4")
        assert r.error_bound < mpf("0.0025")
    assert r.converged


def test_remez_identity():
    r = remez_fit(FitRequest(X, interval(-1, 1), powers=[1]))
    with mp.workprec(256):
        assert abs(r.coefficients[1] - 1) < mpf("1e-40")
        assert r.error_bound < mpf("1e-40")


def test_remez_exp_degree11_tight():
    from mlm.symexpr import LOG2

    r = remez_fit(FitRequest(EXP, interval(0, LOG2), degree=13, parity="any"))
    # frozen from an independent oracle run of the dense-grid residual
    assert r.error_bound < mpf(2) ** -60
    assert r.converged


def test_remez_equioscillation():
    req = FitRequest(COS, I_HALF_PI, powers=[0, 2, 4])
    r = remez_fit(req)
    resid = sub(COS, r.poly_expr())
    lo, hi = I_HALF_PI.endpoints(256)
    with mp.workprec(256):
        # at convergence the residual alternates with equal magnitudes
        vals = []
        n = 4096
        prev = None
        ext = []
        for i in range(n + 1):
            x = lo + (hi - lo) * i / n
            v = eval_point(resid, {"x": x}, 256)
            vals.append((x, v))
        mags = [abs(v) for _, v in vals]
        m = max(mags)
        ext = [(x, v) for x, v in vals if abs(v) > m * (1 - mpf("1e-4"))]
        signs = []
        for x, v in ext:
            s = 1 if v > 0 else -1
            if not signs or signs[-1][1] != s:
                signs.append((x, s))
        assert len(signs) >= len([0, 2, 4]) + 1
        ref_mags = [abs(v) for _, v in ext]
        assert max(ref_mags) / min(ref_mags) < 1 + mpf("1e-3")


def test_chebyshev_within_4x_of_remez():
    rr = remez_fit(FitRequest(COS, I_HALF_PI, powers=[0, 1, 2, 3, 4]))
    rc = chebyshev_fit(FitRequest(COS, I_HALF_PI, tool="chebyshev", powers=[0, 1, 2, 3, 4]))
    assert rc.error_bound <= 4 * rr.error_bound


def test_chebyshev_constant():
    r = chebyshev_fit(FitRequest(rat("7/3"), interval(-1, 1), tool="chebyshev", powers=[0]))
    with mp.workprec(256):
        assert abs(r.coefficients[0] - mpf(7) / 3) < mpf(2) ** -200


def test_chebyshev_parity_mismatch_poor_fit():
    r = chebyshev_fit(FitRequest(SIN, interval(-1, 1), tool="chebyshev", powers=[0, 2, 4]))
    # an even basis cannot represent an odd function: error ~ max |sin|
    assert r.error_bound > mpf("0.5")
    assert "lsq_fallback" in r.notes


def test_method_quality_ordering():
    targets = [
        (COS, I_HALF_PI, [0, 1, 2, 3, 4]),
        (EXP, interval(0, 1), [0, 1, 2, 3]),
        (parse_expr("(log (+ 1 x))"), interval(0, "1/2"), [0, 1, 2, 3]),
        (call("asin", X), interval(0, "1/2"), [0, 1, 2, 3]),
    ]
    for target, iv, powers in targets:
        rz = remez_fit(FitRequest(target, iv, powers=powers))
        rc = chebyshev_fit(FitRequest(target, iv, tool="chebyshev", powers=powers))
        rt = taylor_fit(FitRequest(target, iv, tool="taylor", powers=powers))
        slack = 1 + mpf("1e-8")
        assert rz.error_bound <= rc.error_bound * slack
        assert rc.error_bound <= rt.error_bound * slack


def test_fixed_terms_never_beat_free():
    free = remez_fit(FitRequest(COS, I_HALF_PI, powers=[0, 2, 4]))
    fixed = remez_fit(FitRequest(COS, I_HALF_PI, powers=[4], fixed={0: rat(1), 2: rat("-1/2")}))
    assert free.error_bound <= fixed.error_bound * (1 + mpf("1e-8"))


def test_error_bound_upper_bounds_dense_grid():
    req = FitRequest(COS, I_HALF_PI, powers=[4], fixed={0: rat(1), 2: rat("-1/2")})
    r = remez_fit(req)
    coeffs = {p: float(c) for p, c in r.coefficients.items()}
    xs = np.linspace(0.0, float(mpf(mpmath.pi) / 2), 10 ** 6)
    poly = sum(c * xs ** p for p, c in coeffs.items())
    grid_max = np.max(np.abs(np.cos(xs) - poly))
    assert float(r.error_bound) >= grid_max * (1 - 1e-9) - 1e-15


def test_round_coefficients_fp64_small_change():
    req = FitRequest(COS, I_HALF_PI, powers=[0, 2, 4])
    base = remez_fit(req)
    rounded = round_coefficients(base, "fp64", req)
    with mp.workprec(256):
        rel = abs(rounded.error_bound - base.error_bound) / base.error_bound
        assert rel < mpf(2) ** -40


def test_round_coefficients_fixpoint():
    req = FitRequest(COS, I_HALF_PI, powers=[0, 2, 4])
    base = remez_fit(req)
    once = round_coefficients(base, "fp64", req)
    twice = round_coefficients(once, "fp64", req)
    assert {p: float(c) for p, c in once.coefficients.items()} == {
        p: float(c) for p, c in twice.coefficients.items()
    }


def test_round_fig2_x4_to_fp32_keeps_bound():
    req = FitRequest(COS, I_HALF_PI, powers=[4], fixed={0: rat(1), 2: rat("-1/2")})
    base = remez_fit(req)
    rounded = round_coefficients(base, {4: "fp32"}, req)
    assert rounded.error_bound < mpf("0.0025")


def test_parity_autodetection():
    assert detect_parity(SIN, interval(-1, 1)) == "odd"
    assert detect_parity(COS, interval(-1, 1)) == "even"
    assert detect_parity(EXP, interval(-1, 1)) == "any"
    req = FitRequest(SIN, interval(-1, 1), degree=3)
    assert resolve_powers(req) == [1, 3, 5]


def test_fit_returns_checked_approx():
    from mlm.dsl import ImplType

    hole = ImplType(COS, I_HALF_PI)
    term = fit(hole, FitRequest(COS, I_HALF_PI, powers=[4], fixed={0: rat(1), 2: rat("-1/2")}))
    assert isinstance(term, Approx)
    rep = check(term, CheckConfig(sample_points=256, grid_points=1025, segments=64))
    assert rep.verdict == "ok"


def test_fit_candidates_degree_sweep():
    from mlm.dsl import ImplType
    from mlm.symexpr import LOG2

    hole = ImplType(EXP, interval(0, LOG2))
    terms = fit_candidates(hole, FitRequest(EXP, interval(0, LOG2), parity="any"), degrees=range(7, 13))
    assert len(terms) == 6
    errs = [eval_point(t.eps, {}, 128) for t in terms]
    assert all(errs[i] > errs[i + 1] for i in range(len(errs) - 1))
