"""Shared example implementations used across test modules: the staged
cos implementations, an exp reduction, and small helpers."""

from fractions import Fraction

from mlm.dsl import Approx, Hole, ImplType, Left, Periodic, Right, SplitDom, polynomial
from mlm.symexpr import (
    LOG2, PI, X, Y, call, div, interval, mul, neg, rat, sub, Expr, var,
)

COS_X = call("cos", X)
EXP_X = call("exp", X)
SIN_X = call("sin", X)

HALF_PI = div(PI, rat(2))
I_0_HALfPI = interval(rat(0), HALF_PI)
I_SYM_HALfPI = interval(neg(HALF_PI), HALF_PI)
I_0_PI = interval(rat(0), PI)
I_SYM_PI = interval(neg(PI), PI)

impl1 = polynomial({0: 1, 2: "-1/2", 4: "1/24"})
impl2 = Approx(COS_X, I_0_HALfPI, rat("1/50"), impl1)
impl3 = Left(neg(X), impl2, Y)
impl4 = Right(sub(PI, X), impl2, neg(Y))
impl5 = Left(neg(X), impl4, Y)

I_TINY = interval(rat("-3/10000"), rat("3/10000"))
impl_s = Approx(COS_X, I_TINY, rat(Fraction(1, 2 ** 24)), polynomial({0: 1}))
impl6 = SplitDom(((I_TINY, impl_s), (I_SYM_PI, impl5)))

I_0_LOG2 = interval(rat(0), LOG2)
exp_body_hole = Hole(ImplType(EXP_X, I_0_LOG2))
exp_periodic_holed = Periodic(LOG2, exp_body_hole, Expr("ldexp", (Y, var("k"))))
