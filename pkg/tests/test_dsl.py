import pytest

from corpus import (
    COS_X, EXP_X, HALF_PI, I_0_HALfPI, I_SYM_HALfPI, I_0_PI, I_SYM_PI,
    exp_periodic_holed, impl1, impl2, impl3, impl4, impl5, impl6,
)
from mlm.dsl import (
    Approx, Arith, Compose, DslTypeError, Hole, ImplType, Left, Periodic,
    Polynomial, Right, SplitDom, TuningError, TuningParams, fill, format_impl,
    holes_of, parse_impl, polynomial, type_of, types_equal,
)
from mlm.symexpr import (
    FULL_LINE, PI, X, Y, add, call, div, interval, mul, neg, pow_int, rat,
    sub, var,
)


def test_polynomial_type():
    ty = type_of(impl1)
    expected = add(
        add(rat(1), mul(rat("-1/2"), pow_int(X, 2))), mul(rat("1/24"), pow_int(X, 4))
    )
    assert ty.target == expected
    assert ty.domain == FULL_LINE


def test_left_widens_domain():
    ty = type_of(impl3)
    assert types_equal(ty, ImplType(COS_X, I_SYM_HALfPI))


def test_right_widens_domain():
    ty = type_of(impl4)
    assert types_equal(ty, ImplType(COS_X, I_0_PI))


def test_nested_reductions():
    ty = type_of(impl5)
    assert types_equal(ty, ImplType(COS_X, I_SYM_PI))


def test_periodic_type_is_full_line():
    ty = type_of(exp_periodic_holed)
    assert types_equal(ty, ImplType(EXP_X, FULL_LINE))


def test_split_type_is_union_hull():
    ty = type_of(impl6)
    assert types_equal(ty, ImplType(COS_X, I_SYM_PI))


def test_approx_domain_must_be_contained():
    with pytest.raises(DslTypeError):
        type_of(Approx(COS_X, interval(0, PI), rat("1/50"), impl2))


def test_arith_domain_mismatch_rejected():
    a = Approx(COS_X, I_0_HALfPI, rat(1), impl1)
    b = Approx(COS_X, I_0_PI, rat(1), Left(neg(X), impl2, Y))
    with pytest.raises(DslTypeError):
        type_of(Arith("+", a, b))


def test_periodic_body_window_checked():
    bad = Periodic(PI, Hole(ImplType(COS_X, I_0_HALfPI)), Y)
    with pytest.raises(DslTypeError):
        type_of(bad)


def test_split_targets_must_agree():
    sin_impl = Approx(call("sin", X), I_SYM_PI, rat(1), polynomial({1: 1}))
    with pytest.raises(DslTypeError):
        type_of(SplitDom(((I_SYM_PI, sin_impl), (I_SYM_PI, impl5))))


def test_compose_builds_composition():
    # (f = x - 1) ; log(1 + f): target is log(1 + (x-1)) over the first domain
    first = Approx(sub(X, rat(1)), interval(1, 2), rat(0), polynomial({0: -1, 1: 1}))
    f = var("f")
    second = Approx(call("log", add(rat(1), f)), interval(0, 1), rat(1), polynomial({1: 1}))
    ty = type_of(Compose("f", first, second))
    assert ty.target == call("log", add(rat(1), sub(X, rat(1))))
    assert types_equal(ty, ImplType(call("log", add(rat(1), sub(X, rat(1)))), interval(1, 2)))


def test_compose_shadowing_rejected():
    first = Approx(X, interval(0, 1), rat(0), polynomial({1: 1}))
    inner = Compose("f", first, Approx(var("f"), interval(0, 1), rat(0), polynomial({1: 1})))
    with pytest.raises(DslTypeError):
        type_of(Compose("f", first, inner))


def test_tuning_does_not_change_type():
    variants = [
        polynomial({0: 1, 2: "-1/2", 4: "1/24"}),
        polynomial({0: 1, 2: "-1/2", 4: "1/24"}, method="estrin"),
        polynomial({0: 1, 2: "-1/2", 4: "1/24"}, prec="fp32", split=2, split_prec="fp64"),
    ]
    types = [type_of(v) for v in variants]
    assert all(t == types[0] for t in types)


def test_invalid_tuning_rejected():
    with pytest.raises(TuningError):
        polynomial({0: 1, 2: 1}, split=3)
    with pytest.raises(TuningError):
        TuningParams(split=-1)
    with pytest.raises(TuningError):
        Periodic(PI, Hole(ImplType(COS_X, interval(0, PI))), Y, TuningParams(method="cody_waite"))
    with pytest.raises(TuningError):
        Periodic(
            PI,
            Hole(ImplType(COS_X, interval(0, PI))),
            Y,
            TuningParams(method="naive", cw_bits=30),
        )
    with pytest.raises(TuningError):
        TuningParams(prec="fp16")


def test_holes_of_root():
    h = Hole(ImplType(sub(rat(1), COS_X), I_SYM_PI))
    assert holes_of(h) == [((), h.ty)]


def test_holes_of_concrete_term_is_empty():
    assert holes_of(impl5) == []


def test_holes_of_nested():
    t = Left(neg(X), Hole(ImplType(COS_X, I_0_HALfPI)), Y)
    hs = holes_of(t)
    assert len(hs) == 1 and hs[0][0] == (0,)


def test_fill_root_hole():
    h = Hole(ImplType(COS_X, I_0_HALfPI))
    filled = fill(h, (), impl2)
    assert filled == impl2
    assert types_equal(type_of(filled), ImplType(COS_X, I_0_HALfPI))


def test_fill_domain_mismatch_rejected():
    h = Hole(ImplType(COS_X, I_0_PI))
    with pytest.raises(DslTypeError):
        fill(h, (), impl2)


def test_fill_nested_preserves_outer_type():
    t = Left(neg(X), Hole(ImplType(COS_X, I_0_HALfPI)), Y)
    before = type_of(t)
    filled = fill(t, (0,), impl2)
    assert type_of(filled) == before
    assert holes_of(filled) == []


def test_fill_hole_algebra():
    t = Left(neg(X), Hole(ImplType(COS_X, I_0_HALfPI)), Y)
    inner = Approx(COS_X, I_0_HALfPI, rat("1/50"), Hole(ImplType(type_of(impl1).target, FULL_LINE)))
    filled = fill(t, (0,), inner)
    hs = holes_of(filled)
    assert [p for p, _ in hs] == [(0, 0)]


def test_serialization_roundtrip():
    for term in [impl1, impl2, impl3, impl4, impl5, impl6, exp_periodic_holed]:
        text = format_impl(term)
        again = parse_impl(text)
        assert again == term
        assert format_impl(again) == text


def test_serialization_with_tuning():
    text = "(polynomial ((0 1) (2 -1/2) (4 1/24)) :method estrin :split 1 :split_prec dd)"
    t = parse_impl(text)
    assert isinstance(t, Polynomial)
    assert t.tuning.method == "estrin" and t.tuning.split == 1 and t.tuning.split_prec == "dd"
    assert format_impl(t) == "(polynomial ((0 1) (2 -1/2) (4 1/24)) :method estrin :split 1 :split_prec dd)"


def test_type_of_deterministic():
    assert type_of(impl5) == type_of(impl5)
