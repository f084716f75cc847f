"""The implementation-term language: typed terms, tuning parameters,
holes, and the ``.mlm`` s-expression file format."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from . import sexpr
from .symexpr import (
    Expr, SymInterval, ZERO, add, const_eq, const_le, div, expr_from_sexpr,
    expr_to_sexpr, format_expr, free_vars, interval_from_sexpr,
    interval_to_sexpr, intervals_eq, mul, neg, pow_int, rat, simplify, sub,
    var, FULL_LINE, INF,
)

PRECISIONS = ("fp32", "fp64", "dd")
POLY_METHODS = ("horner", "estrin")
PERIODIC_METHODS = ("naive", "cody_waite")


class DslError(ValueError):
    pass


class TuningError(DslError):
    pass


class DslTypeError(DslError):
    def __init__(self, message, term=None):
        super().__init__(message)
        self.term = term


@dataclass(frozen=True)
class ImplType:
    """The type Impl{f(x)}{I}: a target function over a domain."""

    target: Expr
    domain: SymInterval

    def __repr__(self):
        return f"Impl{{{format_expr(self.target)}}}{self.domain!r}"


def types_equal(a: ImplType, b: ImplType) -> bool:
    """Alpha-equivalence of targets plus endpoint-equal domains."""
    return _norm_target(a.target) == _norm_target(b.target) and intervals_eq(a.domain, b.domain)


def _norm_target(t: Expr) -> Expr:
    fv = free_vars(t)
    t = simplify(t)
    if len(fv) == 1:
        (v,) = fv
        if v != "x":
            from .symexpr import substitute

            return substitute(t, v, var("x"))
    return t


@dataclass(frozen=True)
class TuningParams:
    """Low-level knobs; they never affect syntactic or semantic typing."""

    prec: str = "fp64"
    method: Optional[str] = None
    split: int = 0
    split_prec: Optional[str] = None
    cw_bits: Optional[int] = None
    cw_len: Optional[int] = None

    def __post_init__(self):
        if self.prec not in PRECISIONS:
            raise TuningError(f"unknown precision {self.prec!r}")
        if self.split_prec is not None and self.split_prec not in PRECISIONS:
            raise TuningError(f"unknown split precision {self.split_prec!r}")
        if self.split < 0:
            raise TuningError("split must be non-negative")


DEFAULT_TUNING = TuningParams()


class ImplTerm:
    """Base class; concrete terms are frozen dataclasses below."""

    tuning: TuningParams = DEFAULT_TUNING

    def children(self) -> tuple["ImplTerm", ...]:
        return ()

    def with_children(self, kids: tuple["ImplTerm", ...]) -> "ImplTerm":
        raise NotImplementedError

    @property
    def kind(self) -> str:
        return type(self).__name__.lower()


@dataclass(frozen=True)
class Polynomial(ImplTerm):
    coeffs: tuple  # ((power, Expr), ...) sorted by power
    tuning: TuningParams = DEFAULT_TUNING

    def __post_init__(self):
        powers = [p for p, _ in self.coeffs]
        if len(set(powers)) != len(powers):
            raise DslError("polynomial powers must be distinct")
        if any(p < 0 for p in powers):
            raise DslError("polynomial powers must be non-negative")
        if list(powers) != sorted(powers):
            object.__setattr__(self, "coeffs", tuple(sorted(self.coeffs)))
        t = self.tuning
        if t.method is not None and t.method not in POLY_METHODS:
            raise TuningError(f"unknown polynomial method {t.method!r}")
        if t.split > len(self.coeffs):
            raise TuningError("cannot split more terms than the polynomial contains")
        if t.cw_bits is not None or t.cw_len is not None:
            raise TuningError("cw_bits/cw_len only apply to periodic terms")

    def with_children(self, kids):
        assert not kids
        return self


@dataclass(frozen=True)
class Approx(ImplTerm):
    target: Expr
    domain: SymInterval
    eps: Expr
    body: ImplTerm

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return replace(self, body=kids[0])


@dataclass(frozen=True)
class Left(ImplTerm):
    s: Expr
    body: ImplTerm
    t: Expr
    tuning: TuningParams = DEFAULT_TUNING

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return replace(self, body=kids[0])


@dataclass(frozen=True)
class Right(ImplTerm):
    s: Expr
    body: ImplTerm
    t: Expr
    tuning: TuningParams = DEFAULT_TUNING

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return replace(self, body=kids[0])


@dataclass(frozen=True)
class Periodic(ImplTerm):
    period: Expr
    body: ImplTerm
    t: Expr
    tuning: TuningParams = DEFAULT_TUNING

    def __post_init__(self):
        t = self.tuning
        method = t.method or "naive"
        if method not in PERIODIC_METHODS:
            raise TuningError(f"unknown periodic method {method!r}")
        if method == "cody_waite":
            if t.cw_bits is None or t.cw_len is None:
                raise TuningError("cody_waite reduction requires cw_bits and cw_len")
            if not (1 <= t.cw_bits <= 52):
                raise TuningError("cw_bits must be in [1, 52]")
            if t.cw_len < 1:
                raise TuningError("cw_len must be at least 1")
        elif t.cw_bits is not None or t.cw_len is not None:
            raise TuningError("cw_bits/cw_len require method=cody_waite")

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return replace(self, body=kids[0])


@dataclass(frozen=True)
class Logarithmic(ImplTerm):
    base: Expr
    body: ImplTerm
    t: Expr
    tuning: TuningParams = DEFAULT_TUNING

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return replace(self, body=kids[0])


@dataclass(frozen=True)
class Arith(ImplTerm):
    op: str
    lhs: ImplTerm
    rhs: ImplTerm
    tuning: TuningParams = DEFAULT_TUNING

    def __post_init__(self):
        if self.op not in ("+", "-", "*", "/"):
            raise DslError(f"unknown arithmetic operator {self.op!r}")

    def children(self):
        return (self.lhs, self.rhs)

    def with_children(self, kids):
        return replace(self, lhs=kids[0], rhs=kids[1])


@dataclass(frozen=True)
class Compose(ImplTerm):
    name: str
    first: ImplTerm
    second: ImplTerm
    tuning: TuningParams = DEFAULT_TUNING

    def children(self):
        return (self.first, self.second)

    def with_children(self, kids):
        return replace(self, first=kids[0], second=kids[1])


@dataclass(frozen=True)
class SplitDom(ImplTerm):
    cases: tuple  # ((SymInterval, ImplTerm), ...) in dispatch order

    def __post_init__(self):
        if not self.cases:
            raise DslError("split requires at least one case")

    def children(self):
        return tuple(body for _, body in self.cases)

    def with_children(self, kids):
        return replace(self, cases=tuple((iv, k) for (iv, _), k in zip(self.cases, kids)))


@dataclass(frozen=True)
class Rewrite(ImplTerm):
    body: ImplTerm
    pattern: Expr
    replacement: Expr

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return replace(self, body=kids[0])


@dataclass(frozen=True)
class Hole(ImplTerm):
    ty: ImplType

    def with_children(self, kids):
        assert not kids
        return self


def polynomial(coeffs, **tuning) -> Polynomial:
    """Convenience constructor from a {power: coefficient} mapping."""
    items = []
    for p, c in (coeffs.items() if isinstance(coeffs, dict) else coeffs):
        if not isinstance(c, Expr):
            c = rat(Fraction(c))
        items.append((int(p), c))
    return Polynomial(tuple(sorted(items)), TuningParams(**tuning))


# -- syntactic typing ----------------------------------------------------------

def type_of(term: ImplTerm, input_var: str = "x", _bound=frozenset()) -> ImplType:
    """Compute the unique syntactic type; raises DslTypeError on violations."""
    x = var(input_var)
    if isinstance(term, Polynomial):
        acc = ZERO
        for p, c in term.coeffs:
            acc = add(acc, mul(c, pow_int(x, p)))
        return ImplType(simplify(acc), FULL_LINE)
    if isinstance(term, Approx):
        bt = type_of(term.body, input_var, _bound)
        if not (const_le(bt.domain.lo, term.domain.lo) and const_le(term.domain.hi, bt.domain.hi)):
            raise DslTypeError(
                f"approx domain {term.domain!r} is not contained in body domain {bt.domain!r}",
                term,
            )
        _check_vars(term.target, {input_var}, term, "approx target")
        _check_vars(term.eps, set(), term, "approx error bound")
        return ImplType(term.target, term.domain)
    if isinstance(term, (Left, Right)):
        bt = type_of(term.body, input_var, _bound)
        _check_vars(term.s, {input_var}, term, "reduction s")
        _check_vars(term.t, {"y"}, term, "reconstruction t")
        lo, hi = bt.domain.lo, bt.domain.hi
        if isinstance(term, Left):
            # body covers [m, b]; result domain is [2m-b, b]
            a = simplify(sub(mul(rat(2), lo), hi))
            dom = SymInterval(a, hi)
        else:
            # body covers [a, m]; result domain is [a, 2m-a]
            b = simplify(sub(mul(rat(2), hi), lo))
            dom = SymInterval(lo, b)
        return ImplType(bt.target, dom)
    if isinstance(term, Periodic):
        bt = type_of(term.body, input_var, _bound)
        _check_vars(term.period, set(), term, "period")
        _check_vars(term.t, {"y", "k"}, term, "reconstruction t")
        want = SymInterval(ZERO, term.period)
        if not intervals_eq(bt.domain, want):
            raise DslTypeError(
                f"periodic body must cover [0, p] = {want!r}, got {bt.domain!r}", term
            )
        return ImplType(bt.target, FULL_LINE)
    if isinstance(term, Logarithmic):
        bt = type_of(term.body, input_var, _bound)
        _check_vars(term.base, set(), term, "base")
        _check_vars(term.t, {"y", "k"}, term, "reconstruction t")
        root = Expr("sqrt", (term.base,))
        want = SymInterval(div(rat(1), root), root)
        if not intervals_eq(bt.domain, want):
            raise DslTypeError(
                f"logarithmic body must cover [p^-1/2, p^1/2] = {want!r}, got {bt.domain!r}",
                term,
            )
        return ImplType(bt.target, SymInterval(ZERO, INF))
    if isinstance(term, Arith):
        lt = type_of(term.lhs, input_var, _bound)
        rt = type_of(term.rhs, input_var, _bound)
        if not intervals_eq(lt.domain, rt.domain):
            raise DslTypeError(
                f"arithmetic operands must share a domain: {lt.domain!r} vs {rt.domain!r}",
                term,
            )
        return ImplType(simplify(Expr(term.op, (lt.target, rt.target))), lt.domain)
    if isinstance(term, Compose):
        if term.name in _bound or term.name in (input_var, "y", "k"):
            raise DslTypeError(f"compose name {term.name!r} shadows an existing name", term)
        ft = type_of(term.first, input_var, _bound)
        st = type_of(term.second, term.name, _bound | {term.name})
        from .symexpr import substitute

        h = simplify(substitute(st.target, term.name, ft.target))
        return ImplType(h, ft.domain)
    if isinstance(term, SplitDom):
        case_types = []
        for iv, body in term.cases:
            bt = type_of(body, input_var, _bound)
            if not intervals_eq(bt.domain, iv):
                raise DslTypeError(
                    f"split case domain {iv!r} does not match body domain {bt.domain!r}",
                    term,
                )
            case_types.append(bt)
        t0 = simplify(case_types[0].target)
        for ct in case_types[1:]:
            if simplify(ct.target) != t0:
                raise DslTypeError(
                    "split cases implement different target functions: "
                    f"{format_expr(t0)} vs {format_expr(ct.target)}",
                    term,
                )
        los = [iv.lo for iv, _ in term.cases]
        his = [iv.hi for iv, _ in term.cases]
        lo = los[0]
        for e in los[1:]:
            if const_le(e, lo):
                lo = e
        hi = his[0]
        for e in his[1:]:
            if const_le(hi, e):
                hi = e
        return ImplType(t0, SymInterval(lo, hi))
    if isinstance(term, Rewrite):
        return type_of(term.body, input_var, _bound)
    if isinstance(term, Hole):
        return term.ty
    raise DslTypeError(f"unknown term {term!r}", term)


def _check_vars(e: Expr, allowed: set, term, what: str):
    extra = free_vars(e) - allowed
    if extra:
        raise DslTypeError(f"{what} uses unexpected variables {sorted(extra)}", term)


# -- holes ---------------------------------------------------------------------

def holes_of(term: ImplTerm):
    """All holes, pre-order, as (path, ImplType) pairs."""
    out = []

    def walk(t, path):
        if isinstance(t, Hole):
            out.append((path, t.ty))
        for i, c in enumerate(t.children()):
            walk(c, path + (i,))

    walk(term, ())
    return out


def get_at(term: ImplTerm, path: tuple) -> ImplTerm:
    for i in path:
        term = term.children()[i]
    return term


def replace_at(term: ImplTerm, path: tuple, new: ImplTerm) -> ImplTerm:
    if not path:
        return new
    kids = list(term.children())
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return term.with_children(tuple(kids))


def fill(term: ImplTerm, path: tuple, replacement: ImplTerm) -> ImplTerm:
    """Replace the hole at ``path``; the replacement's type must match."""
    hole = get_at(term, path)
    if not isinstance(hole, Hole):
        raise DslError(f"no hole at path {path}")
    fv = free_vars(hole.ty.target)
    hole_var = next(iter(fv)) if len(fv) == 1 else "x"
    rt = type_of(replacement, hole_var)
    if not types_equal(rt, hole.ty):
        raise DslTypeError(
            f"replacement type {rt!r} does not match hole type {hole.ty!r}", replacement
        )
    return replace_at(term, path, replacement)


def subterms(term: ImplTerm):
    yield (), term
    for i, c in enumerate(term.children()):
        for p, t in subterms(c):
            yield (i,) + p, t


# -- .mlm serialization ----------------------------------------------------------

_TUNING_KEYS = (":prec", ":method", ":split", ":split_prec", ":cw_bits", ":cw_len")


def _tuning_to_sexpr(t: TuningParams, default_method: Optional[str]) -> list:
    out = []
    if t.prec != "fp64":
        out += [":prec", t.prec]
    if t.method is not None and t.method != default_method:
        out += [":method", t.method]
    if t.split:
        out += [":split", str(t.split)]
    if t.split_prec is not None:
        out += [":split_prec", t.split_prec]
    if t.cw_bits is not None:
        out += [":cw_bits", str(t.cw_bits)]
    if t.cw_len is not None:
        out += [":cw_len", str(t.cw_len)]
    return out


def _tuning_from_items(items: list) -> TuningParams:
    kw = {}
    i = 0
    while i < len(items):
        key = items[i]
        if not isinstance(key, str) or not key.startswith(":"):
            raise sexpr.SexprError(f"expected tuning keyword, got {key!r}")
        if i + 1 >= len(items):
            raise sexpr.SexprError(f"missing value for {key}")
        val = items[i + 1]
        name = key[1:]
        if name in ("split", "cw_bits", "cw_len"):
            kw[name] = int(val)
        elif name in ("prec", "method", "split_prec"):
            kw[name] = val
        else:
            raise sexpr.SexprError(f"unknown tuning key {key}")
        i += 2
    return TuningParams(**kw)


def impl_to_sexpr(term: ImplTerm):
    if isinstance(term, Polynomial):
        coeffs = [[str(p), expr_to_sexpr(c)] for p, c in term.coeffs]
        return ["polynomial", coeffs] + _tuning_to_sexpr(term.tuning, "horner")
    if isinstance(term, Approx):
        return [
            "approx",
            expr_to_sexpr(term.target),
            interval_to_sexpr(term.domain),
            expr_to_sexpr(term.eps),
            impl_to_sexpr(term.body),
        ]
    if isinstance(term, (Left, Right)):
        head = "left" if isinstance(term, Left) else "right"
        return [
            head,
            expr_to_sexpr(term.s),
            impl_to_sexpr(term.body),
            expr_to_sexpr(term.t),
        ] + _tuning_to_sexpr(term.tuning, None)
    if isinstance(term, Periodic):
        return [
            "periodic",
            expr_to_sexpr(term.period),
            impl_to_sexpr(term.body),
            expr_to_sexpr(term.t),
        ] + _tuning_to_sexpr(term.tuning, "naive")
    if isinstance(term, Logarithmic):
        return [
            "logarithmic",
            expr_to_sexpr(term.base),
            impl_to_sexpr(term.body),
            expr_to_sexpr(term.t),
        ] + _tuning_to_sexpr(term.tuning, None)
    if isinstance(term, Arith):
        return [term.op, impl_to_sexpr(term.lhs), impl_to_sexpr(term.rhs)] + _tuning_to_sexpr(
            term.tuning, None
        )
    if isinstance(term, Compose):
        return [
            "compose",
            term.name,
            impl_to_sexpr(term.first),
            impl_to_sexpr(term.second),
        ] + _tuning_to_sexpr(term.tuning, None)
    if isinstance(term, SplitDom):
        return ["split"] + [[interval_to_sexpr(iv), impl_to_sexpr(b)] for iv, b in term.cases]
    if isinstance(term, Rewrite):
        return [
            "rewrite",
            impl_to_sexpr(term.body),
            expr_to_sexpr(term.pattern),
            expr_to_sexpr(term.replacement),
        ]
    if isinstance(term, Hole):
        return ["hole", expr_to_sexpr(term.ty.target), interval_to_sexpr(term.ty.domain)]
    raise DslError(f"cannot serialize {term!r}")


def _split_tuning(items: list):
    for i, it in enumerate(items):
        if isinstance(it, str) and it.startswith(":"):
            return items[:i], _tuning_from_items(items[i:])
    return items, DEFAULT_TUNING


def impl_from_sexpr(form) -> ImplTerm:
    if not isinstance(form, list) or not form:
        raise sexpr.SexprError(f"expected an implementation term, got {form!r}")
    head, rest = form[0], form[1:]
    if head == "polynomial":
        body, tuning = _split_tuning(rest)
        if len(body) != 1 or not isinstance(body[0], list):
            raise sexpr.SexprError("polynomial expects a coefficient list")
        coeffs = tuple((int(p), expr_from_sexpr(c)) for p, c in body[0])
        return Polynomial(tuple(sorted(coeffs)), tuning)
    if head == "approx":
        if len(rest) != 4:
            raise sexpr.SexprError("approx expects (approx f interval eps body)")
        return Approx(
            expr_from_sexpr(rest[0]),
            interval_from_sexpr(rest[1]),
            expr_from_sexpr(rest[2]),
            impl_from_sexpr(rest[3]),
        )
    if head in ("left", "right"):
        body, tuning = _split_tuning(rest)
        if len(body) != 3:
            raise sexpr.SexprError(f"{head} expects (s body t)")
        cls = Left if head == "left" else Right
        return cls(expr_from_sexpr(body[0]), impl_from_sexpr(body[1]), expr_from_sexpr(body[2]), tuning)
    if head == "periodic":
        body, tuning = _split_tuning(rest)
        if len(body) != 3:
            raise sexpr.SexprError("periodic expects (p body t)")
        return Periodic(expr_from_sexpr(body[0]), impl_from_sexpr(body[1]), expr_from_sexpr(body[2]), tuning)
    if head == "logarithmic":
        body, tuning = _split_tuning(rest)
        if len(body) != 3:
            raise sexpr.SexprError("logarithmic expects (p body t)")
        return Logarithmic(expr_from_sexpr(body[0]), impl_from_sexpr(body[1]), expr_from_sexpr(body[2]), tuning)
    if head in ("+", "-", "*", "/"):
        body, tuning = _split_tuning(rest)
        if len(body) != 2:
            raise sexpr.SexprError(f"({head} ...) expects two operands")
        return Arith(head, impl_from_sexpr(body[0]), impl_from_sexpr(body[1]), tuning)
    if head == "compose":
        body, tuning = _split_tuning(rest)
        if len(body) != 3 or not isinstance(body[0], str):
            raise sexpr.SexprError("compose expects (compose name first second)")
        return Compose(body[0], impl_from_sexpr(body[1]), impl_from_sexpr(body[2]), tuning)
    if head == "split":
        cases = []
        for case in rest:
            if not isinstance(case, list) or len(case) != 2:
                raise sexpr.SexprError("split case must be ((interval lo hi) impl)")
            cases.append((interval_from_sexpr(case[0]), impl_from_sexpr(case[1])))
        return SplitDom(tuple(cases))
    if head == "rewrite":
        if len(rest) != 3:
            raise sexpr.SexprError("rewrite expects (rewrite body pattern replacement)")
        return Rewrite(impl_from_sexpr(rest[0]), expr_from_sexpr(rest[1]), expr_from_sexpr(rest[2]))
    if head == "hole":
        if len(rest) != 2:
            raise sexpr.SexprError("hole expects (hole target interval)")
        return Hole(ImplType(expr_from_sexpr(rest[0]), interval_from_sexpr(rest[1])))
    raise sexpr.SexprError(f"unknown implementation head {head!r}")


def parse_impl(text: str) -> ImplTerm:
    return impl_from_sexpr(sexpr.parse(text))


def format_impl(term: ImplTerm) -> str:
    return sexpr.format_sexpr(impl_to_sexpr(term))
