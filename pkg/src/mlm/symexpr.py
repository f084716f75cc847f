"""Symbolic real-valued expressions and intervals.

Expressions are immutable trees over rational constants, the named
constants pi/e/log2, variables, and a fixed set of real functions.  They
are evaluated with mpmath at a caller-chosen precision, enclosed with
outward-rounded interval arithmetic, and differentiated symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import mpmath
from mpmath import mp, mpf

from . import sexpr

DEFAULT_PREC = 256
_GUARD = 30

UNARY_OPS = ("neg", "sqrt", "sin", "cos", "tan", "asin", "exp", "log", "floor")
BINARY_OPS = ("+", "-", "*", "/")
NAMED_CONSTS = ("pi", "e", "log2", "inf")
# uninterpreted markers used only inside e-graphs during synthesis
SYNTH_UNARY = ("thefunc", "flip", "shift", "scale")
SYNTH_BINARY = ("titer",)


class ExprError(ValueError):
    pass


class NonDifferentiableError(ExprError):
    pass


@dataclass(frozen=True)
class Expr:
    """One node of an expression tree.

    kind 'rat' carries a Fraction in ``value``; 'var' carries the variable
    name; 'pow' carries an integer exponent and a single child.
    """

    op: str
    args: tuple = ()
    value: Union[Fraction, str, int, None] = None

    def __post_init__(self):
        if self.op == "rat" and not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))
        n = arity(self.op)
        if n is not None and len(self.args) != n:
            raise ExprError(f"operator {self.op} expects {n} args, got {len(self.args)}")

    def __repr__(self):
        return f"Expr<{format_expr(self)}>"


def arity(op: str) -> Optional[int]:
    if op in ("rat", "var") or op in NAMED_CONSTS:
        return 0
    if op in UNARY_OPS or op == "pow" or op in SYNTH_UNARY:
        return 1
    if op in BINARY_OPS or op == "ldexp" or op in SYNTH_BINARY:
        return 2
    if op == "fma":
        return 3
    raise ExprError(f"unknown operator {op}")


# -- constructors ------------------------------------------------------------

def rat(v) -> Expr:
    return Expr("rat", value=Fraction(v))


def var(name: str) -> Expr:
    return Expr("var", value=name)


X = var("x")
Y = var("y")
K = var("k")
ZERO = rat(0)
ONE = rat(1)
PI = Expr("pi")
E = Expr("e")
LOG2 = Expr("log2")
INF = Expr("inf")


def add(a, b) -> Expr:
    return Expr("+", (a, b))


def sub(a, b) -> Expr:
    return Expr("-", (a, b))


def mul(a, b) -> Expr:
    return Expr("*", (a, b))


def div(a, b) -> Expr:
    return Expr("/", (a, b))


def neg(a) -> Expr:
    return Expr("neg", (a,))


def pow_int(a, n: int) -> Expr:
    return Expr("pow", (a,), int(n))


def call(op: str, *args) -> Expr:
    return Expr(op, tuple(args))


def free_vars(e: Expr) -> set[str]:
    if e.op == "var":
        return {e.value}
    out = set()
    for a in e.args:
        out |= free_vars(a)
    return out


def substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    """Replace every free occurrence of variable ``name``.

    The language has no binders, so substitution is capture-free by
    construction.
    """
    if e.op == "var":
        return replacement if e.value == name else e
    if not e.args:
        return e
    new_args = tuple(substitute(a, name, replacement) for a in e.args)
    if new_args == e.args:
        return e
    return Expr(e.op, new_args, e.value)


# -- light normalization -----------------------------------------------------

def as_rational(e: Expr) -> Optional[Fraction]:
    """Exact rational value of ``e``, or None if it is not pure-rational."""
    if e.op == "rat":
        return e.value
    if e.op == "neg":
        v = as_rational(e.args[0])
        return None if v is None else -v
    if e.op == "pow":
        v = as_rational(e.args[0])
        return None if v is None else v ** e.value
    if e.op in BINARY_OPS:
        a, b = (as_rational(c) for c in e.args)
        if a is None or b is None:
            return None
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return None if b == 0 else a / b
    return None


def simplify(e: Expr) -> Expr:
    """Constant folding and neutral-element cleanup; no deep rewriting."""
    if not e.args:
        return e
    args = tuple(simplify(a) for a in e.args)
    e = Expr(e.op, args, e.value)
    r = as_rational(e)
    if r is not None:
        return rat(r)
    a = args[0]
    b = args[1] if len(args) > 1 else None
    if e.op == "+":
        if _is_zero(a):
            return b
        if _is_zero(b):
            return a
    elif e.op == "-":
        if _is_zero(b):
            return a
        if _is_zero(a):
            return simplify(neg(b))
    elif e.op == "*":
        if _is_zero(a) or _is_zero(b):
            return ZERO
        if _is_one(a):
            return b
        if _is_one(b):
            return a
        if a.op == "rat" and a.value == -1:
            return simplify(neg(b))
        if b.op == "rat" and b.value == -1:
            return simplify(neg(a))
    elif e.op == "/":
        if _is_zero(a):
            return ZERO
        if _is_one(b):
            return a
        if b.op == "rat" and b.value != 0:
            # divisions by rational constants canonicalize to products
            return simplify(mul(rat(Fraction(1) / b.value), a))
    elif e.op == "neg":
        if a.op == "neg":
            return a.args[0]
    elif e.op == "pow":
        if e.value == 1:
            return a
        if e.value == 0:
            return ONE
    return e


def _is_zero(e: Expr) -> bool:
    return e.op == "rat" and e.value == 0


def _is_one(e: Expr) -> bool:
    return e.op == "rat" and e.value == 1


# -- point evaluation --------------------------------------------------------

class _Domain(ArithmeticError):
    pass


def eval_point(e: Expr, binding: dict, precision_bits: int = DEFAULT_PREC):
    """Evaluate at a point; returns an mpf, or None when out of domain.

    Out-of-domain cases (log of non-positive, division by zero, sqrt or
    asin outside their domains) are reported as None so callers such as
    the infnorm grid can skip singular points.
    """
    if precision_bits < 53:
        raise ExprError("precision_bits must be >= 53")
    try:
        with mp.workprec(precision_bits + _GUARD):
            v = _eval(e, binding)
        with mp.workprec(precision_bits):
            return +v
    except _Domain:
        return None


def _eval(e: Expr, binding: dict):
    op = e.op
    if op == "rat":
        return mpf(e.value.numerator) / e.value.denominator
    if op == "var":
        try:
            return mpf(binding[e.value])
        except KeyError:
            raise ExprError(f"unbound variable {e.value}") from None
    if op == "pi":
        return +mpmath.pi
    if op == "e":
        return mpmath.exp(1)
    if op == "log2":
        return mpmath.log(2)
    if op == "inf":
        return mpf("inf")
    if op in SYNTH_UNARY or op in SYNTH_BINARY:
        raise ExprError(f"{op} is an uninterpreted synthesis marker")
    a = _eval(e.args[0], binding)
    if op == "neg":
        return -a
    if op == "floor":
        return mpmath.floor(a)
    if op == "sqrt":
        if a < 0:
            raise _Domain
        return mpmath.sqrt(a)
    if op == "sin":
        return mpmath.sin(a)
    if op == "cos":
        return mpmath.cos(a)
    if op == "tan":
        return mpmath.tan(a)
    if op == "asin":
        if abs(a) > 1:
            raise _Domain
        return mpmath.asin(a)
    if op == "exp":
        return mpmath.exp(a)
    if op == "log":
        if a <= 0:
            raise _Domain
        return mpmath.log(a)
    if op == "pow":
        if a == 0 and e.value < 0:
            raise _Domain
        return a ** e.value
    b = _eval(e.args[1], binding)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise _Domain
        return a / b
    if op == "ldexp":
        if b != mpmath.floor(b):
            raise _Domain
        return a * mpf(2) ** b
    c = _eval(e.args[2], binding)
    if op == "fma":
        return a * b + c
    raise ExprError(f"unknown operator {op}")


# -- interval evaluation -----------------------------------------------------

@dataclass(frozen=True)
class RInterval:
    """Closed interval with outward-rounded endpoints.

    ``bad`` marks a possible domain violation somewhere in the box (the
    enclosure is still sound for the inputs where the expression is
    defined).
    """

    lo: object
    hi: object
    bad: bool = False

    def __contains__(self, v):
        return self.lo <= v <= self.hi

    def width(self):
        return self.hi - self.lo

    def mag(self):
        return max(abs(self.lo), abs(self.hi))


def _bump_dn(v):
    if not mpmath.isfinite(v):
        return v
    if v == 0:
        return -(mpf(2) ** (-mp.prec * 2))
    return v - abs(v) * (mpf(2) ** (4 - mp.prec))


def _bump_up(v):
    if not mpmath.isfinite(v):
        return v
    if v == 0:
        return mpf(2) ** (-mp.prec * 2)
    return v + abs(v) * (mpf(2) ** (4 - mp.prec))


def _ival(lo, hi, bad=False) -> RInterval:
    return RInterval(_bump_dn(mpf(lo)), _bump_up(mpf(hi)), bad)


_FULL = None


def _full(bad=True) -> RInterval:
    return RInterval(mpf("-inf"), mpf("inf"), bad)


def eval_interval(e: Expr, box: dict, precision_bits: int = DEFAULT_PREC) -> RInterval:
    """Sound enclosure of the range of ``e`` over an interval box.

    ``box`` maps variable names to RInterval or (lo, hi) pairs of
    mpf-convertible endpoints.
    """
    with mp.workprec(precision_bits + _GUARD):
        norm = {}
        for k, v in box.items():
            if isinstance(v, RInterval):
                norm[k] = v
            else:
                norm[k] = RInterval(mpf(v[0]), mpf(v[1]))
        r = _ieval(e, norm)
        # absorb the caller's final rounding of point values to precision_bits
        pad = mpf(2) ** (4 - precision_bits)
        tiny = mpf(2) ** (-2 * precision_bits)
        lo = r.lo - abs(r.lo) * pad - tiny if mpmath.isfinite(r.lo) else r.lo
        hi = r.hi + abs(r.hi) * pad + tiny if mpmath.isfinite(r.hi) else r.hi
        return RInterval(lo, hi, r.bad)


def _ieval(e: Expr, box: dict) -> RInterval:
    op = e.op
    if op == "rat":
        v = mpf(e.value.numerator) / e.value.denominator
        return _ival(v, v)
    if op == "var":
        try:
            return box[e.value]
        except KeyError:
            raise ExprError(f"unboxed variable {e.value}") from None
    if op in NAMED_CONSTS:
        v = _eval(e, {})
        return _ival(v, v)
    if op in SYNTH_UNARY or op in SYNTH_BINARY:
        raise ExprError(f"{op} is an uninterpreted synthesis marker")
    a = _ieval(e.args[0], box)
    bad = a.bad
    if op == "neg":
        return RInterval(-a.hi, -a.lo, bad)
    if op == "floor":
        return RInterval(mpmath.floor(a.lo), mpmath.floor(a.hi), bad)
    if op == "sqrt":
        if a.hi < 0:
            return _full(True)
        lo = a.lo
        if lo < 0:
            lo, bad = mpf(0), True
        return _ival(mpmath.sqrt(lo), mpmath.sqrt(a.hi), bad)
    if op == "exp":
        return _ival(mpmath.exp(a.lo), mpmath.exp(a.hi), bad)
    if op == "log":
        if a.hi <= 0:
            return _full(True)
        if a.lo <= 0:
            return RInterval(mpf("-inf"), _bump_up(mpmath.log(a.hi)), True)
        return _ival(mpmath.log(a.lo), mpmath.log(a.hi), bad)
    if op == "asin":
        lo, hi = a.lo, a.hi
        if hi < -1 or lo > 1:
            return _full(True)
        if lo < -1:
            lo, bad = mpf(-1), True
        if hi > 1:
            hi, bad = mpf(1), True
        return _ival(mpmath.asin(lo), mpmath.asin(hi), bad)
    if op == "sin":
        return _trig_range(a, phase=-mpmath.pi / 2, bad=bad)
    if op == "cos":
        return _trig_range(a, phase=mpf(0), bad=bad)
    if op == "tan":
        return _tan_range(a, bad)
    if op == "pow":
        return _pow_range(a, e.value, bad)
    b = _ieval(e.args[1], box)
    bad = bad or b.bad
    if op == "+":
        return _ival(a.lo + b.lo, a.hi + b.hi, bad)
    if op == "-":
        return _ival(a.lo - b.hi, a.hi - b.lo, bad)
    if op == "*":
        ps = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
        return _ival(min(ps), max(ps), bad)
    if op == "/":
        if b.lo <= 0 <= b.hi:
            return _full(True)
        inv = _ival(1 / b.hi, 1 / b.lo, bad)
        ps = (a.lo * inv.lo, a.lo * inv.hi, a.hi * inv.lo, a.hi * inv.hi)
        return _ival(min(ps), max(ps), bad)
    if op == "ldexp":
        if not mpmath.isfinite(b.lo) or not mpmath.isfinite(b.hi):
            return _full(True)
        scale = _ival(mpf(2) ** b.lo, mpf(2) ** b.hi, bad)
        ps = (a.lo * scale.lo, a.lo * scale.hi, a.hi * scale.lo, a.hi * scale.hi)
        return _ival(min(ps), max(ps), bad)
    c = _ieval(e.args[2], box)
    if op == "fma":
        ps = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
        return _ival(min(ps) + c.lo, max(ps) + c.hi, bad or c.bad)
    raise ExprError(f"unknown operator {op}")


def _pow_range(a: RInterval, n: int, bad: bool) -> RInterval:
    if n == 0:
        return _ival(1, 1, bad)
    if n < 0:
        if a.lo <= 0 <= a.hi:
            return _full(True)
        inv = _ival(1 / a.hi, 1 / a.lo, bad)
        return _pow_range(inv, -n, inv.bad)
    lo, hi = a.lo ** n, a.hi ** n
    if n % 2 == 0:
        if a.lo <= 0 <= a.hi:
            return _ival(0, max(lo, hi), bad)
        if a.hi < 0:
            lo, hi = hi, lo
    return _ival(lo, hi, bad)


def _trig_range(a: RInterval, phase, bad: bool) -> RInterval:
    """Range of cos(x + phase·0)… shared by sin/cos.

    ``phase`` shifts extrema candidates: cos has maxima at 2mπ and minima
    at π+2mπ; sin is cos shifted by −π/2.
    """
    f = mpmath.cos if phase == 0 else mpmath.sin
    if not mpmath.isfinite(a.lo) or not mpmath.isfinite(a.hi):
        return RInterval(mpf(-1), mpf(1), bad)
    if a.hi - a.lo >= 2 * mpmath.pi:
        return RInterval(mpf(-1), mpf(1), bad)
    vlo, vhi = f(a.lo), f(a.hi)
    lo, hi = min(vlo, vhi), max(vlo, vhi)
    # extrema of cos at x = m·π (even m → +1, odd m → −1); for sin shift by π/2
    shift = mpf(0) if phase == 0 else mpmath.pi / 2
    slop = mpf(2) ** (-mp.prec + 16)
    t0 = (a.lo - shift) / mpmath.pi
    t1 = (a.hi - shift) / mpmath.pi
    m = mpmath.ceil(t0 - slop)
    while m <= mpmath.floor(t1 + slop):
        if int(m) % 2 == 0:
            hi = mpf(1)
        else:
            lo = mpf(-1)
        m += 1
    lo = max(_bump_dn(lo), mpf(-1))
    hi = min(_bump_up(hi), mpf(1))
    return RInterval(lo, hi, bad)


def _tan_range(a: RInterval, bad: bool) -> RInterval:
    if not mpmath.isfinite(a.lo) or not mpmath.isfinite(a.hi):
        return _full(True)
    if a.hi - a.lo >= mpmath.pi:
        return _full(True)
    slop = mpf(2) ** (-mp.prec + 16)
    t0 = (a.lo - mpmath.pi / 2) / mpmath.pi
    t1 = (a.hi - mpmath.pi / 2) / mpmath.pi
    if mpmath.ceil(t0 - slop) <= mpmath.floor(t1 + slop):
        return _full(True)
    return _ival(mpmath.tan(a.lo), mpmath.tan(a.hi), bad)


# -- differentiation ---------------------------------------------------------

def differentiate(e: Expr, name: str = "x") -> Expr:
    """Symbolic derivative with respect to ``name``; floor is rejected."""
    return simplify(_diff(e, name))


def _diff(e: Expr, v: str) -> Expr:
    op = e.op
    if op == "var":
        return ONE if e.value == v else ZERO
    if op in ("rat",) or op in NAMED_CONSTS:
        return ZERO
    if op == "floor":
        if v in free_vars(e):
            raise NonDifferentiableError("floor is not differentiable")
        return ZERO
    if op == "+":
        return add(_diff(e.args[0], v), _diff(e.args[1], v))
    if op == "-":
        return sub(_diff(e.args[0], v), _diff(e.args[1], v))
    if op == "neg":
        return neg(_diff(e.args[0], v))
    if op == "*":
        a, b = e.args
        return add(mul(_diff(a, v), b), mul(a, _diff(b, v)))
    if op == "/":
        a, b = e.args
        return div(sub(mul(_diff(a, v), b), mul(a, _diff(b, v))), pow_int(b, 2))
    if op == "pow":
        a = e.args[0]
        return mul(mul(rat(e.value), pow_int(a, e.value - 1)), _diff(a, v))
    if op == "sqrt":
        a = e.args[0]
        return div(_diff(a, v), mul(rat(2), Expr("sqrt", (a,))))
    if op == "sin":
        a = e.args[0]
        return mul(Expr("cos", (a,)), _diff(a, v))
    if op == "cos":
        a = e.args[0]
        return neg(mul(Expr("sin", (a,)), _diff(a, v)))
    if op == "tan":
        a = e.args[0]
        return div(_diff(a, v), pow_int(Expr("cos", (a,)), 2))
    if op == "asin":
        a = e.args[0]
        return div(_diff(a, v), Expr("sqrt", (sub(ONE, pow_int(a, 2)),)))
    if op == "exp":
        a = e.args[0]
        return mul(e, _diff(a, v))
    if op == "log":
        a = e.args[0]
        return div(_diff(a, v), a)
    if op == "fma":
        a, b, c = e.args
        return add(add(mul(_diff(a, v), b), mul(a, _diff(b, v))), _diff(c, v))
    if op == "ldexp":
        a, k = e.args
        if v in free_vars(k):
            raise NonDifferentiableError("ldexp exponent depends on the variable")
        return Expr("ldexp", (_diff(a, v), k))
    raise NonDifferentiableError(f"cannot differentiate {op}")


# -- symbolic intervals ------------------------------------------------------

@dataclass(frozen=True)
class SymInterval:
    """Interval with symbolically exact constant endpoints."""

    lo: Expr
    hi: Expr

    def endpoints(self, precision_bits: int = DEFAULT_PREC):
        lo = eval_point(self.lo, {}, precision_bits)
        hi = eval_point(self.hi, {}, precision_bits)
        if lo is None or hi is None:
            raise ExprError("interval endpoint is out of domain")
        return lo, hi

    def is_bounded(self) -> bool:
        lo, hi = self.endpoints(64)
        return mpmath.isfinite(lo) and mpmath.isfinite(hi)

    def midpoint(self) -> Expr:
        return simplify(div(add(self.lo, self.hi), rat(2)))

    def __repr__(self):
        return f"[{format_expr(self.lo)}, {format_expr(self.hi)}]"


def interval(lo, hi) -> SymInterval:
    lo = lo if isinstance(lo, Expr) else rat(lo)
    hi = hi if isinstance(hi, Expr) else rat(hi)
    return SymInterval(lo, hi)


FULL_LINE = SymInterval(neg(INF), INF)


def const_value(e: Expr, precision_bits: int = DEFAULT_PREC):
    if free_vars(e):
        raise ExprError(f"not a constant expression: {format_expr(e)}")
    v = eval_point(e, {}, precision_bits)
    if v is None:
        raise ExprError(f"constant expression out of domain: {format_expr(e)}")
    return v


def const_eq(a: Expr, b: Expr, precision_bits: int = DEFAULT_PREC) -> bool:
    """Endpoint equality: exact-rational fast path, else 256-bit compare."""
    ra, rb = as_rational(a), as_rational(b)
    if ra is not None and rb is not None:
        return ra == rb
    va, vb = const_value(a, precision_bits), const_value(b, precision_bits)
    if va == vb:
        return True
    if not (mpmath.isfinite(va) and mpmath.isfinite(vb)):
        return False
    with mp.workprec(precision_bits):
        tol = mpf(2) ** (-(precision_bits - 56))
        return abs(va - vb) <= tol * max(1, abs(va), abs(vb))


def const_le(a: Expr, b: Expr, precision_bits: int = DEFAULT_PREC) -> bool:
    ra, rb = as_rational(a), as_rational(b)
    if ra is not None and rb is not None:
        return ra <= rb
    if const_eq(a, b, precision_bits):
        return True
    return const_value(a, precision_bits) <= const_value(b, precision_bits)


def intervals_eq(a: SymInterval, b: SymInterval, precision_bits: int = DEFAULT_PREC) -> bool:
    return const_eq(a.lo, b.lo, precision_bits) and const_eq(a.hi, b.hi, precision_bits)


def mpf_to_expr(v) -> Expr:
    """Exact conversion of a binary float (mpf, float, or int) to a
    rational node.  Never routes through the mpf constructor, which would
    re-round to the ambient context precision."""
    if isinstance(v, int):
        return rat(Fraction(v))
    if not hasattr(v, "_mpf_"):
        v = float(v)
        if v != v or v in (float("inf"), float("-inf")):
            return INF if v > 0 else neg(INF)
        return rat(Fraction(v))
    if not mpmath.isfinite(v):
        return INF if v > 0 else neg(INF)
    sign, man, exp, _ = v._mpf_
    man = -man if sign else man
    if exp >= 0:
        return rat(Fraction(man * 2 ** exp))
    return rat(Fraction(man, 2 ** -exp))


# -- textual syntax ----------------------------------------------------------

_ATOM_CONSTS = {"pi": PI, "e": E, "log2": LOG2, "inf": INF, "-inf": neg(INF)}


def _parse_atom(tok: str) -> Expr:
    if tok in _ATOM_CONSTS:
        return _ATOM_CONSTS[tok]
    try:
        return rat(Fraction(tok))
    except (ValueError, ZeroDivisionError):
        pass
    if tok and (tok[0].isalpha() or tok[0] in "?_"):
        return var(tok)
    raise sexpr.SexprError(f"cannot parse atom {tok!r}")


def expr_from_sexpr(form) -> Expr:
    if isinstance(form, str):
        return _parse_atom(form)
    if not form:
        raise sexpr.SexprError("empty form")
    head = form[0]
    if head == "pow":
        if len(form) != 3:
            raise sexpr.SexprError("pow expects (pow base exponent)")
        return pow_int(expr_from_sexpr(form[1]), int(form[2]))
    args = tuple(expr_from_sexpr(f) for f in form[1:])
    return Expr(head, args)


def parse_expr(text: str) -> Expr:
    return expr_from_sexpr(sexpr.parse(text))


def expr_to_sexpr(e: Expr):
    if e.op == "rat":
        v = e.value
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if e.op == "var":
        return e.value
    if e.op in NAMED_CONSTS:
        return e.op
    if e.op == "pow":
        return ["pow", expr_to_sexpr(e.args[0]), str(e.value)]
    return [e.op] + [expr_to_sexpr(a) for a in e.args]


def format_expr(e: Expr) -> str:
    return sexpr.format_sexpr(expr_to_sexpr(e))


def interval_from_sexpr(form) -> SymInterval:
    if not isinstance(form, list) or len(form) != 3 or form[0] != "interval":
        raise sexpr.SexprError("expected (interval lo hi)")
    return SymInterval(expr_from_sexpr(form[1]), expr_from_sexpr(form[2]))


def interval_to_sexpr(iv: SymInterval):
    return ["interval", expr_to_sexpr(iv.lo), expr_to_sexpr(iv.hi)]


def parse_interval(text: str) -> SymInterval:
    return interval_from_sexpr(sexpr.parse(text))


def format_interval(iv: SymInterval) -> str:
    return sexpr.format_sexpr(interval_to_sexpr(iv))
