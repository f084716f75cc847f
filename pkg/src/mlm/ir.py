"""Untyped ordered-node IR and the lowering from implementation terms.

Nodes are computed strictly in order; there is no control flow beyond the
specialized conditional nodes (if_less, mod_switch, split_dom).  The
first input/output of every node carries the transformed input or output
value.  Lowering rounds every real-number constant to its node's
floating-point format.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from mpmath import mp, mpf

from .dsl import (
    Approx, Arith, Compose, Hole, ImplTerm, Left, Logarithmic, Periodic,
    Polynomial, Rewrite, Right, SplitDom, type_of,
)
from .symexpr import (
    Expr, SymInterval, add, const_eq, const_value, eval_point, free_vars,
    mpf_to_expr, mul, rat, simplify, sub, substitute, var,
)

NODE_KINDS = (
    "cast", "cody_waite", "decompose", "expression", "estrin", "horner",
    "if_less", "mod_switch", "set_exp", "additive", "split_dom",
)

EXPR_OPS = ("+", "-", "*", "/", "neg", "sqrt", "fma", "pow", "rat", "var")


class LowerError(ValueError):
    pass


@dataclass
class IRNode:
    kind: str
    inputs: list
    outputs: list
    args: dict

    def __repr__(self):
        return f"{self.kind}({', '.join(self.inputs)} -> {', '.join(self.outputs)})"


@dataclass
class IRProgram:
    nodes: list
    entry: str
    result: str
    formats: dict  # var name -> fp32 | fp64 | dd | int

    def kinds(self):
        out = []

        def walk(nodes):
            for n in nodes:
                out.append(n.kind)
                if n.kind == "split_dom":
                    for _, _, block, _ in n.args["cases"]:
                        walk(block)

        walk(self.nodes)
        return out


# -- constant handling ----------------------------------------------------------


def round_const(value, fmt: str):
    """Round a high-precision value to a storable constant of the format."""
    v = value if isinstance(value, mpf) else const_value(value, 256) if isinstance(value, Expr) else mpf(value)
    if fmt == "fp64":
        return float(v)
    if fmt == "fp32":
        with mp.workprec(24):
            return float(+v)
    if fmt == "dd":
        hi = float(v)
        lo = float(v - hi)
        return (hi, lo)
    raise LowerError(f"cannot round constant to format {fmt}")


def fold_constant_subtrees(e: Expr, precision_bits: int = 256) -> Expr:
    """Collapse every variable-free subtree to its evaluated value."""
    if e.op in ("rat", "var"):
        return e
    if not free_vars(e):
        v = eval_point(e, {}, precision_bits)
        if v is None:
            raise LowerError(f"constant subexpression is undefined: {e!r}")
        return mpf_to_expr(v)
    if not e.args:
        return e
    return Expr(e.op, tuple(fold_constant_subtrees(a, precision_bits) for a in e.args), e.value)


def _check_expression_ops(e: Expr):
    if e.op in ("sin", "cos", "tan", "asin", "exp", "log", "floor", "ldexp"):
        raise LowerError(
            f"operator {e.op} cannot appear in compiled reduction/reconstruction expressions"
        )
    for a in e.args:
        _check_expression_ops(a)


# -- lowering context -------------------------------------------------------------


class _Ctx:
    def __init__(self):
        self.counter = 0
        self.blocks = [[]]
        self.formats = {}

    def fresh(self, fmt: str) -> str:
        name = f"t{self.counter}"
        self.counter += 1
        self.formats[name] = fmt
        return name

    def bind(self, name: str, fmt: str) -> str:
        # sibling scopes may reuse a compose name; qualify to keep IR names unique
        candidate = name
        n = 1
        while candidate in self.formats:
            candidate = f"{name}_{n}"
            n += 1
        self.formats[candidate] = fmt
        return candidate

    def emit(self, node: IRNode):
        self.blocks[-1].append(node)

    def push(self):
        self.blocks.append([])

    def pop(self):
        return self.blocks.pop()


def _cast(ctx: _Ctx, v: str, fmt: str) -> str:
    if ctx.formats[v] == fmt:
        return v
    out = ctx.fresh(fmt)
    ctx.emit(IRNode("cast", [v], [out], {"c_type": fmt}))
    return out


def _expression(ctx: _Ctx, e: Expr, fmt: str) -> str:
    # leaf variables convert to fmt at evaluation/emission, so names are
    # kept as-is (rewrite patterns must keep matching them)
    e = fold_constant_subtrees(e)
    _check_expression_ops(e)
    ins = sorted(free_vars(e))
    out = ctx.fresh(fmt)
    ctx.emit(IRNode("expression", ins, [out], {"expr": e, "prec": fmt}))
    return out


def _trivial_operand(term: ImplTerm, in_var: str):
    """Polynomials that are constants or the identity fold into parent
    expressions instead of materializing a node."""
    if isinstance(term, Approx):
        return _trivial_operand(term.body, in_var)
    if isinstance(term, Polynomial):
        if len(term.coeffs) == 1 and term.tuning.prec == "fp64":
            p, c = term.coeffs[0]
            if p == 0:
                return c
            if p == 1:
                return var(in_var) if c == rat(1) else mul(c, var(in_var))
    return None


# -- lowering ---------------------------------------------------------------------


def lower(term: ImplTerm, entry_format: str = "fp64") -> IRProgram:
    """Post-order traversal emitting nodes per term template."""
    if any(isinstance(t, Hole) for _, t in _walk(term)):
        raise LowerError("cannot lower a term containing holes")
    type_of(term)  # surface syntactic errors first
    ctx = _Ctx()
    ctx.bind("x", entry_format)
    out = _lower(ctx, term, "x", "x", {})
    return IRProgram(ctx.blocks[0], "x", out, ctx.formats)


def _walk(term):
    yield (), term
    for i, c in enumerate(term.children()):
        for p, t in _walk(c):
            yield (i,) + p, t


def _lower(ctx: _Ctx, term: ImplTerm, in_var: str, syn_var: str, scope: dict) -> str:
    prec = getattr(term, "tuning", None).prec if getattr(term, "tuning", None) else "fp64"

    if isinstance(term, Polynomial):
        xin = _cast(ctx, in_var, prec)
        split = term.tuning.split
        split_prec = term.tuning.split_prec or prec
        monomials = [p for p, _ in term.coeffs]
        coeffs = []
        for i, (p, c) in enumerate(term.coeffs):
            fmt = split_prec if i < split else prec
            coeffs.append(round_const(c, fmt))
        method = term.tuning.method or "horner"
        out_fmt = split_prec if split else prec
        out = ctx.fresh(out_fmt)
        ctx.emit(
            IRNode(
                method, [xin], [out],
                {
                    "monomials": monomials,
                    "coefficients": coeffs,
                    "split": split,
                    "prec": prec,
                    "split_prec": split_prec,
                },
            )
        )
        return out

    if isinstance(term, Approx):
        return _lower(ctx, term.body, in_var, syn_var, scope)

    if isinstance(term, (Left, Right)):
        bt = type_of(term.body, syn_var)
        is_left = isinstance(term, Left)
        m_expr = bt.domain.lo if is_left else bt.domain.hi
        xin = _cast(ctx, in_var, prec)
        bound = round_const(const_value(m_expr, 256), prec if prec != "dd" else "fp64")
        s_expr = substitute(term.s, syn_var, var(xin))
        sx = _expression(ctx, s_expr, prec)
        red = ctx.fresh(prec)
        tv, fv = (sx, xin) if is_left else (xin, sx)
        ctx.emit(IRNode("if_less", [xin], [red], {"bound": bound, "t_val": tv, "f_val": fv}))
        y = _lower(ctx, term.body, red, syn_var, scope)
        if term.t == var("y"):
            return y
        t_expr = substitute(term.t, "y", var(y))
        ty = _expression(ctx, t_expr, ctx.formats[y])
        yc, tyc = y, ty
        out = ctx.fresh(ctx.formats[ty])
        if ctx.formats[y] != ctx.formats[ty]:
            yc = _cast(ctx, y, ctx.formats[ty])
        tv2, fv2 = (tyc, yc) if is_left else (yc, tyc)
        ctx.emit(IRNode("if_less", [xin], [out], {"bound": bound, "t_val": tv2, "f_val": fv2}))
        return out

    if isinstance(term, Periodic):
        method = term.tuning.method or "naive"
        xin = _cast(ctx, in_var, "fp64")
        r = ctx.fresh("fp64")
        k = ctx.fresh("int")
        period_val = const_value(term.period, 256)
        if method == "naive":
            ctx.emit(IRNode("additive", [xin], [r, k], {"period": float(period_val)}))
        else:
            chunks, inv = cody_waite_constants(term.period, term.tuning.cw_bits, term.tuning.cw_len)
            ctx.emit(
                IRNode(
                    "cody_waite", [xin], [r, k],
                    {
                        "period": float(period_val),
                        "bits_per": term.tuning.cw_bits,
                        "entries": term.tuning.cw_len,
                        "chunks": chunks,
                        "inv_period": inv,
                    },
                )
            )
        rb = _cast(ctx, r, prec)
        y = _lower(ctx, term.body, rb, syn_var, scope)
        return _reconstruct(ctx, term.t, y, k, ctx.formats[y])

    if isinstance(term, Logarithmic):
        if not const_eq(term.base, rat(2)):
            raise LowerError("logarithmic lowering supports base 2 only (binary decompose)")
        xin = _cast(ctx, in_var, "fp64")
        m = ctx.fresh("fp64")
        k = ctx.fresh("int")
        ctx.emit(IRNode("decompose", [xin], [m, k], {}))
        mb = _cast(ctx, m, prec)
        y = _lower(ctx, term.body, mb, syn_var, scope)
        return _reconstruct(ctx, term.t, y, k, ctx.formats[y])

    if isinstance(term, Arith):
        lt = _trivial_operand(term.lhs, in_var)
        rt = _trivial_operand(term.rhs, in_var)
        lv = lt if lt is not None else var(_lower(ctx, term.lhs, in_var, syn_var, scope))
        rv = rt if rt is not None else var(_lower(ctx, term.rhs, in_var, syn_var, scope))
        return _expression(ctx, Expr(term.op, (lv, rv)), prec)

    if isinstance(term, Compose):
        v1 = _lower(ctx, term.first, in_var, syn_var, scope)
        irname = ctx.bind(term.name, ctx.formats[v1])
        ctx.emit(
            IRNode(
                "expression", [v1], [irname],
                {"expr": var(v1), "prec": ctx.formats[v1]},
            )
        )
        scope2 = {**scope, term.name: irname}
        return _lower(ctx, term.second, irname, term.name, scope2)

    if isinstance(term, SplitDom):
        xin = in_var
        cases = []
        out_fmts = []
        blocks = []
        for iv, body in term.cases:
            ctx.push()
            bout = _lower(ctx, body, xin, syn_var, scope)
            block = ctx.pop()
            lo = round_const(const_value(iv.lo, 256), "fp64")
            hi = round_const(const_value(iv.hi, 256), "fp64")
            cases.append((lo, hi, block, bout))
            out_fmts.append(ctx.formats[bout])
            blocks.append(block)
        rank = {"fp32": 0, "fp64": 1, "dd": 2}
        out_fmt = max(out_fmts, key=lambda f: rank[f])
        fixed = []
        for (lo, hi, block, bout), fmt in zip(cases, out_fmts):
            if fmt != out_fmt:
                cast_out = ctx.fresh(out_fmt)
                block.append(IRNode("cast", [bout], [cast_out], {"c_type": out_fmt}))
                bout = cast_out
            fixed.append((lo, hi, block, bout))
        out = ctx.fresh(out_fmt)
        ctx.emit(IRNode("split_dom", [xin], [out], {"cases": fixed}))
        return out

    if isinstance(term, Rewrite):
        mark = len(ctx.blocks[-1])
        out = _lower(ctx, term.body, in_var, syn_var, scope)
        pat = fold_constant_subtrees(term.pattern)
        rhs = fold_constant_subtrees(term.replacement)
        for nm, irname in scope.items():
            pat = substitute(pat, nm, var(irname))
            rhs = substitute(rhs, nm, var(irname))
        if syn_var != in_var:
            pat = substitute(pat, syn_var, var(in_var))
            rhs = substitute(rhs, syn_var, var(in_var))
        hits = 0
        for node in ctx.blocks[-1][mark:]:
            if node.kind != "expression":
                continue
            new_expr, n = _replace_subexpr(node.args["expr"], pat, rhs)
            if n:
                _check_expression_ops(new_expr)
                node.args["expr"] = new_expr
                extra = sorted(free_vars(new_expr) - set(node.inputs))
                for name in extra:
                    if name not in ctx.formats:
                        raise LowerError(f"rewrite introduces unknown variable {name}")
                    node.inputs.append(name)
                hits += n
        if hits == 0:
            raise LowerError(
                f"rewrite pattern matches no single IR node: {term.pattern!r}"
            )
        return out

    raise LowerError(f"cannot lower {term!r}")


def _replace_subexpr(e: Expr, pat: Expr, rhs: Expr):
    if e == pat:
        return rhs, 1
    if not e.args:
        return e, 0
    total = 0
    new_args = []
    for a in e.args:
        na, n = _replace_subexpr(a, pat, rhs)
        new_args.append(na)
        total += n
    if total:
        return Expr(e.op, tuple(new_args), e.value), total
    return e, 0


def _reconstruct(ctx: _Ctx, t: Expr, y: str, k: str, fmt: str) -> str:
    t = simplify(t)
    if t == var("y"):
        return y
    if t == Expr("ldexp", (var("y"), var("k"))):
        y64 = _cast(ctx, y, "fp64")
        out = ctx.fresh("fp64")
        ctx.emit(IRNode("set_exp", [y64, k], [out], {}))
        return out
    mod = _mod_period(t)
    if mod is not None:
        blocks = {}
        for r in range(mod):
            inst = simplify(fold_constant_subtrees(substitute(t, "k", rat(r))))
            _check_expression_ops(inst)
            inst = substitute(inst, "y", var(y))
            blocks[r] = inst
        out = ctx.fresh(fmt)
        ctx.emit(IRNode("mod_switch", [y, k], [out], {"mod": mod, "mod_to_blocks": blocks}))
        return out
    t_expr = substitute(substitute(t, "y", var(y)), "k", var(k))
    return _expression(ctx, t_expr, fmt)


def _mod_period(t: Expr):
    """Smallest M in {2, 4} with t(y, k) = t(y, k + M), proved by rewriting."""
    if "k" not in free_vars(t):
        return None
    from .egraph import prove_equal
    from .rules import default_rules

    rules = default_rules(selftest=False)
    for m in (2, 4):
        shifted = substitute(t, "k", add(var("k"), rat(m)))
        if prove_equal(t, shifted, rules, iter_limit=6, node_limit=20000) == "proven":
            return m
    return None


# -- cody-waite constants ------------------------------------------------------------


def cody_waite_constants(period: Expr, cw_bits: int, cw_len: int):
    """Multi-word period representation: each chunk carries at most
    cw_bits significand bits so that k times a chunk stays exact for
    |k| < 2^(53 - cw_bits)."""
    if not (1 <= cw_bits <= 52):
        raise LowerError("cw_bits must be in [1, 52]")
    if cw_len < 1:
        raise LowerError("cw_len must be at least 1")
    if cw_bits * cw_len < 53:
        raise LowerError(
            f"infeasible chunking: {cw_bits}x{cw_len} bits cannot round-trip a double"
        )
    with mp.workprec(300):
        p = const_value(period, 300)
        if not (p > 0 and mpmath.isfinite(p)):
            raise LowerError("period must be a positive finite constant")
        chunks = []
        resid = p
        for _ in range(cw_len):
            with mp.workprec(cw_bits):
                c = +resid
            chunks.append(float(c))
            resid = resid - c
        inv = float(1 / p)
    return chunks, inv
