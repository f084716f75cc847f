"""C99 code generation from the IR.

The emitted translation unit is self-contained (only <stdint.h> and
<math.h>), disables floating-point contraction, and inlines a small
double-double runtime when any value uses the dd format.  Numeric
literals are hexadecimal floating constants, so the source round-trips
bit-exactly.
"""

from __future__ import annotations

from fractions import Fraction

from .ir import IRNode, IRProgram
from .polyplan import poly_plan
from .symexpr import Expr

_CTYPES = {"fp32": "float", "fp64": "double", "dd": "dd", "int": "int64_t"}


class EmitError(ValueError):
    pass


def _hex64(v) -> str:
    return float(v).hex()


def _hex32(v) -> str:
    return float(v).hex() + "f"


def _lit(value, fmt: str) -> str:
    if fmt == "fp32":
        return _hex32(value)
    if fmt == "dd":
        hi, lo = value if isinstance(value, tuple) else (float(value), 0.0)
        return f"((dd){{{_hex64(hi)}, {_hex64(lo)}}})"
    v = value[0] if isinstance(value, tuple) else value
    return _hex64(v)


def _frac_lit(value: Fraction, fmt: str) -> str:
    f = float(value)
    if fmt == "dd":
        lo = float(value - Fraction(f))
        return f"((dd){{{_hex64(f)}, {_hex64(lo)}}})"
    return _lit(f, fmt)


def _cast_c(src: str, from_fmt: str, to_fmt: str) -> str:
    if from_fmt == to_fmt:
        return src
    if to_fmt == "fp64":
        if from_fmt == "dd":
            return f"({src}).hi"
        return f"(double)({src})"
    if to_fmt == "fp32":
        if from_fmt == "dd":
            return f"(float)(({src}).hi)"
        return f"(float)({src})"
    if to_fmt == "dd":
        if from_fmt == "fp32":
            return f"mlm_dd_of((double)({src}))"
        return f"mlm_dd_of({src})"
    raise EmitError(f"cannot cast {from_fmt} -> {to_fmt}")


def _expr_c(e: Expr, fmt: str, var_fmts: dict) -> str:
    op = e.op
    if op == "var":
        vf = var_fmts[e.value]
        if vf == "int":
            return _cast_c(f"(double){e.value}", "fp64", fmt) if fmt != "fp64" else f"(double){e.value}"
        return _cast_c(e.value, vf, fmt)
    if op == "rat":
        return _frac_lit(e.value, fmt)
    args = [_expr_c(a, fmt, var_fmts) for a in e.args]
    if fmt == "dd":
        fn = {"+": "mlm_dd_add", "-": "mlm_dd_sub", "*": "mlm_dd_mul", "/": "mlm_dd_div"}.get(op)
        if fn:
            return f"{fn}({args[0]}, {args[1]})"
        if op == "neg":
            return f"mlm_dd_neg({args[0]})"
        if op == "sqrt":
            return f"mlm_dd_sqrt({args[0]})"
        if op == "fma":
            return f"mlm_dd_add(mlm_dd_mul({args[0]}, {args[1]}), {args[2]})"
        raise EmitError(f"unsupported dd op {op}")
    if op in ("+", "-", "*", "/"):
        return f"({args[0]} {op} {args[1]})"
    if op == "neg":
        return f"(-{args[0]})"
    if op == "sqrt":
        return f"sqrtf({args[0]})" if fmt == "fp32" else f"sqrt({args[0]})"
    if op == "fma":
        if fmt == "fp32":
            raise EmitError("fp32 fma is not supported in expressions")
        return f"fma({args[0]}, {args[1]}, {args[2]})"
    raise EmitError(f"unsupported expression op {op}")


def _plan_c(plan, in_var: str, in_fmt: str, coeffs) -> str:
    kind = plan[0]
    if kind == "x":
        return _cast_c(in_var, in_fmt, plan[1])
    if kind == "const":
        return _lit(coeffs[plan[1]], plan[2])
    if kind == "cast":
        inner_fmt = _plan_fmt(plan[2])
        return _cast_c(_plan_c(plan[2], in_var, in_fmt, coeffs), inner_fmt, plan[1])
    fmt = plan[1]
    a = _plan_c(plan[2], in_var, in_fmt, coeffs)
    b = _plan_c(plan[3], in_var, in_fmt, coeffs)
    if fmt == "dd":
        fn = "mlm_dd_add" if kind == "add" else "mlm_dd_mul"
        return f"{fn}({a}, {b})"
    return f"({a} {'+' if kind == 'add' else '*'} {b})"


def _plan_fmt(plan) -> str:
    if plan[0] in ("x", "cast"):
        return plan[1]
    if plan[0] == "const":
        return plan[2]
    return plan[1]


_DD_RUNTIME = """
typedef struct { double hi, lo; } dd;

MLM_INLINE dd mlm_two_sum(double a, double b) {
    double s = a + b;
    double bb = s - a;
    double e = (a - (s - bb)) + (b - bb);
    return (dd){s, e};
}

MLM_INLINE dd mlm_fast_two_sum(double a, double b) {
    double s = a + b;
    double e = b - (s - a);
    return (dd){s, e};
}

MLM_INLINE dd mlm_two_prod(double a, double b) {
    double p = a * b;
    return (dd){p, fma(a, b, -p)};
}

MLM_INLINE dd mlm_dd_of(double x) { return (dd){x, 0.0}; }

MLM_INLINE dd mlm_dd_neg(dd a) { return (dd){-a.hi, -a.lo}; }

MLM_INLINE dd mlm_dd_add(dd a, dd b) {
    dd s = mlm_two_sum(a.hi, b.hi);
    dd t = mlm_two_sum(a.lo, b.lo);
    double s2 = s.lo + t.hi;
    dd r = mlm_fast_two_sum(s.hi, s2);
    double e = r.lo + t.lo;
    return mlm_fast_two_sum(r.hi, e);
}

MLM_INLINE dd mlm_dd_sub(dd a, dd b) { return mlm_dd_add(a, mlm_dd_neg(b)); }

MLM_INLINE dd mlm_dd_mul(dd a, dd b) {
    dd p = mlm_two_prod(a.hi, b.hi);
    double e = p.lo + (a.hi * b.lo + a.lo * b.hi);
    return mlm_fast_two_sum(p.hi, e);
}

MLM_INLINE dd mlm_dd_mul_d(dd a, double b) {
    dd p = mlm_two_prod(a.hi, b);
    double e = p.lo + a.lo * b;
    return mlm_fast_two_sum(p.hi, e);
}

MLM_INLINE dd mlm_dd_div(dd a, dd b) {
    double q1 = a.hi / b.hi;
    dd r = mlm_dd_sub(a, mlm_dd_mul_d(b, q1));
    double q2 = r.hi / b.hi;
    r = mlm_dd_sub(r, mlm_dd_mul_d(b, q2));
    double q3 = r.hi / b.hi;
    dd s = mlm_fast_two_sum(q1, q2);
    return mlm_dd_add(s, mlm_dd_of(q3));
}

MLM_INLINE dd mlm_dd_sqrt(dd a) {
    double s0 = sqrt(a.hi);
    dd p = mlm_two_prod(s0, s0);
    dd d = mlm_dd_sub(a, p);
    double corr = (d.hi + d.lo) / (2.0 * s0);
    return mlm_fast_two_sum(s0, corr);
}
"""

_BITS_RUNTIME = """
typedef union { double d; int64_t i; } mlm_pun;

MLM_INLINE int64_t mlm_as_bits(double x) { mlm_pun u; u.d = x; return u.i; }
MLM_INLINE double mlm_from_bits(int64_t i) { mlm_pun u; u.i = i; return u.d; }
"""

_SQRT2_HEX = "0x1.6a09e667f3bcdp+0"


class _Writer:
    def __init__(self):
        self.lines = []
        self.depth = 1

    def w(self, text: str):
        self.lines.append("    " * self.depth + text)


def _decl(fmt: str, name: str, value: str) -> str:
    return f"{_CTYPES[fmt]} {name} = {value};"


def _emit_node(node: IRNode, w: _Writer, fmts: dict):
    k = node.kind
    out = node.outputs[0] if node.outputs else None
    if k == "cast":
        src = node.inputs[0]
        to = node.args["c_type"]
        w.w(_decl(to, out, _cast_c(src, fmts[src], to)))
        return
    if k == "expression":
        fmt = node.args["prec"]
        w.w(_decl(fmt, out, _expr_c(node.args["expr"], fmt, fmts)))
        return
    if k in ("horner", "estrin"):
        plan = poly_plan(
            k, node.args["monomials"], node.args["split"], node.args["prec"],
            node.args["split_prec"],
        )
        src = node.inputs[0]
        w.w(_decl(fmts[out], out, _plan_c(plan, src, fmts[src], node.args["coefficients"])))
        return
    if k == "if_less":
        src = node.inputs[0]
        cmp = f"{src}.hi" if fmts[src] == "dd" else src
        bound = _hex32(node.args["bound"]) if fmts[src] == "fp32" else _hex64(node.args["bound"])
        w.w(f"{_CTYPES[fmts[out]]} {out};")
        w.w(f"if ({cmp} < {bound}) {{ {out} = {node.args['t_val']}; }} "
            f"else {{ {out} = {node.args['f_val']}; }}")
        return
    if k == "additive":
        x = node.inputs[0]
        r, kk = node.outputs
        p = _hex64(node.args["period"])
        w.w(f"double {r}_q = {x} / {p};")
        w.w(f"double {r}_kd = floor({r}_q);")
        w.w(f"double {r} = {x} - {r}_kd * {p};")
        w.w(f"int64_t {kk} = (int64_t){r}_kd;")
        return
    if k == "cody_waite":
        x = node.inputs[0]
        r, kk = node.outputs
        w.w(f"double {r}_kd = floor({x} * {_hex64(node.args['inv_period'])} + 0x1p-1);")
        chain = x
        w.w(f"double {r} = {x};")
        for i, c in enumerate(node.args["chunks"]):
            w.w(f"{r} = {r} - {r}_kd * {_hex64(c)};")
        w.w(f"int64_t {kk} = (int64_t){r}_kd;")
        return
    if k == "decompose":
        x = node.inputs[0]
        m, e = node.outputs
        w.w(f"int64_t {m}_bits = mlm_as_bits({x});")
        w.w(f"int64_t {e} = (({m}_bits >> 52) & 0x7ff) - 1023;")
        w.w(f"double {m} = mlm_from_bits(({m}_bits & 0x000fffffffffffffLL) | 0x3ff0000000000000LL);")
        w.w(f"if ({m} > {_SQRT2_HEX}) {{ {m} = {m} * 0x1p-1; {e} = {e} + 1; }}")
        return
    if k == "set_exp":
        y, kk = node.inputs
        w.w(f"double {out} = mlm_from_bits(mlm_as_bits({y}) + ({kk} << 52));")
        return
    if k == "mod_switch":
        y, kk = node.inputs
        fmt = fmts[out]
        w.w(f"{_CTYPES[fmt]} {out};")
        w.w(f"switch ((int)({kk} & {node.args['mod'] - 1})) {{")
        for r, expr in sorted(node.args["mod_to_blocks"].items()):
            w.w(f"case {r}: {out} = {_expr_c(expr, fmt, fmts)}; break;")
        w.w(f"default: {out} = {_expr_c(node.args['mod_to_blocks'][0], fmt, fmts)}; break;")
        w.w("}")
        return
    if k == "split_dom":
        x = node.inputs[0]
        cmp = f"{x}.hi" if fmts[x] == "dd" else x
        fmt = fmts[out]
        w.w(f"{_CTYPES[fmt]} {out};")
        cases = node.args["cases"]
        for i, (lo, hi, block, bout) in enumerate(cases):
            if i == 0:
                w.w(f"if ({cmp} >= {_hex64(lo)} && {cmp} <= {_hex64(hi)}) {{")
            elif i < len(cases) - 1:
                w.w(f"}} else if ({cmp} >= {_hex64(lo)} && {cmp} <= {_hex64(hi)}) {{")
            else:
                w.w("} else {  /* fall through to the last case */")
            w.depth += 1
            for sub in block:
                _emit_node(sub, w, fmts)
            w.w(f"{out} = {bout};")
            w.depth -= 1
        w.w("}")
        return
    raise EmitError(f"unknown node kind {node.kind}")


def _program_kinds(prog: IRProgram):
    kinds = set()
    fmts_used = set(prog.formats.values())

    def walk(nodes):
        for n in nodes:
            kinds.add(n.kind)
            if n.kind == "split_dom":
                for _, _, block, _ in n.args["cases"]:
                    walk(block)

    walk(prog.nodes)
    return kinds, fmts_used


def emit_c(prog: IRProgram, name: str = "mlm_impl", arg_format: str = "fp64") -> str:
    """Render the whole program as one self-contained C99 file."""
    kinds, fmts_used = _program_kinds(prog)
    need_dd = "dd" in fmts_used
    need_bits = kinds & {"decompose", "set_exp"}
    header = [
        "/* generated implementation; requires round-to-nearest and no FP contraction */",
        "#include <stdint.h>",
        "#include <math.h>",
        "",
        "#pragma STDC FP_CONTRACT OFF",
        "",
        "#define MLM_INLINE static inline __attribute__((always_inline))",
    ]
    if need_bits:
        header.append(_BITS_RUNTIME)
    if need_dd:
        header.append(_DD_RUNTIME)
    ctype = "float" if arg_format == "fp32" else "double"
    w = _Writer()
    entry_fmt = prog.formats[prog.entry]
    if arg_format != entry_fmt:
        raise EmitError("argument format must match the program entry format")
    for node in prog.nodes:
        _emit_node(node, w, prog.formats)
    res_fmt = prog.formats[prog.result]
    ret = _cast_c(prog.result, res_fmt, arg_format)
    body = "\n".join(w.lines)
    return (
        "\n".join(header)
        + f"\n\n{ctype} {name}({ctype} {prog.entry}) {{\n{body}\n    return {ret};\n}}\n"
    )
