"""Reference interpreter for the IR.

Executes nodes in order over numpy arrays using IEEE-754 double/single
operations, mirroring the emitted C under the contraction-disabled
contract: outputs are bit-identical to the compiled code.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import ddarith as dd
from .ir import IRNode, IRProgram
from .polyplan import poly_plan
from .symexpr import Expr

_SQRT2 = float.fromhex("0x1.6a09e667f3bcdp+0")  # nearest double to sqrt(2)
_MANT_MASK = np.int64(0x000FFFFFFFFFFFFF)
_ONE_BITS = np.int64(0x3FF0000000000000)


class InterpError(ValueError):
    pass


def _fma64(a, b, c):
    """Correctly rounded a*b+c via exact rational arithmetic."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    a, b, c = np.broadcast_arrays(a, b, c)
    out = np.empty(a.shape, dtype=np.float64)
    flat_a, flat_b, flat_c = a.ravel(), b.ravel(), c.ravel()
    flat_o = out.ravel()
    for i in range(flat_a.size):
        flat_o[i] = float(
            Fraction(float(flat_a[i])) * Fraction(float(flat_b[i])) + Fraction(float(flat_c[i]))
        )
    return out


def _const(value: Fraction, fmt: str):
    f = float(value)
    if fmt == "fp32":
        return np.float32(f)
    if fmt == "dd":
        hi = f
        lo = float(value - Fraction(hi))
        return (np.float64(hi), np.float64(lo))
    return np.float64(f)


def _to_format(v, fmt: str):
    if isinstance(v, tuple):  # dd source
        if fmt == "dd":
            return v
        if fmt == "fp64":
            return v[0]
        if fmt == "fp32":
            return v[0].astype(np.float32)
    else:
        if fmt == "dd":
            return (np.asarray(v, dtype=np.float64), np.zeros_like(v, dtype=np.float64))
        if fmt == "fp64":
            return np.asarray(v, dtype=np.float64)
        if fmt == "fp32":
            return np.asarray(v, dtype=np.float64).astype(np.float32)
    raise InterpError(f"cannot cast to {fmt}")


def _eval_expr(e: Expr, env: dict, fmt: str):
    op = e.op
    if op == "var":
        v = env[e.value]
        if isinstance(v, np.ndarray) and v.dtype == np.int64:
            v = v.astype(np.float64)
        return _to_format(v, fmt)
    if op == "rat":
        return _const(e.value, fmt)
    if fmt == "dd":
        args = [_eval_expr(a, env, fmt) for a in e.args]
        if op == "+":
            return dd.dd_add(*args)
        if op == "-":
            return dd.dd_sub(*args)
        if op == "*":
            return dd.dd_mul(*args)
        if op == "/":
            return dd.dd_div(*args)
        if op == "neg":
            return dd.dd_neg(args[0])
        if op == "sqrt":
            return dd.dd_sqrt(args[0])
        if op == "fma":
            return dd.dd_add(dd.dd_mul(args[0], args[1]), args[2])
        raise InterpError(f"unsupported dd expression op {op}")
    args = [_eval_expr(a, env, fmt) for a in e.args]
    if op == "+":
        return args[0] + args[1]
    if op == "-":
        return args[0] - args[1]
    if op == "*":
        return args[0] * args[1]
    if op == "/":
        return args[0] / args[1]
    if op == "neg":
        return -args[0]
    if op == "sqrt":
        return np.sqrt(args[0])
    if op == "fma":
        if fmt == "fp32":
            raise InterpError("fp32 fma is not supported in expressions")
        return _fma64(*args)
    raise InterpError(f"unsupported expression op {op}")


def _eval_plan(plan, xval, coeffs, fmts):
    kind = plan[0]
    if kind == "x":
        return _to_format(xval, plan[1])
    if kind == "const":
        idx, fmt = plan[1], plan[2]
        c = coeffs[idx]
        if fmt == "dd":
            pair = c if isinstance(c, tuple) else (c, 0.0)
            return (np.float64(pair[0]), np.float64(pair[1]))
        if fmt == "fp32":
            return np.float32(c)
        return np.float64(c if not isinstance(c, tuple) else c[0])
    if kind == "cast":
        return _to_format(_eval_plan(plan[2], xval, coeffs, fmts), plan[1])
    fmt = plan[1]
    a = _eval_plan(plan[2], xval, coeffs, fmts)
    b = _eval_plan(plan[3], xval, coeffs, fmts)
    if fmt == "dd":
        return dd.dd_add(a, b) if kind == "add" else dd.dd_mul(a, b)
    return a + b if kind == "add" else a * b


def _bits(x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64)).view(np.int64)


def _from_bits(b):
    return np.ascontiguousarray(b).view(np.float64)


def _exec_block(nodes, env, formats):
    for node in nodes:
        _exec_node(node, env, formats)


def _exec_node(node: IRNode, env: dict, formats: dict):
    k = node.kind
    if k == "cast":
        env[node.outputs[0]] = _to_format(env[node.inputs[0]], node.args["c_type"])
        return
    if k == "expression":
        env[node.outputs[0]] = _eval_expr(node.args["expr"], env, node.args["prec"])
        return
    if k in ("horner", "estrin"):
        plan = poly_plan(
            k, node.args["monomials"], node.args["split"], node.args["prec"],
            node.args["split_prec"],
        )
        if plan is None:
            raise InterpError("empty polynomial")
        env[node.outputs[0]] = _eval_plan(plan, env[node.inputs[0]], node.args["coefficients"], formats)
        return
    if k == "if_less":
        x = env[node.inputs[0]]
        cmp = x[0] if isinstance(x, tuple) else x
        mask = cmp < np.float64(node.args["bound"]) if cmp.dtype != np.float32 else cmp < np.float32(node.args["bound"])
        tv = env[node.args["t_val"]]
        fv = env[node.args["f_val"]]
        if isinstance(tv, tuple) or isinstance(fv, tuple):
            tv = _to_format(tv, "dd")
            fv = _to_format(fv, "dd")
            env[node.outputs[0]] = (np.where(mask, tv[0], fv[0]), np.where(mask, tv[1], fv[1]))
        else:
            env[node.outputs[0]] = np.where(mask, tv, fv)
        return
    if k == "additive":
        x = env[node.inputs[0]]
        p = np.float64(node.args["period"])
        q = x / p
        kd = np.floor(q)
        env[node.outputs[0]] = x - kd * p
        env[node.outputs[1]] = kd.astype(np.int64)
        return
    if k == "cody_waite":
        x = env[node.inputs[0]]
        inv = np.float64(node.args["inv_period"])
        kd = np.floor(x * inv + np.float64(0.5))
        r = x
        for c in node.args["chunks"]:
            r = r - kd * np.float64(c)
        env[node.outputs[0]] = r
        env[node.outputs[1]] = kd.astype(np.int64)
        return
    if k == "decompose":
        x = env[node.inputs[0]]
        bits = _bits(x)
        e = ((bits >> np.int64(52)) & np.int64(0x7FF)) - np.int64(1023)
        m = _from_bits((bits & _MANT_MASK) | _ONE_BITS)
        big = m > np.float64(_SQRT2)
        m = np.where(big, m * np.float64(0.5), m)
        e = e + big.astype(np.int64)
        env[node.outputs[0]] = m
        env[node.outputs[1]] = e
        return
    if k == "set_exp":
        y = env[node.inputs[0]]
        kk = env[node.inputs[1]]
        env[node.outputs[0]] = _from_bits(_bits(y) + (kk << np.int64(52)))
        return
    if k == "mod_switch":
        y = env[node.inputs[0]]
        kk = env[node.inputs[1]]
        mod = node.args["mod"]
        res = (kk & np.int64(mod - 1)).astype(np.int64)
        out = None
        fmtd = None
        for r, expr in sorted(node.args["mod_to_blocks"].items()):
            val = _eval_expr(expr, env, _fmt_of_value(y))
            if out is None:
                out = val
                fmtd = isinstance(val, tuple)
            else:
                m = res == np.int64(r)
                if fmtd:
                    out = (np.where(m, val[0], out[0]), np.where(m, val[1], out[1]))
                else:
                    out = np.where(m, val, out)
        env[node.outputs[0]] = out
        return
    if k == "split_dom":
        x = env[node.inputs[0]]
        cmp = x[0] if isinstance(x, tuple) else x
        claimed = np.zeros(cmp.shape, dtype=bool)
        out = None
        with np.errstate(all="ignore"):
            selections = []
            for lo, hi, block, bout in node.args["cases"]:
                mask = (cmp >= lo) & (cmp <= hi) & ~claimed
                claimed |= mask
                _exec_block(block, env, formats)
                selections.append((mask, env[bout]))
            # inputs outside every case fall through to the last case
            last_mask, last_val = selections[-1]
            selections[-1] = (last_mask | ~claimed, last_val)
            for mask, val in selections:
                if out is None:
                    if isinstance(val, tuple):
                        out = (val[0].copy(), val[1].copy())
                    else:
                        out = np.array(val, copy=True)
                else:
                    if isinstance(val, tuple):
                        out = (np.where(mask, val[0], out[0]), np.where(mask, val[1], out[1]))
                    else:
                        out = np.where(mask, val, out)
        env[node.outputs[0]] = out
        return
    raise InterpError(f"unknown node kind {node.kind}")


def _fmt_of_value(v):
    if isinstance(v, tuple):
        return "dd"
    return "fp32" if v.dtype == np.float32 else "fp64"


def run(prog: IRProgram, xs) -> np.ndarray:
    """Evaluate the program over an array of inputs, returning float64."""
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    entry_fmt = prog.formats[prog.entry]
    env = {prog.entry: _to_format(xs, entry_fmt)}
    with np.errstate(all="ignore"):
        _exec_block(prog.nodes, env, prog.formats)
        result = env[prog.result]
        return np.asarray(_to_format(result, "fp64"), dtype=np.float64)


def interpret(prog: IRProgram, x: float) -> float:
    """Single-input convenience wrapper; input must be finite and in-domain."""
    if not np.isfinite(x):
        raise InterpError("input must be finite")
    return float(run(prog, np.array([x], dtype=np.float64))[0])
