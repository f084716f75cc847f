"""Shared evaluation plans for horner/estrin nodes.

Both the C emitter and the interpreter execute the same operation tree,
so the rounding sequence - and therefore every output bit - agrees by
construction.  Trees are tuples:

    ("x", fmt)              the node input, cast to fmt
    ("const", i, fmt)       i-th coefficient in fmt
    ("add"|"mul", fmt, a, b)
"""

from __future__ import annotations


def _pow_tree(g: int, fmt: str):
    if g == 1:
        return ("x", fmt)
    if g % 2 == 0:
        h = _pow_tree(g // 2, fmt)
        return ("mul", fmt, h, h)
    return ("mul", fmt, ("x", fmt), _pow_tree(g - 1, fmt))


def _term_tree(idx: int, power: int, fmt: str):
    if power == 0:
        return ("const", idx, fmt)
    return ("mul", fmt, ("const", idx, fmt), _pow_tree(power, fmt))


def _horner_tail(monomials, first_idx, fmt):
    n = len(monomials)
    acc = ("const", first_idx + n - 1, fmt)
    for i in range(n - 2, -1, -1):
        gap = monomials[i + 1] - monomials[i]
        acc = ("add", fmt, ("mul", fmt, acc, _pow_tree(gap, fmt)), ("const", first_idx + i, fmt))
    if monomials[0] > 0:
        acc = ("mul", fmt, acc, _pow_tree(monomials[0], fmt))
    return acc


def _estrin_tail(monomials, first_idx, fmt):
    items = [(p, ("const", first_idx + i, fmt)) for i, p in enumerate(monomials)]
    while len(items) > 1:
        nxt = []
        for j in range(0, len(items) - 1, 2):
            (pa, ta), (pb, tb) = items[j], items[j + 1]
            nxt.append((pa, ("add", fmt, ta, ("mul", fmt, tb, _pow_tree(pb - pa, fmt)))))
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    p0, t0 = items[0]
    if p0 > 0:
        t0 = ("mul", fmt, t0, _pow_tree(p0, fmt))
    return t0


def poly_plan(kind: str, monomials, split: int, prec: str, split_prec: str):
    """Evaluation tree for a polynomial node.

    The trailing terms are evaluated in ``prec`` (horner or estrin form);
    the leading ``split`` terms are then added one at a time, smallest
    power last, in ``split_prec``.
    """
    tail_ms = list(monomials[split:])
    if tail_ms:
        tail = (_horner_tail if kind == "horner" else _estrin_tail)(tail_ms, split, prec)
    else:
        tail = None
    if split == 0:
        return tail
    out_fmt = split_prec
    acc = ("cast", out_fmt, tail) if tail is not None else None
    for i in range(split - 1, -1, -1):
        term = _term_tree(i, monomials[i], out_fmt)
        acc = term if acc is None else ("add", out_fmt, term, acc)
    return acc
