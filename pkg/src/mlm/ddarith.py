"""Double-double arithmetic over numpy arrays.

A double-double value is an unevaluated sum hi + lo with |lo| <= ulp(hi)/2,
giving roughly 106 significand bits.  These functions mirror, operation
for operation, the C runtime emitted by cgen.py; every step is an IEEE
double operation, so results are bit-identical to the compiled code.

two_prod uses Dekker splitting here (this Python lacks fma) while the C
runtime uses fma(); both compute the exact product error, so they agree
bitwise for all non-overflowing inputs.
"""

from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2^27 + 1


def two_sum(a, b):
    """s + e == a + b exactly, s = fl(a + b)."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def fast_two_sum(a, b):
    """two_sum under the precondition |a| >= |b| (or a == 0)."""
    s = a + b
    e = b - (s - a)
    return s, e


def two_prod(a, b):
    """p + e == a * b exactly, p = fl(a * b)."""
    p = a * b
    ca = _SPLITTER * a
    ahi = ca - (ca - a)
    alo = a - ahi
    cb = _SPLITTER * b
    bhi = cb - (cb - b)
    blo = b - bhi
    e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, e


def dd_from(x):
    x = np.asarray(x, dtype=np.float64)
    return x, np.zeros_like(x)


def dd_to(a):
    return a[0]


def dd_neg(a):
    return -a[0], -a[1]


def dd_add(a, b):
    s1, s2 = two_sum(a[0], b[0])
    t1, t2 = two_sum(a[1], b[1])
    s2 = s2 + t1
    s1, s2 = fast_two_sum(s1, s2)
    s2 = s2 + t2
    return fast_two_sum(s1, s2)


def dd_sub(a, b):
    return dd_add(a, dd_neg(b))


def dd_mul(a, b):
    p, e = two_prod(a[0], b[0])
    e = e + (a[0] * b[1] + a[1] * b[0])
    return fast_two_sum(p, e)


def dd_mul_d(a, b):
    """double-double times double."""
    p, e = two_prod(a[0], b)
    e = e + a[1] * b
    return fast_two_sum(p, e)


def dd_div(a, b):
    q1 = a[0] / b[0]
    r = dd_sub(a, dd_mul_d(b, q1))
    q2 = r[0] / b[0]
    r = dd_sub(r, dd_mul_d(b, q2))
    q3 = r[0] / b[0]
    s, e = fast_two_sum(q1, q2)
    return dd_add((s, e), dd_from_scalar_like(q3))


def dd_from_scalar_like(x):
    x = np.asarray(x, dtype=np.float64)
    return x, np.zeros_like(x)


def dd_sqrt(a):
    """One compensated Newton step from the double estimate."""
    s0 = np.sqrt(a[0])
    p, e = two_prod(s0, s0)
    d = dd_sub(a, (p, e))
    corr = (d[0] + d[1]) / (2.0 * s0)
    return fast_two_sum(s0, corr)
