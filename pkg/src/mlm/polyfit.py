"""Native polynomial approximation synthesis: Taylor series, Chebyshev
interpolation, Remez exchange, and greedy coefficient rounding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import mpmath
from mpmath import mp, mpf

from .checker import CheckConfig, infnorm
from .dsl import Approx, ImplType, Polynomial
from .symexpr import (
    Expr, SymInterval, add, differentiate, eval_point, free_vars,
    mpf_to_expr, mul, pow_int, rat, simplify, sub, var,
)


class FitError(ValueError):
    pass


@dataclass
class FitRequest:
    """What to fit.

    ``degree`` counts polynomial terms (not the highest power); when
    ``powers`` is omitted the powers are chosen from ``degree`` and the
    target's parity.
    """

    target: Expr
    domain: SymInterval
    tool: str = "remez"
    powers: Optional[list] = None
    degree: Optional[int] = None
    parity: str = "auto"  # even | odd | any | auto
    fixed: dict = field(default_factory=dict)
    coeff_format: Optional[dict] = None  # power -> bits or "fp32"/"fp64"/"dd"
    precision_bits: int = 256
    var: str = "x"


@dataclass
class FitResult:
    coefficients: dict  # power -> mpf (includes fixed terms)
    error_bound: object
    iterations: int
    converged: bool
    tool: str
    notes: list = field(default_factory=list)

    def poly_expr(self, v: str = "x") -> Expr:
        xv = var(v)
        acc = rat(0)
        for p in sorted(self.coefficients):
            acc = add(acc, mul(mpf_to_expr(self.coefficients[p]), pow_int(xv, p)))
        return simplify(acc)


_FORMAT_BITS = {"fp32": 24, "fp64": 53, "dd": 106}


def detect_parity(target: Expr, domain: SymInterval, v: str = "x", precision_bits: int = 192) -> str:
    """'even', 'odd', or 'any' by sampling f(-t) against ±f(t)."""
    lo, hi = domain.endpoints(precision_bits)
    if not (mpmath.isfinite(lo) and mpmath.isfinite(hi)) or lo > -hi / 2 or hi <= 0:
        return "any"
    even = odd = True
    with mp.workprec(precision_bits):
        span = min(-lo, hi)
        for i in range(1, 8):
            t = span * i / mpf(8)
            a = eval_point(target, {v: t}, precision_bits)
            b = eval_point(target, {v: -t}, precision_bits)
            if a is None or b is None:
                return "any"
            tol = mpf(2) ** (-precision_bits // 2) * max(1, abs(a))
            if abs(a - b) > tol:
                even = False
            if abs(a + b) > tol:
                odd = False
    if even:
        return "even"
    if odd:
        return "odd"
    return "any"


def resolve_powers(req: FitRequest) -> list:
    if req.powers is not None:
        powers = sorted(int(p) for p in req.powers)
        if len(set(powers)) != len(powers):
            raise FitError("duplicate powers")
        return [p for p in powers if p not in req.fixed]
    if req.degree is None:
        raise FitError("either powers or degree must be given")
    parity = req.parity
    if parity == "auto":
        parity = detect_parity(req.target, req.domain, req.var)
    start = {"even": 0, "odd": 1, "any": 0}[parity]
    step = 2 if parity in ("even", "odd") else 1
    powers = []
    p = start
    while len(powers) < req.degree:
        if p not in req.fixed:
            powers.append(p)
        p += step
    return powers


def _fixed_mpf(req: FitRequest) -> dict:
    out = {}
    with mp.workprec(req.precision_bits):
        for p, c in req.fixed.items():
            if isinstance(c, Expr):
                v = eval_point(c, {}, req.precision_bits)
            else:
                v = mpf(c)
            out[int(p)] = v
    return out


def _poly_expr(coeffs: dict, v: str) -> Expr:
    xv = var(v)
    acc = rat(0)
    for p in sorted(coeffs):
        acc = add(acc, mul(mpf_to_expr(coeffs[p]), pow_int(xv, p)))
    return simplify(acc)


def _residual_bound(req: FitRequest, coeffs: dict):
    resid = sub(req.target, _poly_expr(coeffs, req.var))
    cfg = CheckConfig(precision_bits=req.precision_bits)
    r = infnorm(resid, req.domain, cfg, req.var)
    with mp.workprec(req.precision_bits):
        # outward-rounded so that re-checking the same residual stays inside
        return r.lower * (1 + mpf(2) ** -24) + mpf(2) ** -300


def _eval_many(e: Expr, xs, prec, v):
    return [eval_point(e, {v: x}, prec) for x in xs]


def _solve(matrix_rows, rhs, prec):
    with mp.workprec(prec):
        A = mpmath.matrix(matrix_rows)
        b = mpmath.matrix(rhs)
        try:
            sol = mpmath.lu_solve(A, b)
        except (ZeroDivisionError, ValueError) as exc:
            raise FitError(f"singular system: {exc}") from None
        return list(sol)


def _guard_solution(coeffs, powers, span, gvals, prec):
    """Reject solutions of (near-)singular systems that lu_solve powered
    through: any term hugely above the data scale means no Haar basis."""
    with mp.workprec(prec):
        cap = (1 + max(abs(y) for y in gvals)) * mpf(2) ** (prec // 4)
        for p, c in zip(powers, coeffs):
            if abs(c) * span ** p > cap:
                raise FitError("ill-conditioned system (non-Haar basis?)")


# -- taylor ---------------------------------------------------------------------


def taylor_fit(req: FitRequest) -> FitResult:
    """Truncated Taylor coefficients about the domain midpoint (0 when the
    domain straddles it); only useful when the expansion point is 0, since
    the polynomial term language is monomial in x."""
    prec = req.precision_bits
    powers = resolve_powers(req)
    lo, hi = req.domain.endpoints(prec)
    with mp.workprec(prec):
        x0 = mpf(0) if (lo <= 0 <= hi) else (lo + hi) / 2
    coeffs = dict(_fixed_mpf(req))
    deriv = req.target
    fact = 1
    order = 0
    max_p = max(powers) if powers else 0
    with mp.workprec(prec + 40):
        for p in range(max_p + 1):
            if p > 0:
                deriv = differentiate(deriv, req.var)
                fact *= p
            if p in powers:
                v = eval_point(deriv, {req.var: x0}, prec + 40)
                if v is None:
                    raise FitError(f"derivative of order {p} undefined at expansion point")
                coeffs[p] = +(v / fact)
    with mp.workprec(prec):
        coeffs = {p: +c for p, c in coeffs.items()}
    return FitResult(coeffs, _residual_bound(req, coeffs), 1, True, "taylor")


# -- chebyshev ---------------------------------------------------------------------


def _cheb_nodes(n: int, lo, hi):
    mid = (lo + hi) / 2
    half = (hi - lo) / 2
    return [mid + half * mpmath.cos(mpmath.pi * (2 * j + 1) / (2 * n)) for j in range(n)]


def chebyshev_fit(req: FitRequest) -> FitResult:
    """Interpolation at Chebyshev nodes in the requested monomial basis,
    with a least-squares fallback when the node system is singular."""
    prec = req.precision_bits
    powers = resolve_powers(req)
    if not powers:
        raise FitError("no free powers to fit")
    fixed = _fixed_mpf(req)
    lo, hi = req.domain.endpoints(prec)
    if not (mpmath.isfinite(lo) and mpmath.isfinite(hi)):
        raise FitError("chebyshev fitting requires a bounded domain")
    g = sub(req.target, _poly_expr(fixed, req.var)) if fixed else req.target
    notes = []
    with mp.workprec(prec):
        n = len(powers)
        xs = _cheb_nodes(n, lo, hi)
        ys = _eval_many(g, xs, prec, req.var)
        if any(y is None for y in ys):
            raise FitError("target undefined at a Chebyshev node")
        try:
            rows = [[x ** p for p in powers] for x in xs]
            sol = _solve(rows, ys, prec)
            _guard_solution(sol, powers, max(abs(lo), abs(hi)), ys, prec)
        except FitError:
            # least squares on a denser node set (degenerate bases such as
            # even powers of an odd function on a symmetric domain)
            xs = _cheb_nodes(4 * n, lo, hi)
            ys = _eval_many(g, xs, prec, req.var)
            A = [[x ** p for p in powers] for x in xs]
            ata = [[sum(A[i][r] * A[i][c] for i in range(len(xs))) for c in range(n)] for r in range(n)]
            atb = [sum(A[i][r] * ys[i] for i in range(len(xs))) for r in range(n)]
            sol = _solve(ata, atb, prec)
            notes.append("lsq_fallback")
        coeffs = dict(fixed)
        for p, c in zip(powers, sol):
            coeffs[p] = c
    return FitResult(coeffs, _residual_bound(req, coeffs), 1, True, "chebyshev", notes)


# -- remez exchange -----------------------------------------------------------------


def _alternation_solve(powers, ref, gvals, prec):
    n = len(powers)
    rows = []
    for j, x in enumerate(ref):
        rows.append([x ** p for p in powers] + [mpf((-1) ** j)])
    sol = _solve(rows, gvals, prec)
    span = max(abs(ref[0]), abs(ref[-1]))
    _guard_solution(sol[:n], powers, span, gvals, prec)
    return sol[:n], sol[n]


def _local_extrema(resid: Expr, lo, hi, prec, grid: int, bisections: int, v: str):
    """Candidate extrema of the residual: endpoints plus derivative roots."""
    xs = [lo + (hi - lo) * i / (grid - 1) for i in range(grid)]
    d = differentiate(resid, v)
    dv = _eval_many(d, xs, prec, v)
    cands = [lo, hi]
    for i in range(grid - 1):
        a, b = dv[i], dv[i + 1]
        if a is None or b is None:
            continue
        if a == 0:
            cands.append(xs[i])
            continue
        if (a > 0) == (b > 0):
            continue
        xa, xb, fa = xs[i], xs[i + 1], a
        for _ in range(bisections):
            xm = (xa + xb) / 2
            fm = eval_point(d, {v: xm}, prec)
            if fm is None or fm == 0:
                xa = xb = xm
                break
            if (fm > 0) == (fa > 0):
                xa = xm
            else:
                xb = xm
        cands.append((xa + xb) / 2)
    return sorted(set(cands))


def _pick_alternating(cands, rvals, count):
    """Compress same-sign runs keeping the largest |r|, then trim to count."""
    pts = [(x, r) for x, r in zip(cands, rvals) if r is not None and r != 0]
    if not pts:
        return None
    runs = []
    for x, r in pts:
        if runs and (runs[-1][1] > 0) == (r > 0):
            if abs(r) > abs(runs[-1][1]):
                runs[-1] = (x, r)
        else:
            runs.append((x, r))
    while len(runs) > count:
        # drop the smaller of the two end points (standard multiple exchange)
        if abs(runs[0][1]) <= abs(runs[-1][1]):
            runs.pop(0)
        else:
            runs.pop()
    if len(runs) < count:
        return None
    return [x for x, _ in runs]


def remez_fit(req: FitRequest, max_iters: int = 30) -> FitResult:
    """Classical Remez exchange on the requested monomial basis."""
    prec = req.precision_bits
    powers = resolve_powers(req)
    if not powers:
        raise FitError("no free powers to fit")
    fixed = _fixed_mpf(req)
    lo, hi = req.domain.endpoints(prec)
    if not (mpmath.isfinite(lo) and mpmath.isfinite(hi)):
        raise FitError("remez fitting requires a bounded domain")
    g = sub(req.target, _poly_expr(fixed, req.var)) if fixed else req.target
    notes = []
    with mp.workprec(prec):
        n = len(powers)
        # reference: n+1 Chebyshev extrema
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        ref = [mid - half * mpmath.cos(mpmath.pi * j / n) for j in range(n + 1)]
        try:
            coeffs, it, converged = _remez_loop(req, powers, g, ref, lo, hi, max_iters, notes)
        except FitError:
            # non-Haar system: single-parity bases on symmetric domains are
            # Haar on the positive half, and symmetry carries the fit over
            if abs(lo + hi) < (abs(hi) + abs(lo)) * mpf(2) ** -60 and (
                all(p % 2 == 0 for p in powers) or all(p % 2 == 1 for p in powers)
            ):
                notes.append("parity_half_domain")
                eps = hi * mpf(2) ** -80
                ref = [eps + (hi - eps) * (1 - mpmath.cos(mpmath.pi * j / n)) / 2 for j in range(n + 1)]
                coeffs, it, converged = _remez_loop(req, powers, g, ref, eps, hi, max_iters, notes)
            else:
                notes.append("lsq_relaxation")
                cheb = chebyshev_fit(replace(req, tool="chebyshev"))
                cheb.notes.extend(notes)
                cheb.tool = "remez"
                return cheb
        out = dict(fixed)
        out.update(coeffs)
    return FitResult(out, _residual_bound(req, out), it, converged, "remez", notes)


def _remez_loop(req: FitRequest, powers, g, ref, lo, hi, max_iters, notes):
    prec = req.precision_bits
    v = req.var
    coeffs = {}
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        gvals = _eval_many(g, ref, prec, v)
        if any(y is None for y in gvals):
            raise FitError("target undefined at a reference point")
        sol, levelled = _alternation_solve(powers, ref, gvals, prec)
        coeffs = {p: c for p, c in zip(powers, sol)}
        resid = sub(g, _poly_expr(coeffs, v))
        cands = _local_extrema(resid, lo, hi, prec, 8192, 80, v)
        rvals = _eval_many(resid, cands, prec, v)
        new_ref = _pick_alternating(cands, rvals, len(powers) + 1)
        if new_ref is None:
            notes.append("reference_stalled")
            break
        ref = new_ref
        rv = [abs(r) for r in _eval_many(resid, ref, prec, v)]
        if min(rv) > 0 and max(rv) / min(rv) < 1 + mpf(10) ** -10:
            converged = True
            break
    return coeffs, it, converged


# -- fpminimax-style rounding ------------------------------------------------------


def _round_to_bits(value, bits: int):
    # mpmath rounds to nearest-even at the context precision
    if value == 0:
        return mpf(0)
    if bits >= 106:  # double-double: hi + exactly-representable tail
        hi = mpf(float(value))
        lo = mpf(float(value - hi))
        return hi + lo
    with mp.workprec(bits):
        return +value


def round_coefficients(result: FitResult, coeff_format, req: FitRequest) -> FitResult:
    """Greedy sequential rounding: round the highest-impact coefficient to
    its format, re-fit the remaining free coefficients, repeat."""
    prec = req.precision_bits
    fixed0 = set(_fixed_mpf(req))
    free = [p for p in result.coefficients if p not in fixed0]
    lo, hi = req.domain.endpoints(prec)

    def fmt_bits(p):
        f = coeff_format.get(p, "fp64") if isinstance(coeff_format, dict) else coeff_format
        return _FORMAT_BITS.get(f, f if isinstance(f, int) else 53)

    with mp.workprec(prec):
        scale = max(abs(lo), abs(hi), mpf(1))
        order = sorted(free, key=lambda p: -abs(result.coefficients[p]) * scale ** p)
        rounded = dict(result.coefficients)
        done_fixed = dict(_fixed_mpf(req))
        notes = list(result.notes)
        for i, p in enumerate(order):
            rounded[p] = _round_to_bits(rounded[p], fmt_bits(p))
            done_fixed[p] = rounded[p]
            remaining = [q for q in order[i + 1:]]
            if remaining:
                sub_req = replace(
                    req,
                    powers=remaining,
                    fixed={q: mpf_to_expr(c) for q, c in done_fixed.items()},
                )
                refit = remez_fit(sub_req)
                for q in remaining:
                    rounded[q] = refit.coefficients[q]
        notes.append("fpminimax_rounding")
    return FitResult(
        rounded, _residual_bound(req, rounded), result.iterations, result.converged,
        "fpminimax", notes,
    )


# -- front door ----------------------------------------------------------------------


TOOLS = ("taylor", "chebyshev", "remez", "fpminimax")


def run_tool(req: FitRequest) -> FitResult:
    if req.tool == "taylor":
        return taylor_fit(req)
    if req.tool == "chebyshev":
        return chebyshev_fit(req)
    if req.tool == "remez":
        return remez_fit(req)
    if req.tool == "fpminimax":
        base = remez_fit(req)
        return round_coefficients(base, req.coeff_format or "fp64", req)
    raise FitError(f"unknown tool {req.tool!r}")


def fit(hole_type: ImplType, req: FitRequest) -> Approx:
    """Produce approx(f, I, eps, polynomial(C)) for a hole, applying the
    standard fix-ups (double the working precision, then widen the domain
    by one ulp per endpoint) before giving up."""
    fv = free_vars(hole_type.target)
    v = next(iter(fv)) if len(fv) == 1 else "x"
    base = replace(req, target=hole_type.target, domain=hole_type.domain, var=v)
    attempts = [base, replace(base, precision_bits=base.precision_bits * 2)]
    lo, hi = hole_type.domain.endpoints(64)
    if mpmath.isfinite(lo) and mpmath.isfinite(hi):
        wlo = mpf_to_expr(math.nextafter(float(lo), -math.inf))
        whi = mpf_to_expr(math.nextafter(float(hi), math.inf))
        attempts.append(replace(attempts[1], domain=SymInterval(wlo, whi)))
    last = None
    for attempt in attempts:
        try:
            res = run_tool(attempt)
        except FitError as exc:
            last = exc
            continue
        coeffs = {p: mpf_to_expr(c) for p, c in res.coefficients.items()}
        poly = Polynomial(tuple(sorted(coeffs.items())))
        return Approx(hole_type.target, hole_type.domain, mpf_to_expr(res.error_bound), poly)
    raise FitError(f"fit failed after fix-ups: {last}")


def fit_candidates(hole_type: ImplType, req: FitRequest, degrees=None) -> list:
    """One fitted term per requested degree (paper-style degree sweeps)."""
    out = []
    for d in degrees or [req.degree]:
        out.append(fit(hole_type, replace(req, degree=d, domain=hole_type.domain)))
    return out
