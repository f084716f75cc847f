"""Semantic wellformedness checking.

Walks a term, gathers the per-rule real-number side conditions, and
discharges each with the configured backends: equality saturation
(sound), a grid-plus-refinement infnorm (unsound but tight), and
high-precision sampling (unsound).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

import mpmath
from mpmath import mp, mpf

from .dsl import (
    Approx, Arith, Compose, Hole, ImplTerm, Left, Logarithmic, Periodic,
    Polynomial, Rewrite, Right, SplitDom, type_of,
)
from .egraph import prove_equal
from .rules import default_rules
from .symexpr import (
    Expr, SymInterval, add, call, const_eq, const_le, const_value,
    differentiate, div, eval_interval, eval_point, expr_to_sexpr,
    format_expr, free_vars, mul, rat, simplify, substitute, var,
    NonDifferentiableError, ONE,
)


class CheckError(ValueError):
    pass


@dataclass(frozen=True)
class Obligation:
    kind: str  # equality | bound | containment | coverage
    origin: str
    var: str
    domain: SymInterval
    lhs: Expr
    rhs: Optional[Expr] = None
    eps: Optional[Expr] = None
    target_interval: Optional[SymInterval] = None
    int_var: Optional[str] = None
    cases: Optional[tuple] = None  # coverage: ordered case intervals

    def quantifier(self) -> str:
        q = f"forall {self.var} in {self.domain!r}"
        if self.int_var:
            q += f", integer {self.int_var}"
        return q

    def describe(self) -> str:
        if self.kind == "bound":
            return f"|{format_expr(self.lhs)} - {format_expr(self.rhs)}| <= {format_expr(self.eps)}"
        if self.kind == "containment":
            return f"{format_expr(self.lhs)} in {self.target_interval!r}"
        if self.kind == "coverage":
            return "case intervals cover " + repr(self.domain)
        return f"{format_expr(self.lhs)} = {format_expr(self.rhs)}"


@dataclass
class CheckConfig:
    backends: tuple = ("egraph", "infnorm", "sampling")
    sample_points: int = 4096
    precision_bits: int = 256
    tolerance_bits: int = 80
    k_lo: int = -32
    k_hi: int = 32
    egraph_iters: int = 8
    egraph_nodes: int = 50000
    grid_points: int = 4097
    bisections: int = 60
    segments: int = 256
    seed: int = 7
    unbounded_clip: float = 64.0


@dataclass
class ObligationResult:
    obligation: Obligation
    status: str  # proven | passed-unsound | failed | unknown
    backend: str
    witness: Optional[dict] = None
    detail: str = ""


@dataclass
class CheckReport:
    results: list

    @property
    def verdict(self) -> str:
        statuses = [r.status for r in self.results]
        if any(s == "failed" for s in statuses):
            return "failed"
        if any(s == "unknown" for s in statuses):
            return "unknown"
        return "ok"

    def to_json(self) -> dict:
        return {
            "obligations": [
                {
                    "kind": r.obligation.kind,
                    "origin": r.obligation.origin,
                    "quantifier": r.obligation.quantifier(),
                    "condition": r.obligation.describe(),
                    "status": r.status,
                    "backend": r.backend,
                    **({"witness": {k: str(v) for k, v in r.witness.items()}} if r.witness else {}),
                }
                for r in self.results
            ],
            "verdict": self.verdict,
        }


# -- obligation gathering ------------------------------------------------------


def obligations_of(term: ImplTerm) -> list:
    """Side conditions of every subterm, in pre-order."""
    ty = type_of(term)
    out = []
    _gather(term, "x", ty.domain, {}, ty.domain, out)
    return out


def _env_subst(e: Expr, env: dict) -> Expr:
    for name, binding in env.items():
        e = substitute(e, name, binding)
    return e


def _gather(term: ImplTerm, v: str, dom: SymInterval, env: dict, x_dom: SymInterval, out: list):
    xv = var(v)
    if isinstance(term, Polynomial) or isinstance(term, Hole):
        return
    if isinstance(term, Approx):
        g = type_of(term.body, v).target
        out.append(
            Obligation(
                "bound", "approx error bound", v, term.domain, term.target, g, eps=term.eps
            )
        )
        _gather(term.body, v, term.domain, env, x_dom, out)
        return
    if isinstance(term, (Left, Right)):
        bt = type_of(term.body, v)
        m_lo, m_hi = bt.domain.lo, bt.domain.hi
        if isinstance(term, Left):
            a = simplify(Expr("-", (mul(rat(2), m_lo), m_hi)))
            half = SymInterval(a, m_lo)
            side = "left"
        else:
            b = simplify(Expr("-", (mul(rat(2), m_hi), m_lo)))
            half = SymInterval(m_hi, b)
            side = "right"
        out.append(
            Obligation(
                "containment", f"{side} reduction lands in body domain", v, half,
                term.s, target_interval=bt.domain,
            )
        )
        f = bt.target
        f_of_s = substitute(f, v, term.s)
        recon = substitute(term.t, "y", f_of_s)
        out.append(
            Obligation("equality", f"{side} reconstruction identity", v, half, recon, f)
        )
        _gather(term.body, v, bt.domain, {}, bt.domain, out)
        return
    if isinstance(term, Periodic):
        bt = type_of(term.body, v)
        f = bt.target
        k = var("k")
        recon = substitute(term.t, "y", f)
        shifted = substitute(f, v, add(xv, mul(term.period, k)))
        out.append(
            Obligation(
                "equality", "periodic reconstruction identity", v, bt.domain,
                recon, shifted, int_var="k",
            )
        )
        _gather(term.body, v, bt.domain, {}, bt.domain, out)
        return
    if isinstance(term, Logarithmic):
        bt = type_of(term.body, v)
        f = bt.target
        k = var("k")
        if const_eq(term.base, rat(2)):
            scale = Expr("ldexp", (ONE, k))
        else:
            scale = call("exp", mul(k, call("log", term.base)))
        recon = substitute(term.t, "y", f)
        scaled = substitute(f, v, mul(scale, xv))
        out.append(
            Obligation(
                "equality", "logarithmic reconstruction identity", v, bt.domain,
                recon, scaled, int_var="k",
            )
        )
        _gather(term.body, v, bt.domain, {}, bt.domain, out)
        return
    if isinstance(term, Arith):
        lt = type_of(term.lhs, v)
        _gather(term.lhs, v, lt.domain, env, x_dom, out)
        _gather(term.rhs, v, lt.domain, env, x_dom, out)
        return
    if isinstance(term, Compose):
        ft = type_of(term.first, v)
        st = type_of(term.second, term.name)
        binding = _env_subst(ft.target, env)
        out.append(
            Obligation(
                "containment", f"compose intermediate {term.name} stays in range", v,
                ft.domain, ft.target, target_interval=st.domain,
            )
        )
        g_of_f = substitute(st.target, term.name, ft.target)
        h = simplify(g_of_f)
        out.append(
            Obligation("equality", "compose target composition", v, ft.domain, g_of_f, h)
        )
        _gather(term.first, v, ft.domain, env, x_dom, out)
        env2 = dict(env)
        env2[term.name] = binding
        _gather(term.second, term.name, st.domain, env2, x_dom, out)
        return
    if isinstance(term, SplitDom):
        hull = type_of(term, v).domain
        out.append(
            Obligation(
                "coverage", "split cases cover the domain", v, hull, hull.lo,
                cases=tuple(iv for iv, _ in term.cases),
            )
        )
        for iv, body in term.cases:
            _gather(body, v, iv, env, x_dom, out)
        return
    if isinstance(term, Rewrite):
        # compose names are bound to expressions in the enclosing reduction
        # variable, so the identity is checked under the composed binding
        lhs = _env_subst(term.pattern, env)
        rhs = _env_subst(term.replacement, env)
        out.append(
            Obligation("equality", "rewrite preserves value", "x", x_dom, lhs, rhs)
        )
        _gather(term.body, v, dom, env, x_dom, out)
        return
    raise CheckError(f"cannot gather obligations for {term!r}")


# -- infnorm backend -------------------------------------------------------------


@dataclass
class InfnormResult:
    lower: object
    upper: object
    argmax: object
    singular_points: int = 0


def infnorm(e: Expr, iv: SymInterval, cfg: CheckConfig = None, v: str = "x") -> InfnormResult:
    """Estimate max |e| over iv: grid + derivative bisection for the lower
    estimate, per-segment interval enclosures for the upper."""
    cfg = cfg or CheckConfig()
    prec = cfg.precision_bits
    lo, hi = iv.endpoints(prec)
    if not (mpmath.isfinite(lo) and mpmath.isfinite(hi)):
        raise CheckError("infnorm requires a bounded interval")
    with mp.workprec(prec):
        n = cfg.grid_points
        step = (hi - lo) / (n - 1)
        xs = [lo + i * step for i in range(n)]
        vals = [eval_point(e, {v: x}, prec) for x in xs]
        singular = sum(1 for t in vals if t is None)
        if singular == len(vals):
            raise CheckError(f"expression is singular on {iv!r}: {format_expr(e)}")
        best = mpf(0)
        argmax = xs[0]
        for x, t in zip(xs, vals):
            if t is not None and abs(t) > best:
                best, argmax = abs(t), x
        # refine with sign changes of the derivative
        try:
            d = differentiate(e, v)
            dvals = [eval_point(d, {v: x}, prec) for x in xs]
            for i in range(n - 1):
                a, b = dvals[i], dvals[i + 1]
                if a is None or b is None or a == 0 or b == 0 or (a > 0) == (b > 0):
                    continue
                xa, xb, fa = xs[i], xs[i + 1], a
                for _ in range(cfg.bisections):
                    xm = (xa + xb) / 2
                    fm = eval_point(d, {v: xm}, prec)
                    if fm is None:
                        break
                    if fm == 0:
                        xa = xb = xm
                        break
                    if (fm > 0) == (fa > 0):
                        xa = xm
                    else:
                        xb = xm
                t = eval_point(e, {v: (xa + xb) / 2}, prec)
                if t is not None and abs(t) > best:
                    best, argmax = abs(t), (xa + xb) / 2
        except NonDifferentiableError:
            pass
        # outer bound from interval arithmetic on subsegments
        upper = mpf(0)
        segs = cfg.segments
        sstep = (hi - lo) / segs
        for i in range(segs):
            r = eval_interval(e, {v: (lo + i * sstep, lo + (i + 1) * sstep)}, prec)
            if r.bad or not (mpmath.isfinite(r.lo) and mpmath.isfinite(r.hi)):
                upper = mpf("inf")
                break
            upper = max(upper, abs(r.lo), abs(r.hi))
        if upper < best:  # interval bound can only be above the point bound
            upper = best
        return InfnormResult(best, upper, argmax, singular)


def range_bounds(e: Expr, iv: SymInterval, cfg: CheckConfig, v: str = "x"):
    """(inner_lo, inner_hi, outer_lo, outer_hi, arg_lo, arg_hi) of e over iv."""
    prec = cfg.precision_bits
    lo, hi = iv.endpoints(prec)
    with mp.workprec(prec):
        n = min(cfg.grid_points, 1025)
        step = (hi - lo) / (n - 1) if n > 1 else mpf(0)
        inner_lo = inner_hi = None
        arg_lo = arg_hi = lo
        for i in range(n):
            x = lo + i * step
            t = eval_point(e, {v: x}, prec)
            if t is None:
                continue
            if inner_lo is None or t < inner_lo:
                inner_lo, arg_lo = t, x
            if inner_hi is None or t > inner_hi:
                inner_hi, arg_hi = t, x
        if inner_lo is None:
            raise CheckError(f"expression is singular on {iv!r}: {format_expr(e)}")
        outer = eval_interval(e, {v: (lo, hi)}, prec)
        return inner_lo, inner_hi, outer.lo, outer.hi, arg_lo, arg_hi


# -- sampling backend ---------------------------------------------------------------


def _sample_domain(iv: SymInterval, cfg: CheckConfig):
    lo, hi = iv.endpoints(cfg.precision_bits)
    clip = mpf(cfg.unbounded_clip)
    if not mpmath.isfinite(lo):
        lo = -clip
    if not mpmath.isfinite(hi):
        hi = clip
    return lo, hi


def sample_check(ob: Obligation, cfg: CheckConfig = None):
    """Deterministic high-precision sampling; returns an ObligationResult."""
    cfg = cfg or CheckConfig()
    prec = cfg.precision_bits
    rng = random.Random(cfg.seed)
    lo, hi = _sample_domain(ob.domain, cfg)
    tol = mpf(2) ** -cfg.tolerance_bits
    extra_vars = sorted(
        (free_vars(ob.lhs) | (free_vars(ob.rhs) if ob.rhs is not None else set()))
        - {ob.var, ob.int_var or ""}
    )
    ks = list(range(cfg.k_lo, cfg.k_hi + 1)) if ob.int_var else [None]
    npoints = cfg.sample_points // (8 if ob.int_var else 1) or 1
    worst = None  # (gap, witness): the most-violating sample is reported
    checked = 0
    with mp.workprec(prec):
        for _ in range(npoints):
            u = rng.random()
            x = lo + (hi - lo) * mpf(u)
            binding = {ob.var: x}
            for ev in extra_vars:
                binding[ev] = mpf(rng.uniform(-2.0, 2.0))
            for k in ks:
                if k is not None:
                    binding[ob.int_var] = k
                if ob.kind == "containment":
                    sv = eval_point(ob.lhs, binding, prec)
                    if sv is None:
                        continue
                    jlo, jhi = ob.target_interval.endpoints(prec)
                    slack = tol * max(1, abs(jlo), abs(jhi))
                    checked += 1
                    if sv < jlo - slack or sv > jhi + slack:
                        gap = max(jlo - sv, sv - jhi)
                        if worst is None or gap > worst[0]:
                            worst = (gap, {**binding, "value": sv})
                    continue
                lv = eval_point(ob.lhs, binding, prec)
                rv = eval_point(ob.rhs, binding, prec) if ob.rhs is not None else None
                if lv is None or rv is None:
                    continue
                checked += 1
                gap = abs(lv - rv)
                if ob.kind == "bound":
                    eps = const_value(ob.eps, prec)
                    limit = eps * (1 + tol) + tol
                else:
                    limit = tol * max(1, abs(lv), abs(rv))
                if gap > limit:
                    if worst is None or gap > worst[0]:
                        worst = (gap, {**binding, "lhs": lv, "rhs": rv})
    if worst is not None:
        return ObligationResult(ob, "failed", "sampling", witness=worst[1])
    if checked == 0:
        return ObligationResult(ob, "unknown", "sampling", detail="no evaluable samples")
    return ObligationResult(ob, "passed-unsound", "sampling")


# -- backend dispatch -----------------------------------------------------------------


def _check_equality(ob: Obligation, cfg: CheckConfig, rules) -> ObligationResult:
    if "egraph" in cfg.backends:
        verdict = prove_equal(ob.lhs, ob.rhs, rules, cfg.egraph_iters, cfg.egraph_nodes)
        if verdict == "proven":
            return ObligationResult(ob, "proven", "egraph")
    if "sampling" in cfg.backends:
        return sample_check(ob, cfg)
    return ObligationResult(ob, "unknown", "none")


def _check_bound(ob: Obligation, cfg: CheckConfig) -> ObligationResult:
    eps = const_value(ob.eps, cfg.precision_bits)
    if "infnorm" in cfg.backends:
        try:
            r = infnorm(Expr("-", (ob.lhs, ob.rhs)), ob.domain, cfg, ob.var)
        except CheckError as exc:
            return ObligationResult(ob, "unknown", "infnorm", detail=str(exc))
        if r.upper <= eps:
            return ObligationResult(
                ob, "passed-unsound", "infnorm", detail=f"upper {mpmath.nstr(r.upper, 8)}"
            )
        if r.lower > eps:
            with mp.workprec(cfg.precision_bits):
                err = eval_point(
                    Expr("-", (ob.lhs, ob.rhs)), {ob.var: r.argmax}, cfg.precision_bits
                )
            return ObligationResult(
                ob, "failed", "infnorm",
                witness={ob.var: r.argmax, "error": err, "bound": eps},
            )
    if "sampling" in cfg.backends:
        return sample_check(ob, cfg)
    return ObligationResult(ob, "unknown", "none")


def _check_containment(ob: Obligation, cfg: CheckConfig) -> ObligationResult:
    jlo, jhi = ob.target_interval.endpoints(cfg.precision_bits)
    if "infnorm" in cfg.backends:
        try:
            ilo, ihi, olo, ohi, arg_lo, arg_hi = range_bounds(ob.lhs, ob.domain, cfg, ob.var)
        except CheckError as exc:
            return ObligationResult(ob, "unknown", "infnorm", detail=str(exc))
        with mp.workprec(cfg.precision_bits):
            slack = mpf(2) ** -cfg.tolerance_bits * max(1, abs(jlo), abs(jhi))
            if olo >= jlo - slack and ohi <= jhi + slack:
                return ObligationResult(ob, "passed-unsound", "infnorm")
            if ilo < jlo - slack:
                return ObligationResult(
                    ob, "failed", "infnorm", witness={ob.var: arg_lo, "value": ilo}
                )
            if ihi > jhi + slack:
                return ObligationResult(
                    ob, "failed", "infnorm", witness={ob.var: arg_hi, "value": ihi}
                )
    if "sampling" in cfg.backends:
        return sample_check(ob, cfg)
    return ObligationResult(ob, "unknown", "none")


def _check_coverage(ob: Obligation, cfg: CheckConfig) -> ObligationResult:
    cases = sorted(ob.cases, key=lambda iv: const_value(iv.lo, cfg.precision_bits))
    hull = ob.domain
    if not const_le(cases[0].lo, hull.lo):
        return ObligationResult(
            ob, "failed", "exact-endpoints", witness={"gap_below": str(hull.lo)}
        )
    reach = cases[0].hi
    for iv in cases[1:]:
        if not const_le(iv.lo, reach):
            return ObligationResult(
                ob, "failed", "exact-endpoints",
                witness={"gap_after": format_expr(reach), "next": format_expr(iv.lo)},
            )
        if const_le(reach, iv.hi):
            reach = iv.hi
    if not const_le(hull.hi, reach):
        return ObligationResult(
            ob, "failed", "exact-endpoints", witness={"shortfall_at": format_expr(reach)}
        )
    return ObligationResult(ob, "proven", "exact-endpoints")


def check(term: ImplTerm, config: CheckConfig = None, rules=None) -> CheckReport:
    """Gather and discharge every obligation; never silently passes."""
    cfg = config or CheckConfig()
    rules = rules if rules is not None else default_rules(selftest=False)
    results = []
    for ob in obligations_of(term):
        if ob.kind == "equality":
            results.append(_check_equality(ob, cfg, rules))
        elif ob.kind == "bound":
            results.append(_check_bound(ob, cfg))
        elif ob.kind == "containment":
            results.append(_check_containment(ob, cfg))
        elif ob.kind == "coverage":
            results.append(_check_coverage(ob, cfg))
        else:
            results.append(ObligationResult(ob, "unknown", "none"))
    return CheckReport(results)
