"""Type-directed synthesis of range reductions.

Identities f(x) = t(f(s(x))) are mined by growing an e-graph from an
uninterpreted marker thefunc(x), extracting one representative per e-node
of its class, deduplicating against a second e-graph that never learns
the function's definition, and verifying the survivors.  Shift and scale
identities are iterated into periodic/logarithmic reconstructions by
solving t(y, n) through e-graph intersection.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Optional

import mpmath
from mpmath import mp, mpf

from .checker import CheckConfig, Obligation, _check_equality, check
from .dsl import (
    Hole, ImplTerm, ImplType, Left, Logarithmic, Periodic, Right, fill,
    holes_of, type_of,
)
from .egraph import EGraph, Rule, RuleSet, X_PENALTY, intersect
from .polyfit import FitError, FitRequest, fit
from .rules import default_rules
from .symexpr import (
    Expr, SymInterval, X, Y, add, call, const_value, div, eval_point,
    expr_to_sexpr, format_expr, free_vars, interval, mul, neg, rat, simplify,
    sub, substitute, var, INF, ZERO,
)

_Q = var("?u")
_A = var("?a")


@dataclass(frozen=True)
class ReductionTemplate:
    name: str
    marker: str
    terms: tuple  # DSL terms this template can generate

    def s_expr(self, a: Expr) -> Expr:
        if self.name == "flip":
            return sub(a, X)
        if self.name == "shift":
            return add(a, X)
        return mul(a, X)


TEMPLATES = (
    ReductionTemplate("flip", "flip", ("left", "right")),
    ReductionTemplate("shift", "shift", ("left", "right", "periodic")),
    ReductionTemplate("scale", "scale", ("left", "right", "logarithmic")),
)


@dataclass(frozen=True)
class Identity:
    template: str
    a: Expr
    t: Expr  # reconstruction in y
    provenance: Expr  # the extracted marker expression

    def s(self) -> Expr:
        tpl = next(t for t in TEMPLATES if t.name == self.template)
        return simplify(tpl.s_expr(self.a))


@dataclass
class SynthesisBudget:
    depth: int = 3
    candidates_per_hole: int = 8
    degree: int = 14
    probe_points: int = 512
    max_results: int = 16
    mine_iters: int = 7
    mine_nodes: int = 8000
    solve_iters: int = 4
    solve_nodes: int = 350
    k_max: int = 3


MINING_RUNS = 0
_identity_cache: dict = {}
_cache_lock = threading.Lock()


def _template_rules() -> list:
    rules = []
    for tpl in TEMPLATES:
        mk = lambda s: Expr(tpl.marker, (s,))
        pat = Expr("thefunc", (tpl.s_expr(_A),))
        rules.append(Rule(f"tds-{tpl.name}", pat, Expr(tpl.marker, (_A,))))
        if tpl.name == "shift":
            # commuted form: thefunc(x + a)
            rules.append(
                Rule("tds-shift2", Expr("thefunc", (add(X, _A),)), Expr(tpl.marker, (_A,)))
            )
        if tpl.name == "scale":
            rules.append(
                Rule("tds-scale2", Expr("thefunc", (mul(X, _A),)), Expr(tpl.marker, (_A,)))
            )
        if tpl.name == "flip":
            rules.append(
                Rule("tds-flip-neg", Expr("thefunc", (neg(X),)), Expr(tpl.marker, (ZERO,)))
            )
    return rules


def _untemplate_rules() -> list:
    out = []
    for tpl in TEMPLATES:
        out.append(
            Rule(f"untds-{tpl.name}", Expr(tpl.marker, (_A,)), Expr("thefunc", (tpl.s_expr(_A),)))
        )
    return out


def _count_markers(e: Expr):
    found = []

    def walk(t):
        if t.op in ("flip", "shift", "scale"):
            found.append(t)
        for a in t.args:
            walk(a)

    walk(e)
    return found


def _replace_marker(e: Expr, marker: Expr, repl: Expr) -> Expr:
    if e == marker:
        return repl
    if not e.args:
        return e
    return Expr(e.op, tuple(_replace_marker(a, marker, repl) for a in e.args), e.value)


def mine_identities(f: Expr, rules=None, budget: SynthesisBudget = None,
                    domain: Optional[SymInterval] = None) -> list:
    """Reduction/reconstruction identities of f, verified before use."""
    global MINING_RUNS
    budget = budget or SynthesisBudget()
    key = format_expr(f)
    with _cache_lock:
        if key in _identity_cache:
            return list(_identity_cache[key])
    MINING_RUNS += 1
    rules = rules if rules is not None else default_rules(selftest=False)
    dom = domain or interval(neg(Expr("pi")), Expr("pi"))

    g = EGraph()
    root = g.add_expr(Expr("thefunc", (X,)))
    g.rebuild()
    def_rules = [
        Rule("tds-def", Expr("thefunc", (_Q,)), substitute(f, "x", _Q)),
        Rule("tds-def-rev", substitute(f, "x", _Q), Expr("thefunc", (_Q,))),
    ]
    grow = RuleSet(list(rules) + def_rules + _template_rules())
    g.saturate(grow, budget.mine_iters, budget.mine_nodes)
    reps = [
        (e, c) for e, c in g.node_extract(g.find(root))
        if c < X_PENALTY and "thefunc" not in _ops_of(e)
    ]

    # second e-graph without the definition: identities that hold for any f
    # are generic and dropped, and equal survivors collapse to one
    g2 = EGraph()
    trivial = g2.add_expr(Expr("thefunc", (X,)))
    ids2 = [(e, g2.add_expr(e)) for e, _ in reps]
    g2.rebuild()
    g2.saturate(RuleSet(list(rules) + _untemplate_rules()), 4, budget.mine_nodes)
    by_class: dict = {}
    for e, cid in ids2:
        root2 = g2.find(cid)
        if root2 == g2.find(trivial):
            continue
        cur = by_class.get(root2)
        if cur is None or _size(e) < _size(cur):
            by_class[root2] = e

    out = []
    cfg = CheckConfig(sample_points=512, egraph_iters=6, egraph_nodes=20000)
    for e in by_class.values():
        markers = _count_markers(e)
        if len(markers) != 1:
            continue
        marker = markers[0]
        a = simplify(marker.args[0])
        if free_vars(a):
            continue
        tpl = next(t for t in TEMPLATES if t.marker == marker.op)
        t_expr = simplify(_replace_marker(e, marker, Y))
        if free_vars(t_expr) - {"y"}:
            continue
        ident = Identity(tpl.name, a, t_expr, e)
        if _verify_identity(f, ident, dom, cfg, rules):
            out.append(ident)
    out.sort(key=lambda i: (_size(i.t), format_expr(i.s())))
    with _cache_lock:
        _identity_cache[key] = list(out)
    return out


def _ops_of(e: Expr):
    ops = {e.op}
    for a in e.args:
        ops |= _ops_of(a)
    return ops


def _size(e: Expr) -> int:
    return 1 + sum(_size(a) for a in e.args)


def _verify_identity(f: Expr, ident: Identity, dom: SymInterval, cfg, rules) -> bool:
    f_of_s = substitute(f, "x", ident.s())
    lhs = substitute(ident.t, "y", f_of_s)
    lo, hi = dom.endpoints(64)
    if not (mpmath.isfinite(lo) and mpmath.isfinite(hi)):
        dom = interval(-64, 64)
    ob = Obligation("equality", f"identity {ident.template}", "x", dom, lhs, f)
    res = _check_equality(ob, cfg, rules)
    return res.status in ("proven", "passed-unsound")


def clear_identity_cache():
    global MINING_RUNS
    with _cache_lock:
        _identity_cache.clear()
    MINING_RUNS = 0


# -- iterated reconstructions ---------------------------------------------------


def solve_iterated(t: Expr, rules=None, budget: SynthesisBudget = None):
    """Closed form for t(y, n) with t(y, 0) = y, t(y, n+1) = t(t(y, n)),
    via intersection of e-graphs seeded at n = 1 .. k_max."""
    from .rules import solver_rules

    budget = budget or SynthesisBudget()
    rules = rules if rules is not None else solver_rules()
    if free_vars(t) - {"y"}:
        raise ValueError("step reconstruction must be univariate in y")
    graphs = []
    yv, nv = var("y"), var("n")
    for k in range(1, budget.k_max + 1):
        g = EGraph()
        tid = g.add_expr(Expr("titer", (yv, nv)))
        comp = yv
        for _ in range(k):
            comp = substitute(t, "y", comp)
        cid = g.add_expr(comp)
        g.merge(tid, cid)
        nid = g.add_expr(nv)
        kid = g.add_expr(rat(k))
        g.merge(nid, kid)
        g.rebuild()
        # deeper compositions need proportionally more room
        g.saturate(rules, budget.solve_iters, budget.solve_nodes + 300 * (k - 1))
        graphs.append(g)
    gi = intersect(graphs)
    target = gi.lookup_expr(Expr("titer", (yv, nv)))
    if target is None:
        return None

    def cost(node, costs):
        if node[0] == "titer":
            return X_PENALTY
        total = 1
        for c in node[2:]:
            total += costs.get(gi.find(c), 10 ** 9)
        return min(total, 10 ** 9)

    reps = [
        (e, c) for e, c in gi.node_extract(target, cost)
        if c < X_PENALTY and "titer" not in _ops_of(e) and not (free_vars(e) - {"y", "n"})
    ]
    reps.sort(key=lambda ec: (ec[1], _size(ec[0])))
    for e, _ in reps:
        if _check_iterated(t, e):
            return simplify(e)
    return None


def _check_iterated(t: Expr, closed: Expr, samples: int = 4) -> bool:
    rng = random.Random(11)
    with mp.workprec(128):
        for _ in range(samples):
            y0 = mpf(rng.uniform(0.5, 1.5))
            comp = y0
            for k in range(0, 4):
                want = eval_point(closed, {"y": y0, "n": k}, 128)
                if want is None or abs(want - comp) > mpf(2) ** -80 * max(1, abs(comp)):
                    return False
                comp = eval_point(t, {"y": comp}, 128)
                if comp is None:
                    return False
    return True


def _affine_parts(t: Expr):
    """(alpha, beta) exprs with t(y) = alpha*y + beta, or None."""
    t0 = eval_point(substitute(t, "y", rat(0)), {}, 192)
    t1 = eval_point(substitute(t, "y", rat(1)), {}, 192)
    t2 = eval_point(substitute(t, "y", rat(2)), {}, 192)
    if t0 is None or t1 is None or t2 is None:
        return None
    if abs((t2 - t1) - (t1 - t0)) > mpf(2) ** -80 * max(1, abs(t1)):
        return None
    beta = substitute(t, "y", ZERO)
    alpha = simplify(sub(substitute(t, "y", rat(1)), beta))
    return alpha, simplify(beta)


def _affine_inverse(t: Expr):
    parts = _affine_parts(t)
    if parts is None:
        return None
    alpha, beta = parts
    av = eval_point(alpha, {}, 128)
    if av is None or av == 0:
        return None
    return simplify(div(sub(Y, beta), alpha))


def _step_matches(f: Expr, step: Expr, shift_by=None, scale_by=None) -> bool:
    """Numeric test: step(f(x)) == f(x + p) (or f(p*x))."""
    rng = random.Random(5)
    with mp.workprec(128):
        ok = 0
        for _ in range(6):
            x0 = mpf(rng.uniform(0.3, 1.1))
            fx = eval_point(f, {"x": x0}, 128)
            if fx is None:
                continue
            lhs = eval_point(step, {"y": fx}, 128)
            arg = x0 + shift_by if shift_by is not None else x0 * scale_by
            rhs = eval_point(f, {"x": arg}, 128)
            if lhs is None or rhs is None:
                continue
            if abs(lhs - rhs) > mpf(2) ** -60 * max(1, abs(rhs)):
                return False
            ok += 1
    return ok >= 3


# -- hole expansion -----------------------------------------------------------------


def expand_hole(hole_type: ImplType, identities, budget: SynthesisBudget = None,
                rules=None) -> list:
    """Left/Right/Periodic/Logarithmic candidates for a hole, each with a
    single new hole, all checker-verified."""
    budget = budget or SynthesisBudget()
    rules = rules if rules is not None else default_rules(selftest=False)
    f = hole_type.target
    dom = hole_type.domain
    lo, hi = dom.endpoints(256)
    bounded = mpmath.isfinite(lo) and mpmath.isfinite(hi)
    cfg = CheckConfig(sample_points=512, egraph_iters=6, egraph_nodes=20000)
    out = []
    for ident in identities:
        s = ident.s()
        if bounded:
            mid = dom.midpoint()
            with mp.workprec(256):
                m = const_value(mid, 256)
                sa = eval_point(s, {"x": lo}, 256)
                sm = eval_point(s, {"x": m}, 256)
                sb = eval_point(s, {"x": hi}, 256)
            tol = mpf(2) ** -200 * max(1, abs(hi), abs(lo))
            if sa is not None and sm is not None:
                smin, smax = min(sa, sm), max(sa, sm)
                if smin >= m - tol and smax <= hi + tol:
                    body = Hole(ImplType(f, SymInterval(mid, dom.hi)))
                    out.append(Left(s, body, ident.t))
            if sb is not None and sm is not None:
                smin, smax = min(sm, sb), max(sm, sb)
                if smin >= lo - tol and smax <= m + tol:
                    body = Hole(ImplType(f, SymInterval(dom.lo, mid)))
                    out.append(Right(s, body, ident.t))
        a_val = eval_point(ident.a, {}, 192)
        if ident.template == "shift" and a_val not in (None, 0):
            p = simplify(neg(ident.a)) if a_val < 0 else ident.a
            p_val = abs(a_val)
            wide_enough = (not bounded) or (hi - lo > p_val)
            if wide_enough:
                step = ident.t if a_val < 0 else _affine_inverse(ident.t)
                if step is not None and _step_matches(f, step, shift_by=p_val):
                    tk = solve_iterated(step, rules, budget)
                    if tk is not None:
                        body = Hole(ImplType(f, SymInterval(ZERO, p)))
                        out.append(Periodic(p, body, substitute(tk, "n", var("k"))))
        if ident.template == "scale" and a_val is not None and a_val > 0 and a_val != 1:
            positive_dom = (not bounded) or lo >= 0
            if positive_dom:
                p = ident.a if a_val > 1 else simplify(div(rat(1), ident.a))
                p_val = a_val if a_val > 1 else 1 / a_val
                step = _affine_inverse(ident.t) if a_val > 1 else ident.t
                if step is not None and _step_matches(f, step, scale_by=p_val):
                    tk = solve_iterated(step, rules, budget)
                    if tk is not None:
                        root = call("sqrt", p)
                        body = Hole(ImplType(f, SymInterval(div(rat(1), root), root)))
                        out.append(Logarithmic(p, body, substitute(tk, "n", var("k"))))
    verified = []
    seen = set()
    for cand in out:
        keyd = repr(cand)
        if keyd in seen:
            continue
        seen.add(keyd)
        if not _types_match(cand, hole_type):
            continue
        rep = check(cand, cfg, rules)
        if rep.verdict == "ok":
            verified.append(cand)
        if len(verified) >= budget.candidates_per_hole:
            break
    return verified


def _types_match(cand: ImplTerm, hole_type: ImplType) -> bool:
    from .dsl import types_equal

    try:
        return types_equal(type_of(cand), hole_type)
    except Exception:
        return False


# -- full synthesis ------------------------------------------------------------------


def synthesize(root: ImplTerm, tools, budget: SynthesisBudget = None,
               rules=None) -> list:
    """Expand holes breadth-first with reductions (tds) and close leaves
    with polynomial fitting; returns checker-passing terms ranked by a
    quick probe of measured error."""
    from .bench import probe_error

    budget = budget or SynthesisBudget()
    rules = rules if rules is not None else default_rules(selftest=False)
    fit_tools = [t for t in tools if t != "tds"]
    use_tds = "tds" in tools
    if use_tds and not fit_tools and holes_of(root):
        fit_tools = ["remez"]
    frontier = [(root, 0)]
    finished = []
    seen = set()
    while frontier and len(finished) < budget.max_results * 4:
        term, depth = frontier.pop(0)
        hs = holes_of(term)
        if not hs:
            finished.append(term)
            continue
        path, hty = hs[0]
        lo, hi = hty.domain.endpoints(64)
        bounded = mpmath.isfinite(lo) and mpmath.isfinite(hi)
        if bounded:
            for tool in fit_tools:
                try:
                    leaf = fit(hty, FitRequest(hty.target, hty.domain, tool=tool,
                                               degree=budget.degree))
                except FitError:
                    continue
                cand = fill(term, path, leaf)
                key = repr(cand)
                if key not in seen:
                    seen.add(key)
                    frontier.append((cand, depth))
        if use_tds and depth < budget.depth:
            idents = mine_identities(hty.target, rules, budget, hty.domain)
            for exp in expand_hole(hty, idents, budget, rules):
                cand = fill(term, path, exp)
                key = repr(cand)
                if key not in seen:
                    seen.add(key)
                    frontier.append((cand, depth + 1))
    ranked = []
    cfg = CheckConfig(sample_points=512, egraph_iters=6, egraph_nodes=20000)
    for term in finished:
        rep = check(term, cfg, rules)
        if rep.verdict != "ok":
            continue
        try:
            err = probe_error(term, points=budget.probe_points)
        except Exception:
            continue
        ranked.append((err, _term_size(term), term))
    ranked.sort(key=lambda t: (t[0], t[1]))
    return [t for _, _, t in ranked[: budget.max_results]]


def _term_size(term: ImplTerm) -> int:
    return 1 + sum(_term_size(c) for c in term.children())
