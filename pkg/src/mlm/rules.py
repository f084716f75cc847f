"""Loading and numeric self-testing of the rewrite-rule database."""

from __future__ import annotations

import random
from importlib import resources

from mpmath import mp, mpf

from . import sexpr
from .egraph import Rule, RuleSet
from .symexpr import Expr, eval_point, expr_from_sexpr, free_vars

_cache: dict = {}


class RuleError(ValueError):
    pass


def _int_vars(e: Expr, out: set, in_exp=False):
    """Variables that must take integer values for evaluation to succeed."""
    if e.op == "var":
        if in_exp:
            out.add(e.value)
        return
    if e.op == "ldexp":
        _int_vars(e.args[0], out, False)
        _int_vars(e.args[1], out, True)
        return
    for a in e.args:
        _int_vars(a, out, in_exp)


def selftest_rule(rule: Rule, samples: int = 8, precision_bits: int = 192):
    """Randomized numeric check that lhs == rhs wherever both are defined."""
    rng = random.Random(hash(rule.name) & 0xFFFF)
    vars_ = sorted(free_vars(rule.lhs) | free_vars(rule.rhs))
    ints = set(rule.guards)
    _int_vars(rule.lhs, ints)
    _int_vars(rule.rhs, ints)
    tol = mpf(2) ** -100
    valid = 0
    for _ in range(samples):
        binding = {}
        for v in vars_:
            if v in ints:
                binding[v] = rng.randint(-3, 3)
            else:
                binding[v] = mpf(rng.uniform(0.25, 2.25))
        lv = eval_point(rule.lhs, binding, precision_bits)
        rv = eval_point(rule.rhs, binding, precision_bits)
        if lv is None and rv is None:
            continue
        if lv is None or rv is None:
            # partial identity: one side undefined is fine, just not countable
            continue
        with mp.workprec(precision_bits):
            if abs(lv - rv) > tol * max(1, abs(lv), abs(rv)):
                raise RuleError(
                    f"rule {rule.name} fails numerically at {binding}: {lv} vs {rv}"
                )
        valid += 1
    if valid < 3:
        raise RuleError(f"rule {rule.name}: too few testable samples ({valid})")


def _parse_rule_form(form) -> list:
    if not isinstance(form, list) or len(form) < 4 or form[0] not in ("rule", "birule"):
        raise RuleError(f"bad rule form: {form!r}")
    head, name, lhs_s, rhs_s, *rest = form
    guards = []
    i = 0
    while i < len(rest):
        if rest[i] == ":int" and i + 1 < len(rest):
            guards.append(rest[i + 1])
            i += 2
        else:
            raise RuleError(f"bad rule suffix in {name}: {rest[i:]}")
    lhs = expr_from_sexpr(lhs_s)
    rhs = expr_from_sexpr(rhs_s)
    out = [Rule(name, lhs, rhs, tuple(guards))]
    if head == "birule":
        out.append(Rule(name + "-rev", rhs, lhs, tuple(guards)))
    for r in out:
        unbound = {v for v in free_vars(r.rhs) if v.startswith("?")} - free_vars(r.lhs)
        if unbound:
            raise RuleError(f"rule {r.name} introduces unbound variables {sorted(unbound)}")
    return out


def load_rules(text: str, selftest: bool = True) -> RuleSet:
    forms, _ = sexpr.parse_many(text)
    rules = []
    for form in forms:
        rules.extend(_parse_rule_form(form))
    if selftest:
        for r in rules:
            selftest_rule(r)
    return RuleSet(rules)


def default_rules(selftest: bool = True) -> RuleSet:
    key = ("default", selftest)
    if key not in _cache:
        text = resources.files("mlm.data").joinpath("rules.sexp").read_text()
        _cache[key] = load_rules(text, selftest)
    return _cache[key]


_SOLVER_PREFIXES = (
    "add-", "mul-", "sub-", "neg-", "double", "distribute", "div-", "frac-",
    "one-plus", "ldexp-", "two-",
)


def solver_rules() -> RuleSet:
    """Lean algebra-only subset used for iterated-reconstruction solving,
    where transcendental rules only blow the graphs up."""
    key = "solver"
    if key not in _cache:
        rules = [
            r for r in default_rules(selftest=False)
            if any(r.name.startswith(p) for p in _SOLVER_PREFIXES)
        ]
        _cache[key] = RuleSet(rules)
    return _cache[key]
