"""E-graph engine: congruence-closed equality saturation with rewrite
rules, plus the two operations synthesis relies on, per-node extraction
and e-graph intersection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .symexpr import Expr, rat

X_PENALTY = 10 ** 6
_COST_CAP = 10 ** 9
_FOLD_BITS = 512  # do not fold rationals past this size


@dataclass(frozen=True)
class Rule:
    name: str
    lhs: Expr
    rhs: Expr
    guards: tuple = ()  # ("?k", ...) variables that must denote integers


@dataclass
class RuleSet:
    rules: list

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def extended(self, extra) -> "RuleSet":
        return RuleSet(self.rules + list(extra))


class EGraph:
    def __init__(self):
        self._parent = []  # union-find
        self.classes = {}  # root id -> set of canonical enodes
        self.hashcons = {}  # canonical enode -> root id
        self.parents = {}  # root id -> list of (enode, class id)
        self.const = {}  # root id -> Fraction for constant-valued classes
        self._pending = []

    # -- union-find ----------------------------------------------------------

    def find(self, c: int) -> int:
        while self._parent[c] != c:
            self._parent[c] = self._parent[self._parent[c]]
            c = self._parent[c]
        return c

    def _new_class(self) -> int:
        cid = len(self._parent)
        self._parent.append(cid)
        self.classes[cid] = set()
        self.parents[cid] = []
        return cid

    @property
    def num_nodes(self) -> int:
        return len(self.hashcons)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    # -- insertion -------------------------------------------------------------

    def _canon(self, node: tuple) -> tuple:
        return node[:2] + tuple(self.find(c) for c in node[2:])

    def add_node(self, op: str, payload, children: tuple) -> int:
        node = (op, payload) + tuple(self.find(c) for c in children)
        cid = self.hashcons.get(node)
        if cid is not None:
            return self.find(cid)
        cid = self._new_class()
        self.hashcons[node] = cid
        self.classes[cid].add(node)
        for ch in set(node[2:]):
            self.parents[ch].append((node, cid))
        v = self._fold(node)
        if v is not None:
            self.const[cid] = v
            if not (op == "rat" and payload == v):
                rid = self.add_node("rat", v, ())
                self.merge(cid, rid)
                return self.find(cid)
        return cid

    def _fold(self, node: tuple) -> Optional[Fraction]:
        op, payload = node[0], node[1]
        if op == "rat":
            return payload
        kids = [self.const.get(self.find(c)) for c in node[2:]]
        if any(k is None for k in kids):
            return None
        try:
            if op == "+":
                v = kids[0] + kids[1]
            elif op == "-":
                v = kids[0] - kids[1]
            elif op == "*":
                v = kids[0] * kids[1]
            elif op == "/":
                if kids[1] == 0:
                    return None
                v = kids[0] / kids[1]
            elif op == "neg":
                v = -kids[0]
            elif op == "pow":
                if abs(payload) > 64:
                    return None
                v = kids[0] ** payload if not (kids[0] == 0 and payload < 0) else None
                if v is None:
                    return None
            else:
                return None
        except (OverflowError, ZeroDivisionError):
            return None
        if v.numerator.bit_length() > _FOLD_BITS or v.denominator.bit_length() > _FOLD_BITS:
            return None
        return v

    def add_expr(self, e: Expr) -> int:
        kids = tuple(self.add_expr(a) for a in e.args)
        return self.add_node(e.op, e.value, kids)

    def lookup_expr(self, e: Expr) -> Optional[int]:
        """Class of an expression if it is already represented, else None."""
        kids = []
        for a in e.args:
            k = self.lookup_expr(a)
            if k is None:
                return None
            kids.append(k)
        node = (e.op, e.value) + tuple(self.find(c) for c in kids)
        cid = self.hashcons.get(node)
        return None if cid is None else self.find(cid)

    # -- merging ---------------------------------------------------------------

    def merge(self, a: int, b: int) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if len(self.parents[a]) < len(self.parents[b]):
            a, b = b, a
        self._parent[b] = a
        self.classes[a] |= self.classes.pop(b)
        self.parents[a].extend(self.parents.pop(b))
        ca, cb = self.const.get(a), self.const.pop(b, None)
        if ca is not None and cb is not None and ca != cb:
            raise ValueError(f"e-graph merged distinct constants {ca} and {cb} (unsound rule?)")
        if ca is None and cb is not None:
            self.const[a] = cb
        self._pending.append(a)
        return True

    def rebuild(self):
        while self._pending:
            todo = {self.find(c) for c in self._pending}
            self._pending = []
            for cid in todo:
                self._repair(cid)

    def _repair(self, cid: int):
        root = self.find(cid)
        # snapshot and clear; merges inside the loop may redirect this list
        work = self.parents.get(root, [])
        self.parents[root] = []
        seen = {}
        for node, pcid in work:
            self.hashcons.pop(node, None)
            pr = self.find(pcid)
            self.classes[pr].discard(node)
            canon = self._canon(node)
            if canon in seen:
                self.merge(seen[canon], pr)
                pr = self.find(pr)
            elif canon in self.hashcons:
                other = self.find(self.hashcons[canon])
                if other != pr:
                    self.merge(other, pr)
                    pr = self.find(pr)
            self.hashcons[canon] = pr
            self.classes[pr].add(canon)
            seen[canon] = pr
        # dedup: merges during the loop may have concatenated stale lists
        root2 = self.find(root)
        merged = {}
        for n, p in self.parents.get(root2, []):
            merged[n] = self.find(p)
        for n, p in seen.items():
            merged[n] = self.find(p)
        self.parents[root2] = list(merged.items())

    # -- e-matching ------------------------------------------------------------

    def _by_op(self):
        index = {}
        for cid, nodes in self.classes.items():
            for node in nodes:
                index.setdefault(node[0], []).append((node, cid))
        return index

    def match_class(self, pat: Expr, cid: int, subst: dict, cap: int = None, work=None):
        cid = self.find(cid)
        if pat.op == "var" and pat.value.startswith("?"):
            bound = subst.get(pat.value)
            if bound is None:
                s2 = dict(subst)
                s2[pat.value] = cid
                yield s2
            elif self.find(bound) == cid:
                yield subst
            return
        for node in self.classes[cid]:
            if work is not None:
                if work[0] <= 0:
                    return
                work[0] -= 1
            if node[0] != pat.op or node[1] != pat.value:
                continue
            stack = [subst]
            for child_pat, child_cid in zip(pat.args, node[2:]):
                nxt = []
                for s in stack:
                    for m in self.match_class(child_pat, child_cid, s, cap, work):
                        nxt.append(m)
                        if cap is not None and len(nxt) >= cap:
                            break
                    if cap is not None and len(nxt) >= cap:
                        break
                stack = nxt
                if not stack:
                    break
            yield from stack

    def ematch(self, pat: Expr, index=None, limit=None, work_budget=None):
        """(substitution, class) pairs where pat matches a class member.

        ``limit`` caps match count, ``work_budget`` caps visited nodes;
        AC patterns over large classes otherwise scan combinatorially.
        """
        out = []
        work = None if work_budget is None else [work_budget]
        if pat.op == "var" and pat.value.startswith("?"):
            # a bare pattern variable matches every class
            pairs = [({pat.value: cid}, cid) for cid in self.classes]
            return pairs if limit is None else pairs[:limit]
        if index is None:
            index = self._by_op()
        candidates = index.get(pat.op, [])
        cap = None if limit is None else max(limit, 64)
        for node, cid in candidates:
            if work is not None and work[0] <= 0:
                return out
            stack = [{}]
            ok = True
            for child_pat, child_cid in zip(pat.args, node[2:]):
                nxt = []
                for s in stack:
                    for m in self.match_class(child_pat, child_cid, s, cap, work):
                        nxt.append(m)
                        if cap is not None and len(nxt) >= cap:
                            break
                    if cap is not None and len(nxt) >= cap:
                        break
                stack = nxt
                if not stack:
                    ok = False
                    break
            if ok:
                for s in stack:
                    out.append((s, self.find(cid)))
                    if limit is not None and len(out) >= limit:
                        return out
        return out

    def add_instance(self, pat: Expr, subst: dict) -> int:
        if pat.op == "var" and pat.value.startswith("?"):
            return self.find(subst[pat.value])
        kids = tuple(self.add_instance(a, subst) for a in pat.args)
        return self.add_node(pat.op, pat.value, kids)

    # -- integer analysis (for guarded rules) -----------------------------------

    def integer_classes(self) -> set:
        flags = set()
        for cid in self.classes:
            v = self.const.get(cid)
            if v is not None and v.denominator == 1:
                flags.add(cid)
                continue
            for node in self.classes[cid]:
                if node[0] == "var" and node[1] in ("k", "n"):
                    flags.add(cid)
                    break
                if node[0] == "floor":
                    flags.add(cid)
                    break
        changed = True
        while changed:
            changed = False
            for cid, nodes in self.classes.items():
                if cid in flags:
                    continue
                for node in nodes:
                    op = node[0]
                    if op in ("+", "-", "*", "neg") and all(self.find(c) in flags for c in node[2:]):
                        flags.add(cid)
                        changed = True
                        break
        return flags

    # -- saturation --------------------------------------------------------------

    def saturate(self, rules, iter_limit: int = 8, node_limit: int = 50000, goals=None,
                 match_limit: int = None, work_budget: int = None) -> str:
        """Run rules to fixpoint or until a limit is hit; returns the reason.

        ``goals`` is an optional list of class-id pairs; saturation stops
        with reason 'goal' as soon as every pair is merged.
        """
        if iter_limit <= 0 or node_limit <= 0:
            raise ValueError("limits must be positive")

        def goals_met():
            return goals is not None and all(self.find(a) == self.find(b) for a, b in goals)

        if goals_met():
            return "goal"
        for _ in range(iter_limit):
            if self.num_nodes >= node_limit:
                return "node_limit"
            int_classes = None
            index = self._by_op()
            matches = []
            for rule in rules:
                found = self.ematch(rule.lhs, index, match_limit, work_budget)
                if rule.guards and found:
                    if int_classes is None:
                        int_classes = self.integer_classes()
                    found = [
                        (s, c)
                        for s, c in found
                        if all(self.find(s[g]) in int_classes for g in rule.guards if g in s)
                    ]
                for s, c in found:
                    matches.append((rule, s, c))
            changed = False
            before = self.num_nodes
            for rule, subst, cid in matches:
                if self.num_nodes >= node_limit:
                    self.rebuild()
                    return "node_limit"
                new_cid = self.add_instance(rule.rhs, subst)
                if self.merge(cid, new_cid):
                    changed = True
            self.rebuild()
            if goals_met():
                return "goal"
            if not changed and self.num_nodes == before:
                return "fixpoint"
        return "iter_limit"

    # -- extraction ---------------------------------------------------------------

    def _node_cost(self, node: tuple, costs: dict) -> int:
        op = node[0]
        if op == "var" and node[1] == "x":
            return X_PENALTY
        total = 1
        for c in node[2:]:
            total += costs.get(self.find(c), _COST_CAP)
        return min(total, _COST_CAP)

    def extract_best(self, cost_of=None):
        """Minimum-cost representative expression per class."""
        costs = {}
        best = {}
        changed = True
        while changed:
            changed = False
            for cid, nodes in self.classes.items():
                for node in nodes:
                    c = (cost_of or self._node_cost)(node, costs)
                    if c < costs.get(cid, _COST_CAP):
                        costs[cid] = c
                        best[cid] = node
                        changed = True
        return costs, best

    def _expr_of(self, node: tuple, best: dict) -> Expr:
        kids = tuple(self._expr_of(best[self.find(c)], best) for c in node[2:])
        return Expr(node[0], kids, node[1])

    def node_extract(self, cid: int, cost_of=None):
        """One representative per e-node of the class, with its cost."""
        cid = self.find(cid)
        costs, best = self.extract_best(cost_of)
        out = []
        for node in self.classes[cid]:
            if any(self.find(c) not in best for c in node[2:]):
                continue
            cost = (cost_of or self._node_cost)(node, costs)
            out.append((self._expr_of(node, best), cost))
        return out

    def equal(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    # -- diagnostics -----------------------------------------------------------------

    def to_dot(self) -> str:
        lines = ["digraph egraph {", "  compound=true;"]
        for cid, nodes in self.classes.items():
            lines.append(f"  subgraph cluster_{cid} {{ label=\"c{cid}\";")
            for i, node in enumerate(sorted(nodes, key=repr)):
                label = node[0] if node[1] is None else f"{node[0]}:{node[1]}"
                lines.append(f"    n{cid}_{i} [label=\"{label}\"];")
            lines.append("  }")
        for cid, nodes in self.classes.items():
            for i, node in enumerate(sorted(nodes, key=repr)):
                for ch in node[2:]:
                    tgt = self.find(ch)
                    lines.append(f"  n{cid}_{i} -> n{tgt}_0 [lhead=cluster_{tgt}];")
        lines.append("}")
        return "\n".join(lines)


def prove_equal(a: Expr, b: Expr, rules, iter_limit: int = 8, node_limit: int = 50000) -> str:
    """'proven' if the rules merge both expressions, else 'unknown'."""
    g = EGraph()
    ca, cb = g.add_expr(a), g.add_expr(b)
    g.rebuild()
    if g.equal(ca, cb):
        return "proven"
    g.saturate(rules, iter_limit, node_limit, goals=[(ca, cb)])
    return "proven" if g.equal(ca, cb) else "unknown"


def intersect2(g1: EGraph, g2: EGraph, node_limit: int = 200000) -> EGraph:
    """Product construction: the result contains a term iff both inputs do,
    and equates two terms iff both inputs equate them.

    Worklist-driven: a node pair is (re)attempted only when one of its
    child class pairs first becomes live."""
    from collections import deque

    res = EGraph()
    pairmap = {}
    queue = deque()

    up1, up2 = {}, {}
    leaves1 = []
    index2 = {}
    for cid, nodes in g1.classes.items():
        for n in nodes:
            if len(n) == 2:
                leaves1.append((n, cid))
            for ch in set(n[2:]):
                up1.setdefault(g1.find(ch), []).append((n, cid))
    for cid, nodes in g2.classes.items():
        for n in nodes:
            index2.setdefault((n[0], n[1], len(n)), []).append((n, cid))
            for ch in set(n[2:]):
                up2.setdefault(g2.find(ch), []).append((n, cid))

    pending = [0]

    def attempt(n1, c1, n2, c2):
        kids = []
        for a, b in zip(n1[2:], n2[2:]):
            pc = pairmap.get((g1.find(a), g2.find(b)))
            if pc is None:
                return
            kids.append(res.find(pc))
        rid = res.add_node(n1[0], n1[1], tuple(kids))
        key = (g1.find(c1), g2.find(c2))
        prev = pairmap.get(key)
        if prev is None:
            pairmap[key] = res.find(rid)
            queue.append(key)
        elif res.find(prev) != res.find(rid):
            res.merge(prev, rid)
        pending[0] += 1
        if pending[0] >= 256:  # deferred congruence repair, egg-style
            pending[0] = 0
            res.rebuild()

    for n1, c1 in leaves1:
        for n2, c2 in index2.get((n1[0], n1[1], 2), ()):
            attempt(n1, c1, n2, c2)
    while queue:
        if res.num_nodes > node_limit:
            break
        a, b = queue.popleft()
        partners = up2.get(b, ())
        for n1, c1 in up1.get(a, ()):
            key = (n1[0], n1[1], len(n1))
            for n2, c2 in partners:
                if (n2[0], n2[1], len(n2)) != key:
                    continue
                for ca, cb in zip(n1[2:], n2[2:]):
                    if g1.find(ca) == a and g2.find(cb) == b:
                        attempt(n1, c1, n2, c2)
                        break
    res.rebuild()
    return res


def intersect(graphs, node_limit: int = 200000) -> EGraph:
    if len(graphs) < 2:
        raise ValueError("intersection needs at least two e-graphs")
    out = graphs[0]
    for g in graphs[1:]:
        out = intersect2(out, g, node_limit)
    return out
