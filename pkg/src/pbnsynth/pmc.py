"""Reachability on (parametric) Markov chains and the bridge from pBN queries."""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import AlgebraError, Parameter, PoleError, RationalFunction
from .bn import Assignment, NotWellFormed, Pbn, PbnError, Query, topological_order
from .models import ChainError, Mc, Pmc, PmcState, Predicates, Target
from .transform import build_evidence_pmc, build_pmc

log = logging.getLogger(__name__)

FLOAT_RESIDUAL_TOL = 1e-12


class EvidenceImpossible(PbnError):
    """The evidence has probability zero for every instantiation."""


class EliminationError(ChainError):
    pass


def instantiate_pmc(m: Pmc, point: Sequence[Fraction]) -> Mc:
    point = m.params.instantiation(point)
    rows = []
    bad = []
    for s, row in enumerate(m.transitions):
        out = []
        for t, f in row:
            try:
                v = f.eval(point)
            except PoleError:
                bad.append((s, t, None))
                continue
            if not 0 <= v <= 1:
                bad.append((s, t, v))
            out.append((t, v))
        rows.append(out)
    if bad:
        desc = "; ".join(f"{s}->{t}: {v}" for s, t, v in bad[:10])
        raise NotWellFormed(f"pMC is ill-formed at this instantiation: {desc}", bad)
    return Mc(m.variables, m.states, rows, m.initial, m.final)


# -- concrete chains ---------------------------------------------------------------


def _topo_unknown(mc, unknown: set) -> Optional[List[int]]:
    """Reverse topological order of ``unknown`` (successors first), or None if it has a cycle."""
    indeg = {s: 0 for s in unknown}
    succ = {s: [t for t in mc._support(s) if t in unknown] for s in unknown}
    for s in unknown:
        for t in succ[s]:
            indeg[t] += 1
    ready = sorted(s for s in unknown if indeg[s] == 0)
    order = []
    while ready:
        s = ready.pop()
        order.append(s)
        for t in succ[s]:
            indeg[t] -= 1
            if indeg[t] == 0:
                ready.append(t)
    if len(order) != len(unknown):
        return None
    order.reverse()
    return order


def reach_prob(mc: Mc, target: Target, method: str = "auto") -> Fraction:
    """Exact Pr(eventually target) from the initial state.

    ``method`` is ``"auto"`` (one backward pass when the undecided part is
    acyclic, otherwise Gaussian elimination) or ``"gauss"``.
    """
    values = reach_values(mc, target, method)
    return values[mc.initial]


def reach_values(mc: Mc, target: Target, method: str = "auto") -> Dict[int, Fraction]:
    tset = mc.resolve(target)
    live = mc.can_reach(tset)
    values: Dict[int, Fraction] = {s: Fraction(0) for s in range(len(mc)) if s not in live}
    values.update({s: Fraction(1) for s in tset})
    unknown = set(live) - set(tset)
    if not unknown:
        return values
    order = _topo_unknown(mc, unknown) if method == "auto" else None
    if order is not None:
        for s in order:
            values[s] = sum((p * values[t] for t, p in mc.transitions[s]), Fraction(0))
        return values
    values.update(_gauss(mc, unknown, values))
    return values


def _gauss(mc: Mc, unknown: set, known: Dict[int, Fraction]) -> Dict[int, Fraction]:
    """Solve x_s = sum_t P(s,t) x_t over ``unknown`` by sparse Gauss-Jordan elimination."""
    idx = sorted(unknown)
    rows: Dict[int, Dict[int, Fraction]] = {}
    rhs: Dict[int, Fraction] = {}
    for s in idx:
        coeffs: Dict[int, Fraction] = {s: Fraction(1)}
        b = Fraction(0)
        for t, p in mc.transitions[s]:
            if not p:
                continue
            if t in unknown:
                coeffs[t] = coeffs.get(t, 0) - p
            else:
                b += p * known[t]
        rows[s] = {k: v for k, v in coeffs.items() if v}
        rhs[s] = b
    # deepest states first: on layered chains this keeps fill-in small
    pivots = sorted(idx, reverse=True)
    for pivot in pivots:
        prow = rows[pivot]
        pv = prow.get(pivot)
        if not pv:
            raise ChainError("singular reachability system")
        if pv != 1:
            prow = {k: v / pv for k, v in prow.items()}
            rhs[pivot] = rhs[pivot] / pv
            rows[pivot] = prow
        for s in idx:
            if s == pivot:
                continue
            factor = rows[s].get(pivot)
            if not factor:
                continue
            row = rows[s]
            for k, v in prow.items():
                nv = row.get(k, 0) - factor * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            rhs[s] -= factor * rhs[pivot]
    return {s: rhs[s] for s in idx}


def reach_prob_float(mc: Mc, target: Target) -> float:
    """Floating-point solve with a residual check; raises if the residual exceeds 1e-12."""
    tset = mc.resolve(target)
    live = mc.can_reach(tset)
    unknown = sorted(set(live) - set(tset))
    if mc.initial in tset:
        return 1.0
    if mc.initial not in live:
        return 0.0
    pos = {s: i for i, s in enumerate(unknown)}
    n = len(unknown)
    a = np.eye(n)
    b = np.zeros(n)
    for s in unknown:
        for t, p in mc.transitions[s]:
            if t in pos:
                a[pos[s], pos[t]] -= float(p)
            elif t in tset:
                b[pos[s]] += float(p)
    x = np.linalg.solve(a, b)
    residual = float(np.max(np.abs(a @ x - b))) if n else 0.0
    if residual > FLOAT_RESIDUAL_TOL:
        raise ChainError(f"float solve residual {residual:.3g} above tolerance")
    return float(x[pos[mc.initial]])


# -- state elimination ----------------------------------------------------------------


def reach_function(m: Pmc, target: Target) -> RationalFunction:
    """Pr(eventually target) as a rational function, by state elimination.

    Non-initial, non-target states are eliminated in reverse construction
    order; a self-loop ``f`` at the eliminated state rescales its remaining
    outgoing edges by ``1/(1-f)``.
    """
    params = m.params
    tset = m.resolve(target)
    if m.initial in tset:
        return RationalFunction.constant(params, 1)
    live = m.can_reach(tset)
    if m.initial not in live:
        return RationalFunction.constant(params, 0)
    out: Dict[int, Dict[int, RationalFunction]] = {}
    inc: Dict[int, set] = {s: set() for s in live}
    for s in live:
        if s in tset:
            continue
        edges: Dict[int, RationalFunction] = {}
        for t, f in m.transitions[s]:
            if t not in live or f.is_zero():
                continue
            edges[t] = edges[t] + f if t in edges else f
        out[s] = edges
        for t in edges:
            inc[t].add(s)
    for s in sorted(out, reverse=True):
        if s == m.initial:
            continue
        edges = out.pop(s)
        loop = edges.pop(s, None)
        inc[s].discard(s)
        if loop is not None:
            rest = 1 - loop
            if rest.is_zero():
                raise EliminationError(f"state {s} is a sure self-loop trap")
            scale = 1 / rest
            edges = {t: g * scale for t, g in edges.items()}
        for p in inc[s]:
            pe = out[p]
            f = pe.pop(s)
            for t, g in edges.items():
                contrib = f * g
                pe[t] = pe[t] + contrib if t in pe else contrib
                inc[t].add(p)
        for t in edges:
            inc[t].discard(s)
        del inc[s]
    edges = out[m.initial]
    loop = edges.pop(m.initial, None)
    total = RationalFunction.constant(params, 0)
    for t, g in edges.items():
        if t in tset:
            total = total + g
    if loop is not None:
        rest = 1 - loop
        if rest.is_zero():
            raise EliminationError("initial state is a sure self-loop trap")
        total = total / rest
    return total


# -- pBN queries ---------------------------------------------------------------------


def _conditional_plain(b: Pbn, hyp: Assignment, ev: Assignment, order) -> RationalFunction:
    m = build_pmc(b, order)
    preds = Predicates(m)
    params = b.params
    both = {**ev.as_dict(), **hyp.as_dict()}
    clash = any(k in ev.as_dict() and ev.as_dict()[k] != v for k, v in hyp)
    if ev:
        den = 1 - reach_function(m, preds.violating(ev.as_dict()))
        if den.is_zero():
            raise EvidenceImpossible(f"evidence {ev} has probability zero")
    else:
        den = RationalFunction.constant(params, 1)
    if clash:
        return RationalFunction.constant(params, 0)
    num = 1 - reach_function(m, preds.violating(both))
    if not ev:
        return num
    return num / den


def evidence_chain(b: Pbn, hyp_vars, ev: Assignment, order=None) -> Pmc:
    """Evidence-tailored chain with the hypothesis variables kept to the end."""
    m = build_evidence_pmc(b, order, ev, keep_open=hyp_vars)
    if not m.final:
        raise EvidenceImpossible(f"evidence {ev} has probability zero")
    return m


def _conditional_tailored(b: Pbn, hyp: Assignment, ev: Assignment, order) -> RationalFunction:
    m = evidence_chain(b, hyp.variables, ev, order)
    target = Predicates(m).final_satisfying(hyp.as_dict())
    return reach_function(m, target)


def conditional_function(
    b: Pbn, hyp: Assignment, ev: Assignment = Assignment(), mode: str = "evidence_tailored", order=None
) -> RationalFunction:
    """Pr(hyp | ev) as a rational function over the network parameters."""
    hyp.check(b)
    ev.check(b)
    if mode == "plain":
        return _conditional_plain(b, hyp, ev, order)
    if mode == "evidence_tailored":
        return _conditional_tailored(b, hyp, ev, order)
    raise ValueError(f"unknown mode {mode!r}")


class QueryFunctions:
    """Rational functions behind a query: the main conditional and, if any, the alternative one."""

    def __init__(self, b: Pbn, q: Query, mode: str = "evidence_tailored"):
        q.check(b)
        self.query = q
        self.params = b.params
        self.main = conditional_function(b, q.hypothesis, q.evidence, mode)
        self.alt = None
        if q.alternative is not None:
            h, e = q.alternative_terms()
            self.alt = conditional_function(b, h, e, mode)

    def combined(self) -> RationalFunction:
        if self.query.kind == "probability":
            return self.main
        if self.query.kind == "difference":
            return self.main - self.alt
        return self.main / self.alt

    def satisfied(self, point) -> bool:
        """Exact check of the constraint; ratios are compared cross-multiplied."""
        q = self.query
        a = self.main.eval(point)
        if q.kind == "probability":
            return q.holds(a)
        c = self.alt.eval(point)
        if q.kind == "difference":
            return q.holds(a - c)
        from .bn import compare

        return compare(a, q.comparison, q.threshold * c)

    def value(self, point) -> Fraction:
        q = self.query
        a = self.main.eval(point)
        if q.kind == "probability":
            return a
        c = self.alt.eval(point)
        if q.kind == "difference":
            return a - c
        if not c:
            raise PoleError("ratio denominator is zero at this point")
        return a / c

    def margin_float(self, point) -> float:
        """Signed slack of the constraint (positive when satisfied), in floating point."""
        q = self.query
        a = self.main.eval_float(point)
        thr = float(q.threshold)
        if q.kind == "probability":
            lhs, rhs = a, thr
        else:
            c = self.alt.eval_float(point)
            lhs, rhs = (a - c, thr) if q.kind == "difference" else (a, thr * c)
        return lhs - rhs if q.comparison in (">", ">=") else rhs - lhs


def query_prob(b: Pbn, q: Query, mode: str = "evidence_tailored") -> RationalFunction:
    """The query's quantity as a function: Pr(h|e), the ratio, or the difference."""
    return QueryFunctions(b, q, mode).combined()


def sensitivity_function(b: Pbn, q: Query) -> RationalFunction:
    return query_prob(b, q, "evidence_tailored")


def sensitivity_value(b: Pbn, q: Query, param: str, point, function: Optional[RationalFunction] = None) -> Fraction:
    """|d f / d param| at ``point`` for the sensitivity function ``f``."""
    f = function if function is not None else sensitivity_function(b, q)
    point = b.params.instantiation(point)
    if param not in b.params:
        raise AlgebraError(f"unknown parameter {param!r}")
    return abs(f.diff(param).eval(point))
