"""Compile a pBN into a layered pMC, optionally tailored to evidence.

Level ``j`` of the chain has just processed the ``j``-th variable of the
topological order.  A state keeps the value of that variable plus the values
of the *open* variables: processed ones that some later CPT row still needs.
"""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .algebra import RationalFunction
from .bn import Assignment, Pbn, PbnError, topological_order
from .models import Pmc, PmcState


def _check_order(b: Pbn, order: Sequence[str]) -> Tuple[str, ...]:
    order = tuple(order)
    if sorted(order) != sorted(b.names):
        raise PbnError("order must list every variable exactly once")
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        for p in b.parents(v):
            if pos[p] >= pos[v]:
                raise PbnError(f"order is not topological: {p} must precede {v}")
    return order


def _last_use(b: Pbn, order: Sequence[str]) -> List[int]:
    """1-based level of each variable's last child (its own level if childless)."""
    pos = {v: i + 1 for i, v in enumerate(order)}
    out = []
    for i, v in enumerate(order, start=1):
        out.append(max([pos[c] for c in b.children(v)], default=i))
    return out


def open_set(b: Pbn, order: Sequence[str], j: int) -> FrozenSet[str]:
    """Variables processed before level ``j`` with a child beyond level ``j``."""
    order = _check_order(b, order)
    if not 1 <= j <= len(order):
        raise PbnError(f"level {j} outside 1..{len(order)}")
    last = _last_use(b, order)
    return frozenset(order[i] for i in range(j - 1) if last[i] > j)


def _build(b: Pbn, order, keep_until: List[int], evidence: Dict[str, str]) -> Pmc:
    """Shared construction; ``keep_until[i]`` is the first level at which variable i is dropped."""
    m = len(order)
    params = b.params
    one = RationalFunction.constant(params, 1)
    # open_at[j] = indices (0-based) kept at level j besides the level variable itself
    open_at = [()] + [
        tuple(i for i in range(j - 1) if keep_until[i] > j) for j in range(1, m + 1)
    ]
    pos = {v: i for i, v in enumerate(order)}
    parent_pos = {v: tuple(pos[p] for p in b.parents(v)) for v in order}
    init = PmcState(0, (None,) * m)
    ids: Dict[PmcState, int] = {init: 0}
    states: List[PmcState] = [init]
    rows: List[List[Tuple[int, RationalFunction]]] = [None]
    final = set()
    frontier = [0]
    k = 0
    while k < len(frontier):
        s = frontier[k]
        k += 1
        st = states[s]
        level = st.level
        if level == m:
            rows[s] = [(s, one)]
            final.add(s)
            continue
        var = order[level]
        parent_values = tuple(st.valuation[i] for i in parent_pos[var])
        if any(v is None for v in parent_values):
            raise PbnError(f"internal: parents of {var} not available at level {level}")
        row = b.cpts[var].rows[parent_values]
        out: List[Tuple[int, RationalFunction]] = []
        restart = None
        keep = open_at[level + 1]
        for d, entry in zip(b.domain(var), row):
            if entry.is_zero():
                continue
            f = RationalFunction(entry)
            if var in evidence and evidence[var] != d:
                restart = f if restart is None else restart + f
                continue
            val = [None] * m
            for i in keep:
                val[i] = st.valuation[i]
            val[level] = d
            nxt = PmcState(level + 1, tuple(val))
            t = ids.get(nxt)
            if t is None:
                t = ids[nxt] = len(states)
                states.append(nxt)
                rows.append(None)
                frontier.append(t)
            out.append((t, f))
        if restart is not None:
            out.append((0, restart))
        rows[s] = out
    return Pmc(params, order, states, rows, initial=0, final=final)


def build_pmc(b: Pbn, order: Optional[Sequence[str]] = None, keep_open: Iterable[str] = ()) -> Pmc:
    """Layered pMC of ``b``; ``keep_open`` variables stay in the state up to the last level."""
    order = _check_order(b, order if order is not None else topological_order(b))
    m = len(order)
    keep_until = _last_use(b, order)
    for v in keep_open:
        keep_until[order.index(v)] = m + 1
    return _build(b, order, keep_until, {})


def build_evidence_pmc(
    b: Pbn,
    order: Optional[Sequence[str]],
    evidence: Assignment,
    keep_open: Iterable[str] = (),
) -> Pmc:
    """pMC whose evidence-violating transitions restart at the initial state.

    Non-evidence variables ordered before the last evidence variable stay
    open until that variable is processed; ``keep_open`` (the hypothesis
    variables, for conditional queries) stay open through the final level so
    absorbing states carry their values.
    """
    order = _check_order(b, order if order is not None else topological_order(b))
    evidence.check(b)
    m = len(order)
    ev = evidence.as_dict()
    keep_until = _last_use(b, order)
    if ev:
        k = max(order.index(v) for v in ev) + 1
        for i, v in enumerate(order[: k - 1]):
            if v not in ev:
                keep_until[i] = max(keep_until[i], k)
    for v in keep_open:
        keep_until[order.index(v)] = m + 1
    return _build(b, order, keep_until, ev)
