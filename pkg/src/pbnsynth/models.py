"""Sparse parametric and concrete Markov chains."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .algebra import ParameterSpace, RationalFunction


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class PmcState:
    """Level plus one value (or ``None`` for don't-care) per variable of the order."""

    level: int
    valuation: Tuple[Optional[str], ...]


StatePredicate = Callable[[PmcState], bool]
Target = Union[Iterable[int], StatePredicate]


class _Chain:
    def __init__(self, variables, states, transitions, initial=0, final=()):
        if len(states) != len(transitions):
            raise ChainError("one transition row per state is required")
        self.variables: Tuple[str, ...] = tuple(variables)
        self.states: Tuple[PmcState, ...] = tuple(states)
        self.transitions = tuple(tuple(row) for row in transitions)
        self.initial = initial
        self.final: FrozenSet[int] = frozenset(final)
        for row in self.transitions:
            for t, _ in row:
                if not 0 <= t < len(self.states):
                    raise ChainError(f"transition to unknown state {t}")

    def __len__(self):
        return len(self.states)

    @property
    def num_states(self) -> int:
        return len(self.states)

    def labels(self, s: int) -> Tuple[str, ...]:
        st = self.states[s]
        out = []
        if s == self.initial:
            out.append("init")
        if s in self.final:
            out.append("final")
        out.extend(f"{v}={d}" for v, d in zip(self.variables, st.valuation) if d is not None)
        return tuple(out)

    def value_of(self, s: int, var: str) -> Optional[str]:
        return self.states[s].valuation[self.variables.index(var)]

    def resolve(self, target: Target) -> FrozenSet[int]:
        if callable(target):
            return frozenset(i for i, st in enumerate(self.states) if target(st))
        return frozenset(target)

    def predecessors(self) -> List[Set[int]]:
        preds: List[Set[int]] = [set() for _ in self.states]
        for s, row in enumerate(self.transitions):
            for t, _ in row:
                preds[t].add(s)
        return preds

    def _support(self, s) -> List[int]:
        raise NotImplementedError

    def can_reach(self, target: FrozenSet[int]) -> Set[int]:
        """States with a path (over nonzero edges) into ``target``."""
        preds: List[Set[int]] = [set() for _ in self.states]
        for s in range(len(self.states)):
            for t in self._support(s):
                preds[t].add(s)
        seen = set(target)
        stack = list(target)
        while stack:
            t = stack.pop()
            for s in preds[t]:
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return seen


class Pmc(_Chain):
    """States, initial state and, per state, a list of ``(target, RationalFunction)``."""

    def __init__(self, params: ParameterSpace, variables, states, transitions, initial=0, final=()):
        super().__init__(variables, states, transitions, initial, final)
        self.params = params
        for row in self.transitions:
            for _, f in row:
                if f.params != params:
                    raise ChainError("transition function over a different parameter list")

    def _support(self, s):
        return [t for t, f in self.transitions[s] if not f.is_zero()]

    def row_sums_ok(self) -> List[int]:
        """States whose outgoing functions do not sum symbolically to 1."""
        bad = []
        for s, row in enumerate(self.transitions):
            total = RationalFunction.constant(self.params, 0)
            for _, f in row:
                total = total + f
            if not total.same_function(RationalFunction.constant(self.params, 1)):
                bad.append(s)
        return bad

    def row_variables(self, s: int) -> Tuple[int, ...]:
        used = set()
        for _, f in self.transitions[s]:
            used.update(f.variables())
        return tuple(sorted(used))


class Mc(_Chain):
    """A :class:`Pmc` whose transition values are exact rationals."""

    def __init__(self, variables, states, transitions, initial=0, final=()):
        super().__init__(variables, states, transitions, initial, final)

    def _support(self, s):
        return [t for t, p in self.transitions[s] if p]

    def row_sums_ok(self) -> List[int]:
        return [s for s, row in enumerate(self.transitions) if sum(p for _, p in row) != 1]


class Predicates:
    """Predicates need the chain's variable order; build them through this helper."""

    def __init__(self, chain: _Chain):
        self.chain = chain
        self.pos = {v: i for i, v in enumerate(chain.variables)}

    def violating(self, assignment: Dict[str, str]) -> FrozenSet[int]:
        idx = [(self.pos[v], d) for v, d in assignment.items()]
        out = set()
        for s, st in enumerate(self.chain.states):
            val = st.valuation
            if any(val[i] is not None and val[i] != d for i, d in idx):
                out.add(s)
        return frozenset(out)

    def final_satisfying(self, assignment: Dict[str, str]) -> FrozenSet[int]:
        idx = [(self.pos[v], d) for v, d in assignment.items()]
        out = set()
        for s in self.chain.final:
            val = self.chain.states[s].valuation
            if all(val[i] == d for i, d in idx):
                out.add(s)
        return frozenset(out)
