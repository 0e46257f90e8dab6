"""Parametric Bayesian networks: data model, validation, subclasses and an exact oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .algebra import AlgebraError, ParameterSpace, Polynomial, as_fraction, format_fraction

ORACLE_LIMIT = 2 ** 20
COMPARISONS = ("<", "<=", ">", ">=")
KINDS = ("probability", "ratio", "difference")


class PbnError(ValueError):
    pass


class CycleError(PbnError):
    pass


class NotWellFormed(PbnError):
    """Some CPT entry leaves [0, 1] at an instantiation."""

    def __init__(self, message, coordinates=()):
        super().__init__(message)
        self.coordinates = list(coordinates)


class OracleError(PbnError):
    pass


@dataclass(frozen=True)
class RandomVariable:
    name: str
    domain: Tuple[str, ...]


@dataclass(frozen=True)
class Cpt:
    owner: str
    parents: Tuple[str, ...]
    rows: Mapping[Tuple[str, ...], Tuple[Polynomial, ...]] = field(hash=False)


@dataclass(frozen=True)
class Pbn:
    """A DAG of discrete variables whose CPT entries are polynomials over ``params``."""

    name: str
    variables: Tuple[RandomVariable, ...]
    params: ParameterSpace
    cpts: Mapping[str, Cpt] = field(hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {v.name: v for v in self.variables})

    def var(self, name: str) -> RandomVariable:
        try:
            return self._by_name[name]
        except KeyError:
            raise PbnError(f"unknown variable {name!r}") from None

    def has_var(self, name: str) -> bool:
        return name in self._by_name

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def domain(self, name: str) -> Tuple[str, ...]:
        return self.var(name).domain

    def parents(self, name: str) -> Tuple[str, ...]:
        return self.cpts[name].parents

    def children(self, name: str) -> Tuple[str, ...]:
        return tuple(v for v in self.names if name in self.cpts[v].parents)

    @property
    def edges(self) -> Tuple[Tuple[str, str], ...]:
        return tuple((p, v) for v in self.names for p in self.cpts[v].parents)

    def parent_valuations(self, name: str) -> Iterator[Tuple[str, ...]]:
        """Parent valuations, row-major over the declared parent order."""
        return itertools.product(*(self.domain(p) for p in self.parents(name)))

    def entry(self, name: str, parent_values: Tuple[str, ...], value: str) -> Polynomial:
        return self.cpts[name].rows[tuple(parent_values)][self.domain(name).index(value)]

    def is_parametric(self) -> bool:
        return len(self.params) > 0

    def state_space_size(self) -> int:
        return math.prod(len(v.domain) for v in self.variables)


Bn = Pbn  # a Bn is a Pbn over the empty parameter list


class Assignment:
    """Ordered variable=value pairs with distinct variables."""

    __slots__ = ("pairs",)

    def __init__(self, pairs: Iterable[Tuple[str, str]] | Mapping[str, str] = ()):
        if isinstance(pairs, Mapping):
            pairs = pairs.items()
        pairs = tuple((str(k), str(v)) for k, v in pairs)
        seen = set()
        for k, _ in pairs:
            if k in seen:
                raise PbnError(f"variable {k} assigned twice")
            seen.add(k)
        self.pairs = pairs

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __bool__(self):
        return bool(self.pairs)

    def __eq__(self, other):
        return isinstance(other, Assignment) and self.pairs == other.pairs

    def __hash__(self):
        return hash(self.pairs)

    def __repr__(self):
        return f"Assignment({self})"

    def __str__(self):
        return ", ".join(f"{k}={v}" for k, v in self.pairs)

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(k for k, _ in self.pairs)

    def as_dict(self) -> Dict[str, str]:
        return dict(self.pairs)

    def check(self, b: Pbn):
        for k, v in self.pairs:
            if not b.has_var(k):
                raise PbnError(f"unknown variable {k!r}")
            if v not in b.domain(k):
                raise PbnError(f"value {v!r} not in domain of {k}")

    def satisfied_by(self, outcome: Mapping[str, str]) -> bool:
        return all(outcome.get(k) == v for k, v in self.pairs)


def compare(lhs, op: str, rhs) -> bool:
    if op == "<":
        return lhs < rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">":
        return lhs > rhs
    if op == ">=":
        return lhs >= rhs
    raise PbnError(f"unknown comparison {op!r}")


@dataclass(frozen=True)
class Query:
    """``kind`` selects Pr(h|e) ~ q, Pr(h|e)/Pr(h'|e) ~ q or Pr(h|e) - Pr(h'|e) ~ q.

    When ``alternative`` assigns the evidence variables instead of the
    hypothesis ones, the alternative term is Pr(h|e') (evidence-side variant).
    """

    hypothesis: Assignment
    evidence: Assignment = Assignment()
    kind: str = "probability"
    comparison: str = "<="
    threshold: Fraction = Fraction(0)
    alternative: Optional[Assignment] = None

    def __post_init__(self):
        if not self.hypothesis:
            raise PbnError("hypothesis must be nonempty")
        if self.kind not in KINDS:
            raise PbnError(f"unknown query kind {self.kind!r}")
        if self.comparison not in COMPARISONS:
            raise PbnError(f"unknown comparison {self.comparison!r}")
        object.__setattr__(self, "threshold", as_fraction(self.threshold))
        if (self.alternative is not None) != (self.kind != "probability"):
            raise PbnError("an alternative assignment is required exactly for ratio/difference queries")
        if self.alternative is not None:
            alt = set(self.alternative.variables)
            if alt != set(self.hypothesis.variables) and alt != set(self.evidence.variables):
                raise PbnError("alternative must assign the hypothesis (or evidence) variables")
        if self.kind == "probability" and not 0 <= self.threshold <= 1:
            raise PbnError("probability threshold must lie in [0, 1]")
        if self.kind == "ratio" and self.threshold < 0:
            raise PbnError("ratio threshold must be nonnegative")
        if self.kind == "difference" and not -1 <= self.threshold <= 1:
            raise PbnError("difference threshold must lie in [-1, 1]")

    @property
    def evidence_side(self) -> bool:
        return (
            self.alternative is not None
            and set(self.alternative.variables) != set(self.hypothesis.variables)
        )

    def alternative_terms(self) -> Tuple[Assignment, Assignment]:
        """(hypothesis, evidence) for the alternative term of a ratio/difference query."""
        if self.alternative is None:
            raise PbnError("query has no alternative")
        if self.evidence_side:
            return self.hypothesis, self.alternative
        return self.alternative, self.evidence

    def check(self, b: Pbn):
        self.hypothesis.check(b)
        self.evidence.check(b)
        if self.alternative is not None:
            self.alternative.check(b)

    def holds(self, value) -> bool:
        return compare(value, self.comparison, self.threshold)

    def __str__(self):
        cond = f" | {self.evidence}" if self.evidence else ""
        q = format_fraction(self.threshold)
        if self.kind == "probability":
            return f"P({self.hypothesis}{cond}) {self.comparison} {q}"
        sep, name = (":", "RATIO") if self.kind == "ratio" else ("-", "DIFF")
        return f"{name}({self.hypothesis} {sep} {self.alternative}{cond}) {self.comparison} {q}"


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    message: str

    def __str__(self):
        return f"{self.kind} at {self.where}: {self.message}"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind, where, message):
        self.violations.append(Violation(kind, where, message))

    def __str__(self):
        return "ok" if self.ok else "\n".join(map(str, self.violations))


def validate_pbn(b: Pbn) -> ValidationReport:
    report = ValidationReport()
    names = [v.name for v in b.variables]
    if len(set(names)) != len(names):
        report.add("duplicate-variable", "network", "variable names are not unique")
    for v in b.variables:
        if len(v.domain) < 2:
            report.add("domain", v.name, "domain needs at least two values")
        if len(set(v.domain)) != len(v.domain):
            report.add("domain", v.name, "duplicate value labels")
    for name in names:
        if name not in b.cpts:
            report.add("missing-cpt", name, "no CPT")
    for name, cpt in b.cpts.items():
        if name not in names or cpt.owner != name:
            report.add("cpt-owner", name, "CPT does not belong to a declared variable")
            continue
        unknown = [p for p in cpt.parents if p not in names]
        if unknown:
            report.add("unknown-parent", name, f"undeclared parents {unknown}")
            continue
        expected = set(b.parent_valuations(name))
        for key in cpt.rows:
            if key not in expected:
                report.add("extra-row", f"{name}{key}", "row key is not a parent valuation")
        size = len(b.domain(name))
        for key in b.parent_valuations(name):
            where = f"{name}({', '.join(key)})" if key else name
            row = cpt.rows.get(key)
            if row is None:
                report.add("missing-row", where, "no row for this parent valuation")
                continue
            if len(row) != size:
                report.add("row-length", where, f"{len(row)} entries for {size} values")
                continue
            if any(e.params != b.params for e in row):
                report.add("parameters", where, "entry uses undeclared parameters")
                continue
            total = sum(row[1:], row[0])
            if total != 1:
                report.add("row-sum", where, f"entries sum to {total}, not 1")
    try:
        topological_order(b)
    except CycleError as exc:
        report.add("cycle", "network", str(exc))
    except PbnError:
        pass
    return report


def topological_order(b: Pbn) -> Tuple[str, ...]:
    """Parents first; among ready variables the earliest declared wins."""
    names = list(b.names)
    placed: List[str] = []
    done = set()
    remaining = list(names)
    while remaining:
        for v in remaining:
            cpt = b.cpts.get(v)
            parents = cpt.parents if cpt is not None else ()
            if all(p in done for p in parents):
                placed.append(v)
                done.add(v)
                remaining.remove(v)
                break
        else:
            raise CycleError(f"cycle among {remaining}")
    return tuple(placed)


# -- instantiation and classification -------------------------------------------


def instantiate(b: Pbn, point: Sequence[Fraction] | Mapping[str, Fraction]) -> Pbn:
    """Substitute every parameter; raises :class:`NotWellFormed` if an entry leaves [0, 1]."""
    if isinstance(point, Mapping):
        point = b.params.instantiation(point)
    else:
        point = b.params.instantiation(point)
    empty = ParameterSpace()
    bad = []
    cpts = {}
    for name, cpt in b.cpts.items():
        rows = {}
        for key, row in cpt.rows.items():
            values = [e.eval(point) for e in row]
            for value_label, val in zip(b.domain(name), values):
                if not 0 <= val <= 1:
                    bad.append((name, key, value_label, val))
            rows[key] = tuple(Polynomial.constant(empty, v) for v in values)
        cpts[name] = Cpt(name, cpt.parents, rows)
    if bad:
        desc = "; ".join(f"{n}{tuple(k)}[{lab}] = {v}" for n, k, lab, v in bad)
        raise NotWellFormed(f"instantiation is not well-formed: {desc}", bad)
    return Pbn(b.name, b.variables, empty, cpts)


def fix_parameters(b: Pbn, values: Mapping[str, Fraction]) -> Pbn:
    """Substitute a subset of parameters, keeping the others symbolic."""
    fixed = {b.params.index(n): as_fraction(v) for n, v in values.items()}
    keep = [p.name for p in b.params if p.name not in values]
    target = b.params.restrict(keep)
    cpts = {}
    for name, cpt in b.cpts.items():
        rows = {k: tuple(e.substitute(fixed, target) for e in row) for k, row in cpt.rows.items()}
        cpts[name] = Cpt(name, cpt.parents, rows)
    return Pbn(b.name, b.variables, target, cpts)


@dataclass(frozen=True)
class SubclassTag:
    """Occurrence counts of parameters.

    The rendered tag counts the CPTs that contain any parameter, so
    "p8c4r1" reads: eight parameters spread over four CPTs, each parameter
    in a single row.
    """

    parameter_count: int
    max_cpts_per_parameter: int
    max_rows_per_parameter: int
    parametrized_cpts: int

    @property
    def tag(self) -> str:
        return f"p{self.parameter_count}c{self.parametrized_cpts}r{self.max_rows_per_parameter}"

    def in_p1c1r1(self) -> bool:
        return self.parameter_count == 1 and self.max_cpts_per_parameter == 1 and self.max_rows_per_parameter == 1

    def in_p2c2r1(self) -> bool:
        return self.parameter_count == 2 and self.max_cpts_per_parameter <= 2 and self.max_rows_per_parameter == 1

    def in_pstar_c1r1(self) -> bool:
        return (
            self.parameter_count >= 1
            and self.max_cpts_per_parameter == 1
            and self.max_rows_per_parameter == 1
            and self.parametrized_cpts == 1
        )


def classify_subclass(b: Pbn) -> SubclassTag:
    cpts_of: Dict[int, set] = {}
    rows_of: Dict[int, int] = {}
    for name, cpt in b.cpts.items():
        for row in cpt.rows.values():
            used = set()
            for e in row:
                used.update(e.variables())
            for i in used:
                cpts_of.setdefault(i, set()).add(name)
                rows_of[i] = rows_of.get(i, 0) + 1
    touched = set().union(*cpts_of.values()) if cpts_of else set()
    return SubclassTag(
        parameter_count=len(b.params),
        max_cpts_per_parameter=max((len(s) for s in cpts_of.values()), default=0),
        max_rows_per_parameter=max(rows_of.values(), default=0),
        parametrized_cpts=len(touched),
    )


# -- exact enumeration oracle -----------------------------------------------------


def _constant_table(b: Pbn):
    if b.is_parametric():
        raise OracleError("oracle needs a parameter-free network; instantiate first")
    return {
        name: {k: [e.constant_value() for e in row] for k, row in cpt.rows.items()}
        for name, cpt in b.cpts.items()
    }


def iter_joint(b: Pbn, given: Mapping[str, str] | None = None) -> Iterator[Tuple[Dict[str, str], Fraction]]:
    """Yield every joint outcome consistent with ``given`` and its exact probability."""
    if b.state_space_size() > ORACLE_LIMIT:
        raise OracleError(f"joint state space {b.state_space_size()} exceeds {ORACLE_LIMIT}")
    table = _constant_table(b)
    order = topological_order(b)
    given = dict(given or {})

    def rec(i, outcome, prob):
        if i == len(order):
            yield dict(outcome), prob
            return
        name = order[i]
        key = tuple(outcome[p] for p in b.parents(name))
        row = table[name][key]
        for label, pr in zip(b.domain(name), row):
            if name in given and given[name] != label:
                continue
            if not pr:
                continue
            outcome[name] = label
            yield from rec(i + 1, outcome, prob * pr)
        outcome.pop(name, None)

    yield from rec(0, {}, Fraction(1))


def joint_oracle(b: Pbn, target: Assignment, given: Assignment = Assignment()) -> Fraction:
    """Pr(target | given) by full joint enumeration."""
    target.check(b)
    given.check(b)
    tgt = target.as_dict()
    p_given = Fraction(0)
    p_both = Fraction(0)
    for outcome, pr in iter_joint(b, given.as_dict()):
        p_given += pr
        if all(outcome[k] == v for k, v in tgt.items()):
            p_both += pr
    if not p_given:
        raise OracleError("evidence has probability zero")
    return p_both / p_given


def joint_distribution(b: Pbn) -> Dict[Tuple[str, ...], Fraction]:
    """Every joint outcome (values in declaration order) with its probability, zeros included."""
    if b.state_space_size() > ORACLE_LIMIT:
        raise OracleError(f"joint state space {b.state_space_size()} exceeds {ORACLE_LIMIT}")
    table = _constant_table(b)
    names = b.names
    dist = {}
    for values in itertools.product(*(b.domain(n) for n in names)):
        outcome = dict(zip(names, values))
        pr = Fraction(1)
        for n in names:
            key = tuple(outcome[p] for p in b.parents(n))
            pr *= table[n][key][b.domain(n).index(outcome[n])]
            if not pr:
                break
        dist[values] = pr
    return dist
