"""Model generators: random small pBNs and parametrised variants of fixed networks."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .algebra import Parameter, ParameterSpace, Polynomial
from .bn import Assignment, Cpt, Pbn, Query, RandomVariable, topological_order

VALUE_NAMES = ("a", "b", "c")
PARAM_NAMES = ("x", "y", "z")


def _random_distribution(rng: random.Random, n: int, zeros: bool) -> List[Fraction]:
    weights = [rng.randint(0 if zeros else 1, 9) for _ in range(n)]
    if not any(weights):
        weights[rng.randrange(n)] = 1
    total = sum(weights)
    return [Fraction(w, total) for w in weights]


def _parametric_row(rng: random.Random, params: ParameterSpace, n: int) -> Tuple[Polynomial, ...]:
    """A multi-affine row that sums to 1 and stays in [0, 1] on the unit box."""
    one = Polynomial.constant(params, 1)
    names = params.names
    first = rng.choice(names)
    g = Polynomial.variable(params, first)
    if len(names) > 1 and rng.random() < 0.3:
        g = g * Polynomial.variable(params, rng.choice([nm for nm in names if nm != first]))
    if n == 2:
        row = [g, one - g]
    else:
        c = Fraction(rng.randint(1, 9), 10)
        row = [g * c, one - g, g * (1 - c)]
        row += [Polynomial.constant(params, 0)] * (n - 3)
    rng.shuffle(row)
    return tuple(row)


def random_pbn(seed: int, max_vars: int = 6, max_values: int = 3, max_params: int = 3) -> Pbn:
    """Random pBN with shuffled declaration order, at most two parents per node."""
    rng = random.Random(seed)
    n = rng.randint(1, max_vars)
    k = rng.randint(0, max_params)
    params = ParameterSpace(
        Parameter(PARAM_NAMES[i], i, Fraction(rng.randint(1, 20), 100), Fraction(rng.randint(80, 99), 100))
        for i in range(k)
    )
    topo = [f"v{i}" for i in range(n)]
    domains = {v: VALUE_NAMES[: rng.randint(2, max_values)] for v in topo}
    parents = {}
    for i, v in enumerate(topo):
        cand = topo[:i]
        parents[v] = tuple(rng.sample(cand, min(len(cand), rng.randint(0, 2))))
    cpts = {}
    for v in topo:
        rows = {}
        for key in itertools.product(*(domains[p] for p in parents[v])):
            nd = len(domains[v])
            if k and rng.random() < 0.5:
                rows[key] = _parametric_row(rng, params, nd)
            else:
                dist = _random_distribution(rng, nd, zeros=rng.random() < 0.2)
                rows[key] = tuple(Polynomial.constant(params, p) for p in dist)
        cpts[v] = Cpt(v, parents[v], rows)
    declared = list(topo)
    rng.shuffle(declared)
    variables = tuple(RandomVariable(v, domains[v]) for v in declared)
    return Pbn(f"random{seed}", variables, params, cpts)


def random_query(b: Pbn, seed: int, max_evidence: int = 2) -> Query:
    rng = random.Random(seed)
    names = list(b.names)
    h = rng.choice(names)
    rest = [v for v in names if v != h]
    ev_vars = rng.sample(rest, min(len(rest), rng.randint(0, max_evidence)))
    hyp = Assignment([(h, rng.choice(b.domain(h)))])
    ev = Assignment([(v, rng.choice(b.domain(v))) for v in ev_vars])
    return Query(hyp, ev, "probability", "<=", Fraction(1, 2))


def random_point(b: Pbn, rng: random.Random) -> Tuple[Fraction, ...]:
    return tuple(p.lower + (p.upper - p.lower) * Fraction(rng.randint(0, 1000), 1000) for p in b.params)


def parametrize_rows(b: Pbn, prefix: str = "x", bounds=(Fraction(1, 10 ** 6), 1 - Fraction(1, 10 ** 6))) -> Pbn:
    """Replace every binary non-deterministic row (a, 1-a) by (x_i, 1-x_i), one fresh parameter per row.

    Rows are visited in topological order and then parent-valuation order.
    """
    targets = []
    for v in topological_order(b):
        if len(b.domain(v)) != 2:
            continue
        for key in b.parent_valuations(v):
            row = b.cpts[v].rows[key]
            vals = [e.constant_value() for e in row]
            if all(0 < x < 1 for x in vals):
                targets.append((v, key))
    params = ParameterSpace(Parameter(f"{prefix}{i + 1}", i, bounds[0], bounds[1]) for i in range(len(targets)))
    which = {t: i for i, t in enumerate(targets)}
    cpts = {}
    for v, cpt in b.cpts.items():
        rows = {}
        for key, row in cpt.rows.items():
            if (v, key) in which:
                x = Polynomial.variable(params, params[which[(v, key)]].name)
                rows[key] = (x, 1 - x)
            else:
                rows[key] = tuple(Polynomial.constant(params, e.constant_value()) for e in row)
        cpts[v] = Cpt(v, cpt.parents, rows)
    return Pbn(b.name, b.variables, params, cpts)


def original_values(b: Pbn, variant: Pbn) -> Dict[str, Fraction]:
    """Parameter values of ``variant`` that reproduce the constant network ``b``."""
    out = {}
    for v, cpt in variant.cpts.items():
        for key, row in cpt.rows.items():
            names = row[0].variable_names()
            if names:
                out[names[0]] = b.cpts[v].rows[key][0].constant_value()
    return out
