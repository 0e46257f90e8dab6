"""Exact polynomial and rational-function arithmetic over a fixed parameter list.

Coefficients are :class:`fractions.Fraction`; nothing here rounds.  Regions
(axis-aligned parameter boxes) live here too because every synthesis routine
needs the same vertex enumeration and bisection rules.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

Number = Union[int, Fraction]
Exponent = Tuple[int, ...]

MAX_VERTEX_PARAMS = 20


class AlgebraError(ValueError):
    pass


class ParameterMismatch(AlgebraError):
    pass


class PoleError(AlgebraError):
    """A rational function was evaluated where its denominator vanishes."""


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)


def format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Parameter:
    name: str
    index: int
    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        if not self.lower < self.upper:
            raise AlgebraError(f"parameter {self.name}: lower bound must be below upper bound")
        if self.lower < 0 or self.upper > 1:
            raise AlgebraError(f"parameter {self.name}: bounds must lie in [0, 1]")


class ParameterSpace:
    """Ordered, immutable parameter list shared by every polynomial of a model."""

    __slots__ = ("params", "_index", "_key")

    def __init__(self, params: Iterable[Parameter] = ()):
        params = tuple(params)
        index = {}
        for i, p in enumerate(params):
            if p.index != i:
                raise AlgebraError(f"parameter {p.name} has index {p.index}, expected {i}")
            if p.name in index:
                raise AlgebraError(f"duplicate parameter {p.name}")
            index[p.name] = i
        self.params = params
        self._index = index
        self._key = tuple((p.name, p.lower, p.upper) for p in params)

    @classmethod
    def from_bounds(cls, bounds: Mapping[str, Tuple[Number, Number]] | Sequence[Tuple[str, Number, Number]]):
        items = bounds.items() if isinstance(bounds, Mapping) else [(n, (lo, hi)) for n, lo, hi in bounds]
        return cls(
            Parameter(name, i, as_fraction(lo), as_fraction(hi)) for i, (name, (lo, hi)) in enumerate(items)
        )

    def __len__(self):
        return len(self.params)

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self.params)

    def __getitem__(self, key) -> Parameter:
        if isinstance(key, str):
            return self.params[self._index[key]]
        return self.params[key]

    def __contains__(self, name) -> bool:
        return name in self._index

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, ParameterSpace) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"ParameterSpace({', '.join(self.names)})"

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise AlgebraError(f"unknown parameter {name!r}") from None

    def instantiation(self, values: Mapping[str, Number] | Sequence[Number], check: bool = True) -> Tuple[Fraction, ...]:
        """Build a point (tuple aligned with the parameter order) from a mapping or sequence."""
        if isinstance(values, Mapping):
            missing = [n for n in self.names if n not in values]
            extra = [n for n in values if n not in self._index]
            if missing or extra:
                raise AlgebraError(f"instantiation mismatch: missing {missing}, unknown {extra}")
            point = tuple(as_fraction(values[n]) for n in self.names)
        else:
            point = tuple(as_fraction(v) for v in values)
            if len(point) != len(self.params):
                raise AlgebraError("instantiation has wrong length")
        if check:
            for p, v in zip(self.params, point):
                if not p.lower <= v <= p.upper:
                    raise AlgebraError(f"{p.name}={v} outside [{p.lower}, {p.upper}]")
        return point

    def full_region(self) -> "Region":
        return Region(self, tuple((p.lower, p.upper) for p in self.params))

    def restrict(self, names: Sequence[str]) -> "ParameterSpace":
        return ParameterSpace(
            Parameter(n, i, self[n].lower, self[n].upper) for i, n in enumerate(names)
        )


def _check_same(a: ParameterSpace, b: ParameterSpace):
    if a is not b and a != b:
        raise ParameterMismatch(f"parameter lists differ: {a.names} vs {b.names}")


def _term_key(exp: Exponent):
    return (sum(exp), exp)


class Polynomial:
    """Sparse multivariate polynomial with exact rational coefficients."""

    __slots__ = ("params", "terms", "_hash")

    def __init__(self, params: ParameterSpace, terms: Mapping[Exponent, Number] = ()):
        n = len(params)
        clean: Dict[Exponent, Fraction] = {}
        for exp, coef in dict(terms).items():
            if len(exp) != n:
                raise AlgebraError(f"exponent {exp} does not match {n} parameters")
            coef = as_fraction(coef)
            if coef:
                clean[tuple(exp)] = coef
        self.params = params
        self.terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, params: ParameterSpace, terms: Dict[Exponent, Fraction]) -> "Polynomial":
        obj = cls.__new__(cls)
        obj.params = params
        obj.terms = terms
        obj._hash = None
        return obj

    @classmethod
    def constant(cls, params: ParameterSpace, value: Number) -> "Polynomial":
        value = as_fraction(value)
        return cls._raw(params, {(0,) * len(params): value} if value else {})

    @classmethod
    def variable(cls, params: ParameterSpace, name: str) -> "Polynomial":
        i = params.index(name)
        exp = tuple(1 if j == i else 0 for j in range(len(params)))
        return cls._raw(params, {exp: Fraction(1)})

    # -- structure -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and not any(next(iter(self.terms))))

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise AlgebraError("polynomial is not constant")
        return next(iter(self.terms.values()), Fraction(0))

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def variables(self) -> Tuple[int, ...]:
        """Indices of parameters that actually occur."""
        used = set()
        for exp in self.terms:
            used.update(i for i, e in enumerate(exp) if e)
        return tuple(sorted(used))

    def variable_names(self) -> Tuple[str, ...]:
        return tuple(self.params[i].name for i in self.variables())

    def is_multi_affine(self) -> bool:
        return all(e <= 1 for exp in self.terms for e in exp)

    def sorted_terms(self) -> List[Tuple[Exponent, Fraction]]:
        """Terms in graded lexicographic order, leading term first."""
        return sorted(self.terms.items(), key=lambda kv: _term_key(kv[0]), reverse=True)

    def leading_coefficient(self) -> Fraction:
        if not self.terms:
            return Fraction(0)
        return self.terms[max(self.terms, key=_term_key)]

    # -- arithmetic ----------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            _check_same(self.params, other.params)
            return other
        if isinstance(other, (int, Fraction)):
            return Polynomial.constant(self.params, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for exp, c in other.terms.items():
            s = terms.get(exp, 0) + c
            if s:
                terms[exp] = s
            else:
                terms.pop(exp, None)
        return Polynomial._raw(self.params, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.params, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = as_fraction(other)
            if not other:
                return Polynomial._raw(self.params, {})
            return Polynomial._raw(self.params, {e: c * other for e, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: Dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exp = tuple(a + b for a, b in zip(e1, e2))
                terms[exp] = terms.get(exp, 0) + c1 * c2
        return Polynomial._raw(self.params, {e: c for e, c in terms.items() if c})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise AlgebraError("only non-negative integer powers are supported")
        result = Polynomial.constant(self.params, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.is_constant() and self.constant_value() == other
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.params == other.params and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.params, frozenset(self.terms.items())))
        return self._hash

    # -- calculus and evaluation ---------------------------------------------

    def diff(self, name_or_index) -> "Polynomial":
        i = self.params.index(name_or_index) if isinstance(name_or_index, str) else name_or_index
        terms = {}
        for exp, c in self.terms.items():
            k = exp[i]
            if k:
                new = exp[:i] + (k - 1,) + exp[i + 1:]
                terms[new] = c * k
        return Polynomial._raw(self.params, terms)

    def eval(self, point: Sequence[Fraction]) -> Fraction:
        """Exact value at ``point`` (aligned with the parameter order)."""
        total = Fraction(0)
        for exp, c in self.terms.items():
            v = c
            for x, k in zip(point, exp):
                if k:
                    v *= x ** k
            total += v
        return total

    def eval_float(self, point: Sequence[float]) -> float:
        total = 0.0
        for exp, c in self.terms.items():
            v = float(c)
            for x, k in zip(point, exp):
                if k:
                    v *= x ** k
            total += v
        return total

    def substitute(self, fixed: Mapping[int, Fraction], target: ParameterSpace) -> "Polynomial":
        """Replace the parameters at ``fixed`` indices by values; remaining ones map by name into ``target``."""
        keep = [i for i in range(len(self.params)) if i not in fixed]
        positions = [target.index(self.params[i].name) for i in keep]
        n = len(target)
        terms: Dict[Exponent, Fraction] = {}
        for exp, c in self.terms.items():
            v = c
            for i, k in fixed.items():
                if exp[i]:
                    v *= fixed[i] ** exp[i]
            if not v:
                continue
            new = [0] * n
            for i, pos in zip(keep, positions):
                new[pos] = exp[i]
            new = tuple(new)
            terms[new] = terms.get(new, 0) + v
        return Polynomial._raw(target, {e: c for e, c in terms.items() if c})

    # -- rendering -----------------------------------------------------------

    def __str__(self):
        return render_polynomial(self)

    def __repr__(self):
        return f"Polynomial({self})"


def _render_monomial(params: ParameterSpace, exp: Exponent, coef: Fraction) -> str:
    factors = []
    for p, k in zip(params, exp):
        if k == 1:
            factors.append(p.name)
        elif k > 1:
            factors.append(f"{p.name}^{k}")
    mag = abs(coef)
    if not factors:
        return format_fraction(mag)
    if mag == 1:
        return "*".join(factors)
    return format_fraction(mag) + "*" + "*".join(factors)


def render_polynomial(p: Polynomial) -> str:
    if not p.terms:
        return "0"
    out = []
    for k, (exp, coef) in enumerate(p.sorted_terms()):
        mono = _render_monomial(p.params, exp, coef)
        if k == 0:
            out.append(("-" if coef < 0 else "") + mono)
        else:
            out.append((" - " if coef < 0 else " + ") + mono)
    return "".join(out)


class RationalFunction:
    """Quotient of two polynomials.

    Only constant content is normalised: the denominator is made monic
    (leading coefficient 1 in graded-lex order), so a constant denominator is
    always exactly ``1``.  Common polynomial factors are never cancelled;
    compare functions with :meth:`same_function`.
    """

    __slots__ = ("numerator", "denominator")

    def __init__(self, numerator: Polynomial, denominator: Optional[Polynomial] = None):
        if denominator is None:
            denominator = Polynomial.constant(numerator.params, 1)
        _check_same(numerator.params, denominator.params)
        if denominator.is_zero():
            raise AlgebraError("zero denominator")
        lead = denominator.leading_coefficient()
        if lead != 1:
            inv = 1 / lead
            numerator = numerator * inv
            denominator = denominator * inv
        if numerator.is_zero() and not denominator.is_constant():
            denominator = Polynomial.constant(numerator.params, 1)
        self.numerator = numerator
        self.denominator = denominator

    @classmethod
    def constant(cls, params: ParameterSpace, value: Number) -> "RationalFunction":
        return cls(Polynomial.constant(params, value))

    @property
    def params(self) -> ParameterSpace:
        return self.numerator.params

    def is_polynomial(self) -> bool:
        return self.denominator.is_constant()

    def as_polynomial(self) -> Polynomial:
        if not self.is_polynomial():
            raise AlgebraError("rational function has a non-constant denominator")
        return self.numerator

    def is_zero(self) -> bool:
        return self.numerator.is_zero()

    def is_constant(self) -> bool:
        return self.numerator.is_constant() and self.denominator.is_constant()

    def variables(self) -> Tuple[int, ...]:
        return tuple(sorted(set(self.numerator.variables()) | set(self.denominator.variables())))

    def _coerce(self, other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            _check_same(self.params, other.params)
            return other
        if isinstance(other, Polynomial):
            return RationalFunction(other)
        if isinstance(other, (int, Fraction)):
            return RationalFunction.constant(self.params, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.denominator == other.denominator:
            return RationalFunction(self.numerator + other.numerator, self.denominator)
        return RationalFunction(
            self.numerator * other.denominator + other.numerator * self.denominator,
            self.denominator * other.denominator,
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.numerator, self.denominator)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return RationalFunction(self.numerator * other.numerator, self.denominator * other.denominator)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if other.numerator.is_zero():
            raise AlgebraError("division by the zero function")
        if self.denominator == other.denominator:
            return RationalFunction(self.numerator, other.numerator)
        return RationalFunction(self.numerator * other.denominator, self.denominator * other.numerator)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other / self

    def same_function(self, other) -> bool:
        """Equality as functions, by cross-multiplication."""
        other = self._coerce(other)
        return self.numerator * other.denominator == other.numerator * self.denominator

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, Polynomial)):
            other = self._coerce(other)
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return self.numerator == other.numerator and self.denominator == other.denominator

    def __hash__(self):
        return hash((self.numerator, self.denominator))

    def eval(self, point: Sequence[Fraction]) -> Fraction:
        den = self.denominator.eval(point)
        if not den:
            raise PoleError(f"denominator vanishes at {tuple(map(str, point))}")
        return self.numerator.eval(point) / den

    def eval_float(self, point: Sequence[float]) -> float:
        return self.numerator.eval_float(point) / self.denominator.eval_float(point)

    def diff(self, name_or_index) -> "RationalFunction":
        n, d = self.numerator, self.denominator
        if d.is_constant():
            return RationalFunction(n.diff(name_or_index), d)
        return RationalFunction(n.diff(name_or_index) * d - n * d.diff(name_or_index), d * d)

    def __str__(self):
        return render_rational(self)

    def __repr__(self):
        return f"RationalFunction({self})"


def render_rational(f: RationalFunction) -> str:
    if f.is_polynomial():
        return render_polynomial(f.numerator)
    return f"( {render_polynomial(f.numerator)} ) / ( {render_polynomial(f.denominator)} )"


# convenience wrappers named after the operations they implement

def poly_add(a: Polynomial, b: Polynomial) -> Polynomial:
    _check_same(a.params, b.params)
    return a + b


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    _check_same(a.params, b.params)
    return a * b


def poly_eval(f: Polynomial, point: Sequence[Fraction]) -> Fraction:
    return f.eval(point)


def poly_diff(f: Polynomial, name: str) -> Polynomial:
    return f.diff(name)


def rf_eval(f: RationalFunction, point: Sequence[Fraction]) -> Fraction:
    return f.eval(point)


def is_multi_affine(f: Polynomial) -> bool:
    return f.is_multi_affine()


class Region:
    """Closed axis-aligned box, one rational interval per parameter."""

    __slots__ = ("params", "intervals")

    def __init__(self, params: ParameterSpace, intervals: Sequence[Tuple[Number, Number]]):
        ivs = tuple((as_fraction(lo), as_fraction(hi)) for lo, hi in intervals)
        if len(ivs) != len(params):
            raise AlgebraError("region dimension does not match parameter count")
        for p, (lo, hi) in zip(params, ivs):
            if lo > hi:
                raise AlgebraError(f"empty interval for {p.name}")
            if lo < p.lower or hi > p.upper:
                raise AlgebraError(f"interval [{lo}, {hi}] for {p.name} leaves [{p.lower}, {p.upper}]")
        self.params = params
        self.intervals = ivs

    @classmethod
    def from_mapping(cls, params: ParameterSpace, bounds: Mapping[str, Tuple[Number, Number]]) -> "Region":
        return cls(params, [bounds.get(p.name, (p.lower, p.upper)) for p in params])

    @classmethod
    def point(cls, params: ParameterSpace, point: Sequence[Fraction]) -> "Region":
        return cls(params, [(v, v) for v in point])

    def __eq__(self, other):
        return isinstance(other, Region) and self.params == other.params and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __repr__(self):
        inner = ", ".join(f"{p.name}: [{lo}, {hi}]" for p, (lo, hi) in zip(self.params, self.intervals))
        return f"Region({inner})"

    def sort_key(self):
        return self.intervals

    def widths(self) -> Tuple[Fraction, ...]:
        return tuple(hi - lo for lo, hi in self.intervals)

    def volume(self) -> Fraction:
        v = Fraction(1)
        for w in self.widths():
            v *= w
        return v

    def relative_volume(self) -> Fraction:
        """Volume as a fraction of the full parameter box."""
        v = Fraction(1)
        for p, w in zip(self.params, self.widths()):
            v *= w / (p.upper - p.lower)
        return v

    def center(self) -> Tuple[Fraction, ...]:
        return tuple((lo + hi) / 2 for lo, hi in self.intervals)

    def contains(self, point: Sequence[Fraction]) -> bool:
        return all(lo <= x <= hi for x, (lo, hi) in zip(point, self.intervals))

    def clamp(self, point: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        return tuple(min(max(x, lo), hi) for x, (lo, hi) in zip(point, self.intervals))

    def vertices(self, subset: Optional[Sequence[int]] = None) -> List[Tuple[Fraction, ...]]:
        """All corner assignments over ``subset`` (indices), lexicographic, lower bound first."""
        if subset is None:
            subset = range(len(self.params))
        subset = list(subset)
        if len(subset) > MAX_VERTEX_PARAMS:
            raise AlgebraError(f"vertex enumeration over {len(subset)} parameters exceeds {MAX_VERTEX_PARAMS}")
        choices = []
        for i in subset:
            lo, hi = self.intervals[i]
            choices.append((lo,) if lo == hi else (lo, hi))
        return list(itertools.product(*choices))

    def split(self) -> Tuple["Region", "Region"]:
        """Bisect the widest dimension relative to the global bound width (lowest index on ties)."""
        best, best_rel = 0, Fraction(-1)
        for i, (p, w) in enumerate(zip(self.params, self.widths())):
            rel = w / (p.upper - p.lower)
            if rel > best_rel:
                best, best_rel = i, rel
        lo, hi = self.intervals[best]
        mid = (lo + hi) / 2
        left = self.intervals[:best] + ((lo, mid),) + self.intervals[best + 1:]
        right = self.intervals[:best] + ((mid, hi),) + self.intervals[best + 1:]
        return Region(self.params, left), Region(self.params, right)

    def sample(self, rng) -> Tuple[Fraction, ...]:
        """Uniform point, built from ``rng.random()`` draws converted exactly."""
        return tuple(lo + (hi - lo) * Fraction(rng.random()) for lo, hi in self.intervals)

    def as_float_bounds(self) -> Dict[str, List[float]]:
        return {p.name: [float(lo), float(hi)] for p, (lo, hi) in zip(self.params, self.intervals)}


def region_vertices(r: Region, subset: Sequence[str]) -> List[Dict[str, Fraction]]:
    if not subset:
        raise AlgebraError("vertex subset must be nonempty")
    idx = [r.params.index(n) for n in subset]
    return [dict(zip(subset, v)) for v in r.vertices(idx)]


def region_split(r: Region) -> Tuple[Region, Region]:
    return r.split()


def euclidean(a: Sequence[Fraction], b: Sequence[Fraction]) -> float:
    return math.sqrt(float(sum((x - y) ** 2 for x, y in zip(a, b))))
