"""Readers and writers: the extended BIF (.pbif) format, query strings, explicit pMC text.

The .pbif grammar is plain BIF plus an optional ``parameters`` block and
polynomial CPT entries::

    network <id> { }
    parameters { <id> [in [lo, hi]]; ... }
    variable <id> { type discrete [ n ] { v1, ..., vn }; }
    probability ( <id> [| p1, ..., pk] ) {
        (pv1, ..., pvk) e1, ..., en;     # one row per parent valuation
        table e1, ..., en;               # root variables
    }

Entries use rational or decimal literals (``3/10``, ``0.893``, ``1e-6``),
parameter names, ``+ - *``, ``^`` with an integer exponent, unary minus
and parentheses.  ``//`` and ``/* */`` comments and ``property`` lines are
ignored.  Undeclared parameter bounds default to [1e-6, 1 - 1e-6].
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, TextIO, Tuple

from .algebra import (
    AlgebraError,
    Parameter,
    ParameterSpace,
    Polynomial,
    RationalFunction,
    format_fraction,
    render_polynomial,
    render_rational,
)
from .bn import Assignment, Cpt, Pbn, PbnError, Query, RandomVariable, validate_pbn
from .models import Pmc, PmcState

DEFAULT_LOWER = Fraction(1, 10 ** 6)
DEFAULT_UPPER = 1 - Fraction(1, 10 ** 6)


class PbifSyntaxError(ValueError):
    def __init__(self, message, line=0, column=0):
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)
        self.line = line
        self.column = column


class QuerySyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # num, id, op, eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|\#[^\n]*|/\*.*?\*/)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_.\-]*[A-Za-z0-9_]|[A-Za-z_])
  | (?P<op>[{}()\[\],;|+\-*/^:=<>!])
    """,
    re.VERBOSE | re.DOTALL,
)


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        mt = _TOKEN_RE.match(text, pos)
        if mt is None:
            raise PbifSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = mt.lastgroup
        chunk = mt.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = mt.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Stream:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self, k=0) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.i += 1
        return tok

    def error(self, message, tok: Optional[Token] = None):
        tok = tok or self.peek()
        return PbifSyntaxError(message, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.i += 1
            return True
        return False

    def word(self, what="identifier") -> Token:
        tok = self.next()
        if tok.kind not in ("id", "num"):
            raise self.error(f"expected {what}, found {tok.text or 'end of input'!r}", tok)
        return tok


# -- expressions ------------------------------------------------------------------


class _ExprParser:
    """Recursive descent over ``+ - * ^``, literals, parameter names and parentheses."""

    def __init__(self, stream: _Stream, params: ParameterSpace, allow_division=False):
        self.s = stream
        self.params = params
        self.allow_division = allow_division

    def rational(self):
        """Top level for the explicit pMC format: ``expr`` or ``(expr) / (expr)``."""
        num = self.expr()
        if self.allow_division and self.s.peek().text == "/":
            self.s.next()
            den = self.expr()
            if den.is_zero():
                raise self.s.error("division by zero")
            return RationalFunction(num, den)
        return RationalFunction(num)

    def expr(self) -> Polynomial:
        left = self.term()
        while self.s.peek().text in ("+", "-"):
            op = self.s.next().text
            right = self.term()
            left = left + right if op == "+" else left - right
        return left

    def term(self) -> Polynomial:
        left = self.unary()
        while self.s.peek().text == "*":
            self.s.next()
            left = left * self.unary()
        if self.s.peek().text == "/" and not self.allow_division:
            raise self.s.error("division is not allowed in CPT entries")
        return left

    def unary(self) -> Polynomial:
        if self.s.peek().text == "-":
            self.s.next()
            return -self.unary()
        if self.s.peek().text == "+":
            self.s.next()
            return self.unary()
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.s.peek().text == "^":
            self.s.next()
            tok = self.s.next()
            if tok.kind != "num" or not tok.text.isdigit():
                raise self.s.error("exponent must be a non-negative integer", tok)
            base = base ** int(tok.text)
        return base

    def atom(self) -> Polynomial:
        tok = self.s.next()
        if tok.kind == "num":
            value = Fraction(tok.text)
            # a/b with integer literals is a rational literal, not a division
            if self.s.peek().text == "/" and self.s.peek(1).kind == "num":
                self.s.next()
                den_tok = self.s.next()
                den = Fraction(den_tok.text)
                if not den:
                    raise self.s.error("zero denominator in literal", den_tok)
                value = value / den
            return Polynomial.constant(self.params, value)
        if tok.kind == "id":
            if tok.text not in self.params:
                raise self.s.error(f"undeclared parameter {tok.text!r}", tok)
            return Polynomial.variable(self.params, tok.text)
        if tok.text == "(":
            inner = self.expr()
            self.s.expect(")")
            return inner
        raise self.s.error(f"unexpected {tok.text or 'end of input'!r} in expression", tok)


def parse_polynomial(text: str, params: ParameterSpace) -> Polynomial:
    s = _Stream(tokenize(text))
    p = _ExprParser(s, params).expr()
    if s.peek().kind != "eof":
        raise s.error(f"trailing input {s.peek().text!r}")
    return p


def parse_rational(text: str, params: ParameterSpace) -> RationalFunction:
    s = _Stream(tokenize(text))
    f = _ExprParser(s, params, allow_division=True).rational()
    if s.peek().kind != "eof":
        raise s.error(f"trailing input {s.peek().text!r}")
    return f


# -- pbif -------------------------------------------------------------------------------


def _skip_block(s: _Stream):
    depth = 0
    while True:
        tok = s.next()
        if tok.kind == "eof":
            raise s.error("unterminated block", tok)
        if tok.text == "{":
            depth += 1
        elif tok.text == "}":
            depth -= 1
            if depth == 0:
                return


def _skip_statement(s: _Stream):
    while True:
        tok = s.next()
        if tok.kind == "eof":
            raise s.error("unterminated statement", tok)
        if tok.text == ";":
            return


def _number(s: _Stream) -> Fraction:
    neg = s.accept("-")
    tok = s.next()
    if tok.kind != "num":
        raise s.error("expected a number", tok)
    value = Fraction(tok.text)
    if s.peek().text == "/" and s.peek(1).kind == "num":
        s.next()
        value /= Fraction(s.next().text)
    return -value if neg else value


def parse_pbif(text: str | TextIO) -> Pbn:
    """Parse .pbif (or plain BIF) text into a :class:`Pbn`; validation is left to the caller."""
    if not isinstance(text, str):
        text = text.read()
    s = _Stream(tokenize(text))
    name = "unnamed"
    param_decls: List[Tuple[str, Fraction, Fraction, Token]] = []
    variables: List[RandomVariable] = []
    var_tokens: Dict[str, Token] = {}
    prob_blocks = []
    seen_param_block = False
    while s.peek().kind != "eof":
        tok = s.next()
        kw = tok.text
        if kw == "network":
            name = s.word("network name").text
            _skip_block(s)
        elif kw == "parameters":
            if seen_param_block:
                raise s.error("duplicate parameters block", tok)
            seen_param_block = True
            s.expect("{")
            while not s.accept("}"):
                ptok = s.word("parameter name")
                if ptok.kind != "id":
                    raise s.error("parameter names must be identifiers", ptok)
                lo, hi = DEFAULT_LOWER, DEFAULT_UPPER
                if s.accept("in"):
                    s.expect("[")
                    lo = _number(s)
                    s.expect(",")
                    hi = _number(s)
                    s.expect("]")
                s.expect(";")
                if any(p[0] == ptok.text for p in param_decls):
                    raise s.error(f"parameter {ptok.text!r} declared twice", ptok)
                param_decls.append((ptok.text, lo, hi, ptok))
        elif kw == "variable":
            vtok = s.word("variable name")
            s.expect("{")
            domain = None
            while not s.accept("}"):
                inner = s.peek()
                if inner.text == "type":
                    s.next()
                    s.expect("discrete")
                    s.expect("[")
                    count = s.next()
                    s.expect("]")
                    s.expect("{")
                    labels = [s.word("value label").text]
                    while s.accept(","):
                        labels.append(s.word("value label").text)
                    s.expect("}")
                    s.expect(";")
                    if not count.text.isdigit() or int(count.text) != len(labels):
                        raise s.error(f"variable {vtok.text} declares {count.text} values but lists {len(labels)}", count)
                    domain = tuple(labels)
                elif inner.text == "property":
                    _skip_statement(s)
                else:
                    raise s.error(f"unexpected {inner.text!r} in variable block", inner)
            if domain is None:
                raise s.error(f"variable {vtok.text} has no type declaration", vtok)
            if vtok.text in var_tokens:
                raise s.error(f"variable {vtok.text!r} declared twice", vtok)
            var_tokens[vtok.text] = vtok
            variables.append(RandomVariable(vtok.text, domain))
        elif kw == "probability":
            prob_blocks.append(s.i)
            _skip_block(s)
        else:
            raise s.error(f"unexpected {kw!r} at top level", tok)

    params = ParameterSpace()
    try:
        params = ParameterSpace(Parameter(n, i, lo, hi) for i, (n, lo, hi, _) in enumerate(param_decls))
    except AlgebraError as exc:
        bad = next((t for n, lo, hi, t in param_decls if not (0 <= lo < hi <= 1)), None)
        raise PbifSyntaxError(str(exc), bad.line if bad else 0, bad.col if bad else 0) from None
    domains = {v.name: v.domain for v in variables}

    cpts: Dict[str, Cpt] = {}
    for start in prob_blocks:
        s.i = start
        s.expect("(")
        otok = s.word("variable name")
        owner = otok.text
        if owner not in domains:
            raise s.error(f"probability block for undeclared variable {owner!r}", otok)
        parents: List[str] = []
        if s.accept("|"):
            parents.append(s.word("parent name").text)
            while s.accept(","):
                parents.append(s.word("parent name").text)
        s.expect(")")
        for p in parents:
            if p not in domains:
                raise s.error(f"undeclared parent {p!r} of {owner}")
        if owner in cpts:
            raise s.error(f"second probability block for {owner}", otok)
        s.expect("{")
        rows: Dict[Tuple[str, ...], Tuple[Polynomial, ...]] = {}
        while not s.accept("}"):
            head = s.peek()
            if head.text == "table":
                s.next()
                key: Tuple[str, ...] = ()
                if parents:
                    raise s.error("'table' rows are only allowed for root variables", head)
            elif head.text == "(":
                s.next()
                vals = []
                if not s.accept(")"):
                    vals.append(s.word("parent value").text)
                    while s.accept(","):
                        vals.append(s.word("parent value").text)
                    s.expect(")")
                if len(vals) != len(parents):
                    raise s.error(f"row has {len(vals)} parent values, {owner} has {len(parents)} parents", head)
                for p, v in zip(parents, vals):
                    if v not in domains[p]:
                        raise s.error(f"undeclared value {v!r} for {p}", head)
                key = tuple(vals)
            elif head.text == "property":
                _skip_statement(s)
                continue
            else:
                raise s.error(f"unexpected {head.text!r} in probability block", head)
            ep = _ExprParser(s, params)
            entries = [ep.expr()]
            while s.accept(","):
                entries.append(ep.expr())
            s.expect(";")
            if key in rows:
                raise s.error(f"duplicate row {key} for {owner}", head)
            rows[key] = tuple(entries)
        cpts[owner] = Cpt(owner, tuple(parents), rows)
    for v in variables:
        if v.name not in cpts:
            tok = var_tokens[v.name]
            raise PbifSyntaxError(f"no probability block for {v.name}", tok.line, tok.col)
    return Pbn(name, tuple(variables), params, cpts)


def load_pbn(path: str, validate: bool = True) -> Pbn:
    with open(path, encoding="utf-8") as fh:
        b = parse_pbif(fh.read())
    if validate:
        report = validate_pbn(b)
        if not report.ok:
            raise PbnError(f"{path}: invalid network\n{report}")
    return b


def render_pbif(b: Pbn) -> str:
    """Inverse of :func:`parse_pbif` (up to whitespace and comments)."""
    out = io.StringIO()
    out.write(f"network {b.name} {{\n}}\n")
    if len(b.params):
        out.write("parameters {\n")
        for p in b.params:
            out.write(f"  {p.name} in [{format_fraction(p.lower)}, {format_fraction(p.upper)}];\n")
        out.write("}\n")
    for v in b.variables:
        out.write(f"variable {v.name} {{\n  type discrete [ {len(v.domain)} ] {{ {', '.join(v.domain)} }};\n}}\n")
    for v in b.variables:
        cpt = b.cpts[v.name]
        head = v.name if not cpt.parents else f"{v.name} | {', '.join(cpt.parents)}"
        out.write(f"probability ( {head} ) {{\n")
        for key in b.parent_valuations(v.name):
            row = cpt.rows[key]
            entries = ", ".join(render_polynomial(e) for e in row)
            if cpt.parents:
                out.write(f"  ({', '.join(key)}) {entries};\n")
            else:
                out.write(f"  table {entries};\n")
        out.write("}\n")
    return out.getvalue()


# -- queries ----------------------------------------------------------------------------

_CMP = ("<=", ">=", "<", ">")


def _parse_assignment(s: _Stream, stop: Tuple[str, ...]) -> Assignment:
    pairs = []
    while True:
        var = s.word("variable name").text
        s.expect("=")
        val = s.word("value").text
        pairs.append((var, val))
        if not s.accept(","):
            break
    if s.peek().text not in stop:
        raise s.error(f"expected one of {stop}, found {s.peek().text or 'end of input'!r}")
    try:
        return Assignment(pairs)
    except PbnError as exc:
        raise s.error(str(exc)) from None


def parse_query(text: str, b: Optional[Pbn] = None) -> Query:
    """Parse ``P(A [| B]) CMP q``, ``RATIO(A : A' [| B]) CMP q`` or ``DIFF(A - A' [| B]) CMP q``."""
    try:
        s = _Stream(tokenize(text))
        head = s.word("P, RATIO or DIFF")
        kind = {"P": "probability", "RATIO": "ratio", "DIFF": "difference"}.get(head.text.upper())
        if kind is None:
            raise s.error(f"unknown query form {head.text!r}", head)
        s.expect("(")
        sep = {"probability": None, "ratio": ":", "difference": "-"}[kind]
        stops = ("|", ")") + ((sep,) if sep else ())
        hyp = _parse_assignment(s, stops)
        alt = None
        if sep:
            s.expect(sep)
            alt = _parse_assignment(s, ("|", ")"))
        ev = Assignment()
        if s.accept("|"):
            ev = _parse_assignment(s, (")",))
        s.expect(")")
        op = s.next().text
        if op in ("<", ">") and s.peek().text == "=":
            s.next()
            op += "="
        if op not in _CMP:
            raise s.error(f"expected a comparison, found {op!r}")
        threshold = _number(s)
        if s.peek().kind != "eof":
            raise s.error(f"trailing input {s.peek().text!r}")
        q = Query(hyp, ev, kind, op, threshold, alt)
    except (PbifSyntaxError, PbnError) as exc:
        raise QuerySyntaxError(f"invalid query {text!r}: {exc}") from None
    if b is not None:
        try:
            q.check(b)
        except PbnError as exc:
            raise QuerySyntaxError(f"invalid query {text!r}: {exc}") from None
    return q


# -- explicit pMC -------------------------------------------------------------------------


def write_explicit_pmc(m: Pmc, sink: TextIO) -> None:
    """Deterministic text dump; states appear in construction order."""
    sink.write("pmc\n")
    sink.write("parameters\n")
    for p in m.params:
        sink.write(f"  {p.name} in [{format_fraction(p.lower)}, {format_fraction(p.upper)}]\n")
    sink.write(f"variables {' '.join(m.variables)}\n")
    sink.write(f"initial {m.initial}\n")
    for s, st in enumerate(m.states):
        labels = list(m.labels(s))
        labels.insert(0 if s != m.initial else 1, f"level={st.level}")
        sink.write(f"state {s} [{', '.join(labels)}]\n")
        for t, f in m.transitions[s]:
            dst = "self" if t == s else str(t)
            sink.write(f"  -> {dst} : {render_rational(f)}\n")


def pmc_to_text(m: Pmc) -> str:
    buf = io.StringIO()
    write_explicit_pmc(m, buf)
    return buf.getvalue()


def read_explicit_pmc(text: str | TextIO) -> Pmc:
    """Reader for :func:`write_explicit_pmc` output."""
    if not isinstance(text, str):
        text = text.read()
    lines = [ln.rstrip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "pmc":
        raise PbifSyntaxError("missing 'pmc' header", 1, 1)
    i = 1
    if lines[i] != "parameters":
        raise PbifSyntaxError("expected 'parameters'", i + 1, 1)
    i += 1
    decls = []
    while lines[i].startswith("  "):
        mt = re.fullmatch(r"\s+(\S+) in \[(\S+), (\S+)\]", lines[i])
        if not mt:
            raise PbifSyntaxError("bad parameter line", i + 1, 1)
        decls.append((mt.group(1), Fraction(mt.group(2)), Fraction(mt.group(3))))
        i += 1
    params = ParameterSpace.from_bounds(decls)
    if not lines[i].startswith("variables"):
        raise PbifSyntaxError("expected 'variables'", i + 1, 1)
    variables = tuple(lines[i].split()[1:])
    i += 1
    initial = int(lines[i].split()[1])
    i += 1
    states: List[PmcState] = []
    rows: List[List[Tuple[int, RationalFunction]]] = []
    final = set()
    pending: List[List[Tuple[str, str]]] = []
    while i < len(lines):
        mt = re.fullmatch(r"state (\d+) \[(.*)\]", lines[i])
        if not mt:
            raise PbifSyntaxError(f"expected a state record, found {lines[i]!r}", i + 1, 1)
        sid = int(mt.group(1))
        if sid != len(states):
            raise PbifSyntaxError("state ids must be dense and ordered", i + 1, 1)
        level = 0
        val = [None] * len(variables)
        for lab in filter(None, (x.strip() for x in mt.group(2).split(","))):
            if lab == "final":
                final.add(sid)
            elif lab == "init":
                pass
            elif lab.startswith("level="):
                level = int(lab[6:])
            else:
                var, _, d = lab.partition("=")
                val[variables.index(var)] = d
        states.append(PmcState(level, tuple(val)))
        i += 1
        edges = []
        while i < len(lines) and lines[i].startswith("  ->"):
            mt = re.fullmatch(r"\s+-> (\S+) : (.*)", lines[i])
            if not mt:
                raise PbifSyntaxError("bad transition line", i + 1, 1)
            edges.append((mt.group(1), mt.group(2)))
            i += 1
        pending.append(edges)
    for sid, edges in enumerate(pending):
        row = []
        for dst, expr in edges:
            t = sid if dst == "self" else int(dst)
            row.append((t, parse_rational(expr, params)))
        rows.append(row)
    return Pmc(params, variables, states, rows, initial, final)
