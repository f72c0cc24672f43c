"""Polynomial expressions and problem files.

Grammar (whitespace-insensitive)::

    expr   := ['-'] term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := base ('^' uint)?
    base   := number ['/' number] | name | '(' expr ')'

``p/q`` is only accepted between two numeric literals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .certify import FeasibleSet
from .polyalg import Polynomial

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


class ParseError(ValueError):
    def __init__(self, message: str, src: str = "", pos: int | None = None, line: int | None = None):
        self.message = message
        self.src = src
        self.pos = pos
        self.line = line
        where = ""
        if line is not None:
            where += f"line {line}"
        if pos is not None:
            where += (", " if where else "") + f"column {pos + 1}"
        text = f"{where}: {message}" if where else message
        if src and pos is not None:
            text += f"\n  {src}\n  {' ' * pos}^"
        super().__init__(text)


def tokenize(src: str) -> list:
    out, i = [], 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if m is None:
            raise ParseError(f"unexpected character {src[i]!r}", src, i)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), i))
        i = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, names):
        self.src = src
        self.names = list(names)
        self.index = {v: i for i, v in enumerate(self.names)}
        self.n = len(self.names)
        self.toks = tokenize(src)
        self.k = 0

    @property
    def tok(self):
        return self.toks[self.k]

    def fail(self, msg: str, pos: int | None = None):
        raise ParseError(msg, self.src, self.tok[2] if pos is None else pos)

    def eat(self, text: str) -> bool:
        if self.tok[0] == "op" and self.tok[1] == text:
            self.k += 1
            return True
        return False

    def parse(self) -> Polynomial:
        if self.tok[0] == "end":
            self.fail("empty expression")
        p = self.expr()
        if self.tok[0] != "end":
            self.fail(f"unexpected {self.tok[1]!r}")
        return p

    def expr(self) -> Polynomial:
        neg = self.eat("-")
        p = self.term()
        if neg:
            p = -p
        while True:
            if self.eat("+"):
                p = p + self.term()
            elif self.eat("-"):
                p = p - self.term()
            else:
                return p

    def term(self) -> Polynomial:
        p = self.factor()
        while self.eat("*"):
            p = p * self.factor()
        return p

    def factor(self) -> Polynomial:
        p = self.base()
        if self.eat("^"):
            kind, text, pos = self.tok
            if kind != "num":
                self.fail("exponent must be a non-negative integer")
            if not text.isdigit():
                self.fail(f"exponent {text!r} is not an integer", pos)
            self.k += 1
            p = p ** int(text)
        return p

    def number(self) -> Fraction:
        kind, text, pos = self.tok
        if kind != "num":
            self.fail("expected a number")
        self.k += 1
        return Fraction(text)

    def base(self) -> Polynomial:
        kind, text, pos = self.tok
        if kind == "num":
            val = self.number()
            if self.eat("/"):
                den = self.number()
                if den == 0:
                    self.fail("division by zero", pos)
                val = val / den
            return Polynomial.constant(float(val), self.n)
        if kind == "name":
            if text not in self.index:
                self.fail(f"unknown variable {text!r}" +
                          (f"; declared: {', '.join(self.names)}" if self.names else ""))
            self.k += 1
            return Polynomial.variable(self.index[text], self.n)
        if self.eat("("):
            p = self.expr()
            if not self.eat(")"):
                self.fail("missing ')'")
            return p
        if kind == "end":
            self.fail("unexpected end of expression")
        self.fail(f"unexpected {text!r}")


def parse_polynomial(src: str, names) -> Polynomial:
    """Parse ``src`` into a polynomial in the variables ``names``."""
    if not names:
        raise ParseError("no variables declared")
    return _Parser(src, names).parse()


def parse_number(src: str) -> float:
    """A constant expression (e.g. ``-1/3`` or ``2*0.5``)."""
    p = _Parser(src, ["_c"]).parse()
    if p.degree > 0:
        raise ParseError(f"{src!r} is not a constant")
    return p.constant_term


# ---------------------------------------------------------------------------
# problem files

_RELATIONS = (">=", "<=", "==")


@dataclass
class ProblemFile:
    variables: list
    objective: Polynomial
    inequalities: list = field(default_factory=list)
    equalities: list = field(default_factory=list)
    point: np.ndarray | None = None
    options: dict = field(default_factory=dict)
    source: str = ""

    @property
    def n(self) -> int:
        return len(self.variables)

    def feasible_set(self) -> FeasibleSet:
        return FeasibleSet(self.n, self.inequalities, self.equalities)


def parse_constraint(src: str, names) -> tuple:
    """``lhs REL rhs`` with REL in >=, <=, ==; returns ``(kind, poly)``."""
    hits = [(src.find(r), r) for r in _RELATIONS if r in src]
    if len(hits) != 1 or src.count(hits[0][1]) != 1:
        raise ParseError("a constraint needs exactly one of >=, <=, ==", src)
    at, rel = hits[0]
    lhs = parse_polynomial(src[:at], names)
    try:
        rhs = parse_polynomial(src[at + 2:], names)
    except ParseError as e:
        raise ParseError(e.message, src, None if e.pos is None else e.pos + at + 2) from None
    if rel == ">=":
        return "ineq", lhs - rhs
    if rel == "<=":
        return "ineq", rhs - lhs
    return "eq", lhs - rhs


def _split_list(text: str) -> list:
    return [t for t in re.split(r"[,\s]+", text.strip()) if t]


def parse_problem(text: str, source: str = "") -> ProblemFile:
    names = None
    objective = None
    cons = []
    point = None
    options = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("option "):
                body = line[len("option "):]
                if "=" not in body:
                    raise ParseError("expected 'option <name> = <value>'")
                key, val = (s.strip() for s in body.split("=", 1))
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_-]*", key):
                    raise ParseError(f"bad option name {key!r}")
                options[key.replace("-", "_")] = val
                continue
            if ":" not in line:
                raise ParseError("expected 'key: value'")
            key, val = (s.strip() for s in line.split(":", 1))
            if key == "vars":
                names = _split_list(val)
                bad = [v for v in names if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", v)]
                if bad or not names:
                    raise ParseError(f"bad variable list {val!r}")
                if len(set(names)) != len(names):
                    raise ParseError("duplicate variable names")
            elif key in ("objective", "constraint", "point"):
                if names is None:
                    raise ParseError(f"'{key}:' before 'vars:'")
                if key == "objective":
                    objective = parse_polynomial(val, names)
                elif key == "constraint":
                    cons.append(parse_constraint(val, names))
                else:
                    parts = val.split(",") if "," in val else val.split()
                    point = np.array([parse_number(t) for t in parts])
            else:
                raise ParseError(f"unknown key {key!r}")
        except ParseError as e:
            raise ParseError(e.message, e.src, e.pos, lineno) from None
    if names is None:
        raise ParseError("missing 'vars:' line")
    if objective is None:
        raise ParseError("missing 'objective:' line")
    if point is not None and len(point) != len(names):
        raise ParseError(f"point has {len(point)} entries for {len(names)} variables")
    return ProblemFile(names, objective,
                       [p for k, p in cons if k == "ineq"], [p for k, p in cons if k == "eq"],
                       point, options, source)


def load_problem(path) -> ProblemFile:
    path = Path(path)
    return parse_problem(path.read_text(encoding="utf-8"), str(path))


def format_problem(pf: ProblemFile, digits: int = 17) -> str:
    lines = [f"vars: {', '.join(pf.variables)}",
             f"objective: {pf.objective.to_string(pf.variables, digits)}"]
    for g in pf.inequalities:
        lines.append(f"constraint: {g.to_string(pf.variables, digits)} >= 0")
    for h in pf.equalities:
        lines.append(f"constraint: {h.to_string(pf.variables, digits)} == 0")
    if pf.point is not None:
        lines.append("point: " + ", ".join(f"{v:.{digits}g}" for v in pf.point))
    for k, v in pf.options.items():
        lines.append(f"option {k} = {v}")
    return "\n".join(lines) + "\n"
