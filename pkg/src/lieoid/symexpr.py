"""Sparse multivariate polynomials with exact rational coefficients.

Monomials are stored as tuples of ``(name, exponent)`` pairs sorted by
variable name, so a :class:`Poly` is canonical without reference to any
context: two polynomials are equal iff their term maps are equal.
Declaration order of variables only matters for printing.
"""

from __future__ import annotations

import numbers
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

from gmpy2 import mpq

Rat = type(mpq(0))

__all__ = [
    "Rat",
    "Var",
    "Poly",
    "SOURCE",
    "TARGET",
    "AUX",
    "SymexprError",
    "UndeclaredVariable",
    "ExprSyntaxError",
    "NegativeExponent",
    "MissingVariable",
    "rat",
    "parse",
    "differentiate",
    "substitute",
    "eval_at",
    "is_zero",
    "to_str",
    "natural_key",
]

SOURCE = "source"
TARGET = "target"
AUX = "aux"
_KINDS = (SOURCE, TARGET, AUX)


class SymexprError(ValueError):
    pass


class UndeclaredVariable(SymexprError):
    pass


class ExprSyntaxError(SymexprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class NegativeExponent(SymexprError):
    pass


class MissingVariable(SymexprError):
    pass


@dataclass(frozen=True)
class Var:
    name: str
    kind: str = AUX

    def __post_init__(self):
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", self.name):
            raise ValueError(f"invalid variable name {self.name!r}")
        if self.kind not in _KINDS:
            raise ValueError(f"invalid variable kind {self.kind!r}")

    def __str__(self):
        return self.name


def rat(value) -> Rat:
    """Coerce ints, strings like ``"3/4"``, Fractions and mpq to a rational."""
    if isinstance(value, Rat):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not exact; pass a string or Fraction")
    return mpq(value)


def natural_key(name: str):
    return tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name))


Monomial = tuple  # tuple[tuple[str, int], ...]
_ONE: Monomial = ()
_ZERO_Q = mpq(0)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        va, ea = a[i]
        vb, eb = b[j]
        if va == vb:
            out.append((va, ea + eb))
            i += 1
            j += 1
        elif va < vb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def _name(v) -> str:
    return v.name if isinstance(v, Var) else v


class Poly:
    """Immutable polynomial; arithmetic via the usual operators."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, object] | None = None):
        clean = {}
        if terms:
            for mono, c in terms.items():
                c = rat(c)
                if c:
                    clean[tuple(sorted(mono))] = c
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict) -> "Poly":
        p = cls.__new__(cls)
        p._terms = terms
        p._hash = None
        return p

    @classmethod
    def const(cls, c) -> "Poly":
        c = rat(c)
        return cls._raw({_ONE: c} if c else {})

    @classmethod
    def var(cls, v) -> "Poly":
        return cls._raw({((_name(v), 1),): mpq(1)})

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and _ONE in self._terms)

    def constant_term(self) -> Rat:
        return self._terms.get(_ONE, _ZERO_Q)

    def variables(self) -> frozenset:
        return frozenset(v for mono in self._terms for v, _ in mono)

    def degree(self) -> int:
        if not self._terms:
            return -1
        return max(sum(e for _, e in mono) for mono in self._terms)

    def degree_in(self, v) -> int:
        name = _name(v)
        return max((e for mono in self._terms for n, e in mono if n == name), default=0)

    # arithmetic -----------------------------------------------------------

    @staticmethod
    def _coerce(other) -> "Poly | None":
        if isinstance(other, Poly):
            return other
        if isinstance(other, numbers.Rational):
            return Poly.const(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if not other._terms:
            return self
        if not self._terms:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            s = out.get(m)
            if s is None:
                out[m] = c
            else:
                s = s + c
                if s:
                    out[m] = s
                else:
                    del out[m]
        return Poly._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def scale(self, c) -> "Poly":
        c = rat(c)
        if not c:
            return Poly._raw({})
        return Poly._raw({m: v * c for m, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Rat)):
            return self.scale(other)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if not self._terms or not other._terms:
            return Poly._raw({})
        out: dict = {}
        get = out.get
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                m = _mono_mul(ma, mb)
                out[m] = get(m, _ZERO_Q) + ca * cb
        return Poly._raw({m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            raise NegativeExponent(f"negative exponent {n}")
        result = Poly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self):
        return f"Poly({to_str(self)!r})"

    def __str__(self):
        return to_str(self)

    # calculus -------------------------------------------------------------

    def diff(self, v) -> "Poly":
        return differentiate(self, v)

    def subs(self, assignment) -> "Poly":
        return substitute(self, assignment)


# ---------------------------------------------------------------------------
# operations


def differentiate(p: Poly, v) -> Poly:
    """Formal partial derivative of ``p`` with respect to ``v``."""
    name = _name(v)
    out: dict = {}
    for mono, c in p._terms.items():
        for k, (n, e) in enumerate(mono):
            if n == name:
                if e == 1:
                    new = mono[:k] + mono[k + 1 :]
                else:
                    new = mono[:k] + ((n, e - 1),) + mono[k + 1 :]
                out[new] = out.get(new, _ZERO_Q) + c * e
                break
    return Poly._raw({m: c for m, c in out.items() if c})


def substitute(p: Poly, assignment: Mapping) -> Poly:
    """Compose ``p`` with ``assignment``; unassigned variables pass through."""
    amap = {}
    for k, val in assignment.items():
        val = Poly._coerce(val)
        if val is None:
            raise TypeError(f"cannot substitute {val!r}")
        amap[_name(k)] = val
    if not amap:
        return p
    powers: dict = {}

    def power(name, e):
        key = (name, e)
        got = powers.get(key)
        if got is None:
            got = amap[name] if e == 1 else power(name, e - 1) * amap[name]
            powers[key] = got
        return got

    result: dict = {}
    for mono, c in p._terms.items():
        kept = []
        factor = None
        for n, e in mono:
            if n in amap:
                f = power(n, e)
                factor = f if factor is None else factor * f
            else:
                kept.append((n, e))
        kept = tuple(kept)
        if factor is None:
            result[kept] = result.get(kept, _ZERO_Q) + c
            continue
        for m2, c2 in factor._terms.items():
            m = _mono_mul(kept, m2)
            result[m] = result.get(m, _ZERO_Q) + c * c2
    return Poly._raw({m: c for m, c in result.items() if c})


def eval_at(p: Poly, point: Mapping) -> Rat:
    values = {_name(k): rat(v) for k, v in point.items()}
    total = mpq(0)
    for mono, c in p._terms.items():
        term = c
        for n, e in mono:
            try:
                term *= values[n] ** e
            except KeyError:
                raise MissingVariable(f"no value for variable {n!r}") from None
        total += term
    return total


def is_zero(p: Poly) -> bool:
    return not p._terms


# ---------------------------------------------------------------------------
# printing


def _format_rat(c: Rat) -> str:
    return str(c)


def to_str(p: Poly, order: Sequence | None = None) -> str:
    """Canonical text: graded-lex term order, explicit ``*`` and ``^``."""
    if not p._terms:
        return "0"
    names = sorted(p.variables(), key=natural_key)
    if order is not None:
        declared = [_name(v) for v in order]
        rest = [n for n in names if n not in declared]
        names = [n for n in declared if n in p.variables()] + rest
    pos = {n: i for i, n in enumerate(names)}

    def key(item):
        mono, _ = item
        vec = [0] * len(names)
        for n, e in mono:
            vec[pos[n]] = e
        return (-sum(vec), [-e for e in vec])

    parts = []
    for mono, c in sorted(p._terms.items(), key=key):
        factors = [n if e == 1 else f"{n}^{e}" for n, e in sorted(mono, key=lambda t: pos[t[0]])]
        mag = abs(c)
        if not factors:
            body = _format_rat(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([_format_rat(mag)] + factors)
        parts.append(("-" if c < 0 else "+", body))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def tokenize(text: str) -> list:
    """Split ``text`` into ``(kind, value, byte_offset)`` tokens."""
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:  # only trailing whitespace left
            break
        start = m.start(m.lastindex)
        offset = len(text[:start].encode())
        if m.group(1) is not None:
            tokens.append(("int", m.group(1), offset))
        elif m.group(2) is not None:
            tokens.append(("ident", m.group(2), offset))
        else:
            ch = m.group(3)
            if ch not in "+-*^/()":
                raise ExprSyntaxError(f"unexpected character {ch!r}", offset)
            tokens.append(("op", ch, offset))
        pos = m.end()
    tokens.append(("end", "", len(text.encode())))
    return tokens


class ExprParser:
    """Recursive-descent parser generic over the value algebra.

    ``ident`` maps an identifier (and its byte offset) to a value, ``number``
    builds a constant from a rational, and ``wedge`` (optional) combines two
    values joined by ``^`` when the right operand is not an integer literal.
    Values must support ``+``, unary ``-``, ``*`` and ``**``.
    """

    def __init__(self, text: str, ident: Callable, number: Callable, wedge: Callable | None = None):
        self.tokens = tokenize(text)
        self.i = 0
        self.ident = ident
        self.number = number
        self.wedge = wedge

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] not in ("op",):
            raise ExprSyntaxError(f"expected {value!r}, got {tok[1] or 'end of input'!r}", tok[2])
        return tok

    def parse(self):
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", self.peek()[2])
        value = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return value

    def expr(self):
        value = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            value = value + rhs if op == "+" else value + (-rhs)
        return value

    def term(self):
        value = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            value = value * self.unary()
        return value

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            inner = self.unary()
            return -inner if tok[1] == "-" else inner
        return self.power()

    def power(self):
        value = self.atom()
        while self.peek()[0] == "op" and self.peek()[1] == "^":
            caret = self.take()
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "-" and self.tokens[self.i + 1][0] == "int":
                raise NegativeExponent(f"negative exponent at byte {nxt[2]}")
            if nxt[0] == "int":
                self.take()
                value = value ** int(nxt[1])
            elif nxt[0] == "op" and nxt[1] == "(" and self._paren_int():
                self.take()
                sign = 1
                if self.peek()[1] == "-":
                    self.take()
                    sign = -1
                e = int(self.take()[1])
                self.expect(")")
                if sign < 0:
                    raise NegativeExponent(f"negative exponent at byte {nxt[2]}")
                value = value ** e
            elif self.wedge is not None:
                value = self.wedge(value, self.atom())
            else:
                raise ExprSyntaxError("exponent must be a non-negative integer", nxt[2] if nxt[0] != "end" else caret[2])
        return value

    def _paren_int(self):
        toks = self.tokens[self.i + 1 : self.i + 4]
        if len(toks) >= 2 and toks[0][0] == "int" and toks[1][1] == ")":
            return True
        return len(toks) >= 3 and toks[0][1] == "-" and toks[1][0] == "int" and toks[2][1] == ")"

    def atom(self):
        tok = self.take()
        kind, value, offset = tok
        if kind == "int":
            num = mpq(int(value))
            if self.peek()[0] == "op" and self.peek()[1] == "/":
                self.take()
                den = self.take()
                if den[0] != "int":
                    raise ExprSyntaxError("expected integer denominator", den[2])
                if int(den[1]) == 0:
                    raise ExprSyntaxError("zero denominator", den[2])
                num = mpq(int(value), int(den[1]))
            return self.number(num)
        if kind == "ident":
            return self.ident(value, offset)
        if kind == "op" and value == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ExprSyntaxError(f"unexpected {value or 'end of input'!r}", offset)


def parse(text: str, vars: Iterable) -> Poly:
    """Parse ``text`` over the declared variables ``vars`` (Var or names)."""
    declared = {_name(v) for v in vars}

    def ident(name, offset):
        if name not in declared:
            raise UndeclaredVariable(f"undeclared variable {name!r} at byte {offset}")
        return Poly.var(name)

    return ExprParser(text, ident, Poly.const).parse()


PolyLike = Union[Poly, int, Rat]
