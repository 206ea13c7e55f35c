"""Exterior algebra of E-forms with the algebroid differential.

A form is a finite sum ``sum_T f_T b^T`` with ``T`` a strictly increasing
tuple of frame indices and ``f_T`` a polynomial.  Terms of different
degrees may coexist in one container.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .algebroid import Algebroid, Section
from .symexpr import ExprParser, Poly, UndeclaredVariable, differentiate, substitute, to_str

__all__ = [
    "EFormError",
    "AlgebroidMismatch",
    "DegreeZero",
    "EForm",
    "wedge",
    "e_differential",
    "contract",
    "lie_derivative",
    "tensor",
    "embed",
    "bigrade",
    "parse_eform",
    "format_eform",
]


class EFormError(ValueError):
    pass


class AlgebroidMismatch(EFormError):
    pass


class DegreeZero(EFormError):
    pass


_ZERO = Poly.const(0)
_ONE = Poly.const(1)


def merge_indices(a: tuple, b: tuple):
    """Sign and sorted union of two increasing index tuples, or ``None`` on overlap."""
    if not a:
        return 1, b
    if not b:
        return 1, a
    out = []
    i = j = 0
    swaps = 0
    la, lb = len(a), len(b)
    while i < la and j < lb:
        if a[i] < b[j]:
            out.append(a[i])
            i += 1
        elif a[i] > b[j]:
            # b[j] jumps over the remaining la - i entries of a
            swaps += la - i
            out.append(b[j])
            j += 1
        else:
            return None
    out.extend(a[i:])
    out.extend(b[j:])
    return (-1 if swaps & 1 else 1), tuple(out)


class EForm:
    __slots__ = ("algebroid", "_terms")

    def __init__(self, algebroid: Algebroid, terms: Mapping[tuple, Poly] | None = None):
        self.algebroid = algebroid
        clean = {}
        r = algebroid.r
        for key, coeff in (terms or {}).items():
            key = tuple(key)
            if any(key[k] >= key[k + 1] for k in range(len(key) - 1)):
                raise EFormError(f"index tuple {key} is not strictly increasing")
            if key and (key[0] < 0 or key[-1] >= r):
                raise EFormError(f"index tuple {key} out of range")
            if not isinstance(coeff, Poly):
                coeff = Poly.const(coeff)
            if coeff:
                clean[key] = coeff
        self._terms = clean

    @classmethod
    def _raw(cls, algebroid, terms):
        obj = cls.__new__(cls)
        obj.algebroid = algebroid
        obj._terms = terms
        return obj

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, E: Algebroid) -> "EForm":
        return cls._raw(E, {})

    @classmethod
    def function(cls, E: Algebroid, f) -> "EForm":
        f = f if isinstance(f, Poly) else Poly.const(f)
        return cls._raw(E, {(): f} if f else {})

    @classmethod
    def generator(cls, E: Algebroid, I: int) -> "EForm":
        if not 0 <= I < E.r:
            raise EFormError(f"frame index {I} out of range")
        return cls._raw(E, {(I,): _ONE})

    @classmethod
    def one_form(cls, E: Algebroid, coeffs: Sequence) -> "EForm":
        return cls(E, {(I,): c for I, c in enumerate(coeffs)})

    # accessors ----------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, key: Iterable[int]) -> Poly:
        return self._terms.get(tuple(key), _ZERO)

    def degrees(self) -> set:
        return {len(k) for k in self._terms}

    def degree(self) -> int:
        """Degree of a homogeneous nonzero form (``0`` for the zero form)."""
        degs = self.degrees()
        if len(degs) > 1:
            raise EFormError(f"mixed-degree form (degrees {sorted(degs)})")
        return degs.pop() if degs else 0

    def part(self, p: int) -> "EForm":
        return EForm._raw(self.algebroid, {k: v for k, v in self._terms.items() if len(k) == p})

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "EForm"):
        if other.algebroid is not self.algebroid and other.algebroid != self.algebroid:
            raise AlgebroidMismatch("forms live over different algebroids")

    def _lift(self, other):
        if isinstance(other, EForm):
            self._check(other)
            return other
        if isinstance(other, Poly):
            return EForm.function(self.algebroid, other)
        try:
            return EForm.function(self.algebroid, Poly.const(other))
        except (TypeError, ValueError):
            return None

    def __add__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        out = dict(self._terms)
        for k, v in other._terms.items():
            s = out.get(k)
            if s is None:
                out[k] = v
            else:
                s = s + v
                if s:
                    out[k] = s
                else:
                    del out[k]
        return EForm._raw(self.algebroid, out)

    __radd__ = __add__

    def __neg__(self):
        return EForm._raw(self.algebroid, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, f) -> "EForm":
        f = f if isinstance(f, Poly) else Poly.const(f)
        if not f:
            return EForm.zero(self.algebroid)
        out = {}
        for k, v in self._terms.items():
            p = v * f
            if p:
                out[k] = p
        return EForm._raw(self.algebroid, out)

    def __mul__(self, other):
        if isinstance(other, EForm):
            return wedge(self, other)
        if isinstance(other, Poly):
            return self.scale(other)
        try:
            return self.scale(Poly.const(other))
        except (TypeError, ValueError):
            return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if self.degrees() - {0}:
            raise EFormError("only 0-forms can be raised to a power")
        return EForm.function(self.algebroid, self.coeff(()) ** n)

    def __eq__(self, other):
        if isinstance(other, EForm):
            return self.algebroid == other.algebroid and self._terms == other._terms
        if isinstance(other, (Poly, int)):
            lifted = self._lift(other)
            return self._terms == lifted._terms
        return NotImplemented

    __hash__ = None

    def map_coeffs(self, fn, algebroid: Algebroid | None = None) -> "EForm":
        out = {}
        for k, v in self._terms.items():
            w = fn(v)
            if w:
                out[k] = w
        return EForm._raw(algebroid or self.algebroid, out)

    def subs(self, assignment: Mapping) -> "EForm":
        return self.map_coeffs(lambda c: substitute(c, assignment))

    def __repr__(self):
        return f"EForm({format_eform(self)})"

    def __str__(self):
        return format_eform(self)


# ---------------------------------------------------------------------------
# operations


def wedge(a: EForm, b: EForm) -> EForm:
    a._check(b)
    out: dict = {}
    for ka, va in a._terms.items():
        for kb, vb in b._terms.items():
            m = merge_indices(ka, kb)
            if m is None:
                continue
            sign, key = m
            v = va * vb
            if sign < 0:
                v = -v
            s = out.get(key)
            out[key] = v if s is None else s + v
    return EForm._raw(a.algebroid, {k: v for k, v in out.items() if v})


def _d_function(E: Algebroid, f: Poly) -> dict:
    """Components ``rho^i_I d_i f`` of ``^Ed f``."""
    out = {}
    partials = []
    for i, x in enumerate(E.base_coords):
        df = differentiate(f, x)
        if df:
            partials.append((i, df))
    if not partials:
        return out
    for I in range(E.r):
        acc = _ZERO
        for i, df in partials:
            rho = E.anchor[I][i]
            if rho:
                acc = acc + rho * df
        if acc:
            out[(I,)] = acc
    return out


def _d_generators(E: Algebroid) -> list:
    """``^Ed b^I = -sum_{J<K} C^I_JK b^J b^K`` as term dicts."""
    table = [dict() for _ in range(E.r)]
    for (I, J, K), c in E._structure.items():
        table[I][(J, K)] = -c
    return table


def e_differential(w: EForm) -> EForm:
    E = w.algebroid
    dgen = _d_generators(E)
    out: dict = {}

    def add(key, v):
        s = out.get(key)
        out[key] = v if s is None else s + v

    for key, f in w._terms.items():
        for (I,), g in _d_function(E, f).items():
            m = merge_indices((I,), key)
            if m is not None:
                add(m[1], g if m[0] > 0 else -g)
        for pos, I in enumerate(key):
            if not dgen[I]:
                continue
            before, after = key[:pos], key[pos + 1 :]
            sign0 = -1 if pos & 1 else 1
            for pair, c in dgen[I].items():
                m1 = merge_indices(before, pair)
                if m1 is None:
                    continue
                m2 = merge_indices(m1[1], after)
                if m2 is None:
                    continue
                v = f * c
                if sign0 * m1[0] * m2[0] < 0:
                    v = -v
                add(m2[1], v)
    return EForm._raw(E, {k: v for k, v in out.items() if v})


def _components(E: Algebroid, s) -> tuple:
    comps = s.components if isinstance(s, Section) else tuple(s)
    if len(comps) != E.r:
        raise EFormError("section rank mismatch")
    return tuple(c if isinstance(c, Poly) else Poly.const(c) for c in comps)


def _contract(w: EForm, comps: tuple) -> EForm:
    out: dict = {}
    for key, f in w._terms.items():
        for pos, I in enumerate(key):
            s = comps[I]
            if not s:
                continue
            rest = key[:pos] + key[pos + 1 :]
            v = f * s
            if pos & 1:
                v = -v
            prev = out.get(rest)
            out[rest] = v if prev is None else prev + v
    return EForm._raw(w.algebroid, {k: v for k, v in out.items() if v})


def contract(w: EForm, s) -> EForm:
    """Interior product ``i_s``; lowers degree by one."""
    if w._terms and 0 in w.degrees():
        raise DegreeZero("cannot contract a 0-form")
    return _contract(w, _components(w.algebroid, s))


def lie_derivative(w: EForm, s) -> EForm:
    """``L_s = ^Ed i_s + i_s ^Ed``."""
    comps = _components(w.algebroid, s)
    return e_differential(_contract(w, comps)) + _contract(e_differential(w), comps)


# ---------------------------------------------------------------------------
# exterior sums


def embed(w: EForm, Esum: Algebroid, slot: int) -> EForm:
    """View a form over factor ``slot`` (0 or 1) of ``Esum`` as a form on ``Esum``."""
    if Esum.factors is None:
        raise AlgebroidMismatch("target is not an exterior sum")
    if w.algebroid != Esum.factors[slot]:
        raise AlgebroidMismatch("form does not live on the requested factor")
    shift = 0 if slot == 0 else Esum.factors[0].r
    return EForm._raw(Esum, {tuple(I + shift for I in k): v for k, v in w._terms.items()})


def tensor(w1: EForm, w2: EForm, Esum: Algebroid) -> EForm:
    """``w1 (x) w2`` as an element of the exterior-sum algebra."""
    return wedge(embed(w1, Esum, 0), embed(w2, Esum, 1))


def bigrade(key: tuple, Esum: Algebroid) -> tuple:
    r1 = Esum.factors[0].r
    p = sum(1 for I in key if I < r1)
    return p, len(key) - p


# ---------------------------------------------------------------------------
# text form


def _coeff_text(c: Poly, order) -> str:
    text = to_str(c, order)
    if len(c) > 1:
        return f"({text})"
    return text


def format_eform(w: EForm) -> str:
    """Terms ordered by degree, then index tuple; ``coeff*b1^b2``."""
    if not w._terms:
        return "0"
    E = w.algebroid
    order = E.base_coords
    parts = []
    for key in sorted(w._terms, key=lambda k: (len(k), k)):
        c = w._terms[key]
        basis = "^".join(E.frame[I] for I in key)
        if not key:
            body = to_str(c, order)
            if len(c) > 1:
                body = f"({body})" if len(w._terms) > 1 else body
        elif c == 1:
            body = basis
        elif c == -1:
            body = "-" + basis
        else:
            body = f"{_coeff_text(c, order)}*{basis}"
        parts.append(body)
    out = parts[0]
    for body in parts[1:]:
        if body.startswith("-"):
            out += " - " + body[1:]
        else:
            out += " + " + body
    return out


def parse_eform(text: str, E: Algebroid, extra_vars: Iterable[str] = ()) -> EForm:
    """Inverse of :func:`format_eform`; ``^`` between forms is the wedge."""
    coords = set(E.base_coords) | set(extra_vars)
    frame = {name: I for I, name in enumerate(E.frame)}

    def ident(name, offset):
        if name in frame:
            return EForm.generator(E, frame[name])
        if name in coords:
            return EForm.function(E, Poly.var(name))
        raise UndeclaredVariable(f"undeclared name {name!r} at byte {offset}")

    return ExprParser(text, ident, lambda q: EForm.function(E, Poly.const(q)), wedge=wedge).parse()
