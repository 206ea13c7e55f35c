"""Jet-level expressions in the fields ``X^i(x)``, ``A^I(x)`` and parameters.

Expressions form a DAG.  Nodes come in two levels:

* ``fn`` nodes are functions of ``(x, X)`` (coordinate polynomials,
  structure functions, the fields ``X^i`` themselves, parameters and their
  ``X``-partials).  They evaluate to a Poly in ``x`` and ``X``; the base map
  ``X = X(x)`` is substituted only when the value enters a form.
* ``form`` nodes (``A^I``, ``d1``, contractions and anything built from
  them) evaluate to E-forms over the source algebroid.

Identities "for all fields" are decided by exact evaluation on seeded random
polynomial field configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .algebroid import Algebroid, Section
from .eform import EForm, _contract, e_differential, format_eform, wedge
from .morphism import BundleMap, random_bundle_map
from .symexpr import Poly, differentiate, substitute, to_str

__all__ = [
    "FieldExpr",
    "VariationSpec",
    "MissingSlot",
    "IdentityReport",
    "X",
    "A",
    "fn",
    "param",
    "d1",
    "dX",
    "contract",
    "ZERO",
    "add",
    "mul",
    "vary",
    "instantiate",
    "identity_check",
    "F_base_expr",
    "F_frame_expr",
]


class MissingSlot(KeyError):
    pass


FN, FORM = "fn", "form"


class FieldExpr:
    __slots__ = ("kind", "args", "data", "level", "degree", "_xdep", "__weakref__")

    def __init__(self, kind, args=(), data=None, level=FORM, degree=0, xdep=True):
        self.kind = kind
        self.args = tuple(args)
        self.data = data
        self.level = level
        self.degree = degree
        self._xdep = xdep  # may depend on the target coordinates

    def is_zero(self) -> bool:
        return self.kind == "zero"

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __repr__(self):
        return f"<FieldExpr {self.kind} level={self.level} deg={self.degree}>"


ZERO = FieldExpr("zero", level=FN, degree=0, xdep=False)


def _lift(value) -> FieldExpr:
    if isinstance(value, FieldExpr):
        return value
    return fn(value if isinstance(value, Poly) else Poly.const(value))


def X(i: int, name: str) -> FieldExpr:
    """The field ``X^i``; ``name`` is the target coordinate it stands for."""
    return FieldExpr("X", data=(i, name), level=FN)


def A(I: int) -> FieldExpr:
    return FieldExpr("A", data=I, level=FORM, degree=1)


def fn(p: Poly, target_coords: Sequence[str] | None = None) -> FieldExpr:
    """A fixed polynomial in ``(x, X)`` (structure functions, coordinates, constants)."""
    if not p:
        return ZERO
    xdep = True if target_coords is None else bool(p.variables() & set(target_coords))
    return FieldExpr("fn", data=p, level=FN, xdep=xdep)


def param(slot: str, x_only: bool = False) -> FieldExpr:
    """Scalar parameter supplied at instantiation as a Poly in ``(x, X)``."""
    return FieldExpr("param", data=slot, level=FN, xdep=not x_only)


def add(*terms: FieldExpr) -> FieldExpr:
    flat = []
    for t in terms:
        if t.kind == "zero":
            continue
        if t.kind == "add":
            flat.extend(t.args)
        else:
            flat.append(t)
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    degs = {t.degree for t in flat}
    if len(degs) > 1:
        raise ValueError(f"adding expressions of degrees {sorted(degs)}")
    level = FN if all(t.level == FN for t in flat) else FORM
    return FieldExpr("add", flat, level=level, degree=flat[0].degree, xdep=any(t._xdep for t in flat))


def neg(e: FieldExpr) -> FieldExpr:
    if e.kind == "zero":
        return e
    if e.kind == "neg":
        return e.args[0]
    return FieldExpr("neg", (e,), level=e.level, degree=e.degree, xdep=e._xdep)


def mul(a: FieldExpr, b: FieldExpr) -> FieldExpr:
    """Product; the wedge for forms, ordinary product for functions."""
    if a.kind == "zero" or b.kind == "zero":
        return ZERO
    if a.kind == "fn" and b.kind == "fn":
        return fn(a.data * b.data)
    level = FN if a.level == FN and b.level == FN else FORM
    return FieldExpr("mul", (a, b), level=level, degree=a.degree + b.degree, xdep=a._xdep or b._xdep)


def d1(e: FieldExpr) -> FieldExpr:
    if e.kind == "zero":
        return e
    if e.kind == "d1":
        return ZERO
    return FieldExpr("d1", (e,), level=FORM, degree=e.degree + 1)


def contract(slot: str, e: FieldExpr) -> FieldExpr:
    """Interior product with a source section supplied as parameter ``slot``."""
    if e.kind == "zero" or e.degree == 0:
        return ZERO
    return FieldExpr("contract", (e,), data=slot, level=FORM, degree=e.degree - 1)


def dX(i: int, name: str, e: FieldExpr) -> FieldExpr:
    """Partial derivative of a function-level node along ``X^i`` at fixed ``x``."""
    if e.level != FN:
        raise ValueError("dX applies to function-level expressions only")
    k = e.kind
    if k == "zero" or not e._xdep:
        return ZERO
    if k == "fn":
        return fn(differentiate(e.data, name))
    if k == "X":
        return fn(Poly.const(1)) if e.data[0] == i else ZERO
    if k == "add":
        return add(*(dX(i, name, t) for t in e.args))
    if k == "neg":
        return neg(dX(i, name, e.args[0]))
    if k == "mul":
        a, b = e.args
        return add(mul(dX(i, name, a), b), mul(a, dX(i, name, b)))
    return FieldExpr("dX", (e,), data=(i, name), level=FN, xdep=True)


@dataclass
class VariationSpec:
    """Field-space tangent vector: ``X^i -> deltaX[i]``, ``A^I -> deltaA[I]``.

    ``coords`` names the target coordinates, needed for the chain rule.
    """

    deltaX: list
    deltaA: list
    coords: list

    def __post_init__(self):
        self.deltaX = [_lift(d) for d in self.deltaX]
        self.deltaA = [_lift(d) for d in self.deltaA]
        self.coords = list(self.coords)
        if len(self.deltaX) != len(self.coords):
            raise ValueError("deltaX must have one entry per target coordinate")


def vary(e: FieldExpr, spec: VariationSpec, _memo: dict | None = None) -> FieldExpr:
    """Apply the field-space derivation ``spec`` to ``e``."""
    memo = {} if _memo is None else _memo
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    out = _vary(e, spec, memo)
    memo[key] = (e, out)  # keep e alive so ids stay unique
    return out


def _chain(e: FieldExpr, spec: VariationSpec, memo) -> FieldExpr:
    terms = []
    for j, dxj in enumerate(spec.deltaX):
        if dxj.kind == "zero":
            continue
        terms.append(mul(dX(j, spec.coords[j], e), dxj))
    return add(*terms)


def _vary(e: FieldExpr, spec: VariationSpec, memo) -> FieldExpr:
    k = e.kind
    if k == "zero":
        return e
    if k == "X":
        return spec.deltaX[e.data[0]]
    if k == "A":
        return spec.deltaA[e.data]
    if e.level == FN and k in ("fn", "param", "dX"):
        return _chain(e, spec, memo) if e._xdep else ZERO
    if k == "add":
        return add(*(vary(t, spec, memo) for t in e.args))
    if k == "neg":
        return neg(vary(e.args[0], spec, memo))
    if k == "mul":
        a, b = e.args
        return add(mul(vary(a, spec, memo), b), mul(a, vary(b, spec, memo)))
    if k == "d1":
        return d1(vary(e.args[0], spec, memo))
    if k == "contract":
        return contract(e.data, vary(e.args[0], spec, memo))
    raise ValueError(f"cannot vary node {k}")


# ---------------------------------------------------------------------------
# evaluation


class _Evaluator:
    def __init__(self, phi: BundleMap, params: Mapping):
        self.phi = phi
        self.E1 = phi.source
        self.params = params
        self.fn_memo: dict = {}
        self.form_memo: dict = {}
        self._keep: list = []

    def param(self, slot):
        try:
            return self.params[slot]
        except KeyError:
            raise MissingSlot(slot) from None

    def fnval(self, e: FieldExpr) -> Poly:
        hit = self.fn_memo.get(id(e))
        if hit is not None:
            return hit
        k = e.kind
        if k == "zero":
            v = Poly.const(0)
        elif k == "fn":
            v = e.data
        elif k == "X":
            v = Poly.var(e.data[1])
        elif k == "param":
            v = self.param(e.data)
            if not isinstance(v, Poly):
                v = Poly.const(v)
        elif k == "dX":
            v = differentiate(self.fnval(e.args[0]), e.data[1])
        elif k == "add":
            v = Poly.const(0)
            for t in e.args:
                v = v + self.fnval(t)
        elif k == "neg":
            v = -self.fnval(e.args[0])
        elif k == "mul":
            v = self.fnval(e.args[0]) * self.fnval(e.args[1])
        else:
            raise ValueError(f"node {k} is not function-level")
        self.fn_memo[id(e)] = v
        self._keep.append(e)
        return v

    def form(self, e: FieldExpr) -> EForm:
        hit = self.form_memo.get(id(e))
        if hit is not None:
            return hit
        if e.level == FN:
            v = EForm.function(self.E1, self.phi.compose(self.fnval(e)))
        else:
            k = e.kind
            if k == "A":
                v = self.phi.A[e.data]
            elif k == "add":
                v = EForm.zero(self.E1)
                for t in e.args:
                    v = v + self.form(t)
            elif k == "neg":
                v = -self.form(e.args[0])
            elif k == "mul":
                a, b = e.args
                if a.level == FN:
                    v = self.form(b).scale(self.phi.compose(self.fnval(a)))
                elif b.level == FN:
                    v = self.form(a).scale(self.phi.compose(self.fnval(b)))
                else:
                    v = wedge(self.form(a), self.form(b))
            elif k == "d1":
                v = e_differential(self.form(e.args[0]))
            elif k == "contract":
                s = self.param(e.data)
                comps = s.components if isinstance(s, Section) else tuple(s)
                v = _contract(self.form(e.args[0]), comps)
            else:
                raise ValueError(f"cannot evaluate node {k}")
        self.form_memo[id(e)] = v
        self._keep.append(e)
        return v


def instantiate(e: FieldExpr, phi: BundleMap, params: Mapping | None = None) -> EForm:
    """Evaluate ``e`` on concrete fields; ``X``-partials act before ``X -> X(x)``."""
    return _Evaluator(phi, params or {}).form(e)


def instantiate_many(exprs: Sequence[FieldExpr], phi: BundleMap, params: Mapping | None = None) -> list:
    ev = _Evaluator(phi, params or {})
    return [ev.form(e) for e in exprs]


@dataclass
class IdentityReport:
    passed: bool
    trials: int
    seed: int
    witness: dict | None = None
    failures: int = 0

    def __bool__(self):
        return self.passed

    def to_json(self) -> dict:
        out = {"pass": self.passed, "trials": self.trials, "seed": self.seed}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def identity_check(
    exprs,
    source: Algebroid,
    target: Algebroid,
    trials: int = 8,
    degree: int = 2,
    seed: int = 0,
    param_sampler: Callable | None = None,
    map_sampler: Callable | None = None,
) -> IdentityReport:
    """Pass iff every expression instantiates to the zero form on every trial.

    ``param_sampler(rng, phi)`` returns the parameter slots for one trial;
    ``map_sampler(rng)`` replaces the default random bundle map.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if isinstance(exprs, FieldExpr):
        exprs = [exprs]
    exprs = list(exprs)
    witness = None
    failures = 0
    for t in range(trials):
        rng = trial_rng(seed, t)
        phi = map_sampler(rng) if map_sampler else random_bundle_map(rng, source, target, degree)
        params = param_sampler(rng, phi) if param_sampler else {}
        values = instantiate_many(exprs, phi, params)
        bad = [(k, v) for k, v in enumerate(values) if v]
        if bad:
            failures += 1
            if witness is None:
                k, v = bad[0]
                witness = {"trial": t, "component": k, "value": format_eform(v)}
    return IdentityReport(failures == 0, trials, seed, witness, failures)


# ---------------------------------------------------------------------------
# standard building blocks


def fields(target: Algebroid) -> tuple:
    Xs = [X(i, name) for i, name in enumerate(target.base_coords)]
    As = [A(I) for I in range(target.r)]
    return Xs, As


def F_base_expr(target: Algebroid, i: int) -> FieldExpr:
    """``F^i = d1 X^i - rho^i_I A^I``."""
    coords = target.base_coords
    Xs, As = fields(target)
    terms = [d1(Xs[i])]
    for I in range(target.r):
        rho = target.rho(I, i)
        if rho:
            terms.append(neg(mul(fn(rho, coords), As[I])))
    return add(*terms)


def F_frame_expr(target: Algebroid, I: int) -> FieldExpr:
    """``F^I = d1 A^I + sum_{J<K} C^I_JK A^J ^ A^K``."""
    coords = target.base_coords
    _, As = fields(target)
    terms = [d1(As[I])]
    for (K, J, L), c in target._structure.items():
        if K == I:
            terms.append(mul(fn(c, coords), mul(As[J], As[L])))
    return add(*terms)
