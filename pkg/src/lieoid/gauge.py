"""Gauge transformations of bundle maps and their algebra.

Three versions act on the fields ``(X, A)``:

* ``delta0``: the naive frame-dependent one,
  ``dX^i = rho^i_I e^I``, ``dA^I = d1 e^I + C^I_JK A^J e^K``;
* ``delta_cov``: the covariant version for projectable ``e = e1 + e2``,
  which adds ``-e^I_{,i} F^i`` and the source part generated by ``e1``;
* ``delta_conn``: ``delta0`` corrected by ``Gamma^I_{iJ} F^i e^J``.

Parameters ``e2`` are polynomials in ``(x, X)``; ``e1`` is a section of the
source algebroid with ``x``-dependence only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .algebroid import Algebroid, FrameChange, Section, change_frame, section_bracket
from .eform import EForm, contract as eform_contract, e_differential, format_eform
from .fieldcalc import (
    ZERO,
    FieldExpr,
    IdentityReport,
    VariationSpec,
    add,
    contract,
    d1,
    dX,
    F_base_expr,
    F_frame_expr,
    fields,
    fn,
    identity_check,
    mul,
    neg,
    param,
    vary,
)
from .morphism import BundleMap, random_poly
from .symexpr import Poly, differentiate, parse, to_str

__all__ = [
    "GaugeParam",
    "Connection",
    "WrongSourceAlgebroid",
    "delta0",
    "delta_cov",
    "delta_conn",
    "e_bracket",
    "closure_check",
    "frame_defect_check",
    "diffeo_param",
    "gauge_condition_check",
    "is_torsion_free",
    "random_vertical_param",
]


class WrongSourceAlgebroid(ValueError):
    pass


_ZERO = Poly.const(0)


@dataclass(frozen=True)
class GaugeParam:
    eps1: tuple
    eps2: tuple

    def __init__(self, eps1: Sequence, eps2: Sequence, source_coords: Sequence[str] | None = None):
        e1 = tuple(p if isinstance(p, Poly) else Poly.const(p) for p in eps1)
        e2 = tuple(p if isinstance(p, Poly) else Poly.const(p) for p in eps2)
        if source_coords is not None:
            allowed = set(source_coords)
            for p in e1:
                if not p.variables() <= allowed:
                    raise ValueError("eps1 must depend on the source coordinates only")
        object.__setattr__(self, "eps1", e1)
        object.__setattr__(self, "eps2", e2)

    @classmethod
    def vertical(cls, eps2: Sequence, r1: int) -> "GaugeParam":
        return cls([_ZERO] * r1, eps2)

    def is_vertical(self) -> bool:
        return not any(self.eps1)


@dataclass
class Connection:
    """Coefficients ``Gamma^I_{iJ}`` keyed by ``(I, i, J)`` (0-based)."""

    gamma: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gamma = {k: (v if isinstance(v, Poly) else Poly.const(v)) for k, v in self.gamma.items() if v}

    @classmethod
    def from_json(cls, data: Mapping, E: Algebroid) -> "Connection":
        frame = {n: I for I, n in enumerate(E.frame)}
        base = {n: i for i, n in enumerate(E.base_coords)}
        gamma = {}
        for entry in data.get("gamma", []):
            key = (frame[entry["upper"]], base[entry["base"]], frame[entry["lower"]])
            gamma[key] = gamma.get(key, _ZERO) + parse(entry["coeff"], E.base_coords)
        return cls(gamma)


def is_torsion_free(conn: Connection, E: Algebroid) -> bool:
    """For a cotangent target: ``Gamma^k_{ij} = Gamma^i_{kj}`` after identifying frame and base indices."""
    if E.r != E.n:
        raise ValueError("torsion is only defined here for cotangent targets")
    for (I, i, J), g in conn.gamma.items():
        if conn.gamma.get((i, I, J), _ZERO) != g:
            return False
    return True


# ---------------------------------------------------------------------------
# variations as field-space vector fields


def _slots(prefix: str, r: int) -> list:
    return [f"{prefix}{I}" for I in range(r)]


def _eps_exprs(prefix: str, r: int) -> list:
    return [param(s) for s in _slots(prefix, r)]


def delta0(target: Algebroid, eps: Sequence[FieldExpr]) -> VariationSpec:
    """Naive transformation with parameter expressions ``eps[I]``."""
    coords = target.base_coords
    Xs, As = fields(target)
    dXs = []
    for i in range(target.n):
        dXs.append(add(*(mul(fn(target.rho(I, i), coords), eps[I]) for I in range(target.r) if target.rho(I, i))))
    dAs = []
    for I in range(target.r):
        terms = [d1(eps[I])]
        for (K, J, L), c in target._structure.items():
            if K != I:
                continue
            # C^I_JL (A^J e^L - A^L e^J)
            terms.append(mul(fn(c, coords), add(mul(As[J], eps[L]), neg(mul(As[L], eps[J])))))
        dAs.append(add(*terms))
    return VariationSpec(dXs, dAs, coords)


def delta_cov(target: Algebroid, eps: Sequence[FieldExpr], eps1_slot: str | None = None) -> VariationSpec:
    """Covariant transformation; ``eps1_slot`` names the source section parameter."""
    base = delta0(target, eps)
    coords = target.base_coords
    Xs, As = fields(target)
    F = [F_base_expr(target, i) for i in range(target.n)]
    dXs = list(base.deltaX)
    dAs = []
    for I in range(target.r):
        terms = [base.deltaA[I]]
        for i, name in enumerate(coords):
            terms.append(neg(mul(dX(i, name, eps[I]), F[i])))
        dAs.append(add(*terms))
    if eps1_slot is not None:
        for i in range(target.n):
            dXs[i] = add(dXs[i], neg(contract(eps1_slot, d1(Xs[i]))))
        for I in range(target.r):
            lie = add(d1(contract(eps1_slot, As[I])), contract(eps1_slot, d1(As[I])))
            dAs[I] = add(dAs[I], neg(lie))
    return VariationSpec(dXs, dAs, coords)


def delta_conn(target: Algebroid, eps: Sequence[FieldExpr], conn: Connection) -> VariationSpec:
    base = delta0(target, eps)
    coords = target.base_coords
    F = [F_base_expr(target, i) for i in range(target.n)]
    dAs = list(base.deltaA)
    for (I, i, J), g in sorted(conn.gamma.items()):
        dAs[I] = add(dAs[I], mul(fn(g, coords), mul(F[i], eps[J])))
    return VariationSpec(list(base.deltaX), dAs, coords)


# ---------------------------------------------------------------------------
# bracket of parameters


def _rho1(E1: Algebroid, s: Sequence[Poly], f: Poly) -> Poly:
    acc = _ZERO
    for alpha, sa in enumerate(s):
        if not sa:
            continue
        for mu, x in enumerate(E1.base_coords):
            rho = E1.rho(alpha, mu)
            if rho:
                acc = acc + sa * rho * differentiate(f, x)
    return acc


def _rho2(E2: Algebroid, s: Sequence[Poly], f: Poly) -> Poly:
    acc = _ZERO
    for I, sI in enumerate(s):
        if not sI:
            continue
        for i, X in enumerate(E2.base_coords):
            rho = E2.rho(I, i)
            if rho:
                acc = acc + sI * rho * differentiate(f, X)
    return acc


def e_bracket(source: Algebroid, target: Algebroid, e: GaugeParam, f: GaugeParam) -> GaugeParam:
    """Bracket of projectable sections of ``source [+] target``."""
    eps1 = section_bracket(source, Section(e.eps1), Section(f.eps1)).components
    eps2 = []
    for I in range(target.r):
        acc = _rho1(source, e.eps1, f.eps2[I]) + _rho2(target, e.eps2, f.eps2[I])
        acc = acc - _rho1(source, f.eps1, e.eps2[I]) - _rho2(target, f.eps2, e.eps2[I])
        for (K, J, L), c in target._structure.items():
            if K == I:
                acc = acc + c * (e.eps2[J] * f.eps2[L] - e.eps2[L] * f.eps2[J])
        eps2.append(acc)
    return GaugeParam(eps1, eps2)


# ---------------------------------------------------------------------------
# closure


def random_vertical_param(rng, source: Algebroid, target: Algebroid, degree: int = 2, x_only: bool = False) -> GaugeParam:
    names = list(source.base_coords) + ([] if x_only else list(target.base_coords))
    eps2 = [random_poly(rng, names, degree, density=0.5) for _ in range(target.r)]
    return GaugeParam.vertical(eps2, source.r)


def random_projectable_param(rng, source: Algebroid, target: Algebroid, degree: int = 2) -> GaugeParam:
    eps1 = [random_poly(rng, source.base_coords, degree, density=0.5) for _ in range(source.r)]
    names = list(source.base_coords) + list(target.base_coords)
    eps2 = [random_poly(rng, names, degree, density=0.5) for _ in range(target.r)]
    return GaugeParam(eps1, eps2)


def _param_slots(prefix: str, p: GaugeParam) -> dict:
    out = {f"{prefix}{I}": v for I, v in enumerate(p.eps2)}
    out[f"{prefix}_1"] = Section(p.eps1)
    return out


@dataclass
class ClosureReport:
    kind: str
    identity: IdentityReport
    defect_formula: str

    @property
    def passed(self) -> bool:
        return self.identity.passed

    def __bool__(self):
        return self.passed


def closure_exprs(target: Algebroid, kind: str = "cov", conn: Connection | None = None, with_eps1: bool = False) -> list:
    """Expressions ``[d_e, d_f] Y - d_[e,f] Y - expected defect`` for ``Y`` in ``X^i, A^I``.

    The bracket parameter occupies the slots prefixed ``h``.
    """
    r = target.r
    e, f, h = _eps_exprs("e", r), _eps_exprs("f", r), _eps_exprs("h", r)

    def make(eps, prefix):
        if kind == "cov":
            return delta_cov(target, eps, f"{prefix}_1" if with_eps1 else None)
        if kind == "zero":
            return delta0(target, eps)
        if kind == "conn":
            return delta_conn(target, eps, conn or Connection())
        raise ValueError(f"unknown transformation {kind!r}")

    de, df, dh = make(e, "e"), make(f, "f"), make(h, "h")
    Xs, As = fields(target)
    out = []
    coords = target.base_coords
    F = [F_base_expr(target, i) for i in range(target.n)]
    for Y in Xs + As:
        comm = add(vary(vary(Y, df), de), neg(vary(vary(Y, de), df)))
        expr = add(comm, neg(vary(Y, dh)))
        if kind == "zero" and Y.kind == "A":
            # expected defect  -C^I_{JK,i} F^i e^J f^K
            I = Y.data
            terms = []
            for (K, J, L), c in target._structure.items():
                if K != I:
                    continue
                for i, name in enumerate(coords):
                    dc = differentiate(c, name)
                    if dc:
                        ef = add(mul(e[J], f[L]), neg(mul(e[L], f[J])))
                        terms.append(mul(fn(dc, coords), mul(F[i], ef)))
            expr = add(expr, add(*terms))
        out.append(expr)
    return out


def closure_check(
    source: Algebroid,
    target: Algebroid,
    kind: str = "cov",
    conn: Connection | None = None,
    trials: int = 8,
    degree: int = 2,
    seed: int = 0,
    x_only: bool = False,
    with_eps1: bool = False,
    params: tuple | None = None,
) -> ClosureReport:
    """Commutator of two transformations against the transformation of the bracket.

    ``kind='cov'`` expects an exact match, ``kind='zero'`` expects the defect
    ``-C^I_{JK,i} F^i e^J f^K`` on ``A^I``, and ``kind='conn'`` expects an
    exact match (which fails off-shell for a generic connection).  ``params``
    may fix the two parameters instead of drawing them per trial.
    """
    exprs = closure_exprs(target, kind, conn, with_eps1)

    def sampler(rng, phi):
        if params is not None:
            e, f = params
        elif with_eps1:
            e = random_projectable_param(rng, source, target, degree)
            f = random_projectable_param(rng, source, target, degree)
        else:
            e = random_vertical_param(rng, source, target, degree, x_only)
            f = random_vertical_param(rng, source, target, degree, x_only)
        h = e_bracket(source, target, e, f)
        slots = {}
        slots.update(_param_slots("e", e))
        slots.update(_param_slots("f", f))
        slots.update(_param_slots("h", h))
        return slots

    report = identity_check(exprs, source, target, trials, degree, seed, param_sampler=sampler)
    formula = "-C^I_JK,i F^i e^J f^K" if kind == "zero" else "0"
    return ClosureReport(kind, report, formula)


# ---------------------------------------------------------------------------
# frame change


def frame_defect_exprs(target: Algebroid, F: FrameChange, kind: str = "zero") -> tuple:
    """Defect of a transformation under ``b^I = B^I_J bt^J``.

    Fields are ``X`` and the tilde connection ``At``; the parameter is given
    in the tilde frame (slots ``t<J>``).  Returns ``(tilde_algebroid, exprs)``
    where each expression is the untilded variation of ``A^I = B^I_J At^J``
    minus the Leibniz transport of the tilde variation, minus the expected
    defect (``B^I_{J,i} F^i et^J`` for ``delta0``, zero for ``delta_cov``).
    """
    Et = change_frame(target, F)
    r = target.r
    coords = target.base_coords
    Xs, At = fields(Et)
    et = _eps_exprs("t", r)
    B = [[fn(F.B[I][J], coords) for J in range(r)] for I in range(r)]
    A_expr = [add(*(mul(B[I][J], At[J]) for J in range(r))) for I in range(r)]
    eps = [add(*(mul(B[I][J], et[J]) for J in range(r))) for I in range(r)]
    if kind == "zero":
        tilde_spec = delta0(Et, et)
    elif kind == "cov":
        tilde_spec = delta_cov(Et, et)
    else:
        raise ValueError(kind)
    transported = [vary(a, tilde_spec) for a in A_expr]
    # the untilded formula, written with A = B At and e = B et
    Fi = [F_base_expr(Et, i) for i in range(target.n)]
    direct = []
    for I in range(r):
        terms = [d1(eps[I])]
        for (K, J, L), c in target._structure.items():
            if K == I:
                terms.append(mul(fn(c, coords), add(mul(A_expr[J], eps[L]), neg(mul(A_expr[L], eps[J])))))
        if kind == "cov":
            for i, name in enumerate(coords):
                terms.append(neg(mul(dX(i, name, eps[I]), Fi[i])))
        direct.append(add(*terms))
    out = []
    for I in range(r):
        expected = []
        if kind == "zero":
            for J in range(r):
                for i, name in enumerate(coords):
                    db = differentiate(F.B[I][J], name)
                    if db:
                        expected.append(mul(fn(db, coords), mul(Fi[i], et[J])))
        out.append(add(direct[I], neg(transported[I]), neg(add(*expected))))
    # the base variation must agree too: rho^i_I e^I = rho~^i_J et^J
    dX_direct = delta0(target, eps).deltaX
    for i in range(target.n):
        out.append(add(dX_direct[i], neg(tilde_spec.deltaX[i])))
    return Et, out


def frame_defect_check(
    source: Algebroid,
    target: Algebroid,
    F: FrameChange,
    kind: str = "zero",
    trials: int = 8,
    degree: int = 2,
    seed: int = 0,
) -> IdentityReport:
    Et, exprs = frame_defect_exprs(target, F, kind)

    def sampler(rng, phi):
        names = list(source.base_coords) + list(target.base_coords)
        return {f"t{J}": random_poly(rng, names, degree, density=0.5) for J in range(target.r)}

    return identity_check(exprs, source, Et, trials, degree, seed, param_sampler=sampler)


# ---------------------------------------------------------------------------
# diffeomorphisms and the invariance condition


def _is_tangent(E: Algebroid) -> bool:
    if E.r != E.n or E._structure:
        return False
    return all(E.rho(I, i) == (1 if I == i else 0) for I in range(E.r) for i in range(E.n))


def diffeo_param(phi: BundleMap, v: Section) -> GaugeParam:
    """Vertical parameter ``e^I = i_v A^I`` generating the diffeomorphism along ``v``."""
    if not _is_tangent(phi.source):
        raise WrongSourceAlgebroid("diffeomorphism parameters need a tangent-bundle source")
    eps2 = []
    for a in phi.A:
        eps2.append(eform_contract(a, v).coeff(()) if a else _ZERO)
    return GaugeParam.vertical(eps2, phi.source.r)


def instantiate_delta0(phi: BundleMap, eps: GaugeParam) -> tuple:
    """Concrete ``(dX, dA)`` of ``delta0`` on a given map."""
    from .fieldcalc import instantiate_many

    target = phi.target
    spec = delta0(target, _eps_exprs("e", target.r))
    slots = {f"e{I}": v for I, v in enumerate(eps.eps2)}
    vals = instantiate_many(list(spec.deltaX) + list(spec.deltaA), phi, slots)
    return vals[: target.n], vals[target.n :]


def gauge_condition_check(P: Sequence[Sequence[Poly]], eps: Sequence[Poly], coords: Sequence[str]) -> bool:
    """``(e_{j,i} - e_{i,j}) P^{jk} = 0`` for all ``i, k``."""
    n = len(coords)
    eps = [e if isinstance(e, Poly) else Poly.const(e) for e in eps]
    if len(eps) != n:
        raise ValueError("eps needs one component per coordinate")
    for i in range(n):
        for k in range(n):
            acc = _ZERO
            for j in range(n):
                pjk = P[j][k] if isinstance(P[j][k], Poly) else Poly.const(P[j][k])
                if not pjk:
                    continue
                acc = acc + (differentiate(eps[j], coords[i]) - differentiate(eps[i], coords[j])) * pjk
            if acc:
                return False
    return True
