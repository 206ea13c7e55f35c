"""Bundle maps between algebroids, their pullbacks and curvatures.

A map ``phi: E1 -> E2`` is given by the base map ``X^i(x)`` and the
``E1``-one-forms ``A^I``.  The induced pullback ``Phi`` sends ``f(X)`` to
``f(X(x))`` and ``b^I`` to ``A^I``; ``phi`` is a morphism exactly when
``Phi`` intertwines the two differentials.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from gmpy2 import mpq

from .algebroid import Algebroid, FrameChange, Section, anchor_action, exterior_sum, renamed, section_bracket
from .eform import AlgebroidMismatch, EForm, e_differential, embed, format_eform, wedge
from .symexpr import Poly, differentiate, parse, substitute, to_str

__all__ = [
    "BundleMap",
    "Curvature",
    "MorphismReport",
    "RelationReport",
    "pullback",
    "curvature",
    "is_morphism",
    "f_phi",
    "graph_pullback",
    "e_phi",
    "e_f_phi",
    "f_gamma",
    "phi_related",
    "projectable_sections",
    "identity_map",
    "reframe_map",
    "frame_curvature_defect",
    "random_poly",
    "random_eform",
    "random_bundle_map",
    "bundle_map_from_json",
]

_ZERO = Poly.const(0)


class BundleMap:
    __slots__ = ("source", "target", "phi0", "A", "_subs", "_graph", "_graph_subs", "_graph_names")

    def __init__(self, source: Algebroid, target: Algebroid, phi0: Sequence, A: Sequence):
        self.source = source
        self.target = target
        self.phi0 = tuple(p if isinstance(p, Poly) else Poly.const(p) for p in phi0)
        if len(self.phi0) != target.n:
            raise ValueError(f"phi0 needs {target.n} components")
        forms = []
        for a in A:
            if not isinstance(a, EForm):
                a = EForm.one_form(source, a)
            if a.algebroid != source:
                raise AlgebroidMismatch("A must be forms over the source algebroid")
            if a and a.degrees() != {1}:
                raise ValueError("A^I must be one-forms")
            forms.append(a)
        if len(forms) != target.r:
            raise ValueError(f"A needs {target.r} components")
        self.A = tuple(forms)
        allowed = set(source.base_coords)
        for p in self.phi0:
            if not p.variables() <= allowed:
                raise ValueError(f"phi0 component {p} uses non-source variables")
        self._subs = dict(zip(target.base_coords, self.phi0))
        self._graph = None
        self._graph_subs = None
        self._graph_names = None

    def compose(self, f: Poly) -> Poly:
        """``f o phi0`` for a function on the target base."""
        return substitute(f, self._subs)

    @property
    def graph_algebroid(self) -> Algebroid:
        """``source [+] target``; a target sharing names with the source gets suffixed copies."""
        if self._graph is None:
            target = self.target
            clash = set(self.source.base_coords) & set(target.base_coords) or set(self.source.frame) & set(target.frame)
            if clash:
                target = renamed(target, "_t")
            self._graph = exterior_sum(self.source, target)
            self._graph_names = dict(zip(self.target.base_coords, target.base_coords))
            self._graph_subs = dict(zip(target.base_coords, self.phi0))
        return self._graph

    def to_graph(self, f: Poly) -> Poly:
        """Rewrite a target function in the coordinate names used by ``graph_algebroid``."""
        self.graph_algebroid
        if all(k == v for k, v in self._graph_names.items()):
            return f
        return substitute(f, {k: Poly.var(v) for k, v in self._graph_names.items()})

    def compose_graph(self, f: Poly) -> Poly:
        """``f o (id, phi0)`` for a function on the graph base."""
        self.graph_algebroid
        return substitute(f, self._graph_subs)

    def __repr__(self):
        return f"<BundleMap {self.source!r} -> {self.target!r}>"


@dataclass
class Curvature:
    F_base: list
    F_frame: list

    def is_zero(self) -> bool:
        return not any(self.F_base) and not any(self.F_frame)

    def nonzero(self) -> list:
        """``(label, form)`` for each nonvanishing component, base ones first."""
        out = [(f"F_base[{i + 1}]", F) for i, F in enumerate(self.F_base) if F]
        out += [(f"F[{I + 1}]", F) for I, F in enumerate(self.F_frame) if F]
        return out


def pullback(phi: BundleMap, w: EForm) -> EForm:
    if w.algebroid != phi.target:
        raise AlgebroidMismatch("pullback expects a form over the target algebroid")
    E1 = phi.source
    out = EForm.zero(E1)
    cache = {(): EForm.function(E1, Poly.const(1))}

    def product(key):
        got = cache.get(key)
        if got is None:
            got = wedge(product(key[:-1]), phi.A[key[-1]])
            cache[key] = got
        return got

    for key, f in w.items():
        g = phi.compose(f)
        if g:
            out = out + product(key).scale(g)
    return out


def _d1(phi: BundleMap, f: Poly) -> EForm:
    return e_differential(EForm.function(phi.source, f))


def curvature(phi: BundleMap) -> Curvature:
    E2 = phi.target
    F_base = []
    for i in range(E2.n):
        F = _d1(phi, phi.phi0[i])
        for I in range(E2.r):
            rho = E2.rho(I, i)
            if rho:
                F = F - phi.A[I].scale(phi.compose(rho))
        F_base.append(F)
    F_frame = []
    for I in range(E2.r):
        F = e_differential(phi.A[I])
        for J, K in itertools.combinations(range(E2.r), 2):
            c = E2.c(I, J, K)
            if c:
                F = F + wedge(phi.A[J], phi.A[K]).scale(phi.compose(c))
        F_frame.append(F)
    return Curvature(F_base, F_frame)


def f_phi(phi: BundleMap, w: EForm) -> EForm:
    """Chain defect ``d1 Phi(w) - Phi(d2 w)``."""
    return e_differential(pullback(phi, w)) - pullback(phi, e_differential(w))


# ---------------------------------------------------------------------------
# random instances (shared with fieldcalc and the tests)


def _monomials(names: Sequence[str], degree: int):
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(names, total):
            yield combo


def random_poly(rng: np.random.Generator, names: Sequence[str], degree: int, density: float = 1.0) -> Poly:
    """Coefficients ``p/q`` with ``p`` in ``-3..3`` and ``q`` in ``1..3``."""
    terms = {}
    for combo in _monomials(list(names), degree):
        num = int(rng.integers(-3, 4))
        den = int(rng.integers(1, 4))
        if density < 1.0 and rng.random() >= density:
            continue
        if num:
            terms[tuple(sorted((n, combo.count(n)) for n in set(combo)))] = mpq(num, den)
    return Poly(terms)


def random_eform(rng, E: Algebroid, max_degree: int = 2, poly_degree: int = 2, names: Sequence[str] | None = None, density: float = 0.5) -> EForm:
    names = list(E.base_coords if names is None else names)
    terms = {}
    for p in range(0, min(max_degree, E.r) + 1):
        for key in itertools.combinations(range(E.r), p):
            if rng.random() < density:
                terms[key] = random_poly(rng, names, poly_degree, density=0.6)
    return EForm(E, terms)


def random_bundle_map(rng, source: Algebroid, target: Algebroid, degree: int = 2) -> BundleMap:
    xs = source.base_coords
    phi0 = [random_poly(rng, xs, degree) for _ in range(target.n)]
    A = [[random_poly(rng, xs, degree) for _ in range(source.r)] for _ in range(target.r)]
    return BundleMap(source, target, phi0, A)


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class MorphismReport:
    is_morphism: bool
    curvature: Curvature
    spot_check: bool
    spot_checks: int
    witnesses: list = field(default_factory=list)

    @property
    def agree(self) -> bool:
        return self.is_morphism == self.spot_check

    def __bool__(self):
        return self.is_morphism


def is_morphism(phi: BundleMap, spot_checks: int = 10, seed: int = 0, degree: int = 2) -> MorphismReport:
    """Decide via the curvatures; cross-check ``F_phi`` on random target forms."""
    F = curvature(phi)
    witnesses = [{"name": name, "value": format_eform(form)} for name, form in F.nonzero()]
    rng = np.random.default_rng(seed)
    E2 = phi.target
    # generators first: F_phi is a derivation, so they already decide the question
    probes = [EForm.function(E2, Poly.var(x)) for x in E2.base_coords]
    probes += [EForm.generator(E2, I) for I in range(E2.r)]
    probes += [random_eform(rng, E2, max_degree=2, poly_degree=degree) for _ in range(spot_checks)]
    chain_ok = not any(f_phi(phi, w) for w in probes)
    return MorphismReport(F.is_zero(), F, chain_ok, spot_checks, witnesses)


def graph_pullback(phi: BundleMap, w: EForm) -> EForm:
    """``Phi^gra(w1 (x) w2) = w1 ^ Phi(w2)`` on forms over ``E1 [+] E2``."""
    Esum = phi.graph_algebroid
    if w.algebroid != Esum:
        raise AlgebroidMismatch("graph pullback expects a form over source [+] target")
    E1 = phi.source
    r1 = E1.r
    out = EForm.zero(E1)
    for key, f in w.items():
        k1 = tuple(I for I in key if I < r1)
        k2 = tuple(I - r1 for I in key if I >= r1)
        g = phi.compose_graph(f)
        if not g:
            continue
        left = EForm(E1, {k1: g})
        right = pullback(phi, EForm(phi.target, {k2: Poly.const(1)}))
        out = out + wedge(left, right)
    return out


def e_phi(phi: BundleMap, w: EForm) -> EForm:
    """Projector ``P1 o Phi^gra`` onto forms pulled back from ``E1``."""
    return embed(graph_pullback(phi, w), phi.graph_algebroid, 0)


def e_f_phi(phi: BundleMap, w: EForm) -> EForm:
    return e_differential(e_phi(phi, w)) - e_phi(phi, e_differential(w))


def f_gamma(phi: BundleMap, connection) -> Curvature:
    """``F^I + Gamma^I_{iJ} F^i ^ A^J`` for a connection on the target."""
    F = curvature(phi)
    frame = list(F.F_frame)
    for (I, i, J), g in connection.gamma.items():
        if g and F.F_base[i]:
            frame[I] = frame[I] + wedge(F.F_base[i], phi.A[J]).scale(phi.compose(g))
    return Curvature(list(F.F_base), frame)


# ---------------------------------------------------------------------------
# phi-relation


def _apply(phi: BundleMap, s1: Section) -> list:
    """Components ``A^I(s1)`` of ``phi o s1``."""
    out = []
    for a in phi.A:
        acc = _ZERO
        for (alpha,), c in a.items():
            if s1[alpha]:
                acc = acc + c * s1[alpha]
        out.append(acc)
    return out


@dataclass
class RelationReport:
    anchor_ok: bool
    related: list
    brackets_ok: list
    witnesses: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.anchor_ok and all(self.related) and all(self.brackets_ok)


def phi_related(phi: BundleMap, pairs: Sequence[tuple]) -> RelationReport:
    F = curvature(phi)
    anchor_ok = not any(F.F_base)
    witnesses = [{"name": n, "value": format_eform(v)} for n, v in F.nonzero() if n.startswith("F_base")]
    related = []
    for s1, s2 in pairs:
        lhs = _apply(phi, s1)
        rhs = [phi.compose(c) for c in s2.components]
        related.append(lhs == rhs)
    brackets = []
    for (a, b) in itertools.combinations(range(len(pairs)), 2):
        if not (related[a] and related[b]):
            continue
        s1, s2 = pairs[a]
        t1, t2 = pairs[b]
        lhs = _apply(phi, section_bracket(phi.source, s1, t1))
        rhs = [phi.compose(c) for c in section_bracket(phi.target, s2, t2).components]
        brackets.append(lhs == rhs)
    return RelationReport(anchor_ok, related, brackets, witnesses)


def projectable_sections(phi: BundleMap, degree: int = 2) -> dict:
    """Solve ``A^I(s1) = s2^I o phi0`` for polynomial sections up to ``degree``.

    Returns the dimension of the solution space and of its projection to
    ``s1``; ``s1_dim == 0`` means no nonzero ``s1`` is related to anything.
    """
    import sympy

    E1, E2 = phi.source, phi.target
    mon1 = list(_monomials(E1.base_coords, degree))
    mon2 = list(_monomials(E2.base_coords, degree))

    def mono_poly(combo):
        acc = Poly.const(1)
        for name in combo:
            acc = acc * Poly.var(name)
        return acc

    unknowns = []  # (side, index, poly)
    for alpha in range(E1.r):
        for combo in mon1:
            unknowns.append((1, alpha, mono_poly(combo)))
    for I in range(E2.r):
        for combo in mon2:
            unknowns.append((2, I, phi.compose(mono_poly(combo))))
    rows: dict = {}
    for col, (side, idx, p) in enumerate(unknowns):
        if side == 1:
            for I, a in enumerate(phi.A):
                c = a.coeff((idx,))
                if c:
                    for mono, v in (c * p).items():
                        rows.setdefault((I, mono), {})[col] = v
        else:
            for mono, v in p.items():
                row = rows.setdefault((idx, mono), {})
                row[col] = row.get(col, 0) - v
    ncols = len(unknowns)
    M = sympy.Matrix(
        [[sympy.Rational(int(row.get(c, 0).numerator), int(row.get(c, 0).denominator)) if c in row else 0 for c in range(ncols)] for row in rows.values()]
    ) if rows else sympy.zeros(0, ncols)
    null = M.nullspace() if rows else [sympy.eye(ncols)[:, c] for c in range(ncols)]
    n1 = E1.r * len(mon1)
    s1_part = sympy.Matrix.hstack(*[v[:n1, 0] for v in null]) if null else sympy.zeros(n1, 0)
    s1_dim = s1_part.rank() if null else 0
    return {"dim": len(null), "s1_dim": int(s1_dim), "degree": degree}


# ---------------------------------------------------------------------------
# constructions


def identity_map(E: Algebroid) -> BundleMap:
    phi0 = [Poly.var(x) for x in E.base_coords]
    A = [EForm.generator(E, I) for I in range(E.r)]
    return BundleMap(E, E, phi0, A)


def reframe_map(phi: BundleMap, F: FrameChange, target_tilde: Algebroid) -> BundleMap:
    """Same map seen in the frame ``bt``: ``At^J = Phi((B^-1)^J_I) A^I``."""
    r = phi.target.r
    A = []
    for J in range(r):
        acc = EForm.zero(phi.source)
        for I in range(r):
            b = F.B_inv[J][I]
            if b:
                acc = acc + phi.A[I].scale(phi.compose(b))
        A.append(acc)
    return BundleMap(phi.source, target_tilde, phi.phi0, A)


def frame_curvature_defect(phi: BundleMap, F: FrameChange, target_tilde: Algebroid) -> list:
    """``F^I - Phi(B^I_J) Ft^J - Phi(B^I_{J,i}) F^i ^ At^J`` for each ``I``."""
    tilde = reframe_map(phi, F, target_tilde)
    Fo = curvature(phi)
    Ft = curvature(tilde)
    E2 = phi.target
    out = []
    for I in range(E2.r):
        acc = Fo.F_frame[I]
        for J in range(E2.r):
            b = F.B[I][J]
            if b:
                acc = acc - Ft.F_frame[J].scale(phi.compose(b))
            for i, x in enumerate(E2.base_coords):
                db = differentiate(b, x)
                if db and Fo.F_base[i]:
                    acc = acc - wedge(Fo.F_base[i], tilde.A[J]).scale(phi.compose(db))
        out.append(acc)
    return out


def bundle_map_from_json(data: Mapping, source: Algebroid, target: Algebroid) -> BundleMap:
    xs = source.base_coords
    phi0 = [parse(e, xs) for e in data["phi0"]]
    A = []
    for row in data["A"]:
        if len(row) != source.r:
            raise ValueError(f"each A row needs {source.r} entries")
        A.append([parse(e, xs) for e in row])
    return BundleMap(source, target, phi0, A)


def bundle_map_to_json(phi: BundleMap) -> dict:
    xs = phi.source.base_coords
    return {
        "phi0": [to_str(p, xs) for p in phi.phi0],
        "A": [[to_str(a.coeff((al,)), xs) for al in range(phi.source.r)] for a in phi.A],
    }
