"""Poisson sigma model on a two-dimensional worldsheet."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from gmpy2 import mpq

from .algebroid import Algebroid, jacobi_poisson, poisson_cotangent, tangent_bundle
from .eform import AlgebroidMismatch, EForm, e_differential, format_eform, wedge
from .fieldcalc import FieldExpr, add, d1, fields, fn, identity_check, mul, neg, param, vary
from .gauge import Connection, delta_conn
from .morphism import BundleMap, Curvature, curvature, graph_pullback, random_poly
from .symexpr import Poly, differentiate, parse

__all__ = [
    "PsmModel",
    "action_density",
    "action_paths",
    "euler_lagrange",
    "psm_variation",
    "psm_variation_expr",
    "lagrangian_expr",
    "invariance_check",
    "connection_invariance_check",
]

_ZERO = Poly.const(0)
_HALF = Poly.const(mpq(1, 2))


class PsmModel:
    def __init__(self, P: Sequence[Sequence], target_coords: Sequence[str], sigma_coords: Sequence[str] = ("x1", "x2")):
        if len(sigma_coords) != 2:
            raise ValueError("the worldsheet is two-dimensional")
        self.sigma_coords = tuple(sigma_coords)
        self.target_coords = tuple(target_coords)
        self.target = poisson_cotangent(P, target_coords)
        self.P = [[self.target.rho(I, j) for j in range(self.n)] for I in range(self.n)]
        self.source = tangent_bundle(self.sigma_coords)
        self.jacobi = jacobi_poisson(self.P, self.target_coords).ok

    @property
    def n(self) -> int:
        return len(self.target_coords)

    @classmethod
    def from_json(cls, data: Mapping) -> "PsmModel":
        coords = list(data["target_coords"])
        P = [[parse(e, coords) for e in row] for row in data["poisson"]]
        return cls(P, coords, data.get("sigma_coords", ["x1", "x2"]))

    def check_map(self, phi: BundleMap):
        if phi.source != self.source or phi.target != self.target:
            raise AlgebroidMismatch("map does not go from the worldsheet tangent bundle to this model's target")


def _local(m: PsmModel, phi: BundleMap) -> EForm:
    E1 = phi.source
    out = EForm.zero(E1)
    for i in range(m.n):
        out = out + wedge(phi.A[i], e_differential(EForm.function(E1, phi.phi0[i])))
    for i in range(m.n):
        for j in range(m.n):
            if m.P[i][j]:
                out = out + wedge(phi.A[i], phi.A[j]).scale(phi.compose(m.P[i][j]) * _HALF)
    return out


def _alt_phistar(m: PsmModel, phi: BundleMap) -> EForm:
    """Antisymmetrized pullback of the tensor ``delta + P``.

    ``delta = d_i (x) dX^i`` and ``P = 1/2 P^{ij} d_i (x) d_j``; tangent slots go
    to ``A_i`` and cotangent slots to ``dX^i(x)``.  The two-tensor on the
    worldsheet is then antisymmetrized with ``Alt(a (x) b) = a ^ b``.
    """
    E1 = phi.source
    dX = [e_differential(EForm.function(E1, p)) for p in phi.phi0]

    def comp(w: EForm, mu: int) -> Poly:
        return w.coeff((mu,))

    tensor = [[_ZERO, _ZERO], [_ZERO, _ZERO]]
    slots = []  # (coefficient on the worldsheet, first one-form, second one-form)
    for i in range(m.n):
        slots.append((Poly.const(1), phi.A[i], dX[i]))
    for i in range(m.n):
        for j in range(m.n):
            if m.P[i][j]:
                slots.append((phi.compose(m.P[i][j]) * _HALF, phi.A[i], phi.A[j]))
    for c, a, b in slots:
        for mu in range(2):
            for nu in range(2):
                tensor[mu][nu] = tensor[mu][nu] + c * comp(a, mu) * comp(b, nu)
    return EForm(E1, {(0, 1): tensor[0][1] - tensor[1][0]})


def _graph(m: PsmModel, phi: BundleMap) -> EForm:
    """The same tensor pulled back through the graph map."""
    Esum = phi.graph_algebroid
    r1 = phi.source.r
    E1 = phi.source
    out = EForm.zero(E1)
    for i in range(m.n):
        tangent_slot = graph_pullback(phi, EForm.generator(Esum, r1 + i))
        out = out + wedge(tangent_slot, e_differential(EForm.function(E1, phi.phi0[i])))
    terms = {}
    for i in range(m.n):
        for j in range(i + 1, m.n):
            if m.P[i][j]:
                terms[(r1 + i, r1 + j)] = phi.to_graph(m.P[i][j])
    return out + graph_pullback(phi, EForm(Esum, terms))


def _components(m: PsmModel, phi: BundleMap) -> EForm:
    """``<A ^, d phi0> + 1/2 <P o phi0, A ^ A>`` written out in components."""
    x1, x2 = m.sigma_coords
    a = [[phi.A[i].coeff((mu,)) for mu in range(2)] for i in range(m.n)]
    coeff = _ZERO
    for i in range(m.n):
        coeff = coeff + a[i][0] * differentiate(phi.phi0[i], x2) - a[i][1] * differentiate(phi.phi0[i], x1)
    for i in range(m.n):
        for j in range(i + 1, m.n):
            if m.P[i][j]:
                coeff = coeff + phi.compose(m.P[i][j]) * (a[i][0] * a[j][1] - a[i][1] * a[j][0])
    return EForm(phi.source, {(0, 1): coeff})


def action_paths(m: PsmModel, phi: BundleMap) -> dict:
    m.check_map(phi)
    return {
        "local": _local(m, phi),
        "alt_pullback": _alt_phistar(m, phi),
        "graph": _graph(m, phi),
        "components": _components(m, phi),
    }


def action_density(m: PsmModel, phi: BundleMap) -> EForm:
    """``A_i ^ dX^i + 1/2 P^{ij} A_i ^ A_j``; every construction path must agree."""
    paths = action_paths(m, phi)
    ref = paths["local"]
    for name, w in paths.items():
        if w != ref:
            raise AssertionError(f"action path {name!r} disagrees with the local formula")
    return ref


def euler_lagrange(m: PsmModel, phi: BundleMap) -> Curvature:
    """Field equations ``dX^i + P^{ij} A_j`` and ``dA_i + 1/2 P^{kl}_{,i} A_k ^ A_l``."""
    m.check_map(phi)
    F = curvature(phi)
    E1 = phi.source
    for i in range(m.n):
        lhs = e_differential(EForm.function(E1, phi.phi0[i]))
        for j in range(m.n):
            if m.P[i][j]:
                lhs = lhs + phi.A[j].scale(phi.compose(m.P[i][j]))
        if lhs != F.F_base[i]:
            raise AssertionError(f"base field equation {i + 1} disagrees with the curvature")
        rhs = e_differential(phi.A[i])
        for k in range(m.n):
            for l in range(m.n):
                dp = differentiate(m.P[k][l], m.target_coords[i])
                if dp:
                    rhs = rhs + wedge(phi.A[k], phi.A[l]).scale(phi.compose(dp) * _HALF)
        if rhs != F.F_frame[i]:
            raise AssertionError(f"frame field equation {i + 1} disagrees with the curvature")
    return F


def psm_variation(m: PsmModel, phi: BundleMap, eps: Sequence[Poly]) -> EForm:
    """Variation density for a vertical one-form ``e = e_i dX^i`` on the target."""
    E1 = phi.source
    X = m.target_coords
    dX = [e_differential(EForm.function(E1, p)) for p in phi.phi0]
    out = EForm.zero(E1)
    for i in range(m.n):
        out = out + wedge(e_differential(EForm.function(E1, phi.compose(eps[i]))), dX[i])
    for i in range(m.n):
        for j in range(m.n):
            w = differentiate(eps[j], X[i]) - differentiate(eps[i], X[j])
            if not w:
                continue
            for k in range(m.n):
                if m.P[j][k]:
                    out = out + wedge(phi.A[k], dX[i]).scale(phi.compose(w * m.P[j][k]))
            for k in range(m.n):
                for l in range(m.n):
                    c = m.P[k][i] * m.P[l][j]
                    if c:
                        out = out + wedge(phi.A[k], phi.A[l]).scale(phi.compose(w * c) * _HALF)
    return out


def exact_part(m: PsmModel, phi: BundleMap, eps: Sequence[Poly]) -> EForm:
    """``d1 Phi(e_i dX^i)``."""
    E1 = phi.source
    pulled = EForm.zero(E1)
    for i in range(m.n):
        pulled = pulled + e_differential(EForm.function(E1, phi.phi0[i])).scale(phi.compose(eps[i]))
    return e_differential(pulled)


def invariance_check(m: PsmModel, eps: Sequence[Poly], trials: int = 8, degree: int = 2, seed: int = 0):
    """Whether ``psm_variation - d1 Phi(e)`` vanishes on random fields."""
    from .fieldcalc import IdentityReport, trial_rng
    from .morphism import random_bundle_map

    witness = None
    failures = 0
    for t in range(trials):
        phi = random_bundle_map(trial_rng(seed, t), m.source, m.target, degree)
        rest = psm_variation(m, phi, eps) - exact_part(m, phi, eps)
        if rest:
            failures += 1
            if witness is None:
                witness = {"trial": t, "component": 0, "value": format_eform(rest)}
    return IdentityReport(failures == 0, trials, seed, witness, failures)


# ---------------------------------------------------------------------------
# jet-level forms


def lagrangian_expr(m: PsmModel) -> FieldExpr:
    Xs, As = fields(m.target)
    terms = [mul(As[i], d1(Xs[i])) for i in range(m.n)]
    for i in range(m.n):
        for j in range(i + 1, m.n):
            if m.P[i][j]:
                terms.append(mul(fn(m.P[i][j], m.target_coords), mul(As[i], As[j])))
    return add(*terms)


def psm_variation_expr(m: PsmModel, eps: Sequence[Poly]) -> FieldExpr:
    """Variation density minus ``d1 Phi(e)`` as a jet expression."""
    X = m.target_coords
    Xs, As = fields(m.target)
    terms = []
    for i in range(m.n):
        for j in range(m.n):
            w = differentiate(eps[j], X[i]) - differentiate(eps[i], X[j])
            if not w:
                continue
            for k in range(m.n):
                if m.P[j][k]:
                    terms.append(mul(fn(w * m.P[j][k], X), mul(As[k], d1(Xs[i]))))
            for k in range(m.n):
                for l in range(m.n):
                    c = m.P[k][i] * m.P[l][j]
                    if c:
                        terms.append(mul(fn(w * c * _HALF, X), mul(As[k], As[l])))
    return add(*terms)


def connection_invariance_check(
    m: PsmModel, conn: Connection, trials: int = 8, degree: int = 2, seed: int = 0
):
    """``delta_conn L - d1(e_i d1 X^i)`` on random fields and parameters ``e(x, X)``."""
    r = m.n
    eps = [param(f"e{I}") for I in range(r)]
    spec = delta_conn(m.target, eps, conn)
    Xs, _ = fields(m.target)
    boundary = d1(add(*(mul(eps[i], d1(Xs[i])) for i in range(r))))
    expr = add(vary(lagrangian_expr(m), spec), neg(boundary))
    names = list(m.sigma_coords) + list(m.target_coords)

    def sampler(rng, phi):
        return {f"e{I}": random_poly(rng, names, degree, density=0.5) for I in range(r)}

    return identity_check(expr, m.source, m.target, trials, degree, seed, param_sampler=sampler)
