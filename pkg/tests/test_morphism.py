import numpy as np
import pytest
from hypothesis import given

from lieoid.algebroid import FrameChange, Section, change_frame, poisson_cotangent, so3, tangent_bundle
from lieoid.eform import EForm, e_differential, embed, wedge
from lieoid.gauge import Connection
from lieoid.morphism import (
    BundleMap,
    bundle_map_from_json,
    bundle_map_to_json,
    curvature,
    e_f_phi,
    e_phi,
    f_gamma,
    f_phi,
    frame_curvature_defect,
    graph_pullback,
    identity_map,
    is_morphism,
    phi_related,
    projectable_sections,
    pullback,
    random_bundle_map,
    random_eform,
)
from lieoid.symexpr import Poly, parse

from corpus_helpers import MORPHISMS, NON_MORPHISMS, corpus_maps
from strategies import seeds

MAPS = corpus_maps()
TR2 = tangent_bundle(["x1", "x2"])
x1, x2 = Poly.var("x1"), Poly.var("x2")


def dx(E, *idx):
    out = EForm.function(E, Poly.const(1))
    for i in idx:
        out = wedge(out, EForm.generator(E, i))
    return out


class TestR4Counterexample:
    phi = MAPS["r4_counterexample"]

    def test_pullback(self):
        E2 = self.phi.target
        assert pullback(self.phi, EForm.generator(E2, 1)) == dx(TR2, 0).scale(x2)
        assert pullback(self.phi, EForm.function(E2, Poly.var("X3"))) == EForm.zero(TR2)

    def test_curvature(self):
        F = curvature(self.phi)
        assert not any(F.F_base)
        assert F.F_frame[1] == dx(TR2, 1, 0)
        assert not F.F_frame[0] and not F.F_frame[2] and not F.F_frame[3]

    def test_verdict(self):
        rep = is_morphism(self.phi)
        assert not rep.is_morphism and rep.agree
        assert [w["name"] for w in rep.witnesses] == ["F[2]"]

    def test_f_phi_on_product(self):
        E2 = self.phi.target
        w = wedge(EForm.function(E2, Poly.var("X1")), EForm.generator(E2, 1))
        F = curvature(self.phi)
        expected = wedge(F.F_base[0], pullback(self.phi, EForm.generator(E2, 1))) + F.F_frame[1].scale(self.phi.compose(Poly.var("X1")))
        assert f_phi(self.phi, w) == expected

    def test_no_projectable_sections(self):
        E2 = self.phi.target
        e = lambda I: Section.basis(4, I)
        pairs = [(Section.basis(2, 0), e(0)), (Section.basis(2, 1), e(2)), (Section([1, 1]), e(0) + e(2))]
        rep = phi_related(self.phi, pairs)
        assert rep.anchor_ok and not any(rep.related)
        assert projectable_sections(self.phi, 2)["s1_dim"] == 0

    def test_f_gamma(self):
        conn = Connection({(1, 0, 0): 1})
        assert f_gamma(self.phi, conn).F_frame == curvature(self.phi).F_frame


class TestSymplectic:
    phi = MAPS["symplectic_solution"]

    def test_flat(self):
        assert curvature(self.phi).is_zero()
        assert is_morphism(self.phi).is_morphism

    def test_related_pair(self):
        s1 = Section.basis(2, 0)
        comps = [a.coeff((0,)) for a in self.phi.A]
        # A(d_1) = (0, -1) is constant, so it is phi0-related to the constant section
        s2 = Section(comps)
        assert phi_related(self.phi, [(s1, s2)]).ok

    @given(seed=seeds)
    def test_e_f_phi_vanishes(self, seed):
        w = random_eform(np.random.default_rng(seed), self.phi.graph_algebroid, 2, 1)
        assert not e_f_phi(self.phi, w)


class TestSimpleMaps:
    def test_zero_map(self):
        E2 = poisson_cotangent([[0, Poly.var("X1")], [-Poly.var("X1"), 0]], ["X1", "X2"])
        phi = BundleMap(TR2, E2, [3, -1], [EForm.zero(TR2)] * 2)
        assert curvature(phi).is_zero()

    def test_identity(self):
        for E in (TR2, so3()):
            assert is_morphism(identity_map(E)).is_morphism
        rep = phi_related(identity_map(TR2), [(Section.basis(2, m), Section.basis(2, m)) for m in range(2)])
        assert rep.ok

    def test_surjective_automorphism_of_so3(self):
        # cyclic permutation of the basis preserves the structure constants
        E = so3()
        perm = [[0, 0, 1], [1, 0, 0], [0, 1, 0]]
        phi = BundleMap(E, E, [], [EForm.one_form(E, row) for row in perm])
        pairs = [(Section.basis(3, a), Section([perm[I][a] for I in range(3)])) for a in range(3)]
        rep = phi_related(phi, pairs)
        assert rep.ok and is_morphism(phi).is_morphism

    def test_composition_of_differentials(self):
        TR1 = tangent_bundle(["Y"])
        f = parse("x1^3 - x1*x2", ["x1", "x2"])
        phi = BundleMap(TR2, TR1, [f], [[f.diff("x1"), f.diff("x2")]])
        assert is_morphism(phi).is_morphism


@pytest.mark.parametrize("name", MORPHISMS + NON_MORPHISMS)
class TestCorpus:
    def test_verdict_and_spot_check(self, name):
        rep = is_morphism(MAPS[name])
        assert rep.is_morphism == (name in MORPHISMS)
        assert rep.agree

    def test_graph_criterion(self, name):
        phi = MAPS[name]
        rng = np.random.default_rng(11)
        defects = []
        for _ in range(10):
            w = random_eform(rng, phi.graph_algebroid, 2, 2)
            defects.append(bool(_graph_defect(phi, w)))
        gens = [EForm.generator(phi.graph_algebroid, I) for I in range(phi.graph_algebroid.r)]
        gens += [EForm.function(phi.graph_algebroid, Poly.var(x)) for x in phi.graph_algebroid.base_coords]
        defects += [bool(_graph_defect(phi, w)) for w in gens]
        assert (not any(defects)) == (name in MORPHISMS)

    def test_projector(self, name):
        phi = MAPS[name]
        rng = np.random.default_rng(5)
        for _ in range(5):
            w = random_eform(rng, phi.graph_algebroid, 2, 1)
            once = e_phi(phi, w)
            assert e_phi(phi, once) == once

    def test_leibniz(self, name):
        phi = MAPS[name]
        rng = np.random.default_rng(9)
        for _ in range(3):
            a = random_eform(rng, phi.target, 2, 1)
            b = random_eform(rng, phi.target, 2, 1)
            for p in a.degrees():
                ap = a.part(p)
                lhs = f_phi(phi, wedge(ap, b))
                rhs = wedge(f_phi(phi, ap), pullback(phi, b)) + wedge(pullback(phi, ap), f_phi(phi, b)).scale((-1) ** p)
                assert lhs == rhs

    def test_json_round_trip(self, name):
        phi = MAPS[name]
        back = bundle_map_from_json(bundle_map_to_json(phi), phi.source, phi.target)
        assert back.phi0 == phi.phi0 and back.A == phi.A


def _graph_defect(phi, w):
    """``d1 Phi^gra - Phi^gra ^Ed`` on one form."""
    return e_differential(graph_pullback(phi, w)) - graph_pullback(phi, e_differential(w))


class TestGraph:
    phi = MAPS["r4_counterexample"]

    def test_mixed_generator(self):
        Esum = self.phi.graph_algebroid
        w = wedge(EForm.generator(Esum, 0), EForm.generator(Esum, 2 + 1))
        assert graph_pullback(self.phi, w) == wedge(dx(TR2, 0), self.phi.A[1])

    @given(seed=seeds)
    def test_left_inverse(self, seed):
        w1 = random_eform(np.random.default_rng(seed), TR2, 2, 2)
        Esum = self.phi.graph_algebroid
        assert graph_pullback(self.phi, embed(w1, Esum, 0)) == w1
        assert e_phi(self.phi, embed(w1, Esum, 0)) == embed(w1, Esum, 0)

    def test_projector_on_frame(self):
        Esum = self.phi.graph_algebroid
        for I in range(4):
            assert e_phi(self.phi, EForm.generator(Esum, 2 + I)) == embed(self.phi.A[I], Esum, 0)

    def test_e_f_phi_on_coordinates(self):
        Esum = self.phi.graph_algebroid
        F = curvature(self.phi)
        for i, X in enumerate(self.phi.target.base_coords):
            assert e_f_phi(self.phi, EForm.function(Esum, Poly.var(X))) == embed(F.F_base[i], Esum, 0)
        for a in range(2):
            assert not e_f_phi(self.phi, EForm.generator(Esum, a))


class TestFrameIdentity:
    @given(seed=seeds)
    def test_curvature_transport(self, seed):
        E2 = poisson_cotangent([[0, Poly.var("X1") ** 2], [-Poly.var("X1") ** 2, 0]], ["X1", "X2"])
        X1 = Poly.var("X1")
        F = FrameChange([[1, X1], [0, 1]], [[1, -X1], [0, 1]])
        Et = change_frame(E2, F)
        phi = random_bundle_map(np.random.default_rng(seed), TR2, E2, 2)
        assert not any(frame_curvature_defect(phi, F, Et))

    def test_constant_change(self):
        E = so3()
        F = FrameChange([[1, 2, 0], [0, 1, 0], [0, 0, 1]], [[1, -2, 0], [0, 1, 0], [0, 0, 1]])
        phi = random_bundle_map(np.random.default_rng(1), TR2, E, 2)
        assert not any(frame_curvature_defect(phi, F, change_frame(E, F)))
