import numpy as np
import pytest
from hypothesis import given

from lieoid.algebroid import Section, exterior_sum, lie_algebra, poisson_cotangent, section_bracket, so3, tangent_bundle
from lieoid.eform import (
    AlgebroidMismatch,
    DegreeZero,
    EForm,
    bigrade,
    contract,
    e_differential,
    embed,
    format_eform,
    lie_derivative,
    merge_indices,
    parse_eform,
    tensor,
    wedge,
)
from lieoid.morphism import random_eform, random_poly
from lieoid.symexpr import Poly, parse

from strategies import seeds

X3 = ["X1", "X2", "X3"]
LP = poisson_cotangent([[parse(e, X3) for e in row] for row in [["0", "X3", "-X2"], ["-X3", "0", "X1"], ["X2", "-X1", "0"]]], X3)
QUAD = poisson_cotangent([[parse(e, ["X1"]) for e in row] for row in [["0", "X1^2"], ["-X1^2", "0"]]], ["X1", "X2"])
TR2 = tangent_bundle(["x1", "x2"])
SO3 = so3()
BROKEN = lie_algebra({(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (1, 1, 2): 1}, 3)
VALID = [SO3, TR2, LP, QUAD, tangent_bundle(["y1", "y2", "y3"])]


def b(E, I):
    return EForm.generator(E, I)


def rng_form(seed, E, max_degree=3):
    return random_eform(np.random.default_rng(seed), E, max_degree=max_degree, poly_degree=2)


class TestWedge:
    def test_antisymmetry(self):
        assert wedge(b(SO3, 0), b(SO3, 1)) == -wedge(b(SO3, 1), b(SO3, 0))

    def test_square_vanishes(self):
        assert not wedge(b(SO3, 0), b(SO3, 0))

    def test_bilinear(self):
        E = LP
        lhs = wedge(b(E, 0).scale(Poly.var("X1")), wedge(b(E, 1), b(E, 2)))
        assert lhs == EForm(E, {(0, 1, 2): Poly.var("X1")})

    def test_merge_signs(self):
        assert merge_indices((1,), (0,)) == (-1, (0, 1))
        assert merge_indices((0, 2), (1,)) == (-1, (0, 1, 2))
        assert merge_indices((0,), (0,)) is None

    def test_mismatch(self):
        with pytest.raises(AlgebroidMismatch):
            wedge(b(SO3, 0), b(TR2, 0))

    @pytest.mark.parametrize("E", VALID, ids=lambda E: E.name)
    @given(seed=seeds)
    def test_associative_and_graded_commutative(self, E, seed):
        rng = np.random.default_rng(seed)
        a, c, d = (random_eform(rng, E, 2, 1) for _ in range(3))
        assert wedge(wedge(a, c), d) == wedge(a, wedge(c, d))
        for p in a.degrees():
            for q in c.degrees():
                ap, cq = a.part(p), c.part(q)
                assert wedge(ap, cq) == wedge(cq, ap).scale((-1) ** (p * q))


class TestDifferential:
    def test_tangent_bundle_is_de_rham(self):
        f = parse("x1^2*x2", ["x1", "x2"])
        df = e_differential(EForm.function(TR2, f))
        assert df == EForm(TR2, {(0,): parse("2*x1*x2", ["x1", "x2"]), (1,): parse("x1^2", ["x1"])})

    def test_lie_poisson_coordinate(self):
        # ^Ed X^1 = P^{j1} b_j = -X3 b_2 + X2 b_3
        d = e_differential(EForm.function(LP, Poly.var("X1")))
        assert d == EForm(LP, {(1,): -Poly.var("X3"), (2,): Poly.var("X2")})

    def test_generator_structure_equation(self):
        # ^Ed b^3 = -C^3_12 b^1 b^2 on so(3)
        assert e_differential(b(SO3, 2)) == EForm(SO3, {(0, 1): Poly.const(-1)})

    @pytest.mark.parametrize("E", VALID, ids=lambda E: E.name)
    @given(seed=seeds)
    def test_d_squared_zero(self, E, seed):
        w = rng_form(seed, E)
        assert not e_differential(e_differential(w))

    def test_d_squared_detects_broken_algebra(self):
        dd = [e_differential(e_differential(b(BROKEN, I))) for I in range(3)]
        assert not dd[0] and not dd[1]
        assert dd[2] == EForm(BROKEN, {(0, 1, 2): Poly.const(-1)})

    @pytest.mark.parametrize("E", VALID, ids=lambda E: E.name)
    @given(seed=seeds)
    def test_graded_leibniz(self, E, seed):
        rng = np.random.default_rng(seed)
        a, c = random_eform(rng, E, 2, 2), random_eform(rng, E, 2, 2)
        for p in a.degrees():
            ap = a.part(p)
            lhs = e_differential(wedge(ap, c))
            rhs = wedge(e_differential(ap), c) + wedge(ap, e_differential(c)).scale((-1) ** p)
            assert lhs == rhs


class TestContraction:
    def test_examples(self):
        w = wedge(b(SO3, 0), b(SO3, 1))
        assert contract(w, Section.basis(3, 0)) == b(SO3, 1)
        assert contract(w, Section.basis(3, 1)) == -b(SO3, 0)

    def test_zero_form(self):
        with pytest.raises(DegreeZero):
            contract(EForm.function(SO3, Poly.const(1)), Section.basis(3, 0))

    @given(seed=seeds)
    def test_nilpotent(self, seed):
        rng = np.random.default_rng(seed)
        w = random_eform(rng, LP, 3, 2).part(2) + random_eform(rng, LP, 3, 2).part(3)
        s = Section([random_poly(rng, X3, 1) for _ in range(3)])
        if w:
            inner = contract(w, s)
            assert not inner or not contract(inner, s)

    @pytest.mark.parametrize("E", [LP, QUAD, TR2], ids=lambda E: E.name)
    @given(seed=seeds)
    def test_bracket_from_derived_contraction(self, E, seed):
        # i_[s,t] = [L_s, i_t] on generators
        rng = np.random.default_rng(seed)
        s, t = (Section([random_poly(rng, E.base_coords, 1) for _ in range(E.r)]) for _ in range(2))
        br = section_bracket(E, s, t)
        for K in range(E.r):
            bk = b(E, K)
            lhs = lie_derivative(contract(bk, t), s) - contract(lie_derivative(bk, s), t)
            assert lhs == EForm.function(E, br[K])


class TestLieDerivative:
    def test_lie_poisson_coordinates(self):
        for i, name in enumerate(X3):
            got = lie_derivative(EForm.function(LP, Poly.var(name)), Section.basis(3, 0))
            assert got == EForm.function(LP, LP.rho(0, i))

    def test_lie_algebra_functions(self):
        assert not lie_derivative(EForm.function(SO3, Poly.const(5)), Section.basis(3, 1))

    def test_generator_formula(self):
        rng = np.random.default_rng(3)
        s = Section([random_poly(rng, X3, 1) for _ in range(3)])
        for I in range(3):
            expected = EForm.zero(LP)
            for J in range(3):
                coeff = sum(
                    (LP.rho(J, i) * s[I].diff(X3[i]) for i in range(3)),
                    Poly.const(0),
                )
                for K in range(3):
                    coeff = coeff + LP.c(I, J, K) * s[K]
                expected = expected + b(LP, J).scale(coeff)
            assert lie_derivative(b(LP, I), s) == expected

    @pytest.mark.parametrize("E", [LP, SO3, TR2], ids=lambda E: E.name)
    @given(seed=seeds)
    def test_representation(self, E, seed):
        rng = np.random.default_rng(seed)
        s, t = (Section([random_poly(rng, E.base_coords, 1) for _ in range(E.r)]) for _ in range(2))
        w = random_eform(rng, E, 2, 1)
        lhs = lie_derivative(lie_derivative(w, t), s) - lie_derivative(lie_derivative(w, s), t)
        assert lhs == lie_derivative(w, section_bracket(E, s, t))


class TestExteriorSum:
    Esum = exterior_sum(TR2, LP)

    def test_bigrade_and_sign(self):
        w1 = b(TR2, 0)
        w2 = wedge(b(LP, 0), b(LP, 1))
        t = tensor(w1, w2, self.Esum)
        assert bigrade((0, 2, 3), self.Esum) == (1, 2)
        # (w1 (x) 1) ^ (1 (x) w2) vs (1 (x) w2) ^ (w1 (x) 1): sign (-1)^{1*2}
        assert t == wedge(embed(w2, self.Esum, 1), embed(w1, self.Esum, 0))

    @given(seed=seeds)
    def test_differential_splits(self, seed):
        rng = np.random.default_rng(seed)
        w1 = random_eform(rng, TR2, 1, 2).part(1)
        w2 = random_eform(rng, LP, 2, 1)
        # ^Ed(w1 (x) w2) = d1 w1 (x) w2 + (-1)^{deg w1} w1 (x) d2 w2 with constant coefficients
        w1c = w1.map_coeffs(lambda p: Poly.const(p.constant_term()))
        w2c = w2.map_coeffs(lambda p: Poly.const(p.constant_term()))
        lhs = e_differential(tensor(w1c, w2c, self.Esum))
        rhs = tensor(e_differential(w1c), w2c, self.Esum) - tensor(w1c, e_differential(w2c), self.Esum)
        assert lhs == rhs


class TestText:
    def test_format(self):
        w = EForm(LP, {(0, 1): Poly.var("X1")})
        assert format_eform(w) == "X1*dX1^dX2"
        assert format_eform(EForm(TR2, {(0,): parse("a + b", ["a", "b"])})) == "(a + b)*dx1"
        assert format_eform(EForm(TR2, {(0, 1): Poly.const(-1)})) == "-dx1^dx2"
        assert format_eform(EForm.zero(TR2)) == "0"

    @pytest.mark.parametrize("E", VALID, ids=lambda E: E.name)
    @given(seed=seeds)
    def test_round_trip(self, E, seed):
        w = rng_form(seed, E)
        assert parse_eform(format_eform(w), E) == w

    def test_parse_power_versus_wedge(self):
        w = parse_eform("X1^2*dX1^dX2", LP)
        assert w == EForm(LP, {(0, 1): parse("X1^2", X3)})
