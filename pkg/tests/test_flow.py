import math

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from lieoid.flow import (
    FlowConfig,
    GridField,
    NonFinite,
    action_numeric,
    compile_poly,
    integrate_flow,
    parse_flow_expr,
    residuals,
    sample,
    torus_derivative,
)
from lieoid.psm import PsmModel
from lieoid.symexpr import Poly, eval_at, parse

from strategies import polys

TWO_PI = 2 * math.pi
XS = ["X1", "X2"]


def model(rows, coords=XS):
    return PsmModel([[parse(e, coords) for e in row] for row in rows], coords)


SYMP = model([["0", "1"], ["-1", "0"]])
QUAD = model([["0", "X1^2"], ["-X1^2", "0"]])
ZERO4 = model([["0"] * 4 for _ in range(4)], ["X1", "X2", "X3", "X4"])

ONSHELL_X = ["s1 + 1/2*c2", "c1*s2 + s1"]
ONSHELL_A = [["k*c1 - k*s1*s2", "k*c1*c2"], ["-k*c1", "1/2*k*s2"]]
ONSHELL_EPS = ["X1*c2 + s1", "1/2*X2^2 + c1*s2"]


def grid(m, N, X, A, L=TWO_PI):
    c = m.target_coords
    return sample(N, L, [parse_flow_expr(e, c) for e in X], [[parse_flow_expr(e, c) for e in row] for row in A])


def cfg(m, eps, dt=0.01, T=1.0):
    return FlowConfig(dt=dt, T=T, eps=[parse_flow_expr(e, m.target_coords) for e in eps], model=m)


class TestResiduals:
    def test_constant_map_flat(self):
        g = grid(SYMP, 16, ["3", "-1/2"], [["0", "0"], ["0", "0"]])
        assert residuals(g, SYMP) == {"supF_base": 0.0, "supF_frame": 0.0}

    def test_on_shell_data_is_second_order(self):
        r = [residuals(grid(SYMP, N, ONSHELL_X, ONSHELL_A), SYMP)["supF_base"] for N in (32, 64)]
        assert 3 < r[0] / r[1] < 5

    def test_broken_frame_equation_sees_unit_curvature(self):
        # k = 1 here; A^2 = s2 dx1 on a zero target has F^2_12 = -c2
        A = [["0", "0"]] * 4
        A[1] = ["s2", "0"]
        for N in (16, 64, 256):
            g = grid(ZERO4, N, ["1", "2", "3", "4"], A)
            res = residuals(g, ZERO4)
            assert res["supF_base"] == 0.0
            h = TWO_PI / N
            assert res["supF_frame"] == pytest.approx(math.sin(h) / h, abs=1e-12)
            assert abs(res["supF_frame"] - 1) < h * h

    def test_non_finite(self):
        g = grid(SYMP, 8, ["0", "0"], [["0", "0"], ["0", "0"]])
        g.X[0, 1, 1] = np.nan
        with pytest.raises(NonFinite):
            residuals(g, SYMP)


class TestEvaluation:
    @given(polys(["c1", "s1", "c2", "s2", "k", "X1"], max_terms=5, max_exp=3))
    def test_compiled_matches_symbolic(self, p):
        rng = np.random.default_rng(4)
        f = compile_poly(p)
        for _ in range(5):
            pt = {v: float(rng.uniform(-2, 2)) for v in ("c1", "s1", "c2", "s2", "k", "X1")}
            exact = float(eval_at(p, {v: mpq(x) for v, x in pt.items()}))
            assert f(pt) == pytest.approx(exact, rel=1e-12, abs=1e-12)

    def test_torus_derivative(self):
        p = parse_flow_expr("c1*s2^2 + s1", [])
        assert torus_derivative(p, 0) == parse_flow_expr("-k*s1*s2^2 + k*c1", [])
        assert torus_derivative(p, 1) == parse_flow_expr("2*k*c1*c2*s2", [])

    def test_sample_shapes(self):
        g = grid(QUAD, 8, ["c1", "s2"], [["1", "0"], ["k", "s1"]])
        assert g.X.shape == (2, 8, 8) and g.A.shape == (2, 2, 8, 8)
        assert g.h == pytest.approx(TWO_PI / 8)

    def test_grid_shape_validation(self):
        with pytest.raises(ValueError):
            GridField(4, 1.0, np.zeros((2, 4, 3)), np.zeros((2, 2, 4, 4)))


class TestFlow:
    def test_zero_parameter_is_stationary(self):
        g = grid(QUAD, 16, ["1/2*s1 + 1", "c2"], [["s2", "c1"], ["s1*s2", "c2"]])
        res = integrate_flow(g, cfg(QUAD, ["0", "0"], T=0.1))
        assert np.array_equal(res.final.X, g.X) and np.array_equal(res.final.A, g.A)
        assert res.steps == 10

    def test_deterministic(self):
        g = grid(QUAD, 16, ["1/2*s1 + 1", "c2"], [["s2", "c1"], ["s1*s2", "c2"]])
        c = cfg(QUAD, ["X2", "X1"], T=0.1)
        a, b = integrate_flow(g, c), integrate_flow(g, c)
        assert a.csv() == b.csv()
        assert a.final.X.tobytes() == b.final.X.tobytes()

    def test_on_shell_flow_preserves_residual(self):
        N = 32
        g = grid(SYMP, N, ONSHELL_X, ONSHELL_A)
        res = integrate_flow(g, cfg(SYMP, ONSHELL_EPS, T=0.5))
        assert not res.aborted
        fb0 = res.rows[0][1]
        assert max(r[1] for r in res.rows) <= 10 * fb0
        assert max(r[2] for r in res.rows) < 1e-10

    def test_blowup_aborts(self):
        g = grid(QUAD, 8, ["1", "1"], [["0", "0"], ["0", "0"]])
        res = integrate_flow(g, cfg(QUAD, ["X2^4", "X1^4"], dt=0.5, T=20))
        assert res.aborted and res.steps < 40

    def test_csv_header(self):
        g = grid(SYMP, 8, ["0", "0"], [["0", "0"], ["0", "0"]])
        text = integrate_flow(g, cfg(SYMP, ["0", "0"], T=0.02)).csv()
        lines = text.splitlines()
        assert lines[0] == "t,supF_base,supF_frame,action" and len(lines) == 4


class TestAction:
    def test_zero_connection(self):
        g = grid(QUAD, 16, ["s1 + 2", "c1*s2"], [["0", "0"], ["0", "0"]])
        assert action_numeric(g, QUAD) == 0.0

    def test_exact_value(self):
        # X^1 = s2 and A_1 = c2 dx1: density c2^2 up to the difference-quotient factor
        g = grid(SYMP, 32, ["s2", "0"], [["c2", "0"], ["0", "0"]])
        h = TWO_PI / 32
        assert action_numeric(g, SYMP) == pytest.approx(math.sin(h) / h * math.pi * math.pi * 2, rel=1e-12)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"dt": 0}, {"dt": -1}, {"T": -1}, {"scheme": "euler"}])
    def test_rejects(self, kw):
        base = dict(dt=0.1, T=1.0, eps=[Poly.const(0)] * 2, model=SYMP)
        base.update(kw)
        with pytest.raises(ValueError):
            FlowConfig(**base)

    def test_eps_length(self):
        with pytest.raises(ValueError):
            FlowConfig(dt=0.1, T=1.0, eps=[Poly.const(0)], model=SYMP)

    @given(st.floats(min_value=1e-3, max_value=1.0))
    def test_accepts_positive_dt(self, dt):
        assert FlowConfig(dt=dt, T=1.0, eps=[Poly.const(0)] * 2, model=SYMP).dt == dt
