"""Numeric gauge flow on a periodic worldsheet.

The torus ``[0, L)^2`` carries an ``N x N`` grid.  Initial data and
parameters are polynomials in the trigonometric variables
``c_mu = cos(k x^mu)``, ``s_mu = sin(k x^mu)`` (``k = 2 pi / L``), the symbol
``k`` itself and the target coordinates, so the same Poly objects drive the
exact and the numeric side.  Derivatives are periodic central differences
and time stepping is classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .algebroid import Algebroid
from .symexpr import Poly, differentiate, parse

__all__ = [
    "NonFinite",
    "TRIG_VARS",
    "GridField",
    "FlowConfig",
    "FlowResult",
    "compile_poly",
    "torus_derivative",
    "sample",
    "residuals",
    "integrate_flow",
    "action_numeric",
    "parse_flow_expr",
]

TRIG_VARS = ("c1", "s1", "c2", "s2", "k")


class NonFinite(FloatingPointError):
    pass


def compile_poly(p: Poly):
    """Numeric evaluator ``env -> array`` with a fixed operation order."""
    terms = [(float(c), tuple(mono)) for mono, c in sorted(p.items(), key=lambda t: t[0])]

    def evaluate(env: Mapping[str, object]):
        out = None
        for c, mono in terms:
            t = c
            for name, e in mono:
                v = env[name]
                t = t * (v if e == 1 else v**e)
            out = t if out is None else out + t
        if out is None:
            return 0.0
        return out

    return evaluate


def torus_derivative(p: Poly, mu: int) -> Poly:
    """Exact ``d/dx^mu`` of a trigonometric polynomial (``mu`` is 0 or 1)."""
    c, s = f"c{mu + 1}", f"s{mu + 1}"
    k = Poly.var("k")
    return k * (Poly.var(c) * differentiate(p, s) - Poly.var(s) * differentiate(p, c))


@dataclass
class GridField:
    N: int
    L: float
    X: np.ndarray  # (n, N, N)
    A: np.ndarray  # (r, 2, N, N)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        N = self.N
        if self.X.ndim != 3 or self.X.shape[1:] != (N, N):
            raise ValueError("X must have shape (n, N, N)")
        if self.A.ndim != 4 or self.A.shape[1:] != (2, N, N):
            raise ValueError("A must have shape (r, 2, N, N)")

    @property
    def h(self) -> float:
        return self.L / self.N

    def copy(self) -> "GridField":
        return GridField(self.N, self.L, self.X.copy(), self.A.copy())


def grid_env(N: int, L: float) -> dict:
    k = 2 * math.pi / L
    x = np.arange(N) * (L / N)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    return {"c1": np.cos(k * x1), "s1": np.sin(k * x1), "c2": np.cos(k * x2), "s2": np.sin(k * x2), "k": k}


def sample(N: int, L: float, X_exprs: Sequence[Poly], A_exprs: Sequence[Sequence[Poly]]) -> GridField:
    """Sample trigonometric initial data on the grid."""
    env = grid_env(N, L)
    shape = (N, N)

    def ev(p):
        return np.broadcast_to(np.asarray(compile_poly(p)(env), dtype=float), shape)

    X = np.stack([ev(p) for p in X_exprs]) if X_exprs else np.zeros((0, N, N))
    A = np.stack([np.stack([ev(row[0]), ev(row[1])]) for row in A_exprs]) if A_exprs else np.zeros((0, 2, N, N))
    return GridField(N, L, X, A)


def _D(f: np.ndarray, mu: int, h: float) -> np.ndarray:
    axis = f.ndim - 2 + mu
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * h)


class _Target:
    """Compiled anchor and structure functions of a target algebroid."""

    def __init__(self, E: Algebroid):
        self.E = E
        self.coords = E.base_coords
        self.rho = [(I, i, compile_poly(E.rho(I, i))) for I in range(E.r) for i in range(E.n) if E.rho(I, i)]
        self.C = []
        for (I, J, K), c in sorted(E._structure.items()):
            f = compile_poly(c)
            self.C.append((I, J, K, f, 1.0))
            self.C.append((I, K, J, f, -1.0))

    def env(self, g: GridField, base: Mapping | None = None) -> dict:
        env = dict(base or {})
        for i, name in enumerate(self.coords):
            env[name] = g.X[i]
        return env


def _fields_strengths(g: GridField, T: _Target):
    h = g.h
    env = T.env(g)
    n, r = g.X.shape[0], g.A.shape[0]
    Fb = np.empty((n, 2) + g.X.shape[1:])
    for i in range(n):
        for mu in range(2):
            Fb[i, mu] = _D(g.X[i], mu, h)
    for I, i, f in T.rho:
        val = f(env)
        for mu in range(2):
            Fb[i, mu] = Fb[i, mu] - val * g.A[I, mu]
    Ff = np.empty((r,) + g.X.shape[1:])
    for I in range(r):
        Ff[I] = _D(g.A[I, 1], 0, h) - _D(g.A[I, 0], 1, h)
    for I, J, K, f, sign in T.C:
        # C^I_JK A^J_1 A^K_2 summed over ordered J, K
        Ff[I] = Ff[I] + sign * f(env) * g.A[J, 0] * g.A[K, 1]
    return Fb, Ff


def _sup(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def residuals(g: GridField, model) -> dict:
    """Sup norms of the discrete field strengths ``F^i_mu`` and ``F^I_12``."""
    T = model if isinstance(model, _Target) else _Target(_algebroid(model))
    if not (np.all(np.isfinite(g.X)) and np.all(np.isfinite(g.A))):
        raise NonFinite("grid field has non-finite entries")
    Fb, Ff = _fields_strengths(g, T)
    return {"supF_base": _sup(Fb), "supF_frame": _sup(Ff)}


def _algebroid(model) -> Algebroid:
    return model if isinstance(model, Algebroid) else model.target


@dataclass
class FlowConfig:
    dt: float
    T: float
    eps: list
    model: object
    scheme: str = "rk4"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= 0:
            raise ValueError("T must be non-negative")
        if self.scheme != "rk4":
            raise ValueError("only the rk4 scheme is available")
        E = _algebroid(self.model)
        if len(self.eps) != E.r:
            raise ValueError(f"eps needs {E.r} components")


@dataclass
class FlowResult:
    rows: list = field(default_factory=list)  # (t, supF_base, supF_frame, action)
    final: GridField | None = None
    aborted: bool = False
    steps: int = 0

    def csv(self) -> str:
        lines = ["t,supF_base,supF_frame,action"]
        for t, fb, ff, s in self.rows:
            act = "" if s is None else repr(s)
            lines.append(f"{t!r},{fb!r},{ff!r},{act}")
        return "\n".join(lines) + "\n"


def _rhs(g: GridField, T: _Target, eps_fns, base_env):
    env = T.env(g, base_env)
    eps = [f(env) for f in eps_fns]
    eps = [np.broadcast_to(np.asarray(e, dtype=float), g.X.shape[1:]) for e in eps]
    dX = np.zeros_like(g.X)
    for I, i, f in T.rho:
        dX[i] = dX[i] + f(env) * eps[I]
    dA = np.empty_like(g.A)
    for I in range(g.A.shape[0]):
        for mu in range(2):
            dA[I, mu] = _D(eps[I], mu, g.h)
    for I, J, K, f, sign in T.C:
        c = sign * f(env)
        for mu in range(2):
            dA[I, mu] = dA[I, mu] + c * g.A[J, mu] * eps[K]
    return dX, dA


def integrate_flow(g: GridField, cfg: FlowConfig, record_every: int = 1) -> FlowResult:
    """RK4 for ``X_t = rho e`` and ``A_t = d1 e + C(A, e)``."""
    # overflow is detected explicitly after each step
    with np.errstate(all="ignore"):
        return _integrate(g, cfg, record_every)


def _integrate(g: GridField, cfg: FlowConfig, record_every: int) -> FlowResult:
    E = _algebroid(cfg.model)
    T = _Target(E)
    base_env = grid_env(g.N, g.L)
    eps_fns = [compile_poly(p) for p in cfg.eps]
    psm = None if isinstance(cfg.model, Algebroid) else cfg.model
    steps = int(round(cfg.T / cfg.dt))
    dt = cfg.dt
    state = g.copy()
    out = FlowResult()

    def record(t, st):
        res = residuals(st, T)
        act = action_numeric(st, psm) if psm is not None else None
        out.rows.append((t, res["supF_base"], res["supF_frame"], act))

    record(0.0, state)
    for step in range(1, steps + 1):
        X0, A0 = state.X, state.A

        def at(dX, dA, a):
            return GridField(state.N, state.L, X0 + a * dX, A0 + a * dA)

        k1 = _rhs(state, T, eps_fns, base_env)
        k2 = _rhs(at(*k1, dt / 2), T, eps_fns, base_env)
        k3 = _rhs(at(*k2, dt / 2), T, eps_fns, base_env)
        k4 = _rhs(at(*k3, dt), T, eps_fns, base_env)
        X1 = X0 + (dt / 6) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        A1 = A0 + (dt / 6) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if not (np.all(np.isfinite(X1)) and np.all(np.isfinite(A1))):
            out.aborted = True
            break
        state = GridField(state.N, state.L, X1, A1)
        out.steps = step
        if step % record_every == 0 or step == steps:
            record(step * dt, state)
    out.final = state
    return out


def action_numeric(g: GridField, m) -> float:
    """Nodal quadrature of ``A_i ^ dX^i + 1/2 P^{ij} A_i ^ A_j`` over the torus."""
    h = g.h
    n = g.X.shape[0]
    env = {name: g.X[i] for i, name in enumerate(m.target_coords)}
    dens = np.zeros(g.X.shape[1:])
    for i in range(n):
        dens = dens + g.A[i, 0] * _D(g.X[i], 1, h) - g.A[i, 1] * _D(g.X[i], 0, h)
    for i in range(n):
        for j in range(i + 1, n):
            if m.P[i][j]:
                pij = compile_poly(m.P[i][j])(env)
                dens = dens + pij * (g.A[i, 0] * g.A[j, 1] - g.A[i, 1] * g.A[j, 0])
    # numpy's pairwise summation over a fixed row-major layout
    return float(np.sum(np.ascontiguousarray(dens).ravel()) * h * h)


def parse_flow_expr(text: str, target_coords: Sequence[str]) -> Poly:
    return parse(text, list(TRIG_VARS) + list(target_coords))
