"""Lie algebroids given by local data on a single polynomial chart.

An algebroid of rank ``r`` over ``R^n`` is fixed by the anchor components
``rho^i_I`` (``anchor[I][i]``) and structure functions ``C^I_JK`` defined by
``[b_J, b_K] = C^I_JK b_I``.  Only ``J < K`` is stored; the other entries are
read off by antisymmetry.  All indices are 0-based in code and 1-based in
reports and JSON.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .symexpr import Poly, differentiate, parse, substitute, to_str

__all__ = [
    "AlgebroidError",
    "NotAntisymmetric",
    "NameClash",
    "InvalidInverse",
    "Algebroid",
    "FrameChange",
    "Section",
    "AxiomReport",
    "JacobiReport",
    "verify_axioms",
    "lie_algebra",
    "tangent_bundle",
    "poisson_cotangent",
    "standard_example",
    "jacobi_poisson",
    "exterior_sum",
    "renamed",
    "change_frame",
    "section_bracket",
    "anchor_action",
    "so3",
    "algebroid_from_json",
    "algebroid_to_json",
]


class AlgebroidError(ValueError):
    pass


class NotAntisymmetric(AlgebroidError):
    pass


class NameClash(AlgebroidError):
    pass


class InvalidInverse(AlgebroidError):
    pass


_ZERO = Poly.const(0)


def _poly(value) -> Poly:
    return value if isinstance(value, Poly) else Poly.const(value)


class Algebroid:
    """Local model ``(R^n, frame of rank r, anchor, structure functions)``."""

    __slots__ = ("base_coords", "frame", "anchor", "_structure", "name", "factors", "_key")

    def __init__(
        self,
        base_coords: Sequence[str],
        frame: Sequence[str],
        anchor: Sequence[Sequence],
        structure: Mapping[tuple, object] | None = None,
        name: str = "",
        factors: tuple | None = None,
    ):
        self.base_coords = tuple(base_coords)
        # (E1, E2) when built by exterior_sum; used to recover bigrades
        self.factors = factors
        self.frame = tuple(frame)
        self.name = name
        n, r = len(self.base_coords), len(self.frame)
        if r < 1:
            raise AlgebroidError("rank must be at least 1")
        if len(set(self.base_coords)) != n or len(set(self.frame)) != r:
            raise NameClash("duplicate coordinate or frame names")
        if len(anchor) != r or any(len(row) != n for row in anchor):
            raise AlgebroidError(f"anchor must be {r}x{n}")
        allowed = set(self.base_coords)
        self.anchor = tuple(tuple(_poly(v) for v in row) for row in anchor)
        for row in self.anchor:
            for v in row:
                if not v.variables() <= allowed:
                    raise AlgebroidError(f"anchor entry {v} uses non-base variables")
        table: dict = {}
        for (upper, j, k), value in (structure or {}).items():
            value = _poly(value)
            if not value:
                continue
            if not value.variables() <= allowed:
                raise AlgebroidError(f"structure function {value} uses non-base variables")
            if not all(0 <= t < r for t in (upper, j, k)):
                raise AlgebroidError(f"structure index {(upper, j, k)} out of range")
            if j == k:
                raise NotAntisymmetric(f"C^{upper + 1}_{j + 1}{k + 1} must vanish")
            if j > k:
                j, k, value = k, j, -value
            key = (upper, j, k)
            if key in table and table[key] != value:
                raise NotAntisymmetric(f"conflicting entries for C^{upper + 1}_{j + 1}{k + 1}")
            table[key] = value
        self._structure = table
        self._key = None

    @property
    def n(self) -> int:
        return len(self.base_coords)

    @property
    def r(self) -> int:
        return len(self.frame)

    @property
    def frame_names(self) -> tuple:
        return self.frame

    @property
    def structure(self) -> dict:
        return dict(self._structure)

    def rho(self, I: int, i: int) -> Poly:
        return self.anchor[I][i]

    def c(self, upper: int, j: int, k: int) -> Poly:
        if j == k:
            return _ZERO
        if j < k:
            return self._structure.get((upper, j, k), _ZERO)
        return -self._structure.get((upper, k, j), _ZERO)

    def anchor_of(self, components: Sequence[Poly]) -> list:
        """Vector field components ``rho^i_I s^I`` of a section."""
        out = []
        for i in range(self.n):
            acc = _ZERO
            for I, s in enumerate(components):
                if s and self.anchor[I][i]:
                    acc = acc + self.anchor[I][i] * s
            out.append(acc)
        return out

    def _identity(self):
        if self._key is None:
            self._key = (
                self.base_coords,
                self.frame,
                self.anchor,
                frozenset(self._structure.items()),
            )
        return self._key

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Algebroid):
            return NotImplemented
        return self._identity() == other._identity()

    def __hash__(self):
        return hash((self.base_coords, self.frame))

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<Algebroid{label} rank={self.r} base={list(self.base_coords)}>"


@dataclass(frozen=True)
class Section:
    components: tuple

    def __init__(self, components):
        object.__setattr__(self, "components", tuple(_poly(c) for c in components))

    def __len__(self):
        return len(self.components)

    def __getitem__(self, I):
        return self.components[I]

    def __add__(self, other: "Section") -> "Section":
        return Section(a + b for a, b in zip(self.components, other.components))

    def __sub__(self, other: "Section") -> "Section":
        return Section(a - b for a, b in zip(self.components, other.components))

    def scale(self, f) -> "Section":
        f = _poly(f)
        return Section(f * c for c in self.components)

    def is_zero(self) -> bool:
        return not any(self.components)

    @classmethod
    def basis(cls, r: int, I: int) -> "Section":
        return cls(Poly.const(1 if J == I else 0) for J in range(r))

    @classmethod
    def zero(cls, r: int) -> "Section":
        return cls([_ZERO] * r)


def anchor_action(E: Algebroid, s: Section | Sequence, f: Poly) -> Poly:
    """``rho_s(f) = s^I rho^i_I d_i f``."""
    comps = s.components if isinstance(s, Section) else s
    acc = _ZERO
    for i, vi in enumerate(E.anchor_of(comps)):
        if vi:
            df = differentiate(f, E.base_coords[i])
            if df:
                acc = acc + vi * df
    return acc


def section_bracket(E: Algebroid, s: Section, t: Section) -> Section:
    """``[s,t]^K = s^I t^J C^K_IJ + rho_s(t^K) - rho_t(s^K)``."""
    if len(s) != E.r or len(t) != E.r:
        raise AlgebroidError("section rank mismatch")
    out = []
    for K in range(E.r):
        acc = anchor_action(E, s, t[K]) - anchor_action(E, t, s[K])
        for I in range(E.r):
            if not s[I]:
                continue
            for J in range(E.r):
                c = E.c(K, I, J)
                if c and t[J]:
                    acc = acc + c * s[I] * t[J]
        out.append(acc)
    return Section(out)


# ---------------------------------------------------------------------------
# axioms


@dataclass
class AxiomReport:
    anchor_compat: bool
    jacobi: bool
    witnesses: list = field(default_factory=list)
    d_squared: bool = True
    routes_agree: bool = True

    @property
    def ok(self) -> bool:
        return self.anchor_compat and self.jacobi

    def to_json(self) -> dict:
        return {
            "anchor_compat": self.anchor_compat,
            "jacobi": self.jacobi,
            "d_squared": self.d_squared,
            "routes_agree": self.routes_agree,
            "witnesses": self.witnesses,
        }


def _anchor_defect(E: Algebroid, I: int, J: int, i: int) -> Poly:
    acc = _ZERO
    for j, xj in enumerate(E.base_coords):
        acc = acc + E.rho(I, j) * differentiate(E.rho(J, i), xj)
        acc = acc - E.rho(J, j) * differentiate(E.rho(I, i), xj)
    for K in range(E.r):
        acc = acc - E.rho(K, i) * E.c(K, I, J)
    return acc


def _jacobi_defect(E: Algebroid, I: int, J: int, K: int, L: int) -> Poly:
    acc = _ZERO
    for a, b, c in ((I, J, K), (J, K, I), (K, I, J)):
        for m, xm in enumerate(E.base_coords):
            rho = E.rho(a, m)
            if rho:
                acc = acc + rho * differentiate(E.c(L, b, c), xm)
        for M in range(E.r):
            acc = acc + E.c(L, a, M) * E.c(M, b, c)
    return acc


def verify_axioms(E: Algebroid) -> AxiomReport:
    """Check the anchor homomorphism and Jacobi identities in coordinates,
    and independently that the algebroid differential squares to zero on
    every coordinate function and coframe generator."""
    from .eform import EForm, e_differential

    witnesses = []
    anchor_ok = True
    for I, J in itertools.combinations(range(E.r), 2):
        for i in range(E.n):
            d = _anchor_defect(E, I, J, i)
            if d:
                anchor_ok = False
                witnesses.append(
                    {"check": "anchor", "indices": [I + 1, J + 1], "coord": E.base_coords[i], "value": to_str(d)}
                )
    jacobi_ok = True
    for I, J, K in itertools.combinations(range(E.r), 3):
        for L in range(E.r):
            d = _jacobi_defect(E, I, J, K, L)
            if d:
                jacobi_ok = False
                witnesses.append(
                    {"check": "jacobi", "indices": [I + 1, J + 1, K + 1], "upper": L + 1, "value": to_str(d)}
                )
    d2_ok = True
    for x in E.base_coords:
        if e_differential(e_differential(EForm.function(E, Poly.var(x)))):
            d2_ok = False
    for I in range(E.r):
        if e_differential(e_differential(EForm.generator(E, I))):
            d2_ok = False
    return AxiomReport(anchor_ok, jacobi_ok, witnesses, d2_ok, d2_ok == (anchor_ok and jacobi_ok))


# ---------------------------------------------------------------------------
# standard examples


def lie_algebra(structure: Mapping[tuple, object], r: int, frame: Sequence[str] | None = None, name: str = "") -> Algebroid:
    """Lie algebra over a point; ``structure[(I, J, K)] = C^I_JK`` (0-based)."""
    full = {}
    for (I, J, K), v in structure.items():
        v = _poly(v)
        if not v.is_constant():
            raise AlgebroidError("Lie algebra structure constants must be constant")
        full[(I, J, K)] = v
    for (I, J, K), v in full.items():
        other = full.get((I, K, J))
        if (J == K and v) or (other is not None and other != -v):
            raise NotAntisymmetric(f"C^{I + 1}_{J + 1}{K + 1} is not antisymmetric")
    frame = list(frame or [f"e{I + 1}" for I in range(r)])
    return Algebroid([], frame, [[] for _ in range(r)], full, name=name)


def so3(scale_c312=1) -> Algebroid:
    """so(3) with ``C^I_JK = eps_IJK``; ``scale_c312`` overrides ``C^3_12``."""
    return lie_algebra({(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): scale_c312}, 3, name="so3")


def tangent_bundle(coords: Sequence[str], frame: Sequence[str] | None = None, name: str = "") -> Algebroid:
    n = len(coords)
    frame = list(frame or [f"d{x}" for x in coords])
    anchor = [[Poly.const(1 if i == I else 0) for i in range(n)] for I in range(n)]
    return Algebroid(coords, frame, anchor, {}, name=name or "T")


def _check_antisymmetric(P: Sequence[Sequence]) -> list:
    n = len(P)
    P = [[_poly(v) for v in row] for row in P]
    if any(len(row) != n for row in P):
        raise NotAntisymmetric("Poisson matrix must be square")
    for i in range(n):
        for j in range(n):
            if P[i][j] != -P[j][i]:
                raise NotAntisymmetric(f"P^{i + 1}{j + 1} != -P^{j + 1}{i + 1}")
    return P


def poisson_cotangent(P: Sequence[Sequence], coords: Sequence[str], frame: Sequence[str] | None = None, name: str = "") -> Algebroid:
    """Cotangent algebroid of a Poisson tensor.

    The frame ``b_I`` is ``dX^i``; the anchor is ``rho^j_I = P^{ij}`` (so
    ``rho(dX^i) = P^{ij} d_j``) and ``C^I_JK = d_i P^{jk}``.
    """
    P = _check_antisymmetric(P)
    n = len(coords)
    if len(P) != n:
        raise AlgebroidError("Poisson matrix size must match coordinates")
    frame = list(frame or [f"d{x}" for x in coords])
    anchor = [[P[I][j] for j in range(n)] for I in range(n)]
    structure = {}
    for I in range(n):
        for J, K in itertools.combinations(range(n), 2):
            c = differentiate(P[J][K], coords[I])
            if c:
                structure[(I, J, K)] = c
    return Algebroid(coords, frame, anchor, structure, name=name or "T*M")


def standard_example(kind: str, **kwargs) -> Algebroid:
    makers = {"lie_algebra": lie_algebra, "tangent_bundle": tangent_bundle, "poisson_cotangent": poisson_cotangent}
    try:
        return makers[kind](**kwargs)
    except KeyError:
        raise AlgebroidError(f"unknown standard example {kind!r}") from None


@dataclass
class JacobiReport:
    ok: bool
    witnesses: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def jacobi_poisson(P: Sequence[Sequence], coords: Sequence[str]) -> JacobiReport:
    """Schouten condition: cyclic sums ``P^{is} d_s P^{jk}`` vanish for i<j<k."""
    P = _check_antisymmetric(P)
    n = len(coords)
    witnesses = []
    for i, j, k in itertools.combinations(range(n), 3):
        acc = _ZERO
        for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
            for s in range(n):
                if P[a][s]:
                    acc = acc + P[a][s] * differentiate(P[b][c], coords[s])
        if acc:
            witnesses.append({"indices": [i + 1, j + 1, k + 1], "value": to_str(acc)})
    return JacobiReport(not witnesses, witnesses)


# ---------------------------------------------------------------------------
# exterior sum and frame change


def exterior_sum(E1: Algebroid, E2: Algebroid, name: str = "") -> Algebroid:
    """``E1 [+] E2`` over the product base; frame of ``E1`` comes first."""
    if set(E1.base_coords) & set(E2.base_coords) or set(E1.frame) & set(E2.frame):
        raise NameClash("exterior sum needs disjoint coordinates and frame names")
    n1, r1 = E1.n, E1.r
    anchor = [list(row) + [_ZERO] * E2.n for row in E1.anchor]
    anchor += [[_ZERO] * n1 + list(row) for row in E2.anchor]
    structure = dict(E1._structure)
    for (I, J, K), v in E2._structure.items():
        structure[(I + r1, J + r1, K + r1)] = v
    return Algebroid(
        E1.base_coords + E2.base_coords,
        E1.frame + E2.frame,
        anchor,
        structure,
        name=name or f"({E1.name or 'E1'} [+] {E2.name or 'E2'})",
        factors=(E1, E2),
    )


def renamed(E: Algebroid, suffix: str) -> Algebroid:
    """Copy of ``E`` with ``suffix`` appended to every coordinate and frame name."""
    sub = {x: Poly.var(x + suffix) for x in E.base_coords}
    anchor = [[substitute(v, sub) for v in row] for row in E.anchor]
    structure = {k: substitute(v, sub) for k, v in E._structure.items()}
    return Algebroid(
        [x + suffix for x in E.base_coords],
        [b + suffix for b in E.frame],
        anchor,
        structure,
        name=E.name,
    )


def _matmul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = _ZERO
            for k in range(m):
                if A[i][k] and B[k][j]:
                    acc = acc + A[i][k] * B[k][j]
            row.append(acc)
        out.append(row)
    return out


class FrameChange:
    """Coframe change ``b^I = B^I_J bt^J`` with an explicit polynomial inverse."""

    __slots__ = ("B", "B_inv")

    def __init__(self, B: Sequence[Sequence], B_inv: Sequence[Sequence]):
        self.B = tuple(tuple(_poly(v) for v in row) for row in B)
        self.B_inv = tuple(tuple(_poly(v) for v in row) for row in B_inv)
        r = len(self.B)
        if any(len(row) != r for row in self.B) or len(self.B_inv) != r or any(len(row) != r for row in self.B_inv):
            raise InvalidInverse("B and B_inv must be square of equal size")
        prod = _matmul(self.B, self.B_inv)
        for i in range(r):
            for j in range(r):
                if prod[i][j] != (1 if i == j else 0):
                    raise InvalidInverse(f"(B B_inv)[{i + 1}][{j + 1}] = {prod[i][j]}")

    @property
    def r(self):
        return len(self.B)

    def inverse(self) -> "FrameChange":
        return FrameChange(self.B_inv, self.B)

    @classmethod
    def identity(cls, r: int) -> "FrameChange":
        eye = [[Poly.const(1 if i == j else 0) for j in range(r)] for i in range(r)]
        return cls(eye, eye)


def change_frame(E: Algebroid, F: FrameChange, frame: Sequence[str] | None = None) -> Algebroid:
    """Structure data in the new frame ``bt_J = B^I_J b_I``."""
    if F.r != E.r:
        raise InvalidInverse("frame change rank mismatch")
    allowed = set(E.base_coords)
    for row in F.B + F.B_inv:
        for v in row:
            if not v.variables() <= allowed:
                raise InvalidInverse(f"frame change entry {v} uses non-base variables")
    r = E.r
    B, Binv = F.B, F.B_inv
    new_frame = list(frame) if frame is not None else list(E.frame)
    anchor = [[sum((B[I][J] * E.rho(I, i) for I in range(r)), _ZERO) for i in range(E.n)] for J in range(r)]
    columns = [Section([B[I][J] for I in range(r)]) for J in range(r)]
    structure = {}
    for J, K in itertools.combinations(range(r), 2):
        # [bt_J, bt_K] expressed in the old frame, then mapped back with B^-1
        old = section_bracket(E, columns[J], columns[K])
        for N in range(r):
            acc = _ZERO
            for M in range(r):
                if Binv[N][M] and old[M]:
                    acc = acc + Binv[N][M] * old[M]
            if acc:
                structure[(N, J, K)] = acc
    return Algebroid(E.base_coords, new_frame, anchor, structure, name=E.name)


def change_frame_formula(E: Algebroid, F: FrameChange) -> Algebroid:
    """Same as :func:`change_frame`, written out index by index."""
    r, B, Binv = E.r, F.B, F.B_inv
    anchor = [[sum((B[I][J] * E.rho(I, i) for I in range(r)), _ZERO) for i in range(E.n)] for J in range(r)]
    structure = {}
    for J, K in itertools.combinations(range(r), 2):
        for N in range(r):
            acc = _ZERO
            for M in range(r):
                inner = _ZERO
                for I in range(r):
                    for L in range(r):
                        inner = inner + B[I][J] * B[L][K] * E.c(M, I, L)
                    for m, xm in enumerate(E.base_coords):
                        inner = inner + B[I][J] * E.rho(I, m) * differentiate(B[M][K], xm)
                        inner = inner - B[I][K] * E.rho(I, m) * differentiate(B[M][J], xm)
                acc = acc + Binv[N][M] * inner
            if acc:
                structure[(N, J, K)] = acc
    return Algebroid(E.base_coords, E.frame, anchor, structure, name=E.name)


# ---------------------------------------------------------------------------
# JSON


def algebroid_from_json(data: Mapping) -> Algebroid:
    """Explicit form ``{"base_coords", "frame", "anchor", "structure"}``."""
    coords = list(data["base_coords"])
    frame = list(data["frame"])
    anchor = [[parse(e, coords) for e in row] for row in data["anchor"]]
    index = {name: I for I, name in enumerate(frame)}
    structure: dict = {}
    for entry in data.get("structure", []):
        try:
            upper = index[entry["upper"]]
            j, k = (index[x] for x in entry["lower"])
        except KeyError as exc:
            raise AlgebroidError(f"unknown frame name {exc.args[0]!r}") from None
        value = parse(entry["coeff"], coords)
        if j == k:
            if value:
                raise NotAntisymmetric(f"diagonal structure entry for {entry['upper']}")
            continue
        if j > k:
            j, k, value = k, j, -value
        key = (upper, j, k)
        structure[key] = structure.get(key, _ZERO) + value
    return Algebroid(coords, frame, anchor, structure, name=data.get("name", ""))


def algebroid_to_json(E: Algebroid) -> dict:
    return {
        "base_coords": list(E.base_coords),
        "frame": list(E.frame),
        "anchor": [[to_str(v, E.base_coords) for v in row] for row in E.anchor],
        "structure": [
            {"upper": E.frame[I], "lower": [E.frame[J], E.frame[K]], "coeff": to_str(v, E.base_coords)}
            for (I, J, K), v in sorted(E._structure.items())
        ],
    }
