"""Command-line front end operating on JSON bundles.

Exit codes: 0 when every check passes, 1 when a mathematical check fails,
2 for unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Mapping

import jsonschema

from . import algebroid as alg
from .algebroid import Algebroid, FrameChange, Section
from .eform import format_eform
from .psm import PsmModel
from .symexpr import SymexprError, parse

__all__ = ["main", "run_command", "BUNDLE_SCHEMA", "InputError"]

COMMANDS = (
    "check-algebroid",
    "check-poisson",
    "check-morphism",
    "gauge-closure",
    "frame-covariance",
    "psm-variation",
    "flow",
)


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# schema

_str_list = {"type": "array", "items": {"type": "string"}}
_matrix = {"type": "array", "items": _str_list}
_name = {"type": "string"}
_structure = {
    "type": "array",
    "items": {
        "type": "object",
        "additionalProperties": False,
        "required": ["upper", "lower", "coeff"],
        "properties": {"upper": _name, "lower": {"type": "array", "items": _name, "minItems": 2, "maxItems": 2}, "coeff": {"type": "string"}},
    },
}


def _obj(required, **props):
    return {"type": "object", "additionalProperties": False, "required": list(required), "properties": props}


_algebroid_schema = {
    "oneOf": [
        _obj(["base_coords", "frame", "anchor"], kind={"const": "explicit"}, base_coords=_str_list, frame=_str_list, anchor=_matrix, structure=_structure),
        _obj(["kind", "coords"], kind={"const": "tangent_bundle"}, coords=_str_list, frame=_str_list),
        _obj(["kind", "coords", "poisson"], kind={"const": "poisson_cotangent"}, coords=_str_list, poisson=_matrix, frame=_str_list),
        _obj(["kind", "frame"], kind={"const": "lie_algebra"}, frame=_str_list, structure=_structure),
        _obj(["kind", "factors"], kind={"const": "exterior_sum"}, factors={"type": "array", "items": _name, "minItems": 2, "maxItems": 2}),
    ]
}

_check_schema = {
    "oneOf": [
        _obj(["type", "algebroid"], type={"const": "check-algebroid"}, algebroid=_name),
        _obj(["type", "poisson"], type={"const": "check-poisson"}, poisson=_name),
        _obj(
            ["type", "map"],
            type={"const": "check-morphism"},
            map=_name,
            related_pairs={"type": "array", "items": {"type": "array", "items": _str_list, "minItems": 2, "maxItems": 2}},
            projectable_degree={"type": "integer", "minimum": 0},
        ),
        _obj(
            ["type", "source", "target"],
            type={"const": "gauge-closure"},
            source=_name,
            target=_name,
            kind={"enum": ["cov", "zero", "conn"]},
            connection=_name,
            params={"type": "array", "items": _name, "minItems": 2, "maxItems": 2},
            x_only={"type": "boolean"},
            with_eps1={"type": "boolean"},
        ),
        _obj(
            ["type", "source", "target", "frame_change"],
            type={"const": "frame-covariance"},
            source=_name,
            target=_name,
            frame_change=_name,
            kind={"enum": ["zero", "cov"]},
        ),
        _obj(["type", "model"], type={"const": "psm-variation"}, model=_name, eps=_str_list, connection=_name),
        _obj(
            ["type", "model", "N", "L", "dt", "T", "eps", "init"],
            type={"const": "flow"},
            model=_name,
            N={"type": "integer", "minimum": 3},
            L={"type": "string"},
            dt={"type": "number", "exclusiveMinimum": 0},
            T={"type": "number", "minimum": 0},
            eps=_str_list,
            init=_obj(["X", "A"], X=_str_list, A=_matrix),
        ),
    ]
}

BUNDLE_SCHEMA = _obj(
    ["version"],
    version={"const": 1},
    algebroids={"type": "object", "additionalProperties": _algebroid_schema},
    poisson={
        "type": "object",
        "additionalProperties": _obj(["target_coords", "poisson"], target_coords=_str_list, poisson=_matrix, sigma_coords={**_str_list, "minItems": 2, "maxItems": 2}),
    },
    maps={"type": "object", "additionalProperties": _obj(["source", "target", "phi0", "A"], source=_name, target=_name, phi0=_str_list, A=_matrix)},
    params={"type": "object", "additionalProperties": _obj(["source", "target", "eps2"], source=_name, target=_name, eps1=_str_list, eps2=_str_list)},
    connections={"type": "object", "additionalProperties": _obj(["target", "gamma"], target=_name, gamma={"type": "array", "items": _obj(["upper", "base", "lower", "coeff"], upper=_name, base=_name, lower=_name, coeff={"type": "string"})})},
    frame_changes={"type": "object", "additionalProperties": _obj(["algebroid", "B", "B_inv"], algebroid=_name, B=_matrix, B_inv=_matrix)},
    checks={"type": "array", "items": _check_schema},
)


# ---------------------------------------------------------------------------
# loading


class Bundle:
    def __init__(self, data: Mapping):
        try:
            jsonschema.validate(data, BUNDLE_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path)
            raise InputError(f"schema violation at '{path}': {exc.message}") from None
        self.data = data
        self.algebroids: dict = {}
        for name, spec in data.get("algebroids", {}).items():
            self.algebroids[name] = self._algebroid(name, spec)
        self.poisson: dict = {}
        for name, spec in data.get("poisson", {}).items():
            self.poisson[name] = PsmModel.from_json(spec)
        self._maps: dict = {}
        self.checks = list(data.get("checks", []))

    def _algebroid(self, name, spec) -> Algebroid:
        kind = spec.get("kind", "explicit")
        if kind == "explicit":
            return alg.algebroid_from_json({**spec, "name": name})
        if kind == "tangent_bundle":
            return alg.tangent_bundle(spec["coords"], spec.get("frame"), name=name)
        if kind == "poisson_cotangent":
            coords = spec["coords"]
            P = [[parse(e, coords) for e in row] for row in spec["poisson"]]
            return alg.poisson_cotangent(P, coords, spec.get("frame"), name=name)
        if kind == "lie_algebra":
            frame = spec["frame"]
            explicit = {"base_coords": [], "frame": frame, "anchor": [[] for _ in frame], "structure": spec.get("structure", []), "name": name}
            return alg.algebroid_from_json(explicit)
        if kind == "exterior_sum":
            a, b = (self.algebroid(f) for f in spec["factors"])
            return alg.exterior_sum(a, b, name=name)
        raise InputError(f"unknown algebroid kind {kind!r}")

    def algebroid(self, ref: str) -> Algebroid:
        if ref in self.algebroids:
            return self.algebroids[ref]
        if ref in self.poisson:
            return self.poisson[ref].target
        raise InputError(f"unknown algebroid {ref!r}")

    def model(self, ref: str):
        try:
            return self.poisson[ref]
        except KeyError:
            raise InputError(f"unknown Poisson model {ref!r}") from None

    def map(self, ref: str):
        from .morphism import bundle_map_from_json

        if ref not in self._maps:
            try:
                spec = self.data["maps"][ref]
            except KeyError:
                raise InputError(f"unknown map {ref!r}") from None
            source = self._map_end(spec["source"], "source")
            target = self._map_end(spec["target"], "target")
            self._maps[ref] = bundle_map_from_json(spec, source, target)
        return self._maps[ref]

    def _map_end(self, ref, role):
        if ref in self.poisson:
            m = self.poisson[ref]
            return m.target if role == "target" else m.source
        return self.algebroid(ref)

    def param(self, ref: str):
        from .gauge import GaugeParam

        try:
            spec = self.data["params"][ref]
        except KeyError:
            raise InputError(f"unknown parameter {ref!r}") from None
        E1, E2 = self._map_end(spec["source"], "source"), self._map_end(spec["target"], "target")
        eps1 = [parse(e, E1.base_coords) for e in spec.get("eps1", ["0"] * E1.r)]
        eps2 = [parse(e, list(E1.base_coords) + list(E2.base_coords)) for e in spec["eps2"]]
        if len(eps1) != E1.r or len(eps2) != E2.r:
            raise InputError(f"parameter {ref!r} has the wrong number of components")
        return GaugeParam(eps1, eps2, E1.base_coords)

    def connection(self, ref: str):
        from .gauge import Connection

        try:
            spec = self.data["connections"][ref]
        except KeyError:
            raise InputError(f"unknown connection {ref!r}") from None
        E = self._map_end(spec["target"], "target")
        try:
            return Connection.from_json(spec, E)
        except KeyError as exc:
            raise InputError(f"connection {ref!r} names unknown index {exc.args[0]!r}") from None

    def frame_change(self, ref: str) -> FrameChange:
        try:
            spec = self.data["frame_changes"][ref]
        except KeyError:
            raise InputError(f"unknown frame change {ref!r}") from None
        E = self._map_end(spec["algebroid"], "target")
        B = [[parse(e, E.base_coords) for e in row] for row in spec["B"]]
        Binv = [[parse(e, E.base_coords) for e in row] for row in spec["B_inv"]]
        return FrameChange(B, Binv)


# ---------------------------------------------------------------------------
# checks


def _check(name, passed, witness=None, **details):
    out = {"name": name, "pass": bool(passed)}
    if witness is not None:
        out["witness"] = witness
    if details:
        out["details"] = details
    return out


def _run_algebroid(b: Bundle, c, opts):
    E = b.algebroid(c["algebroid"])
    rep = alg.verify_axioms(E)
    w = rep.witnesses
    return [
        _check(f"anchor:{c['algebroid']}", rep.anchor_compat, next((x for x in w if x["check"] == "anchor"), None)),
        _check(f"jacobi:{c['algebroid']}", rep.jacobi, next((x for x in w if x["check"] == "jacobi"), None)),
        _check(f"routes-agree:{c['algebroid']}", rep.routes_agree, d_squared=rep.d_squared),
    ]


def _run_poisson(b: Bundle, c, opts):
    m = b.model(c["poisson"])
    rep = alg.jacobi_poisson(m.P, m.target_coords)
    agree = rep.ok == alg.verify_axioms(m.target).ok
    return [
        _check(f"jacobi:{c['poisson']}", rep.ok, rep.witnesses[0] if rep.witnesses else None),
        _check(f"agrees-with-algebroid:{c['poisson']}", agree),
    ]


def _run_morphism(b: Bundle, c, opts):
    from .morphism import is_morphism, phi_related, projectable_sections

    phi = b.map(c["map"])
    rep = is_morphism(phi, spot_checks=10, seed=opts.seed, degree=opts.degree)
    witness = None
    if rep.witnesses:
        first = rep.witnesses[0]
        witness = f"{first['name']} = {first['value']}"
    checks = [
        _check(
            f"morphism:{c['map']}",
            rep.is_morphism,
            witness,
            nonzero=[w["name"] for w in rep.witnesses],
            all_witnesses=rep.witnesses,
        ),
        _check(f"chain-spot-check-agrees:{c['map']}", rep.agree, spot_check=rep.spot_check),
    ]
    if "projectable_degree" in c:
        info = projectable_sections(phi, c["projectable_degree"])
        checks.append(_check(f"projectable-sections:{c['map']}", True, None, **info))
    if c.get("related_pairs"):
        pairs = []
        for s1, s2 in c["related_pairs"]:
            pairs.append(
                (
                    Section([parse(e, phi.source.base_coords) for e in s1]),
                    Section([parse(e, phi.target.base_coords) for e in s2]),
                )
            )
        rel = phi_related(phi, pairs)
        checks.append(_check(f"phi-related:{c['map']}", rel.ok, None, anchor=rel.anchor_ok, related=rel.related, brackets=rel.brackets_ok))
    return checks


def _run_closure(b: Bundle, c, opts):
    from .gauge import closure_check

    E1, E2 = b._map_end(c["source"], "source"), b._map_end(c["target"], "target")
    kind = c.get("kind", "cov")
    conn = b.connection(c["connection"]) if "connection" in c else None
    params = tuple(b.param(p) for p in c["params"]) if "params" in c else None
    rep = closure_check(
        E1,
        E2,
        kind,
        conn,
        trials=opts.trials,
        degree=opts.degree,
        seed=opts.seed,
        x_only=c.get("x_only", False),
        with_eps1=c.get("with_eps1", False),
        params=params,
    )
    return [_check(f"closure-{kind}:{c['target']}", rep.passed, rep.identity.witness, expected_defect=rep.defect_formula, trials=rep.identity.trials)]


def _run_frame(b: Bundle, c, opts):
    from .fieldcalc import trial_rng
    from .gauge import frame_defect_check
    from .morphism import frame_curvature_defect, random_bundle_map

    E1, E2 = b._map_end(c["source"], "source"), b._map_end(c["target"], "target")
    F = b.frame_change(c["frame_change"])
    kind = c.get("kind", "zero")
    Et = alg.change_frame(E2, F)
    witness = None
    ok = True
    for t in range(opts.trials):
        phi = random_bundle_map(trial_rng(opts.seed, t), E1, E2, opts.degree)
        for I, d in enumerate(frame_curvature_defect(phi, F, Et)):
            if d:
                ok = False
                if witness is None:
                    witness = {"trial": t, "component": I, "value": format_eform(d)}
    rep = frame_defect_check(E1, E2, F, kind, trials=opts.trials, degree=opts.degree, seed=opts.seed)
    axioms = alg.verify_axioms(Et).ok == alg.verify_axioms(E2).ok
    return [
        _check("curvature-transport", ok, witness),
        _check(f"gauge-frame-defect-{kind}", rep.passed, rep.witness),
        _check("axioms-preserved", axioms),
    ]


def _run_psm(b: Bundle, c, opts):
    from .gauge import gauge_condition_check, is_torsion_free
    from .psm import connection_invariance_check, invariance_check

    m = b.model(c["model"])
    checks = []
    if "eps" in c:
        eps = [parse(e, m.target_coords) for e in c["eps"]]
        if len(eps) != m.n:
            raise InputError("eps needs one entry per target coordinate")
        cond = gauge_condition_check(m.P, eps, m.target_coords)
        rep = invariance_check(m, eps, trials=opts.trials, degree=opts.degree, seed=opts.seed)
        checks.append(_check("invariance", rep.passed, rep.witness, gauge_condition=cond))
        checks.append(_check("condition-matches-invariance", cond == rep.passed))
    if "connection" in c:
        conn = b.connection(c["connection"])
        rep = connection_invariance_check(m, conn, trials=opts.trials, degree=opts.degree, seed=opts.seed)
        checks.append(_check("connection-invariance", rep.passed, rep.witness, torsion_free=is_torsion_free(conn, m.target)))
    if not checks:
        raise InputError("psm-variation needs 'eps' and/or 'connection'")
    return checks


def _run_flow(b: Bundle, c, opts):
    from fractions import Fraction

    from .flow import FlowConfig, integrate_flow, parse_flow_expr, residuals, sample

    m = b.model(c["model"])
    try:
        L = float(Fraction(c["L"]))
    except (ValueError, ZeroDivisionError):
        raise InputError(f"L must be a positive rational, got {c['L']!r}") from None
    if L <= 0:
        raise InputError("L must be positive")
    coords = m.target_coords
    X = [parse_flow_expr(e, coords) for e in c["init"]["X"]]
    A = [[parse_flow_expr(e, coords) for e in row] for row in c["init"]["A"]]
    if len(X) != m.n or len(A) != m.target.r or any(len(row) != 2 for row in A):
        raise InputError("init has the wrong shape")
    for p in X + [q for row in A for q in row]:
        if p.variables() & set(coords):
            raise InputError("initial data may not depend on target coordinates")
    eps = [parse_flow_expr(e, coords) for e in c["eps"]]
    g = sample(c["N"], L, X, A)
    cfg = FlowConfig(c["dt"], c["T"], eps, m)
    res = integrate_flow(g, cfg)
    opts.flow_csv.append(res.csv())
    first, last = res.rows[0], res.rows[-1]
    details = {
        "steps": res.steps,
        "initial": {"t": first[0], "supF_base": first[1], "supF_frame": first[2], "action": first[3]},
        "final": {"t": last[0], "supF_base": last[1], "supF_frame": last[2], "action": last[3]},
        "final_state": {"X": res.final.X.tolist(), "A": res.final.A.tolist()},
    }
    return [_check("flow-finite", not res.aborted, None if not res.aborted else {"t": last[0]}, **details)]


_RUNNERS = {
    "check-algebroid": _run_algebroid,
    "check-poisson": _run_poisson,
    "check-morphism": _run_morphism,
    "gauge-closure": _run_closure,
    "frame-covariance": _run_frame,
    "psm-variation": _run_psm,
    "flow": _run_flow,
}


def _default_checks(b: Bundle, command: str) -> list:
    if command == "check-algebroid":
        return [{"type": command, "algebroid": n} for n in b.algebroids]
    if command == "check-poisson":
        return [{"type": command, "poisson": n} for n in b.poisson]
    if command == "check-morphism":
        return [{"type": command, "map": n} for n in b.data.get("maps", {})]
    return []


# ---------------------------------------------------------------------------
# entry points


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lieoid", description="Exact Lie algebroid checks on JSON bundles.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("file")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--trials", type=int, default=8)
        s.add_argument("--degree", type=int, default=2)
        s.add_argument("--json", dest="json_path", metavar="PATH")
        s.add_argument("--timing", action="store_true", help="add wall-clock timing to the report")
        if name == "flow":
            s.add_argument("--csv", dest="csv_path", metavar="PATH")
    return p


def run_command(argv, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _parser()
    try:
        opts = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if opts.seed < 0 or opts.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=stderr)
        return 2
    if opts.trials < 1 or opts.degree < 0:
        print("error: --trials must be >= 1 and --degree >= 0", file=stderr)
        return 2
    opts.flow_csv = []
    start = time.perf_counter()
    try:
        with open(opts.file, encoding="utf-8") as fh:
            data = json.load(fh)
        bundle = Bundle(data)
        selected = [c for c in bundle.checks if c["type"] == opts.command] or _default_checks(bundle, opts.command)
        if not selected:
            raise InputError(f"no {opts.command} checks in {opts.file}")
        checks = []
        for c in selected:
            checks.extend(_RUNNERS[opts.command](bundle, c, opts))
    except (OSError, json.JSONDecodeError, InputError, SymexprError, alg.AlgebroidError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    passed = all(c["pass"] for c in checks)
    report = {
        "version": 1,
        "command": opts.command,
        "file": opts.file,
        "pass": passed,
        "seed": opts.seed,
        "trials": opts.trials,
        "degree": opts.degree,
        "checks": checks,
    }
    if opts.timing:
        report["timing"] = {"seconds": round(time.perf_counter() - start, 6)}
    text = json.dumps(report, indent=2) + "\n"
    if opts.json_path:
        with open(opts.json_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    csv = "".join(opts.flow_csv)
    if opts.command == "flow":
        if getattr(opts, "csv_path", None):
            with open(opts.csv_path, "w", encoding="utf-8") as fh:
                fh.write(csv)
        else:
            stdout.write(csv)
    elif not opts.json_path:
        stdout.write(text)
    _summary(report, stderr)
    return 0 if passed else 1


def _summary(report, stream):
    n = len(report["checks"])
    good = sum(c["pass"] for c in report["checks"])
    status = "PASS" if report["pass"] else "FAIL"
    print(f"{report['command']}: {status} ({good}/{n} checks)", file=stream)
    for c in report["checks"]:
        if not c["pass"]:
            w = c.get("witness")
            if isinstance(w, dict):
                w = _format_witness(w)
            text = f"  first failure: {c['name']}"
            if w is not None:
                w = str(w)
                text += f": {w if len(w) <= 200 else w[:197] + '...'}"
            print(text, file=stream)
            break


def _format_witness(w: dict) -> str:
    if "indices" in w:
        idx = "(" + ",".join(str(i) for i in w["indices"]) + ")"
        upper = f" upper {w['upper']}" if w.get("upper") is not None else ""
        return f"indices {idx}{upper}: {w.get('value')}"
    if "value" in w:
        return str(w["value"])
    return json.dumps(w, sort_keys=True)


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
