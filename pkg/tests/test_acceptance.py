"""Acceptance criteria, one test each.

Every test records a ``criterion N: PASS|FAIL`` line that is echoed in the
pytest terminal summary.  End-to-end scenarios go through the installed CLI
(``python3 -m lieoid``); identities the CLI does not expose use the library.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

import conftest
from corpus_helpers import CORPUS, MORPHISMS, NON_MORPHISMS, corpus_maps, load
from lieoid.algebroid import poisson_cotangent, so3, tangent_bundle, verify_axioms
from lieoid.eform import EForm, e_differential, wedge
from lieoid.morphism import curvature, e_phi, f_phi, graph_pullback, is_morphism, projectable_sections, pullback, random_eform
from lieoid.symexpr import Poly, parse

MAPS = corpus_maps()


def record(n, ok, title, detail=""):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}" + (f" [{detail}]" if detail else "")
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def cli(command, path, *extra):
    proc = subprocess.run(
        [sys.executable, "-m", "lieoid", command, str(path), *map(str, extra)],
        capture_output=True,
        text=True,
    )
    return proc.returncode, proc.stdout, proc.stderr


def cli_report(command, path, *extra):
    code, out, err = cli(command, path, *extra)
    return code, json.loads(out), err


def checks_named(report, prefix):
    return [c for c in report["checks"] if c["name"].startswith(prefix)]


def flow_bundle(tmp_path, name, **changes):
    data = json.loads((CORPUS / name).read_text())
    data["checks"][0].update(changes)
    p = tmp_path / f"{name[:-5]}_{'_'.join(f'{k}{v}' for k, v in changes.items())}.json"
    p.write_text(json.dumps(data))
    return p


def flow_rows(path, *extra):
    code, out, err = cli("flow", path, *extra)
    assert code == 0, err
    rows = [line.split(",") for line in out.splitlines()[1:]]
    return [(float(t), float(fb), float(ff), float(s) if s else None) for t, fb, ff, s in rows]


# ---------------------------------------------------------------------------


def test_criterion_01_axioms():
    X = [Poly.var(f"X{i}") for i in (1, 2, 3)]
    lie_poisson = [[0, X[2], -X[1]], [-X[2], 0, X[0]], [X[1], -X[0], 0]]
    t0 = time.perf_counter()
    good = {
        "so3": verify_axioms(so3()).ok,
        "TR3": verify_axioms(tangent_bundle(["x1", "x2", "x3"])).ok,
        "so3*": verify_axioms(poisson_cotangent(lie_poisson, ["X1", "X2", "X3"])).ok,
        "symplectic R2": verify_axioms(poisson_cotangent([[0, 1], [-1, 0]], ["X1", "X2"])).ok,
    }
    b = load("perturbed_so3.json")
    perturbed = verify_axioms(b.algebroid("so3_c312_2"))
    elapsed = time.perf_counter() - t0
    wit = [w.get("indices") for w in perturbed.witnesses]

    code_good, _, _ = cli("check-algebroid", CORPUS / "axioms.json")
    code_bad, _, err_bad = cli("check-algebroid", CORPUS / "perturbed_so3.json")

    ok = (
        all(good.values())
        and code_good == 0
        and not perturbed.ok
        and [1, 2, 3] in wit
        and code_bad == 1
        and elapsed < 1.0
    )
    detail = (
        f"standard four pass={all(good.values())}; perturbed so(3) C^3_12=2 fails={not perturbed.ok} "
        f"witnesses={wit} cli exit={code_bad}; {elapsed:.3f}s"
    )
    record(1, ok, "axioms of the standard algebroids, perturbed so(3) rejected", detail)
    assert all(good.values()) and code_good == 0
    assert elapsed < 1.0
    assert not perturbed.ok, "the perturbed so(3) bracket satisfies Jacobi"
    assert [1, 2, 3] in wit and code_bad == 1


def test_criterion_02_r4_counterexample():
    phi = MAPS["r4_counterexample"]
    F = curvature(phi)
    E1 = phi.source
    dx2_dx1 = wedge(EForm.generator(E1, 1), EForm.generator(E1, 0))
    frame_ok = F.F_frame[1] == dx2_dx1 and not F.F_frame[0] and not F.F_frame[2] and not F.F_frame[3]
    base_ok = not any(F.F_base)
    proj = projectable_sections(phi, 2)

    code, rep, err = cli_report("check-morphism", CORPUS / "r4_counterexample.json")
    verdict = checks_named(rep, "morphism:")[0]
    cli_proj = checks_named(rep, "projectable-sections:")[0]
    ok = (
        base_ok
        and frame_ok
        and not is_morphism(phi).is_morphism
        and proj["s1_dim"] == 0
        and code == 1
        and not verdict["pass"]
        and verdict["details"]["nonzero"] == ["F[2]"]
        and cli_proj["details"]["s1_dim"] == 0
    )
    record(2, ok, "the R^4 counterexample is a non-morphism with F_2 = dx2^dx1", f"cli: {verdict.get('witness')}; projectable s1 dim {proj['s1_dim']}")
    assert ok


def test_criterion_03_verdict_vs_chain_map():
    code, rep, _ = cli_report("check-morphism", CORPUS / "morphisms.json")
    verdicts = {c["name"].split(":", 1)[1]: c["pass"] for c in checks_named(rep, "morphism:")}
    agree = [c["pass"] for c in checks_named(rep, "chain-spot-check-agrees:")]
    lib = [is_morphism(MAPS[n]).agree for n in MORPHISMS + NON_MORPHISMS]
    expected = {n: n in MORPHISMS for n in MORPHISMS + NON_MORPHISMS}
    ok = verdicts == expected and len(agree) == 10 and all(agree) and all(lib)
    record(3, ok, "F-based verdict equals chain-map verdict on 10 maps", f"{sum(agree)}/10 agree; {sum(verdicts.values())} morphisms")
    assert ok


def _graph_defect(phi, w):
    return e_differential(graph_pullback(phi, w)) - graph_pullback(phi, e_differential(w))


def test_criterion_04_graph():
    mismatches = []
    for name, phi in MAPS.items():
        G = phi.graph_algebroid
        rng = np.random.default_rng(4)
        probes = [random_eform(rng, G, 2, 2) for _ in range(10)]
        probes += [EForm.generator(G, I) for I in range(G.r)]
        probes += [EForm.function(G, Poly.var(x)) for x in G.base_coords]
        graph_verdict = not any(_graph_defect(phi, w) for w in probes)
        if graph_verdict != is_morphism(phi).is_morphism:
            mismatches.append(name)
    ok = not mismatches
    record(4, ok, "graph-map verdict equals direct verdict", f"mismatches: {mismatches}" if mismatches else "10/10 agree")
    assert ok


def test_criterion_05_projector():
    bad = []
    for name, phi in MAPS.items():
        rng = np.random.default_rng(55)
        for _ in range(20):
            w = random_eform(rng, phi.graph_algebroid, 2, 1)
            once = e_phi(phi, w)
            if e_phi(phi, once) != once:
                bad.append(name)
                break
    record(5, not bad, "projector is idempotent on 20 random forms per map", f"failing maps: {bad}" if bad else "200 forms")
    assert not bad


def test_criterion_06_leibniz():
    bad = []
    for name, phi in MAPS.items():
        rng = np.random.default_rng(66)
        for _ in range(10):
            a = random_eform(rng, phi.target, 2, 1)
            b = random_eform(rng, phi.target, 2, 1)
            for p in a.degrees():
                ap = a.part(p)
                lhs = f_phi(phi, wedge(ap, b))
                rhs = wedge(f_phi(phi, ap), pullback(phi, b)) + wedge(pullback(phi, ap), f_phi(phi, b)).scale((-1) ** p)
                if lhs != rhs:
                    bad.append(name)
                    break
            if name in bad:
                break
    record(6, not bad, "F_phi Leibniz rule on 10 random pairs per map", f"failing maps: {bad}" if bad else "100 pairs")
    assert not bad


def test_criterion_07_frame_change():
    code, rep, err = cli_report("frame-covariance", CORPUS / "frame.json", "--trials", 8, "--degree", 2)
    names = {c["name"]: c["pass"] for c in rep["checks"]}
    ok = code == 0 and names.get("curvature-transport") and names.get("gauge-frame-defect-zero") and names.get("gauge-frame-defect-cov")
    record(7, bool(ok), "frame-change identities and covariant frame defect", ", ".join(f"{k}={v}" for k, v in names.items()))
    assert ok


def test_criterion_08_closure():
    code, rep, err = cli_report("gauge-closure", CORPUS / "closure.json", "--trials", 8, "--degree", 2)
    ok = code == 0 and len(rep["checks"]) == 6
    record(8, ok, "covariant transformations close on every target", f"{sum(c['pass'] for c in rep['checks'])}/{len(rep['checks'])} checks")
    assert ok, err


def test_criterion_09_naive_defect():
    code, rep, err = cli_report("gauge-closure", CORPUS / "naive_defect.json", "--trials", 8, "--degree", 2)
    code_plain, _, _ = cli("gauge-closure", CORPUS / "naive_quadratic_plain.json")
    ok = code == 0 and code_plain == 1
    record(
        9,
        ok,
        "naive commutator defect formula; vanishes for linear Poisson",
        f"defect identity {sum(c['pass'] for c in rep['checks'])}/{len(rep['checks'])}; quadratic plain closure exit {code_plain}",
    )
    assert ok, err


def test_criterion_10_psm_invariance():
    from lieoid.gauge import gauge_condition_check

    cases = {"psm_r4.json": True, "psm_r2.json": False, "psm_closed.json": True}
    results = {}
    for name, expect in cases.items():
        b = load(name)
        c = b.checks[0]
        m = b.model(c["model"])
        eps = [parse(e, list(m.target_coords)) for e in c["eps"]]
        cond = gauge_condition_check(m.P, eps, m.target_coords)
        code, rep, _ = cli_report("psm-variation", CORPUS / name)
        inv = checks_named(rep, "invariance")[0]["pass"]
        match = checks_named(rep, "condition-matches-invariance")[0]["pass"]
        results[name] = cond == expect and inv == expect and match and code == (0 if expect else 1)
    ok = all(results.values())
    record(10, ok, "variation is exact iff the gauge condition holds", ", ".join(f"{k[:-5]}={v}" for k, v in results.items()))
    assert ok


def test_criterion_11_torsion():
    code_free, _, _ = cli("psm-variation", CORPUS / "torsion_free.json")
    code_full, _, _ = cli("psm-variation", CORPUS / "torsion_full.json")
    ok = code_free == 0 and code_full == 1
    record(11, ok, "connection invariance: torsion-free passes, torsion-full fails", f"exit codes {code_free}/{code_full}")
    assert ok


def test_criterion_12_flow(tmp_path):
    t0 = time.perf_counter()
    rows64 = flow_rows(CORPUS / "flow_onshell.json")
    elapsed = time.perf_counter() - t0
    rows128 = flow_rows(flow_bundle(tmp_path, "flow_onshell.json", N=128))
    level = rows64[0][1] + rows64[0][2]
    bounded = all(fb + ff <= 10 * level for _, fb, ff, _ in rows64)
    final64 = rows64[-1][1] + rows64[-1][2]
    final128 = rows128[-1][1] + rows128[-1][2]
    ratio = final64 / final128
    ok = bounded and 3 <= ratio <= 5 and elapsed < 30 and rows64[-1][0] == pytest.approx(1.0)
    record(12, ok, "on-shell flow stays near the discretization level", f"sup|F|(1) N64={final64:.3e} N128={final128:.3e} ratio={ratio:.2f}; {elapsed:.1f}s")
    assert ok


def test_criterion_13_action_drift(tmp_path):
    t0 = time.perf_counter()
    drift = {}
    for N in (32, 64, 128):
        rows = flow_rows(flow_bundle(tmp_path, "flow_action.json", N=N))
        drift[N] = abs(rows[-1][3] - rows[0][3])
    elapsed = time.perf_counter() - t0
    ratios = [drift[32] / drift[64], drift[64] / drift[128]]
    ok = all(3 <= r <= 5 for r in ratios) and elapsed < 60
    record(13, ok, "action drift shrinks about 4x per grid doubling", f"ratios {ratios[0]:.2f}, {ratios[1]:.2f}; {elapsed:.1f}s")
    assert ok


def test_criterion_14_determinism(tmp_path):
    runs = [
        ("check-algebroid", "nonjacobi_algebra.json"),
        ("check-morphism", "morphisms.json"),
        ("frame-covariance", "frame.json"),
        ("psm-variation", "torsion_full.json"),
    ]
    same = []
    for cmd, name in runs:
        outs = []
        for k in range(2):
            p = tmp_path / f"{name}.{k}.json"
            cli(cmd, CORPUS / name, "--seed", 12345, "--json", p)
            outs.append(p.read_bytes())
        same.append(outs[0] == outs[1])
    csvs = [cli("flow", CORPUS / "flow_action.json")[1] for _ in range(2)]
    ok = all(same) and csvs[0] == csvs[1]
    record(14, ok, "fixed-seed runs are byte-identical", f"{sum(same)}/{len(same)} reports, flow csv identical={csvs[0] == csvs[1]}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
