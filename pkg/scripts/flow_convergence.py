"""Grid-refinement study for the numeric gauge flow.

Runs the on-shell symplectic data and the quadratic action-drift data at a
sequence of grid sizes and prints the residual and drift ratios.
"""

import argparse
import math
import time
from dataclasses import dataclass, field

from lieoid.flow import FlowConfig, integrate_flow, parse_flow_expr, sample
from lieoid.psm import PsmModel
from lieoid.symexpr import parse


@dataclass
class Case:
    name: str
    poisson: list
    X: list
    A: list
    eps: list


@dataclass
class StudyConfig:
    grids: list = field(default_factory=lambda: [16, 32, 64, 128])
    dt: float = 0.01
    T: float = 1.0
    L: float = 2 * math.pi


CASES = [
    Case(
        "on-shell symplectic",
        [["0", "1"], ["-1", "0"]],
        ["s1 + 1/2*c2", "c1*s2 + s1"],
        [["k*c1 - k*s1*s2", "k*c1*c2"], ["-k*c1", "1/2*k*s2"]],
        ["X1*c2 + s1", "1/2*X2^2 + c1*s2"],
    ),
    Case(
        "quadratic drift",
        [["0", "X1^2"], ["-X1^2", "0"]],
        ["1/2*s1 + 1/4*c2 + 1", "c1*s2 + 1/2*s1"],
        [["1/2*c1 + s2", "c1*s1"], ["s1*s2", "1/3*c2 - s1"]],
        ["X2", "X1"],
    ),
]


def run_case(case: Case, cfg: StudyConfig):
    coords = ["X1", "X2"]
    m = PsmModel([[parse(e, coords) for e in row] for row in case.poisson], coords)
    print(f"\n{case.name}")
    print(f"{'N':>5} {'sup|F|(0)':>12} {'sup|F|(T)':>12} {'|S(T)-S(0)|':>13} {'seconds':>8}")
    prev = None
    for N in cfg.grids:
        g = sample(N, cfg.L, [parse_flow_expr(e, coords) for e in case.X], [[parse_flow_expr(e, coords) for e in r] for r in case.A])
        fc = FlowConfig(dt=cfg.dt, T=cfg.T, eps=[parse_flow_expr(e, coords) for e in case.eps], model=m)
        t0 = time.perf_counter()
        res = integrate_flow(g, fc)
        secs = time.perf_counter() - t0
        first, last = res.rows[0], res.rows[-1]
        f0, f1 = first[1] + first[2], last[1] + last[2]
        drift = abs(last[3] - first[3])
        line = f"{N:>5} {f0:12.4e} {f1:12.4e} {drift:13.4e} {secs:8.2f}"
        if prev:
            line += f"   ratios {prev[0] / f1:5.2f} {prev[1] / drift:5.2f}"
        print(line)
        prev = (f1, drift)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", type=int, nargs="+", default=StudyConfig().grids)
    ap.add_argument("--dt", type=float, default=StudyConfig.dt)
    ap.add_argument("--T", type=float, default=StudyConfig.T)
    args = ap.parse_args()
    cfg = StudyConfig(grids=args.grids, dt=args.dt, T=args.T)
    for case in CASES:
        run_case(case, cfg)


if __name__ == "__main__":
    main()
