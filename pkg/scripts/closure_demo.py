"""Commutator of gauge transformations on a quadratic Poisson target.

Compares the naive, covariant and connection-based transformations for a
fixed pair of parameters and prints which closure identities hold.
"""

import argparse
from dataclasses import dataclass

from lieoid.algebroid import poisson_cotangent, so3, tangent_bundle
from lieoid.gauge import Connection, closure_check
from lieoid.symexpr import Poly


@dataclass
class DemoConfig:
    trials: int = 4
    degree: int = 2
    seed: int = 0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=DemoConfig.trials)
    ap.add_argument("--seed", type=int, default=DemoConfig.seed)
    args = ap.parse_args()
    cfg = DemoConfig(trials=args.trials, seed=args.seed)

    X1 = Poly.var("X1")
    X = [Poly.var(f"X{i}") for i in (1, 2, 3)]
    targets = {
        "so(3)": so3(),
        "so(3)*": poisson_cotangent([[0, X[2], -X[1]], [-X[2], 0, X[0]], [X[1], -X[0], 0]], ["X1", "X2", "X3"]),
        "quadratic": poisson_cotangent([[0, X1**2], [-X1**2, 0]], ["X1", "X2"]),
    }
    source = tangent_bundle(["x1", "x2"])
    runs = [
        ("covariant", "cov", None),
        ("naive, defect formula subtracted", "zero", None),
        ("naive, plain", "conn", Connection()),
    ]
    for tname, E in targets.items():
        print(tname)
        for label, kind, conn in runs:
            rep = closure_check(source, E, kind, conn, trials=cfg.trials, degree=cfg.degree, seed=cfg.seed)
            r = rep.identity
            print(f"  {label:<34} {'closes' if rep.passed else 'fails'} ({r.trials - r.failures}/{r.trials} trials)")


if __name__ == "__main__":
    main()
