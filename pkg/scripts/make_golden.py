"""Regenerate the oracle golden files under tests/golden/.

    python scripts/make_golden.py [--count 200]

Each prox record holds the inputs and the oracle solution with its certified
duality gap. ``fstar.json`` holds the reference optimum of the seeded
least-squares instance used by the rate and telemetry checks.
"""
import argparse
import json
import time
from pathlib import Path

import numpy as np

from ogl.data import SynthSpec, synth_overlap_dataset
from ogl.groups import PenaltyParams, validate_groups
from ogl.oracle import OracleConfig, oracle_objective_min, oracle_prox, random_instance
from ogl.solver import LeastSquaresLoss, lambda_max

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"
RATE_SPEC = SynthSpec(p=500, n=100, g=50, group_size=10, overlap=2, active_groups=5, noise_sigma=0.1, seed=42)
RATE_RHO = 0.01


def prox_record(seed, kind, v, gs, params, config):
    x, gap = oracle_prox(v, gs, params, config)
    return {
        "seed": seed,
        "kind": kind,
        "p": gs.p,
        "v": v.tolist(),
        "groups": [grp.tolist() for grp in gs.groups],
        "weights": gs.weights.tolist(),
        "lambda1": params.lambda1,
        "lambda2": params.lambda2,
        "x": x.tolist(),
        "gap": gap,
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--count", type=int, default=200)
    parser.add_argument("--gap-tol", type=float, default=1e-13)
    parser.add_argument("--skip-prox", action="store_true")
    args = parser.parse_args()
    GOLDEN.mkdir(parents=True, exist_ok=True)
    config = OracleConfig(gap_tol=args.gap_tol)

    if not args.skip_prox:
        start = time.time()
        with open(GOLDEN / "prox_golden.jsonl", "w") as fh:
            gs = validate_groups([[0, 1], [1, 2]], [1.0, 1.0], 3)
            rec = prox_record(-1, "example", np.ones(3), gs, PenaltyParams(0.0, 0.5), config)
            fh.write(json.dumps(rec) + "\n")
            for seed in range(args.count):
                kind, v, gs, params = random_instance(seed)
                fh.write(json.dumps(prox_record(seed, kind, v, gs, params, config)) + "\n")
        print(f"prox goldens: {time.time() - start:.1f}s")

    start = time.time()
    data, gs, _ = synth_overlap_dataset(RATE_SPEC)
    lam = RATE_RHO * lambda_max(data.A, data.b)
    loss = LeastSquaresLoss(data.A, data.b)
    f_star, x_star = oracle_objective_min(loss, gs, PenaltyParams(lam, lam))
    with open(GOLDEN / "fstar.json", "w") as fh:
        json.dump({"spec": RATE_SPEC.__dict__, "rho": RATE_RHO, "f_star": f_star, "x_star": x_star.tolist()}, fh)
        fh.write("\n")
    print(f"f* = {f_star!r} ({time.time() - start:.1f}s)")


if __name__ == "__main__":
    main()
