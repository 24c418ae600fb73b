"""Regenerate the committed demo problem and benchmark configs.

Run from the repository root:  python3 scripts/make_demo_assets.py
"""

import json
import math
from pathlib import Path

from qenvelope import InstanceSpec, gen_instance
from qenvelope.io import write_problem, write_vector

MAG = 2.0 * math.sqrt(2.0)
ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "assets" / "demo"
CONFIGS = ROOT / "assets" / "configs"

GRID = [0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2]


def demo_problem():
    spec = InstanceSpec(
        kind="gaussian_normalized", m=40, n=80, card_min=5, card_max=5,
        mag_min=MAG, noise_level=0.0, seed=7,
    )
    problem, truth, _ = gen_instance(spec)
    DEMO.mkdir(parents=True, exist_ok=True)
    write_problem(DEMO / "problem.txt", problem)
    write_vector(DEMO / "truth.txt", truth)
    (DEMO / "solver.json").write_text(
        json.dumps({"max_iter": 3000, "x_tol": 1e-12}, indent=2) + "\n"
    )


def bench_configs():
    CONFIGS.mkdir(parents=True, exist_ok=True)
    instance = {
        "kind": "gaussian_normalized", "m": 100, "n": 200,
        "card_min": 10, "card_max": 18, "mag_min": MAG,
    }
    methods = [
        {"name": "envelope_capped", "kind": "envelope", "family": "capped",
         "mu": 2.0, "kmax": 20},
        {"name": "lasso", "kind": "l1", "grid": GRID},
        {"name": "scad", "kind": "scad", "a": 3.7, "grid": GRID},
        {"name": "lp_half", "kind": "lp", "p": 0.5, "grid": GRID},
        {"name": "lp_two_thirds", "kind": "lp", "p": 2.0 / 3.0, "grid": GRID},
    ]
    (CONFIGS / "robustness_demo.json").write_text(json.dumps({
        "seed": 20250810,
        "trials": 3,
        "levels": [round(0.025 * i, 6) for i in range(11)],
        "instance": instance,
        "methods": methods,
        "parameter_mode": "line_search",
        "solver": {"max_iter": 3000},
        "zero_tol": 1e-6,
        "out": "results/robustness_demo.csv",
    }, indent=2) + "\n")

    (CONFIGS / "sparsity_demo.json").write_text(json.dumps({
        "seed": 20250810,
        "n_trials": 25,
        "start_mode": "random_ball",
        "ball": [0.2, 3.0],
        "instance": {**instance, "card_min": 10, "card_max": 10, "noise_level": 0.15},
        "methods": methods,
        "solver": {"max_iter": 4000},
        "zero_tol": 1e-6,
        "out": "results/sparsity_demo.csv",
    }, indent=2) + "\n")

    (CONFIGS / "localmin_demo.json").write_text(json.dumps({
        "seed": 20250810,
        "n_points": 100,
        "instance": {**instance, "card_min": 9, "card_max": 14, "noise_level": 0.15},
        "methods": [
            {"name": "envelope_capped", "kind": "envelope", "family": "capped",
             "mu": 2.0, "kmax": 16},
            {"name": "envelope_const", "kind": "envelope", "family": "constant",
             "mu": 2.0},
            {"name": "lp_half", "kind": "lp", "p": 0.5, "lambda": 0.5},
            {"name": "lp_two_thirds", "kind": "lp", "p": 2.0 / 3.0, "lambda": 0.5},
        ],
        "move_tol": 1e-6,
        "probe_eps": 1e-3,
        "n_random_probes": 20,
        "solver": {"max_iter": 400},
        "out": "results/localmin_demo.csv",
    }, indent=2) + "\n")

    (CONFIGS / "matrix_demo.json").write_text(json.dumps({
        "seed": 20250810,
        "rows": 10, "cols": 10, "rank": 2,
        "p_values": [80, 120, 160],
        "noise_levels": [0.0, 0.05],
        "kmax_range": [1, 6],
        "mag_min": MAG,
        "solver": {"max_iter": 4000},
        "out": "results/matrix_demo.csv",
    }, indent=2) + "\n")


if __name__ == "__main__":
    demo_problem()
    bench_configs()
    print(f"wrote {DEMO} and {CONFIGS}")
