"""Reproduce every report end-to-end: example -> curves -> bounds -> simulation -> quantum.

Usage examples:
  python run_pipeline.py
  python run_pipeline.py --out-dir reports --n 8 --trials 20000 --seed 3
"""
import argparse
import json
from pathlib import Path

import main as cli
import settings
from adaptive_sim import optimal_adaptive_bayes
from channel_bounds import sec4_example
from data_io import policy_to_json

BLOCH_Z_VS_X = {"bloch_rho": [0.0, 0.0, 0.9], "bloch_sigma": [0.9, 0.0, 0.0]}


def run_stage(name, argv):
    print(f"Running {name}:", " ".join(argv))
    code = cli.main(argv)
    if code != 0:
        raise SystemExit(code)


def reproduce(out_dir=None, n=6, trials=10000, seed=0, restarts=40):
    """Run all stages into out_dir and return the directory."""
    out = Path(out_dir) if out_dir else settings.REPORTS
    out.mkdir(parents=True, exist_ok=True)
    pair_path = out / "sec4_pair.json"
    run_stage("example", ["example-sec4", "--out", str(pair_path)])
    run_stage("phi curve", ["curve", "--kind", "phi", "--input", str(pair_path),
                            "--out", str(out / "phi_curve.csv")])
    run_stage("exponent curve", ["curve", "--kind", "exponent", "--input", str(pair_path),
                                 "--out", str(out / "exponent_curve.csv")])
    run_stage("bounds", ["bounds", "--input", str(pair_path), "--r", "0.5",
                         "--out", str(out / "bounds.json")])

    _, policy = optimal_adaptive_bayes(n, sec4_example())
    policy_path = out / "adaptive_policy.json"
    print("Writing adaptive policy:", policy_path)
    policy_path.write_text(json.dumps({"policy": policy_to_json(policy)}, sort_keys=True, indent=2) + "\n",
                           encoding="utf-8")
    run_stage("simulation", ["simulate", "--input", str(pair_path), "--n", str(n),
                             "--policy", str(policy_path), "--trials", str(trials),
                             "--seed", str(seed), "--out", str(out / "simulate.json")])

    states_path = out / "states_z_vs_x.json"
    states_path.write_text(json.dumps(BLOCH_Z_VS_X, indent=2) + "\n", encoding="utf-8")
    run_stage("quantum", ["quantum", "--input", str(states_path), "--restarts", str(restarts),
                          "--seed", str(seed), "--out", str(out / "quantum.json")])
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument('--out-dir', type=str, help='Directory for all reports (default: reports/)')
    parser.add_argument('--n', type=int, default=6, help='Horizon for the adaptive simulation')
    parser.add_argument('--trials', type=int, default=10000, help='Monte-Carlo trials per hypothesis')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--restarts', type=int, default=40, help='Random POVM restarts for the quantum stage')
    args = parser.parse_args()
    out = reproduce(args.out_dir, n=args.n, trials=args.trials, seed=args.seed, restarts=args.restarts)
    print("Reports written to", out)


if __name__ == '__main__':
    main()
