"""Command-line front end.

Usage examples:
  python main.py example-sec4 --out reports/sec4.json
  python main.py bounds --input reports/sec4.json --r 0.5
  python main.py curve --kind phi --s-lo -1 --s-hi 0 --s-count 201 --out reports/phi.csv
  python main.py curve --kind exponent --input pair.json --r-count 101
  python main.py simulate --input pair.json --n 8 --mode dp --trials 100000 --seed 7
  python main.py quantum --input states.json --r 0.05

Exit codes: 0 ok, 2 unreadable input, 3 invariant violation, 4 scale
exceeded, 5 unsupported dimension.
"""
import argparse
import json
import logging
import sys

import numpy as np
from scipy.optimize import brentq

import settings
from adaptive_sim import (
    bayes_decision,
    bayes_test,
    exact_errors,
    fixed_input_decision,
    fixed_input_policy,
    monte_carlo_errors,
    optimal_adaptive_bayes,
    optimal_fixed_input_bayes,
    within_scale,
)
from channel_bounds import (
    channel_phi,
    channel_r0,
    chernoff_channel,
    hk_best_pair,
    hk_channel,
    hoeffding_channel,
    phi_rows,
    regularity_check,
    sec4_example,
    stein_channel,
)
from data_io import (
    curve_frame,
    load_channel_pair,
    load_policy,
    load_states,
    read_json,
    save_curve,
    write_report,
)
from divergence_core import relative_entropy
from errors import DomainError, EnumerationScaleError, ExplabError
from exponent_bounds import han_kobayashi, hoeffding
from quantum_locc import locc_bounds

logger = logging.getLogger("explab")

REGULARITY_EPSILON = 0.1


def _pair_from_args(args):
    if args.input:
        return load_channel_pair(args.input)
    logger.info("No --input given; using the two-channel example with a=%g b=%g p=%g q=%g",
                args.a, args.b, args.p, args.q)
    return sec4_example(args.a, args.b, args.p, args.q)


def _label(value):
    return value if isinstance(value, (int, str)) else str(value)


def cmd_bounds(args):
    pair = _pair_from_args(args)
    r = args.r
    stein, x_stein = stein_channel(pair)
    chern, x_chern = chernoff_channel(pair)
    hoeff, x_hoeff = hoeffding_channel(r, pair)
    hk = hk_channel(r, pair)
    report = {
        "r": r,
        "stein": stein,
        "chernoff": chern,
        "hoeffding": hoeff,
        "hk": hk.value,
        "hk_argmax_s": hk.argmax_s,
        "hk_regime": hk.regime,
        "attaining_inputs": {
            "stein": _label(x_stein),
            "chernoff": _label(x_chern),
            "hoeffding": _label(x_hoeff),
        },
        "r0_env": channel_r0(pair),
        "regularity": regularity_check(pair, REGULARITY_EPSILON).to_json(),
    }
    if np.isfinite(hk.argmax_s):
        report["attaining_inputs"]["hk"] = _label(channel_phi(hk.argmax_s, pair)[1])
    if np.isfinite(hk.value):
        mixture, value = hk_best_pair(r, pair)
        report["hk_best_pair"] = {"input": mixture.to_json(), "value": value}
    write_report(report, args.out)
    return 0


def _phi_curve(pair, args):
    if not args.s_lo < args.s_hi or args.s_count < 2:
        raise DomainError(f"Need s-lo < s-hi and s-count >= 2, got {args.s_lo}, {args.s_hi}, {args.s_count}")
    s = np.linspace(args.s_lo, args.s_hi, args.s_count)
    rows = phi_rows(pair, s)
    columns = {"s": s}
    for i, label in enumerate(pair.input_labels):
        columns[f"phi_row{label}"] = rows[:, i]
    columns["phi_envelope"] = rows.max(axis=1)
    return curve_frame(columns)


def _exponent_curve(pair, args):
    r_hi = args.r_hi if args.r_hi is not None else channel_r0(pair) + 0.5
    if not np.isfinite(r_hi):
        r_hi = 2.0 * stein_channel(pair)[0] + 1.0
    if not args.r_lo < r_hi or args.r_count < 2 or args.r_lo < 0:
        raise DomainError(f"Need 0 <= r-lo < r-hi and r-count >= 2, got {args.r_lo}, {r_hi}, {args.r_count}")
    r_grid = np.linspace(args.r_lo, r_hi, args.r_count)
    columns = {"r": r_grid}
    rows = [pair.row_pair(i) for i in range(pair.num_inputs)]
    for label, (p, pbar) in zip(pair.input_labels, rows):
        columns[f"Be_row{label}"] = [hoeffding(r, p, pbar).value for r in r_grid]
    for label, (p, pbar) in zip(pair.input_labels, rows):
        columns[f"BeStar_row{label}"] = [han_kobayashi(r, p, pbar).value for r in r_grid]
    columns["hk_channel"] = [hk_channel(r, pair).value for r in r_grid]
    return curve_frame(columns)


def cmd_curve(args):
    pair = _pair_from_args(args)
    frame = _phi_curve(pair, args) if args.kind == "phi" else _exponent_curve(pair, args)
    save_curve(frame, args.out)
    return 0


def _exponent(error, n):
    return -np.log(error) / n if error > 0 else np.inf


def cmd_simulate(args):
    pair = _pair_from_args(args)
    n, prior = args.n, args.prior
    if args.mode == "mc" and not args.trials:
        raise DomainError("mode mc needs --trials")
    in_scale = within_scale(n, pair)
    fixed = [optimal_fixed_input_bayes(n, x, pair, prior) for x in pair.input_labels]
    best = int(np.argmin(fixed))
    best_input = pair.input_labels[best]
    report = {
        "n": n,
        "prior": prior,
        "mode": args.mode,
        "best_fixed_input": _label(best_input),
        "best_fixed_bayes_error": fixed[best],
        "best_fixed_exponent": _exponent(fixed[best], n),
        "theory": {"chernoff_channel": chernoff_channel(pair)[0], "stein_channel": stein_channel(pair)[0]},
    }

    test = None
    if args.policy:
        policy, test = load_policy(args.policy, pair, n)
    elif args.mode == "fixed":
        if in_scale or not args.trials:
            policy = fixed_input_policy(best_input, n, pair)
        else:
            policy = fixed_input_decision(best_input, pair)
    else:
        try:
            value, policy = optimal_adaptive_bayes(n, pair, prior)
        except EnumerationScaleError:
            if args.mode == "dp" or not args.trials:
                raise
            logger.warning("Adaptive policy out of scale; simulating the best fixed input instead")
            policy = fixed_input_decision(best_input, pair)
        else:
            report["adaptive_bayes_error"] = value
            report["adaptive_exponent"] = _exponent(value, n)
            if np.isfinite(report["adaptive_exponent"]) and np.isfinite(report["best_fixed_exponent"]):
                report["exponent_gap"] = abs(report["adaptive_exponent"] - report["best_fixed_exponent"])
    if test is None:
        test = bayes_test(pair, prior, n) if in_scale else bayes_decision(pair, prior)

    if args.mode != "mc":
        if in_scale:
            report["exact"] = exact_errors(policy, test, n, pair).to_json()
        else:
            logger.info("n=%d is past the enumeration cap; reporting Monte-Carlo estimates only", n)
    if args.trials:
        estimate, (hw_alpha, hw_beta) = monte_carlo_errors(policy, test, n, pair, args.trials, args.seed)
        report["monte_carlo"] = {
            "alpha": estimate.alpha,
            "beta": estimate.beta,
            "half_width_alpha": hw_alpha,
            "half_width_beta": hw_beta,
            "n": n,
            "trials": args.trials,
            "seed": args.seed,
        }
    write_report(report, args.out)
    return 0


def _switch_point(pair):
    """s in (-1, 0) where the first two rows exchange the envelope, if any."""
    if pair.num_inputs < 2:
        return None

    def diff(s):
        rows = phi_rows(pair, s)
        return float(rows[0] - rows[1])

    lo, hi = -1.0, -1e-6
    if diff(lo) * diff(hi) >= 0:
        return None
    return brentq(diff, lo, hi, xtol=1e-14)


def cmd_example_sec4(args):
    pair = sec4_example(args.a, args.b, args.p, args.q)
    report = pair.to_json()
    r = args.r
    stein, x_stein = stein_channel(pair)
    row_hk = [han_kobayashi(r, *pair.row_pair(i)).value for i in range(pair.num_inputs)]
    report["summary"] = {
        "parameters": {"a": args.a, "b": args.b, "p": args.p, "q": args.q},
        "divergences": [relative_entropy(*pair.row_pair(i)) for i in range(pair.num_inputs)],
        "stein": stein,
        "stein_input": _label(x_stein),
        "phi_switch_s": _switch_point(pair),
        "r": r,
        "hk_channel": hk_channel(r, pair).value,
        "hk_rows": row_hk,
    }
    write_report(report, args.out)
    return 0


def cmd_quantum(args):
    if not args.input:
        raise DomainError("quantum needs --input with the state pair")
    rho, sigma = load_states(args.input)
    bounds = locc_bounds(rho, sigma, args.r, restarts=args.restarts, seed=args.seed)
    write_report(bounds.to_json(), args.out)
    return 0


def _add_common(sub):
    sub.add_argument("--input", type=str, help="Input JSON file")
    sub.add_argument("--out", type=str, help="Output path (stdout when omitted)")
    sub.add_argument("--config", type=str, help="JSON file with defaults for any flag")
    sub.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def _add_sec4(sub):
    defaults = settings.SEC4_DEFAULTS
    sub.add_argument("--a", type=float, default=defaults["a"])
    sub.add_argument("--b", type=float, default=defaults["b"])
    sub.add_argument("--p", type=float, default=defaults["p"])
    sub.add_argument("--q", type=float, default=defaults["q"])


def build_parser():
    parser = argparse.ArgumentParser(prog="explab", description="Error exponents for channel discrimination")
    subs = parser.add_subparsers(dest="command", required=True)
    commands = {}

    bounds = subs.add_parser("bounds", help="Channel Stein/Chernoff/Hoeffding/Han-Kobayashi report")
    _add_common(bounds)
    _add_sec4(bounds)
    bounds.add_argument("--r", type=float, default=0.1)
    bounds.set_defaults(func=cmd_bounds)
    commands["bounds"] = bounds

    curve = subs.add_parser("curve", help="CSV curves of phi or of the exponents")
    _add_common(curve)
    _add_sec4(curve)
    curve.add_argument("--kind", choices=["phi", "exponent"], default="phi")
    curve.add_argument("--s-lo", type=float, default=-1.0)
    curve.add_argument("--s-hi", type=float, default=0.0)
    curve.add_argument("--s-count", type=int, default=201)
    curve.add_argument("--r-lo", type=float, default=0.0)
    curve.add_argument("--r-hi", type=float, default=None)
    curve.add_argument("--r-count", type=int, default=101)
    curve.set_defaults(func=cmd_curve)
    commands["curve"] = curve

    simulate = subs.add_parser("simulate", help="Exact and Monte-Carlo adaptive strategy errors")
    _add_common(simulate)
    _add_sec4(simulate)
    simulate.add_argument("--n", type=int, default=4)
    simulate.add_argument("--prior", type=float, default=0.5)
    simulate.add_argument("--mode", choices=["dp", "fixed", "mc"], default="dp")
    simulate.add_argument("--trials", type=int, default=0)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--policy", type=str, help="Policy/test JSON keyed by history strings")
    simulate.set_defaults(func=cmd_simulate)
    commands["simulate"] = simulate

    sec4 = subs.add_parser("example-sec4", help="Build the two-channel example and summarise it")
    _add_common(sec4)
    _add_sec4(sec4)
    sec4.add_argument("--r", type=float, default=0.5)
    sec4.set_defaults(func=cmd_example_sec4)
    commands["example-sec4"] = sec4

    quantum = subs.add_parser("quantum", help="One-way LOCC bounds for a qubit state pair")
    _add_common(quantum)
    quantum.add_argument("--r", type=float, default=0.05)
    quantum.add_argument("--restarts", type=int, default=settings.RANDOM_RESTARTS)
    quantum.add_argument("--seed", type=int, default=0)
    quantum.set_defaults(func=cmd_quantum)
    commands["quantum"] = quantum
    return parser, commands


def _apply_config(argv, commands):
    """Load --config (if present) into the subcommand defaults; explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command not in commands:
        return
    config = read_json(known.config)
    if not isinstance(config, dict):
        raise DomainError(f"Config {known.config} must hold a JSON object")
    commands[known.command].set_defaults(**{k.replace("-", "_"): v for k, v in config.items()})


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    args = None
    try:
        _apply_config(argv, commands)
        args = parser.parse_args(argv)
        settings.configure_logging(args.verbose)
        return args.func(args)
    except ExplabError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
