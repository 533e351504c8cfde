"""Command-line front end: ``alphasig {gen,bounds,verify,oracle,compare,exp1,exp2}``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from .dual_verifier import VerifyConfig, run_alpha_sig, tau_compare, write_trace_csv, compute_slope_ranges
from .interval_bounds import compute_activation_bounds
from .model import (
    ModelFormatError,
    ModelValidationError,
    VerificationProblem,
    generate_random,
    load_model,
    save_model,
)
from .oracle import sample_min

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOUNDNESS = 3
EXIT_IO = 4

EXPERIMENT_SIZES = (5, 10, 50, 100, 500, 1000)
EXPERIMENT_MODELS = 5
WEIGHT_STD = 2.5
BIAS_STD = 0.25


class CliError(Exception):
    def __init__(self, msg, code=EXIT_VALIDATION):
        super().__init__(msg)
        self.code = code


@dataclass
class RunConfig:
    steps: int = 300
    lr: float = 0.05
    lr_decay: float = 0.98
    epsilon: float = 1.0
    p: float = math.inf
    seed: int = 0
    trace_path: str | None = None
    output: str = "text"

    def __post_init__(self):
        if self.steps < 0:
            raise CliError("--steps must be >= 0")
        if not self.epsilon > 0:
            raise CliError("--eps must be positive")

    def verify_config(self, tol=None):
        return VerifyConfig(steps=self.steps, lr=self.lr, lr_decay=self.lr_decay, tol=tol)


def _threads():
    raw = os.environ.get("ALPHASIG_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"ALPHASIG_THREADS must be an integer, got {raw!r}")
    return max(n, 1)


def _thread_limit():
    n = _threads()
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _vector(text, n, name, default_fill):
    if text is None:
        return np.full(n, default_fill)
    key = text.strip().lower()
    if key == "ones":
        return np.ones(n)
    if key == "zeros":
        return np.zeros(n)
    try:
        vals = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise CliError(f"--{name}: expected 'ones', 'zeros' or comma-separated numbers")
    if vals.shape != (n,):
        raise CliError(f"--{name} has {vals.size} entries, expected {n}")
    return vals


def _norm(text):
    key = str(text).lower()
    if key in ("inf", "infinity"):
        return math.inf
    if key in ("2", "two"):
        return 2
    raise argparse.ArgumentTypeError(f"--p must be 'inf' or '2', got {text!r}")


def _load(path):
    try:
        return load_model(path)
    except OSError as exc:
        raise CliError(f"cannot read model: {exc}", EXIT_IO)
    except (ModelFormatError, ModelValidationError) as exc:
        raise CliError(f"invalid model {path}: {exc}")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: line {exc.lineno}: {exc.msg}")


def _write_json(path, data):
    try:
        with open(path, "w") as fh:
            json.dump(data, fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)


def _problem(args):
    net = _load(args.model)
    try:
        return VerificationProblem(
            net,
            _vector(args.c, net.output_dim, "c", 1.0),
            _vector(args.x0, net.input_dim, "x0", 0.0),
            args.eps,
            args.p,
        )
    except ValueError as exc:
        raise CliError(str(exc))


def _fmt_tau(t):
    return "undefined" if math.isnan(t) else f"{t:+.2f}"


# -- subcommands -------------------------------------------------------------


def cmd_gen(args):
    if args.exp1_index is not None:
        if args.exp1_index < 1:
            raise CliError("--exp1-index must be >= 1")
        weight_std = WEIGHT_STD / args.exp1_index
    else:
        weight_std = args.weight_std
    try:
        net = generate_random(args.widths, weight_std, args.bias_std, args.seed)
    except ValueError as exc:
        raise CliError(str(exc))
    try:
        save_model(net, args.out)
    except OSError as exc:
        raise CliError(f"cannot write model: {exc}", EXIT_IO)
    print(f"wrote {args.out}: widths {net.widths}, weight_std {weight_std:g}, seed {args.seed}")
    return EXIT_OK


def cmd_bounds(args):
    prob = _problem(args)
    bounds = compute_activation_bounds(prob)
    ranges = compute_slope_ranges(prob.net, bounds) if args.slopes else None
    try:
        bounds.save(args.out, ranges)
    except OSError as exc:
        raise CliError(f"cannot write bounds: {exc}", EXIT_IO)
    print(f"wrote {args.out}: {len(bounds)} hidden layers")
    return EXIT_OK


def cmd_verify(args):
    cfg = RunConfig(steps=args.steps, lr=args.lr, lr_decay=args.lr_decay, epsilon=args.eps, p=args.p,
                    trace_path=args.trace, output=args.output)
    prob = _problem(args)
    with _thread_limit():
        bounds = compute_activation_bounds(prob)
        result = run_alpha_sig(prob, bounds, cfg.verify_config(tol=None if args.tol <= 0 else args.tol))
    if cfg.trace_path:
        try:
            write_trace_csv(result, cfg.trace_path)
        except OSError as exc:
            raise CliError(f"cannot write trace: {exc}", EXIT_IO)
    payload = result.to_dict()
    payload.update(model=args.model, epsilon=prob.epsilon, p="inf" if prob.p == math.inf else "2")
    if args.out:
        _write_json(args.out, payload)
    if cfg.output == "json":
        print(json.dumps(payload))
    elif cfg.output == "csv":
        print("iteration,objective,best_so_far,wall_ms")
        for k, (v, b, ms) in enumerate(zip(result.trace, result.best_trace, result.wall_ms)):
            print(f"{k},{v!r},{b!r},{ms:.3f}")
    else:
        print(f"bound {result.bound:.10g}")
        print(f"iterations {result.iterations_run} (best at {result.best_iteration})")
        print(f"wall time {result.wall_time:.3f} s")
    return EXIT_OK


def cmd_oracle(args):
    prob = _problem(args)
    if args.bound is not None:
        bound = args.bound
    elif args.result is not None:
        bound = _read_json(args.result).get("bound")
        if bound is None:
            raise CliError(f"{args.result} has no 'bound' field")
    else:
        raise CliError("give --bound or --result")
    report = sample_min(prob, args.samples, args.seed, bound=float(bound))
    if args.report:
        try:
            report.save(args.report)
        except OSError as exc:
            raise CliError(f"cannot write report: {exc}", EXIT_IO)
    if args.output == "json":
        print(json.dumps(report.to_dict()))
    else:
        print(f"bound {report.bound:.10g}")
        print(f"sampled minimum {report.sampled_min:.10g} over {report.samples} points")
        print(f"violations {report.violations}")
        print("PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_SOUNDNESS


def _tau_rows(ref, new, ref_field, new_field):
    def rows(doc):
        if "results" in doc:
            return {(r["size"], r["model"]): r for r in doc["results"]}
        return {(None, None): doc}

    r_rows, n_rows = rows(ref), rows(new)
    keys = sorted(set(r_rows) & set(n_rows), key=lambda k: (k[0] or 0, k[1] or 0))
    if not keys:
        raise CliError("the two inputs share no (size, model) entries")
    out = []
    for k in keys:
        try:
            b_ref, b_new = float(r_rows[k][ref_field]), float(n_rows[k][new_field])
        except KeyError as exc:
            raise CliError(f"missing field {exc} in input")
        out.append((k, b_ref, b_new, tau_compare(b_new, b_ref)))
    return out


def _tau_table(rows):
    sizes = sorted({k[0] for k, *_ in rows})
    models = sorted({k[1] for k, *_ in rows})
    lines = ["NN size    " + "".join(f"{'tau_' + str(m):>10}" for m in models)]
    by = {k: t for k, _, _, t in rows}
    for s in sizes:
        cells = "".join(f"{_fmt_tau(by[(s, m)]) if (s, m) in by else '-':>10}" for m in models)
        lines.append(f"{'4x' + str(s) + 'σ':<11}" + cells)
    return "\n".join(lines)


def cmd_compare(args):
    if args.batch:
        doc = _read_json(args.batch)
        rows = _tau_rows(doc, doc, "baseline", "bound")
    else:
        if not (args.ref and args.new):
            raise CliError("give --ref and --new, or --batch")
        rows = _tau_rows(_read_json(args.ref), _read_json(args.new), args.ref_field, args.new_field)
    if args.output == "json":
        print(json.dumps([{"size": k[0], "model": k[1], "ref": r, "new": n, "tau": None if math.isnan(t) else t}
                          for k, r, n, t in rows]))
    elif rows[0][0] == (None, None):
        _, r, n, t = rows[0]
        print(f"ref {r:.10g}  new {n:.10g}  tau {_fmt_tau(t)}")
    else:
        print(_tau_table(rows))
    return EXIT_OK


def _experiment_seed(exp_id, size, model, base):
    return base + 1_000_000 * exp_id + 1_000 * size + model


def run_instance(task):
    """One experiment cell: generate, bound, baseline, optimize.  Picklable for process pools."""
    exp_id, size, model, base, steps, in_dim, out_dim = task
    weight_std = WEIGHT_STD / model if exp_id == 1 else WEIGHT_STD
    seed = _experiment_seed(exp_id, size, model, base)
    net = generate_random([in_dim] + [size] * 4 + [out_dim], weight_std, BIAS_STD, seed)
    prob = VerificationProblem(net, np.ones(out_dim), np.zeros(in_dim), 1.0, math.inf)
    bounds = compute_activation_bounds(prob)
    baseline = run_alpha_sig(prob, bounds, VerifyConfig(steps=0)).bound
    res = run_alpha_sig(prob, bounds, VerifyConfig(steps=steps))
    return {
        "size": size, "model": model, "seed": seed, "weight_std": weight_std,
        "baseline": baseline, "bound": res.bound, "tau": tau_compare(res.bound, baseline),
        "iterations": res.iterations_run, "wall_time": res.wall_time,
    }


def _cmd_experiment(args, exp_id):
    tasks = [(exp_id, s, m, args.seed, args.steps, args.input_dim, args.output_dim)
             for s in args.sizes for m in range(1, args.models + 1)]
    jobs = args.jobs or _threads() or 1
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_instance, tasks))
    else:
        with _thread_limit():
            results = [run_instance(t) for t in tasks]
    doc = {"experiment": f"exp{exp_id}", "steps": args.steps, "results": results}
    if args.out:
        _write_json(args.out, doc)
    if args.output == "json":
        print(json.dumps(doc))
    else:
        print(f"experiment {exp_id}: tau of alpha-sig vs static baseline (percent, + is tighter)")
        print(_tau_table([((r["size"], r["model"]), r["baseline"], r["bound"], r["tau"]) for r in results]))
        by_size = {}
        for r in results:
            by_size.setdefault(r["size"], []).append(r["wall_time"])
        print("mean solve time: " + ", ".join(f"4x{s}σ {np.mean(t):.3f}s" for s, t in by_size.items()))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_problem_args(p):
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--c", default="ones", help="objective vector: 'ones' or comma-separated values")
    p.add_argument("--x0", default=None, help="ball center: 'zeros' (default) or comma-separated values")
    p.add_argument("--eps", type=float, default=1.0, help="ball radius")
    p.add_argument("--p", type=_norm, default=math.inf, help="input norm: inf or 2")


def _add_output(p, choices=("text", "json")):
    p.add_argument("--output", choices=choices, default="text")


def build_parser():
    parser = argparse.ArgumentParser(prog="alphasig", description="Sigmoid network verification with tunable tangent relaxations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random sigmoid network")
    p.add_argument("--widths", type=_int_list, default=[1, 5, 5, 5, 5, 1])
    p.add_argument("--weight-std", type=float, default=WEIGHT_STD)
    p.add_argument("--bias-std", type=float, default=BIAS_STD)
    p.add_argument("--exp1-index", type=int, default=None, help="model index j; sets weight std to 2.5/j")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bounds", help="export interval bounds (and slope ranges) as JSON")
    _add_problem_args(p)
    p.add_argument("--slopes", action="store_true", help="include per-neuron slope ranges")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="compute a certified lower bound")
    _add_problem_args(p)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--lr-decay", type=float, default=0.98)
    p.add_argument("--tol", type=float, default=0.0, help="stop once the objective moves less than this; 0 runs every step")
    p.add_argument("--trace", default=None, help="write the iteration trace CSV here")
    p.add_argument("--out", default=None, help="write the result JSON here")
    _add_output(p, ("text", "json", "csv"))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="check a bound against sampled network values")
    _add_problem_args(p)
    p.add_argument("--bound", type=float, default=None)
    p.add_argument("--result", default=None, help="result JSON from 'verify --out'")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None, help="write the oracle report JSON here")
    _add_output(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="percent improvement (tau) between two results")
    p.add_argument("--ref", default=None)
    p.add_argument("--new", default=None)
    p.add_argument("--ref-field", default="bound")
    p.add_argument("--new-field", default="bound")
    p.add_argument("--batch", default=None, help="experiment JSON; compares 'bound' to 'baseline'")
    _add_output(p)
    p.set_defaults(func=cmd_compare)

    for exp_id in (1, 2):
        p = sub.add_parser(f"exp{exp_id}", help=f"run the experiment-{exp_id} grid of random networks")
        p.add_argument("--sizes", type=_int_list, default=list(EXPERIMENT_SIZES))
        p.add_argument("--models", type=int, default=EXPERIMENT_MODELS)
        p.add_argument("--steps", type=int, default=300)
        p.add_argument("--input-dim", type=int, default=1)
        p.add_argument("--output-dim", type=int, default=1)
        p.add_argument("--seed", type=int, default=0, help="base seed")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default ALPHASIG_THREADS or 1)")
        p.add_argument("--out", default=None)
        _add_output(p)
        p.set_defaults(func=lambda a, e=exp_id: _cmd_experiment(a, e))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"alphasig {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
