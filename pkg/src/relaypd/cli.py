"""Command-line entry point.

Subcommands: run, sweep, accountant, validate-stepsize, gen-data, bench.
Flags override the corresponding config fields. Exit code 0 on success,
1 with a diagnostic on stderr for any domain error.
"""
import argparse
import csv
import json
import sys
import time
from dataclasses import replace

import numpy as np

from . import engine, harness, metrics, objective, privacy, topology
from .errors import RelaypdError

__all__ = ["main"]


def _parse_float_list(text, flag):
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise RelaypdError("%s: expected a comma-separated list of numbers" % flag)
    if not vals:
        raise RelaypdError("%s: empty list" % flag)
    return vals


def _apply_run_overrides(cfg, args):
    run = cfg.run
    if args.iterations is not None:
        if args.iterations < 0:
            raise RelaypdError("--iterations: must be nonnegative")
        run = replace(run, iterations=args.iterations)
    if args.output is not None:
        run = replace(run, output=args.output)
    if args.backend is not None:
        run = replace(run, backend=args.backend)
    if args.start_agent is not None:
        if args.start_agent < 1:
            raise RelaypdError("--start-agent: 1-based, must be >= 1")
        run = replace(run, start_agent=args.start_agent)
    return replace(cfg, run=run)


def _cmd_run(args):
    cfg = _apply_run_overrides(harness.load_config(args.config), args)
    bundle = harness.run_experiment(cfg)
    for key in (
        "iterations",
        "final_rel_err",
        "final_consensus",
        "xi",
        "comm",
        "realized_epsilon",
        "backend",
    ):
        print("%s = %r" % (key, bundle.summary[key]))
    if cfg.run.output is not None:
        doc, lines = harness.emit_results(bundle, cfg.run.output)
        print("wrote %s and %s" % (doc, lines))
    return 0


def _cmd_sweep(args):
    cfg = harness.load_config(args.config)
    epsilons = _parse_float_list(args.epsilons, "--epsilons")
    result = harness.run_sweep(cfg, epsilons, args.seeds)
    text = json.dumps(result, sort_keys=True, indent=2)
    if args.output is not None:
        with open(args.output, "w") as fh:
            fh.write(text)
            fh.write("\n")
        print("wrote %s" % args.output)
    else:
        print(text)
    for row in result["medians"]:
        label = "noiseless" if row["epsilon"] is None else "eps=%g" % row["epsilon"]
        print("median final_rel_err %-10s %.6e" % (label, row["median_final_rel_err"]))
    return 0


def _cmd_accountant(args):
    delta_sens = privacy.sensitivity(args.alpha, args.beta, args.lipschitz)
    rho1 = privacy.rho_first(args.alpha, args.beta, args.lipschitz, args.sigma1)
    schedule = privacy.NoiseSchedule(
        sigma1_sq=args.sigma1, attenuation=args.attenuation
    )
    ledger = privacy.PrivacyLedger(
        alpha=args.alpha,
        beta=args.beta,
        lipschitz=args.lipschitz,
        delta=args.delta,
        schedule=schedule,
        tau=np.array([args.lci], dtype=np.int64),
    )
    rho = privacy.total_zcdp(ledger)
    eps, _ = privacy.total_budget(ledger)
    print("sensitivity = %.12g" % delta_sens)
    print("rho_first = %.12g" % rho1)
    print("zcdp_total = %.12g" % rho)
    print("epsilon = %.12g" % eps)
    return 0


def _validate_reports(s, p, mode):
    modes = ("simple", "matrix") if mode == "both" else (mode,)
    failed = False
    for m in modes:
        rep = objective.validate_stepsizes(s, p, mode=m)
        line = "%s: %s - %s" % (m, "ok" if rep.ok else "FAIL", rep.message)
        print(line)
        if rep.min_eigenvalue is not None:
            print("%s: min eigenvalue = %.12g" % (m, rep.min_eigenvalue))
        failed = failed or not rep.ok
    return 1 if failed else 0


def _cmd_validate_stepsize(args):
    if args.config is not None:
        if args.alphas is not None or args.lipschitz is not None:
            raise RelaypdError("--config is exclusive with --alphas/--lipschitz")
        cfg = harness.load_config(args.config)
        _, p, s = harness._materialize(cfg)
        return _validate_reports(s, p, args.mode)
    if args.alphas is None or args.lipschitz is None:
        raise RelaypdError("give either --config or both --alphas and --lipschitz")
    alphas = _parse_float_list(args.alphas, "--alphas")
    lips = _parse_float_list(args.lipschitz, "--lipschitz")
    if len(alphas) != len(lips):
        raise RelaypdError("--alphas and --lipschitz must have the same length")
    # The positive-definiteness test does not depend on the dimension q
    # (the test matrix is a Kronecker product with I_q), so a scalar
    # stand-in loss with the requested Lipschitz constant is exact.
    losses = [
        objective.least_squares_loss(np.array([[np.sqrt(L)]]), np.zeros(1))
        for L in lips
    ]
    p = objective.problem_instance(losses)
    beta = args.beta if args.beta is not None else 1.0 / (2.0 * (len(alphas) + 1))
    s = objective.StepsizeSet(alphas=np.array(alphas), beta=beta)
    return _validate_reports(s, p, args.mode)


def _cmd_gen_data(args):
    if args.loss == "logistic":
        # draw the design and planted x exactly as the least-squares
        # generator does, then replace targets by Bernoulli labels
        p, x_nat = harness.gen_synthetic(
            args.n, args.q, args.m, 0.0, args.sparsity, args.seed
        )
        rng = np.random.default_rng(args.seed + 1)
    else:
        p, x_nat = harness.gen_synthetic(
            args.n, args.q, args.m, args.noise, args.sparsity, args.seed
        )
        rng = None
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        for loss in p.losses:
            z = loss.B @ x_nat
            if args.loss == "logistic":
                labels = (rng.random(z.size) < 1.0 / (1.0 + np.exp(-z))).astype(float)
            else:
                labels = loss.b
            for row, lab in zip(loss.B, labels):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(lab))])
    print("wrote %s (%d rows, %d features, loss=%s)"
          % (args.out, args.n * args.m, args.q, args.loss))
    if args.graph_out is not None:
        g = topology.generate_topology(
            args.topology, args.n, p=args.p,
            rng=np.random.default_rng(args.seed + 2),
        )
        with open(args.graph_out, "w") as fh:
            fh.write("%d %d\n" % (g.n, len(g.edges)))
            for i, j in g.edges:
                fh.write("%d %d\n" % (i + 1, j + 1))
        print("wrote %s (%d nodes, %d edges)" % (args.graph_out, g.n, len(g.edges)))
    return 0


def _cmd_bench(args):
    cfg = harness.load_config(args.config)
    if args.iterations is not None:
        cfg = replace(cfg, run=replace(cfg.run, iterations=args.iterations))
    graph, p, s = harness._materialize(cfg)
    reference = metrics.reference_solution(p)
    K = cfg.run.iterations
    baseline = None
    for backend in engine.available_backends():
        best = None
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            traj = engine.run(
                p, s, graph, None, K,
                seed_relay=cfg.seeds.relay, seed_noise=cfg.seeds.noise,
                start=cfg.run.start_agent - 1, reference=reference,
                backend=backend,
            )
            dt = time.perf_counter() - t0
            best = dt if best is None else min(best, dt)
        series = np.array([r.rel_err for r in traj.records])
        line = "%-6s %d steps in %.4f s (%.0f steps/s)" % (
            backend, K, best, K / best if best > 0 else float("inf"),
        )
        if backend == "numpy":
            baseline = (best, series)
        elif baseline is not None:
            diff = float(np.max(np.abs(series - baseline[1])))
            line += "  speedup x%.1f, max |rel_err diff| vs numpy = %.3e" % (
                baseline[0] / best if best > 0 else float("inf"), diff,
            )
        print(line)
    if len(engine.available_backends()) == 1:
        print("compiled kernel not installed; only the numpy backend was timed")
    return 0


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="relaypd",
        description="Relay primal-dual simulator for decentralized "
        "composite optimization with differential privacy",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one configured run")
    run.add_argument("--config", required=True)
    run.add_argument("--iterations", type=int, default=None)
    run.add_argument("--output", default=None)
    run.add_argument("--backend", choices=("numpy", "cext"), default=None)
    run.add_argument("--start-agent", dest="start_agent", type=int, default=None)
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="budget sweep over epsilons and seeds")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--epsilons", required=True,
                       help="comma-separated, e.g. 1,5,10")
    sweep.add_argument("--seeds", type=int, default=5,
                       help="number of paired trials")
    sweep.add_argument("--output", default=None)
    sweep.set_defaults(func=_cmd_sweep)

    acct = sub.add_parser("accountant", help="print the privacy budget")
    acct.add_argument("--alpha", type=float, required=True)
    acct.add_argument("--beta", type=float, required=True)
    acct.add_argument("--lipschitz", type=float, required=True)
    acct.add_argument("--sigma1", type=float, required=True,
                      help="initial noise VARIANCE sigma_1^2")
    acct.add_argument("--attenuation", type=float, required=True)
    acct.add_argument("--lci", type=int, required=True,
                      help="largest per-agent activation count xi")
    acct.add_argument("--delta", type=float, required=True)
    acct.set_defaults(func=_cmd_accountant)

    val = sub.add_parser("validate-stepsize", help="check a stepsize set")
    val.add_argument("--config", default=None)
    val.add_argument("--alphas", default=None, help="comma-separated")
    val.add_argument("--lipschitz", default=None, help="comma-separated")
    val.add_argument("--beta", type=float, default=None,
                     help="defaults to 1/(2(n+1))")
    val.add_argument("--mode", choices=("simple", "matrix", "both"),
                     default="both")
    val.set_defaults(func=_cmd_validate_stepsize)

    gen = sub.add_parser("gen-data", help="write a synthetic CSV dataset")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--q", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--noise", type=float, default=0.0)
    gen.add_argument("--sparsity", type=float, default=0.25)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--loss", choices=("least-squares", "logistic"),
                     default="least-squares")
    gen.add_argument("--out", required=True)
    gen.add_argument("--graph-out", dest="graph_out", default=None)
    gen.add_argument("--topology", default="ring")
    gen.add_argument("--p", type=float, default=None,
                     help="edge probability for erdos-renyi")
    gen.set_defaults(func=_cmd_gen_data)

    bench = sub.add_parser("bench", help="time the available backends")
    bench.add_argument("--config", required=True)
    bench.add_argument("--iterations", type=int, default=None)
    bench.add_argument("--repeats", type=int, default=3)
    bench.set_defaults(func=_cmd_bench)
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RelaypdError as exc:
        sys.stderr.write("error: %s\n" % exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
