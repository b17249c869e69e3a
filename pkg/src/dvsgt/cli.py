"""Command-line interface.

Subcommands: analyze, run, mc, sweep, compare, generate-graphs,
generate-problem. Exit codes: 0 ok, 2 config error, 3 divergence (when
the config makes divergence fatal), 4 I/O error.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__, algorithms, config, graphs, metrics, problems, theory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def _add_common(parser, *, needs_out=False):
    parser.add_argument("--config", required=True, help="run config (TOML)")
    parser.add_argument("--out", required=needs_out, default=None,
                        help="output file path")
    parser.add_argument("--threads", type=int, default=1,
                        help="replication-level parallelism (no effect on results)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed_base")
    parser.add_argument("--graph-seed", type=int, default=None,
                        help="override the graph generation seed")
    parser.add_argument("--problem-seed", type=int, default=None,
                        help="override the problem generation seed")


def _setup(args, path=None):
    cfg = config.load_config(path or args.config)
    return config.build_setup(
        cfg, seed=args.seed, graph_seed=args.graph_seed,
        problem_seed=args.problem_seed)


def _metadata(setup):
    return {
        "config_hash": setup.hash,
        "version": __version__,
        "algorithm": setup.algorithm,
        "schedule": setup.schedule.describe(),
        "alpha": json.dumps(setup.alpha_info),
        "rho1": f"{setup.rho1:.17g}",
        "seed_base": setup.seed_base,
        "replications": setup.replications,
    }


def _run_factory(setup):
    def factory(seed):
        rng = np.random.default_rng(seed)
        return algorithms.run(
            setup.problem, setup.process, setup.schedule, setup.alphas,
            setup.x0, setup.horizon, rng, kind=setup.algorithm,
            dsgd_rule=setup.baseline_rule, stop_eps=setup.stop_eps,
            stop_metric=setup.stop_metric)
    return factory


def cmd_analyze(args):
    setup = _setup(args)
    report = theory.build_report(
        rho1=setup.rho1, eta=setup.problem.eta, L=setup.problem.lip,
        nu=setup.problem.nu, n=setup.problem.n,
        alphas=setup.alphas, schedule=setup.schedule,
        mean_comm_rounds=setup.process.mean_comm_rounds(),
        epsilon=args.epsilon)
    report["config_hash"] = setup.hash
    report["library_version"] = __version__
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _ensemble(setup, threads, replications=None):
    R = setup.replications if replications is None else replications
    return metrics.ensemble(
        _run_factory(setup), R, setup.seed_base, threads=threads)


def cmd_run(args):
    setup = _setup(args)
    series = _ensemble(setup, 1, replications=1)
    meta = _metadata(setup)
    meta["replications"] = 1
    metrics.write_ensemble_csv(args.out, series, meta)
    if setup.fail_on_divergence and series.diverged_count > 0:
        print(f"run diverged ({series.diverged_count} trajectory)",
              file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_mc(args):
    setup = _setup(args)
    series = _ensemble(setup, args.threads)
    metrics.write_ensemble_csv(args.out, series, _metadata(setup))
    if setup.fail_on_divergence and series.diverged_count > 0:
        print(f"{series.diverged_count} of {setup.replications} "
              "replications diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_sweep(args):
    setup = _setup(args)
    series = _ensemble(setup, args.threads)
    epsilons = [float(tok) for tok in args.epsilons.split(",")]
    rows = metrics.complexity_sweep(series, epsilons)
    lines = [f"# {k}={v}" for k, v in _metadata(setup).items()]
    lines.append("epsilon,iterations,samples,comms,censored")
    for row in rows:
        lines.append(",".join([
            f"{row.epsilon:.17g}",
            "" if row.iterations is None else str(row.iterations),
            "" if row.samples is None else str(row.samples),
            "" if row.comms is None else f"{row.comms:.17g}",
            str(int(row.censored)),
        ]))
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if setup.fail_on_divergence and series.diverged_count > 0:
        return EXIT_DIVERGED
    return EXIT_OK


def _require_matching_specs(cfgs):
    base = cfgs[0]
    for other in cfgs[1:]:
        for section in ("problem", "graph"):
            if other.get(section) != base.get(section):
                raise config.ConfigError(
                    f"compare requires identical [{section}] sections")


def cmd_compare(args):
    paths = args.configs
    cfgs = [config.load_config(p) for p in paths]
    _require_matching_specs(cfgs)
    setups = []
    for cfg in cfgs:
        setups.append(config.build_setup(
            cfg, seed=args.seed, graph_seed=args.graph_seed,
            problem_seed=args.problem_seed))
    names = []
    for s in setups:
        name = s.algorithm
        if name in names:
            name = f"{name}{names.count(name) + 1}"
        names.append(name)
    series = [_ensemble(s, args.threads) for s in setups]

    meta_lines = [f"# version={__version__}"]
    for name, s in zip(names, setups):
        meta_lines.append(f"# {name}_config_hash={s.hash}")

    # aligned by iteration
    k_max = min(len(sr.k) for sr in series)
    lines = list(meta_lines)
    header = ["k"]
    for name in names:
        header += [f"e_mean_{name}", f"samples_cum_{name}"]
    lines.append(",".join(header))
    for j in range(k_max):
        row = [str(j)]
        for sr in series:
            row += [f"{sr.e_mean[j]:.17g}", str(int(sr.samples_cum[j]))]
        lines.append(",".join(row))
    by_iter = f"{args.out}_by_iteration.csv"
    with open(by_iter, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    # aligned by sample budget: step-function lookup on a shared grid
    budget_cap = min(sr.samples_cum[-1] for sr in series)
    grid = sorted({s for sr in series for s in sr.samples_cum if s <= budget_cap})
    lines = list(meta_lines)
    lines.append(",".join(["samples"] + [f"e_mean_{name}" for name in names]))
    for budget in grid:
        row = [str(budget)]
        for sr in series:
            idx = np.searchsorted(np.array(sr.samples_cum, dtype=object),
                                  budget, side="right") - 1
            row.append(f"{sr.e_mean[idx]:.17g}" if idx >= 0 else "")
        lines.append(",".join(row))
    by_samples = f"{args.out}_by_samples.csv"
    with open(by_samples, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {by_iter} and {by_samples}")
    return EXIT_OK


def cmd_generate_graphs(args):
    rng = np.random.default_rng(args.seed)
    process = graphs.erdos_renyi_support(args.n, args.p, args.count, rng)
    process.save(args.out)
    print(f"wrote {args.out} (rho1={graphs.rho1(process):.6f})")
    return EXIT_OK


def cmd_generate_problem(args):
    rng = np.random.default_rng(args.seed)
    inst = problems.make_regression(
        n=args.n, d=args.d, eig_range=(args.eig_min, args.eig_max),
        noise_sd=args.noise_sd, zero_eigs=args.zero_eigs,
        reference_radius=args.reference_radius, rng=rng)
    inst.save(args.out)
    print(f"wrote {args.out} (eta={inst.eta:.6f}, L={inst.lip:.6f}, "
          f"nu={inst.nu:.6f})")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dvsgt",
        description="Distributed variable sample-size stochastic gradient "
                    "tracking: simulation and theory toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="print the theory report as JSON")
    _add_common(p)
    p.add_argument("--epsilon", type=float, default=1e-3,
                   help="target accuracy for complexity predictions")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="single trajectory to CSV")
    _add_common(p, needs_out=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("mc", help="Monte Carlo ensemble to CSV")
    _add_common(p, needs_out=True)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("sweep", help="accuracy sweep: budgets to reach each epsilon")
    _add_common(p, needs_out=True)
    p.add_argument("--epsilons", required=True,
                   help="comma-separated decreasing accuracy targets")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="run several configs on one problem/graph")
    p.add_argument("--configs", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--graph-seed", type=int, default=None)
    p.add_argument("--problem-seed", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate-graphs", help="write a graph process JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_graphs)

    p = sub.add_parser("generate-problem", help="write a problem instance JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--eig-min", type=float, default=1.0)
    p.add_argument("--eig-max", type=float, default=2.0)
    p.add_argument("--zero-eigs", type=int, default=0)
    p.add_argument("--noise-sd", type=float, default=0.1)
    p.add_argument("--reference-radius", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_problem)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
