"""Command line front end: ``python3 -m nfnls <subcommand>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import lab
from .grid import set_fft_workers


def _common(args) -> lab.ExperimentConfig:
    over = list(args.set or [])
    if args.out is not None:
        over.append(f"out = {args.out}")
    if args.seed is not None:
        over.append(f"seed = {args.seed}")
    if args.threads is not None:
        over.append(f"threads = {args.threads}")
    cfg = lab.load_config(args.config, over)
    set_fft_workers(cfg.threads)
    return cfg


def _pipeline(stage):
    def run(cfg, args):
        rep = lab.run_experiment(cfg.replace(pipeline=(stage,)))
        for k, v in rep.stages.get(stage, {}).items():
            print(f"{k} = {v}")
        if rep.derived:
            print("derived: " + ", ".join(f"{k}={v}" for k, v in rep.derived.items()))
        if rep.error:
            print(f"error in {rep.error['stage']}: {rep.error['type']}: {rep.error['message']}", file=sys.stderr)
        for f in rep.failures:
            print(f"assertion failed: {f}", file=sys.stderr)
        return rep.exit_code

    return run


def cmd_trees(cfg, args):
    from .trees import double_factorial_odd, enumerate_chronicles

    rows = []
    for J in range(1, args.max_J + 1):
        chs = enumerate_chronicles(J)
        rows.append((J, len(chs), double_factorial_odd(J), 3 * J + 1, 2 * J + 1))
        print(f"J={J}: {len(chs)} chronicles")
    lab.write_csv(Path(cfg.out) / "trees.csv", ("J", "chronicles", "double_factorial", "nodes", "terminal"), rows)
    return 0


def cmd_resonance(cfg, args):
    from .resonance import classify, enumerate_triples

    N = cfg.N if cfg.N is not None else 1.0
    trips = enumerate_triples(args.n, cfg.K, slack=args.slack)
    rows = [(t.n1, t.n2, t.n3, t.phi, t.resonant, classify(t, N)) for t in trips]
    lab.write_csv(Path(cfg.out) / "resonance.csv", ("n1", "n2", "n3", "phase", "resonant", "class"), rows)
    print(f"{len(rows)} triples for box {args.n} (K={cfg.K}, slack {args.slack}, N={N})")
    return 0


def cmd_compare(cfg, args):
    from .propagator import Trajectory

    a, b = Trajectory.load(args.a), Trajectory.load(args.b)
    cmp = lab.compare_trajectories(a, b, cfg.params)
    cmp.write(Path(cfg.out) / "compare.csv")
    print(f"max M-norm {cmp.max_m:.6e}, max L2 {cmp.max_l2:.6e}")
    return 0


def cmd_acceptance(cfg, args):
    from .acceptance import run_all

    only = args.only or cfg.acceptance_only or None
    results = run_all(only, echo=print)
    lab.write_csv(Path(cfg.out) / "acceptance.csv", ("criterion", "name", "passed", "detail"),
                  [(r.number, r.name, r.passed, r.detail) for r in results])
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failed {failed}" if failed else ""))
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nfnls", description="Normal-form laboratory for the cubic NLS.")
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="seed for randomized data and sweeps")
    ap.add_argument("--threads", type=int, help="FFT worker threads")
    ap.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, help_ in (("norm", "box table and modulation norm of the data"),
                        ("evolve", "split-step reference solution"),
                        ("nf-solve", "normal-form fixed point, compared with split-step"),
                        ("remainder", "remainder norms at every depth up to J")):
        sub.add_parser(name, help=help_).set_defaults(func=_pipeline(name))

    p = sub.add_parser("trees", help="count chronicles per generation")
    p.add_argument("--max-J", type=int, default=6)
    p.set_defaults(func=cmd_trees)

    p = sub.add_parser("resonance", help="triples feeding one box, with classes")
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--slack", type=int, default=1)
    p.set_defaults(func=cmd_resonance)

    p = sub.add_parser("compare", help="distances between two saved trajectories")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("acceptance", help="run the acceptance criteria")
    p.add_argument("--only", type=int, nargs="*", help="criterion numbers")
    p.set_defaults(func=cmd_acceptance)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _common(args)
    except (lab.ConfigError, ValueError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        return args.func(cfg, args)
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
