"""Command-line entry point.

Exit codes: 0 success, 1 usage or parameter error, 2 training aborted on a
non-finite value, 3 a checker instance failed.
"""
import argparse
import logging
import math
import sys
from pathlib import Path

from . import checks, illustrative, trainer
from .errors import MRError, NumericError, ParameterError
from .tensor import make_rng

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_CHECK = 0, 1, 2, 3
ILLUSTRATIVE_KINDS = ("logistic-gd", "logistic-mr", "linear-ls", "linear-mr-ls", "linear-mr-gd")

log = logging.getLogger("mreweight")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p):
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = _Parser(prog="mreweight", description="Multiplicative reweighting experiments")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("illustrative", help="1D logistic / linear reproductions")
    p.add_argument("kind", choices=ILLUSTRATIVE_KINDS)
    _add_common(p)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1 / 3)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--n", type=int, default=15)

    p = sub.add_parser("train", help="run one experiment from a JSON spec")
    p.add_argument("spec", type=Path)
    _add_common(p)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)

    p = sub.add_parser("check", help="run a randomized checker suite")
    p.add_argument("suite", choices=checks.SUITES)
    _add_common(p)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)

    p = sub.add_parser("grid", help="grid search over the reweighting step size")
    p.add_argument("spec", type=Path)
    p.add_argument("--etas", type=float, nargs="+", required=True)
    _add_common(p)
    p.add_argument("--epochs", type=int, default=None)
    return parser


def _out_dir(path):
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ParameterError(f"cannot create output directory {path}: {exc.strerror}") from None
    return path


def cmd_illustrative(args):
    seed = 0 if args.seed is None else args.seed
    rng = make_rng(seed)
    logistic = args.kind.startswith("logistic")
    setup = illustrative.make_setup(args.n, args.sigma, args.epsilon,
                                    kind="logistic" if logistic else "linear", rng=rng)
    if args.kind == "logistic-gd":
        trace = illustrative.logistic_noisy_gd(setup, args.alpha, 1000 if args.epochs is None else args.epochs)
    elif args.kind == "logistic-mr":
        eta = 1.0 if args.eta is None else args.eta
        trace = illustrative.logistic_mr_gd(setup, 1000 if args.epochs is None else args.epochs, eta, args.alpha)
    elif args.kind == "linear-ls":
        trace = illustrative.linear_mr_ls_run(setup, 1.0, 0)
    elif args.kind == "linear-mr-ls":
        eta = 0.01 if args.eta is None else args.eta
        trace = illustrative.linear_mr_ls_run(setup, eta, 10_000 if args.epochs is None else args.epochs, verify_every=100)
    else:
        eta = 0.01 if args.eta is None else args.eta
        trace = illustrative.linear_mr_gd_run(setup, args.alpha, eta, 2000 if args.epochs is None else args.epochs)
    path = _out_dir(args.out) / f"{args.kind}.csv"
    trainer.write_oned_trace(trace, path)
    print(f"{args.kind}: {trace.epochs} epochs, final theta {trace.theta[-1]:.6g}, "
          f"clean loss {trace.clean_loss[-1]:.6g} -> {path}")
    return EXIT_OK


def _load(args):
    spec = trainer.load_spec(args.spec)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    optim = {}
    if getattr(args, "epochs", None) is not None:
        optim["epochs"] = args.epochs
    if getattr(args, "eta", None) is not None:
        optim["eta"] = args.eta
    if optim:
        changes["optim"] = optim
    return spec.replace(**changes) if changes else spec


def cmd_train(args):
    if not args.spec.is_file():
        raise UsageError(f"spec file not found: {args.spec}")
    spec = _load(args)
    trace = trainer.run_experiment(spec)
    out = _out_dir(args.out)
    trainer.write_trace_csv(trace, out / "trace.csv")
    trainer.write_summary_json(spec, trace, out / "summary.json")
    print(f"final test accuracy {trace.final_test_acc:.4f}; wrote {out / 'trace.csv'} and {out / 'summary.json'}")
    return EXIT_OK


def cmd_check(args):
    results = checks.run_suite(args.suite, instances=args.instances, seeds=args.seeds,
                               seed=0 if args.seed is None else args.seed, epochs=args.epochs, eta=args.eta)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{args.suite}: {len(results) - failed}/{len(results)} passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK


def cmd_grid(args):
    if not args.spec.is_file():
        raise UsageError(f"spec file not found: {args.spec}")
    etas = []
    for eta in args.etas:
        if eta in etas:
            log.warning("duplicate eta %g dropped", eta)
            continue
        etas.append(eta)
    if any(not (e > 0 and math.isfinite(e)) for e in etas):
        raise ParameterError("every eta must be positive and finite")
    spec = _load(args)
    result = trainer.grid_search_eta(spec, etas, workers=trainer.threads_from_env())
    out = _out_dir(args.out)
    trainer.write_grid_csv(result, out / "grid.csv")
    for row in result.rows:
        flag = " (degenerate)" if row.degenerate else ""
        print(f"eta={row.eta:g} test_acc={row.test_acc:.4f}{flag}")
    print(f"selected eta {result.selected_eta:g}")
    return EXIT_OK


COMMANDS = {"illustrative": cmd_illustrative, "train": cmd_train, "check": cmd_check, "grid": cmd_grid}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except MRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
