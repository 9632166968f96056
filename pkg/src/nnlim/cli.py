"""Command-line entry point: ``nnlim <subcommand> [flags]``.

Every output file records the fully resolved command: comment-style files
carry a ``# command: nnlim ...`` line, dataset and model headers a
``cmd=`` token whose ``|``-separated parts are the argv to re-run.

Exit codes: 0 success, 2 usage or invalid value, 3 numerical failure,
4 I/O or parse error.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor

from . import dataset as D
from . import metrics as M
from . import mlp
from . import transfer as T
from .core import PositivityError
from .nnlimiter import default_group, predict_invariant
from .solvers import Equation, SimConfig, run, write_snapshot

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    pass


def _csv_ints(text):
    return [int(v) for v in text.split(",") if v]


def _csv_strs(text):
    return [v for v in text.split(",") if v]


def _arch(text):
    try:
        widths = tuple(int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"architecture must look like 256:128:64, got {text!r}") from None
    if not widths or min(widths) < 1:
        raise argparse.ArgumentTypeError("layer widths must be >= 1")
    return widths


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    # skip the suffix when the help text already states the default
    def _get_help_string(self, action):
        if action.default is None or "default" in (action.help or ""):
            return action.help
        return super()._get_help_string(action)


def build_parser():
    fmt = _HelpFormatter
    p = argparse.ArgumentParser(prog="nnlim", description="NN troubled-cell detector toolkit for RKDG.",
                                formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation", formatter_class=fmt)
    s.add_argument("--eq", required=True, choices=[e.value for e in Equation])
    s.add_argument("--ic", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--order", type=int, required=True, choices=(2, 3))
    s.add_argument("--limiter", required=True, choices=("none", "minmod", "tvd", "hio", "nn"))
    s.add_argument("--model", default=None, help="model file for --limiter nn")
    s.add_argument("--tvb-m", type=float, default=0.0)
    s.add_argument("--cfl", type=float, default=0.2)
    s.add_argument("--tend", type=float, default=None, help="default: problem-specific")
    s.add_argument("--out", default="report.csv")
    s.add_argument("--snapshot", default=None, help="default: <out stem>.snapshot.csv")

    s = sub.add_parser("gen-dataset", help="labeled dataset from DG runs", formatter_class=fmt)
    s.add_argument("--dim", type=int, choices=(1, 2), required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--zeta", type=float, default=None, help="default: 0.01 (1D), 0.0025 relative (2D)")
    s.add_argument("--stride", type=int, default=D.DEFAULT_STRIDE)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--runs", default=None, help="ic:a:N:order;... (default: full run matrix)")
    s.add_argument("--cap", type=int, default=D.DEFAULT_CELL_CAP_2D, help="2D cells kept per snapshot")

    s = sub.add_parser("gen-rd-dataset", help="synthetic RD-style patches", formatter_class=fmt)
    s.add_argument("--mesh", choices=T.MESH_KINDS, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = sub.add_parser("train", help="train a detector", formatter_class=fmt)
    s.add_argument("--data", required=True)
    s.add_argument("--arch", type=_arch, default=(256, 128, 64, 64, 32),
                   help="hidden widths, colon separated, e.g. 256:128:64:64:32")
    s.add_argument("--loss", choices=("ce", "wce"), default="ce")
    s.add_argument("--omega", type=float, default=1.0)
    s.add_argument("--batch", type=int, default=256)
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--patience", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--history", default=None, help="default: <out stem>.history.csv")

    s = sub.add_parser("eval", help="detection metrics of a model on a dataset", formatter_class=fmt)
    s.add_argument("--data", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--tau", type=float, default=0.5)
    s.add_argument("--invariant", action="store_true", help="vote over the mirror group")

    s = sub.add_parser("transfer", help="lambda-mixed retraining on a target dataset", formatter_class=fmt)
    s.add_argument("--model", required=True)
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--epochs", type=int, default=10, help="original epochs; retraining runs half")
    s.add_argument("--batch", type=int, default=256)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--metrics", default=None, help="default: <out stem>.metrics.csv")

    s = sub.add_parser("convergence", help="L1 error table over grids", formatter_class=fmt)
    s.add_argument("--eq", required=True, choices=(Equation.ADVECTION1D.value, Equation.ADVECTION2D.value))
    s.add_argument("--ic", required=True)
    s.add_argument("--orders", type=_csv_ints, default=[2, 3])
    s.add_argument("--grids", type=_csv_ints, default=[20, 40, 60, 80, 100])
    s.add_argument("--limiters", type=_csv_strs, default=["none"])
    s.add_argument("--model", default=None)
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--out", required=True)
    return p


def resolved_argv(parser, args):
    """The subcommand followed by every flag with its resolved value."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    argv = [args.command]
    for action in sub.choices[args.command]._actions:
        if not action.option_strings or action.dest == "help":
            continue
        value = getattr(args, action.dest)
        flag = action.option_strings[0]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is not None:
            if isinstance(value, (list, tuple)):
                value = (":" if action.dest == "arch" else ",").join(map(str, value))
            argv += [flag, str(value)]
    return argv


def comment_command(argv):
    return "command: " + shlex.join(["nnlim"] + argv)


def token_command(argv):
    return "|".join(argv)


def parse_token_command(token):
    return token.split("|")


def _stem(path):
    return path[:-4] if path.endswith(".csv") or path.endswith(".txt") else path


def cmd_simulate(args, argv):
    cfg = SimConfig(equation=args.eq, ic_name=args.ic, n=args.n, degree=args.order - 1, t_end=args.tend,
                    cfl=args.cfl, limiter=args.limiter, tvb_m=args.tvb_m, model=args.model)
    if args.limiter == "nn" and not args.model:
        raise ValueError("--limiter nn needs --model")
    rep = run(cfg)
    with open(args.out, "w") as fh:
        fh.write(f"# {comment_command(argv)}\n")
        fh.write("key,value\n")
        fh.write(f"status,{'failed' if rep.failure else 'ok'}\n")
        fh.write(f"t,{rep.t!r}\nsteps,{rep.steps}\n")
        if rep.l1_error is not None:
            for k, e in enumerate(rep.l1_error):
                fh.write(f"l1_error_u{k},{float(e)!r}\n")
        if rep.failure:
            f = rep.failure
            fh.write(f"failure_time,{f['time']!r}\nfailure_step,{f['step']}\n")
            fh.write(f"failure_cell,{f['cell']}\nfailure_message,{f['message']}\n")
        fh.write("step,flagged\n")
        for k, c in enumerate(rep.flagged, 1):
            fh.write(f"{k},{c}\n")
    names = ("rho", "rhov", "E") if cfg.equation is Equation.EULER1D else None
    write_snapshot(args.snapshot or _stem(args.out) + ".snapshot.csv", rep.solution, rep.t,
                   args.limiter, names, header=comment_command(argv))
    if rep.l1_error is not None:
        print("l1_error=" + ",".join(f"{float(e):.6e}" for e in rep.l1_error))
    if rep.failure:
        raise NumericalFailure(f"{rep.failure['message']} at step {rep.failure['step']}, "
                               f"t={rep.failure['time']:.6g}, cell {rep.failure['cell']}")
    print(f"t={rep.t:.6g} steps={rep.steps}")


def cmd_gen_dataset(args, argv):
    runs = D._parse_runs(args.runs) if args.runs else None
    if args.dim == 1:
        ds = D.generate_dataset_1d(D.ZETA_1D if args.zeta is None else args.zeta, args.stride, args.seed, runs)
    else:
        ds = D.generate_dataset_2d(D.ZETA_2D_REL if args.zeta is None else args.zeta, args.stride, args.seed,
                                   runs, args.cap)
    ds.provenance["cmd"] = token_command(argv)
    D.save_csv(ds, args.out)
    print(f"samples={len(ds)} positive_fraction={ds.positive_fraction:.4f}")


def cmd_gen_rd_dataset(args, argv):
    ds = T.generate_rd_dataset(args.mesh, args.n, args.seed)
    ds.provenance["cmd"] = token_command(argv)
    D.save_csv(ds, args.out)
    print(f"samples={len(ds)} positive_fraction={ds.positive_fraction:.4f}")


def _write_history(path, history, argv):
    with open(path, "w") as fh:
        fh.write(f"# {comment_command(argv)}\n")
        fh.write(f"# stop_reason={history.stop_reason} best_index={history.best_index}\n")
        fh.write("index,batch,train_loss,test_loss,accuracy,recall,precision\n")
        for ev in history.evaluations:
            fh.write(f"{ev['index']},{ev['batch']},{float(ev['train_loss'])!r},{float(ev['test_loss'])!r},"
                     f"{ev['accuracy']!r},{ev['recall']!r},{ev['precision']!r}\n")


def cmd_train(args, argv):
    data = D.load_csv(args.data)
    tr, va, te = D.split(data, D.SplitSpec(seed=args.seed))
    hyper = mlp.Hyperparams(hidden=args.arch, loss=args.loss, omega=args.omega, batch_size=args.batch,
                            epochs=args.epochs, alpha=args.lr, patience=args.patience, seed=args.seed)
    net = mlp.init(args.arch, data.X.shape[1], args.seed, data.schema)
    net, history = mlp.train(net, tr, va, hyper)
    mlp.save_model(net, args.out, {"cmd": token_command(argv)})
    _write_history(args.history or _stem(args.out) + ".history.csv", history, argv)
    rep = M.classification_report(mlp.predict(net, te.X), te.y)
    print(" ".join(f"{k}={v:.4f}" for k, v in rep.items()))


def cmd_eval(args, argv):
    data = D.load_csv(args.data)
    net = mlp.load_model(args.model, expected_schema=data.schema)
    if args.invariant:
        pred = predict_invariant(net, data.X, default_group(data.schema), args.tau)
    else:
        pred = mlp.predict(net, data.X, args.tau)
    rep = M.classification_report(pred, data.y)
    print(" ".join(f"{k}={v:.4f}" for k, v in rep.items()))


def cmd_transfer(args, argv):
    net = mlp.load_model(args.model)
    source = D.load_csv(args.source, expected_schema=net.schema)
    target = D.load_csv(args.target, expected_schema=net.schema)
    hidden = tuple(L.W.shape[0] for L in net.layers[:-1])
    hyper = mlp.Hyperparams(hidden=hidden, batch_size=args.batch, epochs=args.epochs, seed=args.seed)
    adapted, history = T.retrain(net, source, target, args.lam, hyper, D.SplitSpec(seed=args.seed))
    mlp.save_model(adapted, args.out, {"cmd": token_command(argv)})
    with open(args.metrics or _stem(args.out) + ".metrics.csv", "w") as fh:
        fh.write(f"# {comment_command(argv)}\n")
        fh.write("stage,domain,metric,value\n")
        for stage, dom, k, v in T.metrics_rows(history):
            fh.write(f"{stage},{dom},{k},{v!r}\n")
    for stage, dom, k, v in T.metrics_rows(history):
        if k == "accuracy":
            print(f"{stage}_{dom}_accuracy={v:.4f}")


def _convergence_point(job):
    eq, ic, order, n, limiter, model = job
    rep = run(SimConfig(equation=eq, ic_name=ic, n=n, degree=order - 1, limiter=limiter, model=model))
    if rep.failure:
        return None, rep.failure["message"]
    return float(rep.l1_error.sum()), None


def cmd_convergence(args, argv):
    if "nn" in args.limiters and not args.model:
        raise ValueError("--limiters nn needs --model")
    jobs = [(args.eq, args.ic, o, n, lim, args.model)
            for o in args.orders for lim in args.limiters for n in args.grids]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_convergence_point, jobs))  # map keeps job order
    else:
        results = [_convergence_point(j) for j in jobs]
    blocks, k = {}, 0
    for o in args.orders:
        for lim in args.limiters:
            errs = []
            for n in args.grids:
                err, msg = results[k]
                k += 1
                if err is None:
                    raise NumericalFailure(f"order {o} limiter {lim} N={n}: {msg}")
                errs.append(err)
            blocks[f"order={o} limiter={lim}"] = M.convergence_table(errs, args.grids)
    M.write_convergence_csv(args.out, blocks, comment_command(argv))
    for label, rows in blocks.items():
        print(label + " " + " ".join(f"{n}:{e:.3e}" for n, e, _ in rows))


COMMANDS = {
    "simulate": cmd_simulate,
    "gen-dataset": cmd_gen_dataset,
    "gen-rd-dataset": cmd_gen_rd_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "convergence": cmd_convergence,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    resolved = resolved_argv(parser, args)
    try:
        COMMANDS[args.command](args, resolved)
    except (PositivityError, NumericalFailure) as err:
        print(f"nnlim: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, D.DatasetFormatError, mlp.ModelFormatError) as err:
        print(f"nnlim: {err}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as err:
        print(f"nnlim: {err}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
