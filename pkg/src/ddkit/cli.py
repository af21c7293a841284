"""Command-line front end exposing every pipeline as a subcommand.

Exit codes: 0 success, 1 parameter/validation error, 2 data or IO error,
3 numerical failure. Reports go to files or stdout; diagnostics to stderr.
All outputs are deterministic given identical inputs and seeds; the
environment variable DDKIT_SEED supplies the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import ca2d, objectives, scaling, selection, trajstore
from . import scores as scores_mod
from .dcs import DCSRecord, DCSRecordSet, dcs, error_table_upsert, read_error_table
from .errors import DataError, DdkitError, NumericalError, ValidationError
from .fileio import read_csv, round9, write_csv, write_json

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as validation errors (exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _default_seed() -> int:
    env = os.environ.get("DDKIT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"DDKIT_SEED={env!r} is not an integer")


def _emit_json(obj, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True)
    if out:
        write_json(out, obj)
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ddkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth-traj", parents=[], help="generate a synthetic trajectory store")
    sp.add_argument("--out", required=True)
    sp.add_argument("--epochs", type=int, required=True)
    sp.add_argument("--samples", type=int, required=True)
    sp.add_argument("--classes", type=int, required=True)
    sp.add_argument("--scenario", choices=trajstore.SCENARIOS, default="constant")
    sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("validate", help="load and validate a trajectory store")
    sp.add_argument("store")

    sp = sub.add_parser("score", help="compute a per-sample score table")
    sp.add_argument("--traj", required=True)
    sp.add_argument("--method", choices=scores_mod.METHODS, required=True)
    sp.add_argument("--out", default=None, help="CSV path (default: print to stdout)")
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--J", type=int, default=6)
    sp.add_argument("--W", type=int, default=2)
    sp.add_argument("--K", type=int, default=None)
    sp.add_argument("--base", choices=("el2n", "target_prob"), default="el2n")
    sp.add_argument("--epoch-start", type=int, default=None)
    sp.add_argument("--epoch-end", type=int, default=None)

    sp = sub.add_parser("select", help="build a class-balanced subset")
    sp.add_argument("--traj", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--ipc", type=int, required=True)
    sp.add_argument("--method", choices=("random", "window"), default="window")
    sp.add_argument("--scores", default=None, help="score CSV (window method)")
    sp.add_argument("--start-quantile", type=float, default=0.0)
    sp.add_argument("--order", choices=("ascending", "descending"), default="ascending")
    sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("sliding-window", help="enumerate all difficulty windows")
    sp.add_argument("--traj", required=True)
    sp.add_argument("--scores", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--ipc", type=int, required=True)
    sp.add_argument("--stride", type=int, default=None,
                    help="default: class size / 20, rounded up")
    sp.add_argument("--order", choices=("ascending", "descending"), default="ascending")

    sp = sub.add_parser("pareto", help="mark per-IPC best-accuracy points")
    sp.add_argument("--points", required=True, help="CSV ipc,f,accuracy")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("objective", help="evaluate a distillation loss objective")
    osub = sp.add_subparsers(dest="objective", required=True)
    op = osub.add_parser("tm")
    op.add_argument("--start", required=True, help="theta_t .bin")
    op.add_argument("--expert", required=True, help="theta_(t+M) .bin")
    op.add_argument("--student", required=True, help="theta_hat_(t+N) .bin")
    op.add_argument("--out", default=None)
    op = osub.add_parser("bn")
    op.add_argument("--stats", required=True, help="layer statistics JSON")
    op.add_argument("--lambda-var", type=float, default=1.0)
    op.add_argument("--squared", action="store_true")
    op.add_argument("--out", default=None)
    op = osub.add_parser("dm")
    op.add_argument("--features", required=True, help="feature batches JSON")
    op.add_argument("--out", default=None)
    op = osub.add_parser("dc")
    op.add_argument("--grads", required=True, help="gradient pairs JSON")
    op.add_argument("--out", default=None)

    sp = sub.add_parser("dcs", help="correlate generalization error with loss")
    sp.add_argument("--errors", required=True, help="CSV subset_id,gen_error,subset_size")
    sp.add_argument("--losses", required=True, help="CSV subset_id,loss")
    sp.add_argument("--adjust-size", action="store_true")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("error-table", help="upsert one generalization-error record")
    sp.add_argument("--store", required=True)
    sp.add_argument("--subset-id", required=True)
    sp.add_argument("--gen-error", type=float, required=True)
    sp.add_argument("--subset-size", type=int, required=True)

    sp = sub.add_parser("fit-scaling", help="fit the data-aware scaling law")
    sp.add_argument("--curve", required=True, help="CSV epoch,samples_seen,metric")
    sp.add_argument("--kind", choices=("error", "accuracy"), default="error")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("distill", help="assemble a patch-stitched distilled set")
    sp.add_argument("--traj", required=True)
    sp.add_argument("--images", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--factor", type=int, required=True)
    sp.add_argument("--ipc", type=int, required=True)
    sp.add_argument("--resolution", type=int, required=True)
    sp.add_argument("--scorer", default="sharpness",
                    help="sharpness | file:<csv> | cmd:<command line>")
    sp.add_argument("--num-candidates", type=int, default=ca2d.DEFAULT_NUM_CANDIDATES)
    sp.add_argument("--start-quantile", type=float, default=0.0)
    sp.add_argument("--J", type=int, default=6)
    sp.add_argument("--W", type=int, default=2)
    sp.add_argument("--K", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("report", help="melt toolkit CSVs into one long-format CSV")
    sp.add_argument("--out", required=True)
    sp.add_argument("inputs", nargs="+")

    return p


def _cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    spec = trajstore.SyntheticSpec(args.epochs, args.samples, args.classes, seed, args.scenario)
    path = trajstore.write_synthetic(spec, args.out)
    print(str(path))
    return EXIT_OK


def _cmd_validate(args) -> int:
    t = trajstore.load_trajectory(args.store)
    _emit_json(
        {
            "E": t.E,
            "N": t.N,
            "C": t.C,
            "has_teacher": t.teacher_probs is not None,
            "has_lr": t.lr_schedule is not None,
            "manifest_checksum": t.manifest_checksum,
            "valid": True,
        },
        None,
    )
    return EXIT_OK


def _cmd_score(args) -> int:
    traj = trajstore.load_trajectory(args.traj)
    rng = None
    if (args.epoch_start is None) != (args.epoch_end is None):
        raise ValidationError("--epoch-start and --epoch-end must be given together")
    if args.epoch_start is not None:
        rng = (args.epoch_start, args.epoch_end)
    if args.method == "el2n":
        table = scores_mod.el2n(traj, rng)
    elif args.method == "el2n_sl":
        table = scores_mod.el2n_sl(traj, args.T, rng)
    elif args.method == "forgetting":
        table = scores_mod.forgetting(traj)
    elif args.method == "dyn_unc":
        table = scores_mod.dyn_unc(traj, args.J)
    else:
        params = scores_mod.ScoreParams(J=args.J, W=args.W, K=args.K, T=args.T, base=args.base)
        table = scores_mod.cad_prune(traj, params)
    if args.out:
        table.to_csv(args.out)
    else:
        from .fileio import fmt9

        print("sample_id,score")
        for sid, v in sorted(table.scores.items()):
            print(f"{sid},{fmt9(v)}")
    return EXIT_OK


def _cmd_select(args) -> int:
    traj = trajstore.load_trajectory(args.traj)
    if args.method == "random":
        seed = args.seed if args.seed is not None else _default_seed()
        spec = selection.select_random(traj, args.ipc, seed)
    else:
        if not args.scores:
            raise ValidationError("window selection requires --scores")
        table = scores_mod.ScoreTable.from_csv(args.scores)
        spec = selection.select_window(table, traj, args.ipc, args.start_quantile, args.order)
    spec.to_csv(args.out)
    return EXIT_OK


def _cmd_sliding_window(args) -> int:
    traj = trajstore.load_trajectory(args.traj)
    table = scores_mod.ScoreTable.from_csv(args.scores)
    stride = args.stride
    if stride is None:
        smallest = min(
            np.bincount(traj.labels.astype(np.int64), minlength=traj.C)
        )
        stride = max(1, -(-int(smallest) // 20))
    windows = selection.sliding_window_enumerate(table, traj, args.ipc, stride, args.order)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for spec in windows:
        spec.to_csv(out_dir / f"window_{spec.provenance['window_index']:03d}.csv")
    print(str(len(windows)))
    return EXIT_OK


def _cmd_pareto(args) -> int:
    header, rows = read_csv(args.points)
    if header != ["ipc", "f", "accuracy"]:
        raise ValidationError(f"{args.points}: expected header ipc,f,accuracy")
    pts = selection.pareto_frontier([(int(a), float(b), float(c)) for a, b, c in rows])
    selection.write_pareto_csv(pts, args.out)
    return EXIT_OK


def _cmd_objective(args) -> int:
    if args.objective == "tm":
        loss = objectives.tm_loss(
            objectives.load_param_vector(args.start),
            objectives.load_param_vector(args.expert),
            objectives.load_param_vector(args.student),
        )
        result = {"objective": "tm", "loss": round9(loss)}
    elif args.objective == "bn":
        layers = objectives.load_layer_stats(args.stats)
        loss = objectives.bn_matching_loss(layers, args.lambda_var, args.squared)
        result = {
            "objective": "bn",
            "loss": round9(loss),
            "lambda_var": args.lambda_var,
            "squared": args.squared,
        }
    elif args.objective == "dm":
        real, syn = objectives.load_feature_batches(args.features)
        result = {"objective": "dm", "loss": round9(objectives.dm_loss(real, syn))}
    else:
        real, syn = objectives.load_grad_pair(args.grads)
        result = {"objective": "dc", "loss": round9(objectives.dc_loss(real, syn))}
    _emit_json(result, args.out)
    return EXIT_OK


def _cmd_dcs(args) -> int:
    table = read_error_table(args.errors)
    header, rows = read_csv(args.losses)
    if header[:2] != ["subset_id", "loss"]:
        raise ValidationError(f"{args.losses}: expected header subset_id,loss")
    losses = {r[0]: float(r[1]) for r in rows}
    missing = sorted(set(losses) - set(table))
    if missing:
        raise DataError(f"losses reference unknown subset ids: {missing[:5]}")
    records = [
        DCSRecord(sid, table[sid][0], losses[sid], table[sid][1])
        for sid in sorted(losses)
    ]
    report = dcs(DCSRecordSet(records), adjust_size=args.adjust_size)
    _emit_json(report.to_dict(), args.out)
    return EXIT_OK


def _cmd_error_table(args) -> int:
    error_table_upsert(args.store, args.subset_id, args.gen_error, args.subset_size)
    return EXIT_OK


def _cmd_fit_scaling(args) -> int:
    curve = scaling.read_curve_csv(args.curve, args.kind)
    fit = scaling.fit_scaling(curve)
    _emit_json(fit.to_dict(), args.out)
    return EXIT_OK


def _parse_scorer(spec: str) -> ca2d.PatchScorer:
    if spec == "sharpness":
        return ca2d.PatchScorer.sharpness()
    if spec.startswith("file:"):
        return ca2d.PatchScorer.from_file(spec[5:])
    if spec.startswith("cmd:"):
        import shlex

        return ca2d.PatchScorer.external(shlex.split(spec[4:]))
    raise ValidationError(f"unknown scorer spec {spec!r}")


def _cmd_distill(args) -> int:
    traj = trajstore.load_trajectory(args.traj)
    seed = args.seed if args.seed is not None else _default_seed()
    params = scores_mod.ScoreParams(J=args.J, W=args.W, K=args.K)
    dset = ca2d.ca2d_pipeline(
        traj,
        args.images,
        params,
        ipc=args.ipc,
        f=args.factor,
        resolution=args.resolution,
        scorer=_parse_scorer(args.scorer),
        seed=seed,
        out_dir=args.out,
        num_candidates=args.num_candidates,
        start_quantile=args.start_quantile,
        jobs=args.jobs,
    )
    print(str(len(dset.images)))
    return EXIT_OK


def _cmd_report(args) -> int:
    out_rows: list[list[str]] = []
    for inp in args.inputs:
        path = Path(inp)
        header, rows = read_csv(path)
        if not header:
            raise DataError(f"{path}: empty CSV")
        key_col, value_cols = header[0], header[1:]
        for r in rows:
            for col, val in zip(value_cols, r[1:]):
                out_rows.append([path.name, r[0], col, val])
    write_csv(args.out, ["source", "key", "variable", "value"], out_rows)
    return EXIT_OK


_COMMANDS = {
    "synth-traj": _cmd_synth,
    "validate": _cmd_validate,
    "score": _cmd_score,
    "select": _cmd_select,
    "sliding-window": _cmd_sliding_window,
    "pareto": _cmd_pareto,
    "objective": _cmd_objective,
    "dcs": _cmd_dcs,
    "error-table": _cmd_error_table,
    "fit-scaling": _cmd_fit_scaling,
    "distill": _cmd_distill,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit:
        raise
    except ValidationError as exc:
        print(f"ddkit: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DataError, OSError) as exc:
        print(f"ddkit: data error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"ddkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DdkitError as exc:
        print(f"ddkit: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entrypoint() -> None:
    sys.exit(main())
