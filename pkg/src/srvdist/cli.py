"""Command-line interface: ``python -m srvdist <command> ...``.

Commands: gen, label, distance, train, predict, eval, cluster, bench.  Every
command takes ``--seed``; identical invocations write identical files
(timings from ``bench`` aside).  The default worker count for labeling comes
from the SRVDIST_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, datagen
from . import io as sio
from .dp import DEFAULT_WINDOW
from .quotient import DEFAULT_SEEDS, shape_distance

log = logging.getLogger("srvdist")


def _seeded(args) -> np.random.Generator:
    return np.random.default_rng(args.seed)


def _matcher_opts(args) -> dict:
    return {"rotation": not args.no_rotation, "seeds": args.seeds, "window": args.window}


def cmd_gen(args, argv):
    rng = _seeded(args)
    meta = {"seed": args.seed, "family": args.family}
    if args.family == "functions":
        p = datagen.GenParams(args.mu, args.sigma, args.n, tuple(args.value_range), args.roughness, args.n_knots)
        curves = [datagen.gen_synthetic_function(p, rng) for _ in range(args.count)]
        meta["generator"] = {"mu": p.mu, "sigma": p.sigma, "n": p.n, "value_range": list(p.value_range),
                             "roughness": p.roughness, "n_knots": p.n_knots}
        extra = None
    else:
        curves, classes = datagen.gen_planar_classes(args.count, args.n, rng, roughness=args.roughness,
                                                     n_knots=args.n_knots)
        meta["generator"] = {"per_class": args.count, "n": args.n, "classes": list(datagen.PLANAR_CLASSES),
                             "roughness": args.roughness, "n_knots": args.n_knots}
        extra = [{"class": int(k)} for k in classes]
    c0 = curves[0]
    meta.update(d=c0.d, n=c0.n, topology=c0.topology)
    path = sio.write_curve_set(curves, args.out, meta, argv, extra)
    print(f"wrote {len(curves)} curves to {path}")


def _curve_files(doc) -> list:
    return [e["file"] for e in doc["curves"]]


def cmd_label(args, argv):
    curves, doc = sio.read_curve_set(args.curves)
    rng = _seeded(args)
    N = len(curves)
    if args.pairs is None:
        pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    else:
        pairs = datagen.random_pairs(N, args.pairs, rng)
    out = Path(args.out)
    meta = {"seed": args.seed, "source": str(Path(args.curves).resolve().name)}

    ds = sio.label_resumable(curves, pairs, args.labeler, out.with_name(out.name + ".progress"),
                             workers=args.workers, meta=meta, **_matcher_opts(args))
    base = Path(args.curves) if Path(args.curves).is_dir() else Path(args.curves).parent
    rel = [_relpath(base / f, out.parent) for f in _curve_files(doc)]
    sio.write_pair_manifest(ds, out, argv, rel)
    print(f"labeled {len(ds)} pairs ({ds.meta.get('skipped', 0)} skipped) -> {out}")


def _relpath(target: Path, start: Path) -> str:
    return Path(os.path.relpath(target.resolve(), start.resolve())).as_posix()


def cmd_distance(args, argv):
    a, b = sio.parse_curve_file(args.a), sio.parse_curve_file(args.b)
    res = shape_distance(a, b, method=args.method, scale=args.scale, **_matcher_opts(args))
    print(format(res.distance, ".17g"))
    if args.verbose:
        print("rotation: " + "; ".join(",".join(format(v, ".17g") for v in row) for row in res.rotation))
        if res.shift is not None:
            print(f"shift: {res.shift}")
        print(f"iterations: {res.iterations}")


def _train_config(args):
    from .nn import TrainConfig

    aug = None if args.no_augment else datagen.AugmentOptions(roughness=tuple(args.aug_roughness))
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, seed=args.seed,
                       augment=aug, holdout_fraction=args.holdout, lr_decay=args.lr_decay)


def cmd_train(args, argv):
    from .nn import train

    data, _ = sio.read_pair_manifest(args.data)
    test = sio.read_pair_manifest(args.test)[0] if args.test else None

    def on_epoch(e, tr, te):
        log.info("epoch %d train %.6g test %.6g", e, tr, te)

    params, hist = train(data, _train_config(args), test=test, on_epoch=on_epoch)
    sio.save_checkpoint(params, args.out, hist, argv)
    history = Path(args.history) if args.history else Path(args.out).with_suffix(".history.tsv")
    lines = ["# " + " ".join(argv), "epoch\ttrain_mse\ttest_mse"]
    lines += [f"{k + 1}\t{a:.17g}\t{b:.17g}" for k, (a, b) in enumerate(zip(hist.train_mse, hist.test_mse))]
    sio.write_text(history, "\n".join(lines) + "\n")
    print(f"final train mse {hist.train_mse[-1]:.6g}, test mse {hist.test_mse[-1]:.6g}; "
          f"checkpoint {args.out}")


def _load_model(path):
    if path is None:
        raise ValueError("this command needs --model <checkpoint>")
    return sio.load_checkpoint(path)[0]


def cmd_predict(args, argv):
    from .nn import predict_batch

    params = _load_model(args.model)
    ds, doc = sio.read_pair_manifest(args.data)
    preds = predict_batch(params, ds.arrays())
    out = Path(args.out)
    files = None
    if all(isinstance(r["a"], str) for r in doc["records"]):
        files = _reindex_files(doc, Path(args.data).parent, out.parent)
    sio.write_pair_manifest(ds, out, argv, files, predictions=preds)
    print(f"wrote {len(preds)} predictions -> {out}")


def _reindex_files(doc, src: Path, dst: Path) -> dict:
    files = {}
    for r in doc["records"]:
        files[r["ia"]] = _relpath(src / r["a"], dst)
        files[r["ib"]] = _relpath(src / r["b"], dst)
    return files


def cmd_eval(args, argv):
    ds, doc = sio.read_pair_manifest(args.data)
    if args.model is not None:
        from .nn import predict_batch

        preds = predict_batch(_load_model(args.model), ds.arrays())
    elif all("prediction" in r for r in doc["records"]):
        preds = np.array([r["prediction"] for r in doc["records"]])
    else:
        raise ValueError("no predictions: pass --model or a manifest with a prediction column")
    report = analysis.evaluate(ds.labels, preds)
    print(report.summary())
    if args.out:
        sio.write_text(args.out, "# " + " ".join(argv) + "\n" + report.table())


def cmd_cluster(args, argv):
    curves, doc = sio.read_curve_set(args.curves)
    N = len(curves)
    pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    if args.method == "nn":
        from .nn import predict_batch

        params = _load_model(args.model)
        vals = predict_batch(params, [(curves[i], curves[j]) for i, j in pairs])
    else:
        ds = datagen.build_labeled_dataset(curves, pairs, labeler=args.method, workers=args.workers,
                                           **_matcher_opts(args))
        if len(ds) != len(pairs):
            raise FloatingPointError(f"{len(pairs) - len(ds)} pair distances failed")
        vals = ds.labels
    X = analysis.cmds(analysis.pairwise_matrix(vals, pairs, N), args.k)
    classes = [e.get("class", "") for e in doc["curves"]]
    lines = ["# " + " ".join(argv), "\t".join(["index", "class"] + [f"x{j + 1}" for j in range(args.k)])]
    lines += ["\t".join([str(i), str(classes[i])] + [format(v, ".17g") for v in X[i]]) for i in range(N)]
    text = "\n".join(lines) + "\n"
    if args.out:
        sio.write_text(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_bench(args, argv):
    rng = _seeded(args)
    if args.curves:
        curves, _ = sio.read_curve_set(args.curves)
    else:
        from .curves import Curve

        curves = [Curve(np.cumsum(rng.standard_normal((args.n, args.d)), axis=0))
                  for _ in range(2 * max(args.reps, 1))]
    pairs = [(curves[2 * k], curves[2 * k + 1]) for k in range(len(curves) // 2)]
    params = sio.load_checkpoint(args.model)[0] if args.model else None
    methods = args.methods.split(",")
    reps = {m: args.reps for m in methods}
    if args.exact_reps is not None and "exact" in reps:
        reps["exact"] = args.exact_reps
    report = analysis.bench(methods, pairs, reps, params, window=args.window,
                            rotation=not args.no_rotation, seeds=args.seeds)
    sys.stdout.write(report.table())
    if args.out:
        sio.write_text(args.out, "# " + " ".join(argv) + "\n" + report.tsv())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srvdist", description="Elastic shape distances between curves.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        return p

    def matcher(p):
        p.add_argument("--no-rotation", action="store_true", help="skip the rotation search")
        p.add_argument("--seeds", type=int, default=DEFAULT_SEEDS, help="rotation seeds")
        p.add_argument("--window", type=int, default=DEFAULT_WINDOW, help="DP slope window")

    p = common(sub.add_parser("gen", help="generate a synthetic curve set"))
    p.add_argument("--family", choices=["functions", "planar"], default="functions",
                   help="1D random functions or 2D four-class planar curves")
    p.add_argument("--mu", type=float, default=18.0, help="mean extrema count")
    p.add_argument("--sigma", type=float, default=6.0, help="std of extrema count")
    p.add_argument("--n", type=int, default=90, help="points per curve")
    p.add_argument("--count", type=int, default=100, help="curves (per class for planar)")
    p.add_argument("--value-range", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--roughness", type=float, default=0.3, help="reparametrization roughness")
    p.add_argument("--n-knots", type=int, default=10, help="reparametrization knots")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = common(sub.add_parser("label", help="label curve pairs with distances"))
    p.add_argument("--curves", required=True, help="curve set directory or curves.json")
    p.add_argument("--pairs", type=int, default=None, help="random pair count (default: all pairs)")
    p.add_argument("--labeler", choices=["exact", "dp"], default="exact")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $SRVDIST_WORKERS or 1)")
    matcher(p)
    p.add_argument("--out", required=True, help="output manifest (JSON)")
    p.set_defaults(func=cmd_label)

    p = common(sub.add_parser("distance", help="distance between two curve files"))
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--method", choices=["exact", "dp"], default="exact")
    p.add_argument("--scale", action="store_true", help="normalize both curves to unit length")
    matcher(p)
    p.set_defaults(func=cmd_distance)

    p = common(sub.add_parser("train", help="train the surrogate network"))
    p.add_argument("--data", required=True, help="training manifest")
    p.add_argument("--test", default=None, help="test manifest (default: hold out part of --data)")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-decay", type=float, default=1.0, help="per-epoch learning rate factor")
    p.add_argument("--holdout", type=float, default=0.1, help="held-out fraction without --test")
    p.add_argument("--no-augment", action="store_true", help="disable data augmentation")
    p.add_argument("--aug-roughness", type=float, nargs=2, default=(0.05, 2.0), metavar=("LO", "HI"))
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--history", default=None, help="history TSV (default: next to the checkpoint)")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("predict", help="append network predictions to a manifest"))
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = common(sub.add_parser("eval", help="MRE and Pearson correlation against labels"))
    p.add_argument("--data", required=True, help="labeled manifest")
    p.add_argument("--model", default=None, help="checkpoint (default: use the manifest's predictions)")
    p.add_argument("--out", default=None, help="per-case table (TSV)")
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("cluster", help="CMDS coordinates from pairwise distances"))
    p.add_argument("--curves", required=True)
    p.add_argument("--method", choices=["exact", "dp", "nn"], default="exact")
    p.add_argument("--model", default=None, help="checkpoint for --method nn")
    p.add_argument("--k", type=int, default=2, help="embedding dimension")
    p.add_argument("--workers", type=int, default=None)
    matcher(p)
    p.add_argument("--out", default=None, help="coordinate file (default: stdout)")
    p.set_defaults(func=cmd_cluster)

    p = common(sub.add_parser("bench", help="time one distance per method"))
    p.add_argument("--methods", default="exact,dp,nn", help="comma-separated subset of exact,dp,nn")
    p.add_argument("--model", default=None, help="checkpoint for nn")
    p.add_argument("--curves", default=None, help="curve set (default: random walks)")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--exact-reps", type=int, default=None, help="repetitions for exact (default --reps)")
    matcher(p)
    p.add_argument("--out", default=None, help="machine-readable TSV")
    p.set_defaults(func=cmd_bench)
    return ap


def run_cli(argv=None) -> int:
    """Run one command; returns the process exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = datagen.default_workers()
    try:
        args.func(args, ["srvdist"] + argv)
    except sio.FormatError as exc:
        print(f"srvdist: input error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"srvdist: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"srvdist: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())
