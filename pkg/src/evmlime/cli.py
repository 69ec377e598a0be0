"""Command-line entry point (``evmlime``).

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from evmlime import binning, classify, dataset, disasm, evaluation, explain, pipeline, sampling
from evmlime.errors import DataError
from evmlime.seeding import stage_rng

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("evmlime")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _read_hex_arg(args) -> str:
    if args.file:
        return Path(args.file).read_text()
    if args.hex is None:
        raise UsageError("give bytecode as an argument or via --file")
    return args.hex


def cmd_disasm(args):
    code = disasm.decode_hex(_read_hex_arg(args))
    if args.counts:
        fv = disasm.count_frequencies(disasm.disassemble(code))
        for name, count in fv.counts.items():
            if count or args.all:
                print(f"{name},{count}")
        print(f"{disasm.UNKNOWN},{fv.unknown}")
        return
    for offset, mnemonic in disasm.disassemble_raw(code):
        print(f"{offset:#06x} {mnemonic} {disasm.canonicalize(mnemonic)}")


def cmd_featurize(args):
    if args.bytecode_dir:
        if not args.manifest:
            raise UsageError("--bytecode-dir needs --manifest")
        ds = dataset.build_from_bytecode_dir(args.bytecode_dir, dataset.read_manifest(args.manifest))
    elif args.hex_list:
        if args.label is None:
            raise UsageError("--hex-list needs --label")
        ds = dataset.build_from_hex_list(args.hex_list, args.label)
    else:
        raise UsageError("give --bytecode-dir/--manifest or --hex-list/--label")
    dataset.save_csv(ds, args.out)
    print(f"wrote {len(ds)} rows to {args.out}")


def cmd_split(args):
    ds = dataset.load_csv(args.inp)
    spec = dataset.SplitSpec(args.malicious_fraction, args.legit_fraction, args.seed)
    train, test = dataset.stratified_split(ds, spec, rng=stage_rng(args.seed, "split"))
    dataset.save_csv(train, args.train_out)
    dataset.save_csv(test, args.test_out)
    print(f"train {train.class_counts()} test {test.class_counts()}")


def cmd_smote(args):
    train = dataset.load_csv(args.inp)
    counts = train.class_counts()
    minority = train.subset(np.flatnonzero(train.y == dataset.MALICIOUS))
    if args.rate is not None:
        cfg = sampling.SmoteConfig(args.k, sampling_rate=args.rate, seed=args.seed)
    else:
        target = args.target_count if args.target_count is not None else max(counts.values())
        cfg = sampling.SmoteConfig(args.k, target_count=target, seed=args.seed)
    synthetic = sampling.smote(minority, cfg)
    out = train.concat(synthetic)
    if args.bits:
        out = pipeline.binarize_synthetic(out)
    dataset.save_csv(out, args.out)
    print(f"added {len(synthetic)} synthetic malicious rows; classes now {out.class_counts()}")


def cmd_bin(args):
    ds = dataset.load_csv(args.inp)
    if args.model:
        model = binning.BinningModel.load(args.model)
    else:
        model = binning.fit(ds)
        if args.model_out:
            model.save(args.model_out)
    if args.out:
        dataset.save_csv(binning.transform_dataset(ds, model), args.out)
    if not (args.model_out or args.out):
        print(model.to_json())


def cmd_rank(args):
    ds = dataset.load_csv(args.inp)
    ranking = classify.rank_features(ds, args.trees, args.seed)
    if args.out:
        pipeline.write_ranking(ranking, args.out)
    for name, imp in ranking[:args.top]:
        print(f"{name},{imp:.6f}")


def _feature_subset(args, ds):
    if getattr(args, "ranking", None):
        return ds.select_features(classify.select_top(pipeline.read_ranking(args.ranking), args.top_m))
    return ds


def cmd_train(args):
    ds = _feature_subset(args, dataset.load_csv(args.inp))
    hyper = {}
    if args.algo == "lr":
        hyper = {"learning_rate": args.learning_rate, "epochs": args.epochs, "l2": args.l2}
    elif args.algo == "dt":
        hyper = {"max_depth": args.max_depth}
    elif args.algo == "knn":
        hyper = {"k": args.k}
    model = classify.train(args.algo, ds, seed=args.seed, **hyper)
    pipeline.save_trained(model, ds, args.model_out)
    print(f"trained {args.algo} on {len(ds)} rows x {len(ds.feature_names)} features")


def cmd_eval(args):
    model, _ = pipeline.load_trained(args.model)
    ds = dataset.load_csv(args.inp).select_features(model.feature_names)
    m = evaluation.score(model.labels(ds.X), ds.y)
    table = evaluation.metrics_table([(model.algorithm, m)])
    if args.out:
        Path(args.out).write_text(table)
    if args.compare:
        Path(args.compare).write_text(evaluation.compare_report(m))
    print(table, end="")


def _explain_one(model, margins, bits, sid, args):
    if margins is None:
        raise DataError("model file has no training marginals; retrain with this tool")
    cfg = explain.LimeConfig(args.perturbations, args.kernel_width, pipeline.lime_seed(args.seed))
    return explain.fit_surrogate(model, bits, cfg, margins, sid)


def _write_explanation(e, out_dir, stem):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    explain.write_json(e, out / f"{stem}.json")
    explain.write_table_csv(e, out / f"{stem}_table.csv")
    evaluation.emit_contribution_chart(e, out / f"{stem}.svg", title=f"Contributions for {e.instance_id}")


def cmd_explain(args):
    model, margins = pipeline.load_trained(args.model)
    ds = dataset.load_csv(args.inp).select_features(model.feature_names)
    rows = [ds.ids.index(args.id)] if args.id else range(len(ds))
    for r in rows:
        e = _explain_one(model, margins, ds.X[r], ds.ids[r], args)
        print(f"{ds.ids[r]}: verdict {explain.aggregate_verdict(e)} (score {e.model_score:.4f})")
        print(e.format_table())
        if args.out_dir:
            _write_explanation(e, args.out_dir, pipeline._safe(ds.ids[r]))


def cmd_scan(args):
    model, margins = pipeline.load_trained(args.model)
    bins = binning.BinningModel.load(args.binning)
    fv = disasm.featurize_hex(_read_hex_arg(args))
    bits = np.array(binning.transform(fv.counts, bins))
    x = bits[[bins.feature_names.index(f) for f in model.feature_names]]
    e = _explain_one(model, margins, x, args.id, args)
    label = "Malicious" if e.predicted_label == 1 else "Legitimate"
    print(f"verdict: {label} (score {e.model_score:.4f}; explanation favours {explain.aggregate_verdict(e)})")
    print(e.format_table())
    if args.out_dir:
        _write_explanation(e, args.out_dir, pipeline._safe(args.id))


_RUN_FLAGS = {
    "out_dir": "out_dir", "features": "features_csv", "bytecode_dir": "bytecode_dir", "manifest": "manifest",
    "seed": "seed", "malicious_fraction": "malicious_train_fraction",
    "legit_fraction": "legitimate_train_fraction", "smote_k": "smote_k", "order": "order", "top_m": "top_m",
    "trees": "n_trees", "perturbations": "lime_perturbations", "kernel_width": "kernel_width",
    "explain_per_class": "explain_per_class",
}


def build_run_config(args) -> pipeline.RunConfig:
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    for flag, key in _RUN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            raw[key] = value
    if args.algo is not None:
        raw["algorithms"] = list(classify.ALGORITHMS) if args.algo == "all" else [args.algo]
    try:
        return pipeline.RunConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad run config: {exc}") from None


def cmd_run(args):
    cfg = build_run_config(args)
    summary = pipeline.run_pipeline(cfg)
    rows = [(a, evaluation.Metrics(**{k: v[k] for k in ("tp", "fp", "tn", "fn")}))
            for a, v in summary["metrics"].items()]
    print(evaluation.metrics_table(rows), end="")
    print(f"summary: {Path(cfg.out_dir) / 'summary.json'}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evmlime", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def hex_source(sp):
        sp.add_argument("hex", nargs="?", help="hex bytecode (0x prefix optional)")
        sp.add_argument("--file", help="read bytecode hex from a file")

    def lime_flags(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--perturbations", type=int, default=5000)
        sp.add_argument("--kernel-width", type=float, default=None)

    sp = sub.add_parser("disasm", help="disassemble bytecode into canonical opcodes")
    hex_source(sp)
    sp.add_argument("--counts", action="store_true", help="print opcode frequencies instead")
    sp.add_argument("--all", action="store_true", help="with --counts, include zero counts")
    sp.set_defaults(func=cmd_disasm)

    sp = sub.add_parser("featurize", help="build an opcode-frequency CSV")
    sp.add_argument("--bytecode-dir")
    sp.add_argument("--manifest", help="JSON {file_name: label}")
    sp.add_argument("--hex-list", help="file with one hex contract per line")
    sp.add_argument("--label", type=int, choices=(0, 1))
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_featurize)

    sp = sub.add_parser("split", help="stratified train/test split")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--train-out", required=True)
    sp.add_argument("--test-out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--malicious-fraction", type=float, default=0.7)
    sp.add_argument("--legit-fraction", type=float, default=0.9914)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("smote", help="oversample the malicious class")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--k", type=int, default=5)
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--target-count", type=int, help="malicious total after oversampling (default: majority)")
    group.add_argument("--rate", type=int, help="synthetic samples per malicious sample")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--bits", action="store_true", help="round output to 0/1 (for already-binned input)")
    sp.set_defaults(func=cmd_smote)

    sp = sub.add_parser("bin", help="fit split points and/or binarize a CSV")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--model", help="existing binning JSON (transform only)")
    sp.add_argument("--model-out", help="where to save a freshly fitted binning JSON")
    sp.add_argument("--out", help="binarized CSV output")
    sp.set_defaults(func=cmd_bin)

    sp = sub.add_parser("rank", help="extra-trees feature ranking")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--trees", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("train", help="train a classifier on a binary CSV")
    sp.add_argument("--algo", choices=classify.ALGORITHMS, required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--model-out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ranking", help="ranking CSV; restricts training to its top features")
    sp.add_argument("--top-m", type=int, default=10)
    sp.add_argument("--learning-rate", type=float, default=0.1)
    sp.add_argument("--epochs", type=int, default=500)
    sp.add_argument("--l2", type=float, default=0.0)
    sp.add_argument("--max-depth", type=int, default=16)
    sp.add_argument("--k", type=int, default=5)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="score a model on a binary CSV")
    sp.add_argument("--model", required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", help="metrics CSV")
    sp.add_argument("--compare", help="comparison-against-Forta CSV")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("explain", help="LIME explanations for rows of a binary CSV")
    sp.add_argument("--model", required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--id", help="explain only this row id")
    sp.add_argument("--out-dir")
    lime_flags(sp)
    sp.set_defaults(func=cmd_explain)

    sp = sub.add_parser("scan", help="verdict and explanation for one contract")
    hex_source(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--binning", required=True)
    sp.add_argument("--id", default="contract")
    sp.add_argument("--out-dir")
    lime_flags(sp)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("run", help="full pipeline")
    sp.add_argument("--config", help="JSON run config; flags override it")
    sp.add_argument("--out-dir")
    sp.add_argument("--features", help="frequency CSV input")
    sp.add_argument("--bytecode-dir")
    sp.add_argument("--manifest")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--malicious-fraction", type=float)
    sp.add_argument("--legit-fraction", type=float)
    sp.add_argument("--smote-k", type=int)
    sp.add_argument("--order", choices=pipeline.ORDERS)
    sp.add_argument("--top-m", type=int)
    sp.add_argument("--trees", type=int)
    sp.add_argument("--algo", choices=classify.ALGORITHMS + ("all",))
    sp.add_argument("--perturbations", type=int)
    sp.add_argument("--kernel-width", type=float)
    sp.add_argument("--explain-per-class", type=int)
    sp.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"evmlime: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"evmlime {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except pipeline.StageError as exc:
        print(f"evmlime run: {exc}", file=sys.stderr)
        return EXIT_DATA if exc.is_data_error else EXIT_INTERNAL
    except (DataError, OSError, ValueError, KeyError) as exc:
        print(f"evmlime {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"evmlime {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
