"""End-to-end run: featurize, split, oversample, bin, rank, train, evaluate, explain."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from evmlime import binning, classify, dataset, evaluation, explain, sampling
from evmlime.dataset import Dataset, SplitSpec
from evmlime.errors import DataError
from evmlime.seeding import stage_rng, stage_seed

log = logging.getLogger(__name__)

ORDERS = ("smote-first", "bin-first")


class StageError(Exception):
    """A pipeline stage failed; ``stage`` names it, ``__cause__`` holds the original error."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage
        self.original = exc

    @property
    def is_data_error(self) -> bool:
        return isinstance(self.original, (DataError, OSError, ValueError, KeyError))


@dataclass
class RunConfig:
    out_dir: str = "run"
    features_csv: str | None = None
    bytecode_dir: str | None = None
    manifest: str | None = None
    seed: int = 0
    malicious_train_fraction: float = 0.7
    legitimate_train_fraction: float = 0.9914
    smote_k: int = 5
    order: str = "smote-first"
    top_m: int = 10
    n_trees: int = 200
    algorithms: list[str] = field(default_factory=lambda: ["lr"])
    lime_perturbations: int = 5000
    kernel_width: float | None = None
    explain_per_class: int = 1

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def validate(self) -> None:
        if (self.features_csv is None) == (self.bytecode_dir is None):
            raise ValueError("set exactly one of features_csv and bytecode_dir")
        if self.bytecode_dir is not None and self.manifest is None:
            raise ValueError("bytecode_dir needs a manifest")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        bad = [a for a in self.algorithms if a not in classify.ALGORITHMS]
        if bad or not self.algorithms:
            raise ValueError(f"algorithms must be drawn from {classify.ALGORITHMS}, got {self.algorithms}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def lime_seed(seed: int) -> int:
    return int(stage_seed(seed, "lime").generate_state(1)[0])


def marginals(ds: Dataset) -> list[float]:
    return ds.X.mean(axis=0).tolist() if len(ds) else [0.0] * len(ds.feature_names)


def write_ranking(ranking, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "importance"])
        for name, imp in ranking:
            w.writerow([name, repr(imp)])


def read_ranking(path) -> list[tuple[str, float]]:
    with open(path, newline="") as fh:
        return [(r["feature"], float(r["importance"])) for r in csv.DictReader(fh)]


def save_trained(model: classify.Classifier, train_bits: Dataset, path) -> None:
    """Model JSON plus the training bit marginals that explanations sample from."""
    payload = json.loads(classify.model_to_json(model))
    payload["marginals"] = marginals(train_bits)
    with open(path, "w") as fh:
        fh.write(json.dumps(payload, indent=1) + "\n")


def load_trained(path) -> tuple[classify.Classifier, list[float] | None]:
    with open(path) as fh:
        text = fh.read()
    return classify.model_from_json(text), json.loads(text).get("marginals")


def binarize_synthetic(ds: Dataset) -> Dataset:
    """Round interpolated bits back to {0, 1} (only used by the bin-first order)."""
    return ds.with_matrix((ds.X >= 0.5).astype(np.float64))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(cfg: RunConfig) -> dict:
    """Run every stage, writing artifacts into ``cfg.out_dir``; returns the summary."""
    try:
        cfg.validate()
    except ValueError as exc:
        raise StageError("config", exc) from exc
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: list[str] = []

    def stage(name):
        def wrap(fn):
            log.info("stage %s", name)
            try:
                return fn()
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        return wrap

    def featurize():
        if cfg.features_csv is not None:
            return dataset.load_csv(cfg.features_csv)
        ds = dataset.build_from_bytecode_dir(cfg.bytecode_dir, dataset.read_manifest(cfg.manifest))
        dataset.save_csv(ds, out / "features.csv")
        artifacts.append("features.csv")
        return ds

    freq = stage("featurize")(featurize)

    def split():
        spec = SplitSpec(cfg.malicious_train_fraction, cfg.legitimate_train_fraction, cfg.seed)
        train, test = dataset.stratified_split(freq, spec, rng=stage_rng(cfg.seed, "split"))
        dataset.save_csv(train, out / "train.csv")
        dataset.save_csv(test, out / "test.csv")
        artifacts.extend(["train.csv", "test.csv"])
        return train, test

    train, test = stage("split")(split)

    if cfg.order == "smote-first":
        def oversample():
            bal = sampling.balance(train, cfg.smote_k, cfg.seed)
            dataset.save_csv(bal, out / "balanced.csv")
            artifacts.append("balanced.csv")
            return bal

        balanced = stage("smote")(oversample)

        def fit_bins():
            model = binning.fit(balanced)
            model.save(out / "binning.json")
            artifacts.append("binning.json")
            return model

        bins = stage("bin")(fit_bins)
        train_bits, test_bits = stage("transform")(
            lambda: (binning.transform_dataset(balanced, bins), binning.transform_dataset(test, bins)))
    else:
        def fit_bins():
            model = binning.fit(train)
            model.save(out / "binning.json")
            artifacts.append("binning.json")
            return model

        bins = stage("bin")(fit_bins)
        raw_bits, test_bits = stage("transform")(
            lambda: (binning.transform_dataset(train, bins), binning.transform_dataset(test, bins)))
        train_bits = stage("smote")(
            lambda: binarize_synthetic(sampling.balance(raw_bits, cfg.smote_k, cfg.seed)))

    def save_bits():
        dataset.save_csv(train_bits, out / "train_binary.csv")
        dataset.save_csv(test_bits, out / "test_binary.csv")
        artifacts.extend(["train_binary.csv", "test_binary.csv"])

    stage("transform")(save_bits)

    def rank():
        ranking = classify.rank_features(train_bits, cfg.n_trees, cfg.seed)
        write_ranking(ranking, out / "ranking.csv")
        artifacts.append("ranking.csv")
        return ranking, classify.select_top(ranking, min(cfg.top_m, len(ranking)))

    ranking, selected = stage("rank")(rank)
    train_sel = train_bits.select_features(selected)
    test_sel = test_bits.select_features(selected)

    models, metrics = {}, {}
    for algo in cfg.algorithms:
        def fit_model(algo=algo):
            model = classify.train(algo, train_sel, seed=cfg.seed)
            save_trained(model, train_sel, out / f"model_{algo}.json")
            artifacts.append(f"model_{algo}.json")
            return model

        models[algo] = stage("train")(fit_model)
        metrics[algo] = stage("eval")(lambda algo=algo: evaluation.score(models[algo].labels(test_sel.X), test_sel.y))

    def report():
        rows = [(algo, metrics[algo]) for algo in cfg.algorithms]
        (out / "metrics.csv").write_text(evaluation.metrics_table(rows))
        best = max(cfg.algorithms, key=lambda a: (metrics[a].f1 or 0.0, -cfg.algorithms.index(a)))
        (out / "comparison.csv").write_text(evaluation.compare_report(metrics[best]))
        artifacts.extend(["metrics.csv", "comparison.csv"])
        return best

    best = stage("eval")(report)

    def explain_samples():
        lime_cfg = explain.LimeConfig(cfg.lime_perturbations, cfg.kernel_width, lime_seed(cfg.seed))
        margins = marginals(train_sel)
        exp_dir = out / "explanations"
        exp_dir.mkdir(exist_ok=True)
        done = []
        for label in (dataset.MALICIOUS, dataset.LEGITIMATE):
            for row in np.flatnonzero(test_sel.y == label)[:cfg.explain_per_class]:
                sid = test_sel.ids[row]
                for algo in cfg.algorithms:
                    e = explain.fit_surrogate(models[algo], test_sel.X[row], lime_cfg, margins, sid)
                    stem = f"{algo}_{_safe(sid)}"
                    explain.write_json(e, exp_dir / f"{stem}.json")
                    explain.write_table_csv(e, exp_dir / f"{stem}_table.csv")
                    evaluation.emit_contribution_chart(
                        e, exp_dir / f"{stem}.svg",
                        title=f"Contributions of opcode features for {sid} ({algo})")
                    artifacts.extend(f"explanations/{stem}{suffix}"
                                     for suffix in (".json", "_table.csv", ".svg", ".csv"))
                    done.append({"id": sid, "algorithm": algo, "true_label": int(label),
                                 "predicted_label": e.predicted_label,
                                 "verdict": explain.aggregate_verdict(e)})
        return done

    explained = stage("explain")(explain_samples)

    summary = {
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seeds": {"root": cfg.seed, "lime": lime_seed(cfg.seed)},
        "class_counts": {"all": freq.class_counts(), "train": train.class_counts(), "test": test.class_counts(),
                         "train_balanced": train_bits.class_counts()},
        "selected_features": selected,
        "split_points": {f: bins.split_points[f] for f in selected},
        "metrics": {a: metrics[a].as_dict() for a in cfg.algorithms},
        "best_algorithm": best,
        "explanations": explained,
        "notes": [evaluation.IMBALANCE_FOOTNOTE],
        "artifacts": {name: _sha256(out / name) for name in sorted(artifacts)},
    }
    text = json.dumps(_jsonable(summary), indent=2, sort_keys=True)
    (out / "summary.json").write_text(text + "\n")
    return summary


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj
