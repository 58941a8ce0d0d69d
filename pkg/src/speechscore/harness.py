"""Experiment orchestration: per-prompt train/evaluate over every model and
both task formulations, plus the two ablation protocols.

Every configuration retrains from scratch on the train split and reports
QWK, Pearson r and MSE on the validation and test splits. A human-human
agreement row appears whenever the corpus carries a second rater.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .content import TfidfVocabulary
from .corpus import (AlignedResponse, FeatureMatrix, SplitAssignment,
                     Standardizer, LexicalResources, fit_standardizer,
                     stratified_split)
from .features import ExtractorConfig, extract_matrix, fit_content_vocabulary
from .learners import (GridSearchSpec, class_weights, grid_search,
                       length_only_baseline, make_estimator)
from .metrics import confusion_matrix, metric_report, round_to_grade

MODEL_KEYS = ("linear", "decision_tree", "random_forest", "gbt", "length_baseline")

DEFAULT_PARAMS = {
    "decision_tree": {"max_depth": 6, "min_samples_leaf": 5},
    "random_forest": {"n_trees": 80, "max_depth": 8, "min_samples_leaf": 2},
    "gbt": {"n_stages": 100, "learning_rate": 0.1, "max_depth": 3,
            "min_samples_leaf": 5},
    "linear": {},
    "logistic": {},
}

DEFAULT_GRID = {"max_depth": [3, 4, 6], "n_stages": [100, 300],
                "learning_rate": [0.05, 0.1], "min_samples_leaf": [1, 5, 20]}


@dataclass
class PromptDataset:
    """Everything needed to train and explain models for one prompt."""

    prompt_id: str
    matrix: FeatureMatrix            # standardized, all responses
    raw_matrix: FeatureMatrix
    standardizer: Standardizer
    vocabulary: TfidfVocabulary | None
    split: SplitAssignment
    y: dict[str, int]                # response_id -> ordinal grade
    y2: dict[str, int]               # second rater, possibly empty
    n_classes: int
    lengths: dict[str, float]        # response_id -> word count W

    def rows(self, split_name: str) -> list[int]:
        wanted = getattr(self.split, split_name)
        return [i for i, rid in enumerate(self.matrix.response_ids) if rid in wanted]

    def design(self, split_name: str, groups=None):
        matrix = self.matrix if groups is None else self.matrix.select_groups(groups)
        idx = self.rows(split_name)
        ids = [matrix.response_ids[i] for i in idx]
        X = matrix.values[idx]
        y = np.asarray([self.y[r] for r in ids], dtype=np.float64)
        return X, y, ids, list(matrix.columns)


def prepare_prompt(responses: list[AlignedResponse],
                   resources: LexicalResources,
                   config: ExtractorConfig | None = None,
                   seed: int = 0,
                   ratios: tuple[float, float, float] = (0.70, 0.10, 0.20),
                   audio_lookup=None, threads: int = 1) -> PromptDataset:
    """Split, fit the train-side vocabulary, extract and standardize."""
    config = config or ExtractorConfig()
    prompts = {r.prompt_id for r in responses}
    if len(prompts) != 1:
        raise ValueError(f"expected one prompt, got {sorted(prompts)}")
    responses = sorted(responses, key=lambda r: r.response_id)
    split = stratified_split(responses, ratios=ratios, seed=seed)

    vocabulary = None
    if "CF" in config.groups:
        vocabulary = fit_content_vocabulary(responses, split.train, config)
    raw = extract_matrix(responses, resources, config, vocabulary,
                         audio_lookup=audio_lookup, threads=threads)
    standardizer = fit_standardizer(raw.restrict(split.train))
    matrix = standardizer.transform(raw)

    y = {r.response_id: r.grade.ordinal for r in responses}
    y2 = {r.response_id: r.grade2.ordinal for r in responses
          if r.grade2 is not None}
    n_classes = max(y.values()) + 1
    lengths = {r.response_id: float(sum(1 for t in r.tokens if t.pos != "PUNCT"))
               for r in responses}
    return PromptDataset(prompt_id=responses[0].prompt_id, matrix=matrix,
                         raw_matrix=raw, standardizer=standardizer,
                         vocabulary=vocabulary, split=split, y=y, y2=y2,
                         n_classes=n_classes, lengths=lengths)


def _train(dataset: PromptDataset, model_key: str, formulation: str,
           params: dict | None, seed: int, groups=None, threads: int = 1):
    X, y, ids, columns = dataset.design("train", groups)
    task = formulation
    kind = model_key
    if model_key == "linear":
        kind = "linear" if formulation == "regression" else "logistic"
    weights = class_weights(y) if task == "classification" else None
    if model_key == "length_baseline":
        lengths = np.asarray([dataset.lengths[r] for r in ids])
        return length_only_baseline(lengths, y, task=task,
                                    n_classes=dataset.n_classes, seed=seed,
                                    weights=weights)
    merged = dict(DEFAULT_PARAMS.get(kind, {}))
    merged.update(params or {})
    fitter = make_estimator(kind, merged, task, dataset.n_classes, seed=seed,
                            feature_names=columns, threads=threads)
    return fitter(X, y, weights)


def _evaluate(dataset: PromptDataset, model, split_name: str,
              formulation: str, model_key: str, groups=None) -> dict:
    X, y, ids, _ = dataset.design(split_name, groups)
    if model_key == "length_baseline":
        X = np.asarray([dataset.lengths[r] for r in ids]).reshape(-1, 1)
    raw = model.predict(X)
    report = metric_report(y.astype(np.int64), raw, dataset.n_classes,
                           already_ordinal=(formulation == "classification"))
    grades = raw.astype(np.int64) if formulation == "classification" \
        else round_to_grade(raw, dataset.n_classes)
    out = report.to_json()
    out["confusion"] = confusion_matrix(y.astype(np.int64), grades,
                                        dataset.n_classes).tolist()
    return out


def human_agreement(dataset: PromptDataset, split_name: str) -> dict | None:
    """QWK/r/MSE between the two raters on one split, when available."""
    idx = dataset.rows(split_name)
    ids = [dataset.matrix.response_ids[i] for i in idx]
    pairs = [(dataset.y[r], dataset.y2[r]) for r in ids if r in dataset.y2]
    if len(pairs) < 2:
        return None
    h1 = np.asarray([p[0] for p in pairs], dtype=np.int64)
    h2 = np.asarray([p[1] for p in pairs], dtype=np.float64)
    return metric_report(h1, h2, dataset.n_classes, already_ordinal=True).to_json()


def run_benchmark(dataset: PromptDataset,
                  models: tuple[str, ...] = MODEL_KEYS,
                  formulations: tuple[str, ...] = ("regression", "classification"),
                  seed: int = 0, params: dict | None = None,
                  threads: int = 1) -> dict:
    """One report row per (model, formulation), trained from scratch."""
    unknown = set(models) - set(MODEL_KEYS)
    if unknown:
        raise ValueError(f"unknown model key(s): {sorted(unknown)}")
    rows = []
    for formulation in formulations:
        for model_key in models:
            model = _train(dataset, model_key, formulation,
                           (params or {}).get(model_key), seed, threads=threads)
            row = {"prompt": dataset.prompt_id, "model": model_key,
                   "formulation": formulation}
            for split_name in ("valid", "test"):
                row[split_name] = _evaluate(dataset, model, split_name,
                                            formulation, model_key)
            rows.append(row)
    report = {"prompt": dataset.prompt_id, "n_classes": dataset.n_classes,
              "rows": rows}
    hh = {s: human_agreement(dataset, s) for s in ("valid", "test")}
    if any(v is not None for v in hh.values()):
        report["human_human"] = hh
    return report


# ---------------------------------------------------------------------------
# Ablations


@dataclass
class AblationReport:
    mode: str                      # additive | leave_one_out
    rows: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"mode": self.mode, "rows": self.rows}


def _groups_present(dataset: PromptDataset) -> list[str]:
    seen = []
    for g in dataset.matrix.groups:
        if g not in seen:
            seen.append(g)
    return seen


def _ablation_cell(dataset: PromptDataset, groups, seed, params, threads) -> dict:
    model = _train(dataset, "gbt", "regression", params, seed,
                   groups=groups, threads=threads)
    return _evaluate(dataset, model, "test", "regression", "gbt", groups=groups)


def ablation_additive(dataset: PromptDataset, order: tuple[str, ...] | None = None,
                      seed: int = 0, params: dict | None = None,
                      threads: int = 1) -> AblationReport:
    """Add feature groups one by one (content first by default), retraining
    the boosted regressor from scratch at every stage."""
    present = _groups_present(dataset)
    order = tuple(order) if order else tuple(present)
    missing = set(order) - set(present)
    if missing:
        raise ValueError(f"feature group(s) not extracted: {sorted(missing)}")
    report = AblationReport(mode="additive")
    stages = []
    for group in order:
        stages.append(group)
        cell = _ablation_cell(dataset, tuple(stages), seed, params, threads)
        report.rows.append({"configuration": "+".join(stages),
                            "groups": list(stages),
                            "qwk": cell["qwk"], "r": cell["pearson_r"],
                            "mse": cell["mse"]})
    full_qwk = report.rows[-1]["qwk"]
    for row in report.rows:
        row["pct_change"] = (100.0 * (row["qwk"] - full_qwk) / full_qwk
                             if full_qwk != 0 else 0.0)
    report.rows[-1]["pct_change"] = 0.0
    return report


def ablation_leave_one_out(dataset: PromptDataset, seed: int = 0,
                           params: dict | None = None,
                           threads: int = 1) -> AblationReport:
    """Drop one feature group at a time, keeping the others intact."""
    present = _groups_present(dataset)
    report = AblationReport(mode="leave_one_out")
    full = _ablation_cell(dataset, tuple(present), seed, params, threads)
    report.rows.append({"configuration": "full", "groups": list(present),
                        "qwk": full["qwk"], "r": full["pearson_r"],
                        "mse": full["mse"], "pct_change": 0.0})
    for group in present:
        kept = tuple(g for g in present if g != group)
        cell = _ablation_cell(dataset, kept, seed, params, threads)
        pct = (100.0 * (cell["qwk"] - full["qwk"]) / full["qwk"]
               if full["qwk"] != 0 else 0.0)
        report.rows.append({"configuration": f"~{group}", "groups": list(kept),
                            "qwk": cell["qwk"], "r": cell["pearson_r"],
                            "mse": cell["mse"], "pct_change": pct})
    return report


def tune_gbt(dataset: PromptDataset, grid: dict | None = None, seed: int = 0,
             formulation: str = "regression", threads: int = 1):
    """Grid-search the boosted model on the train split; returns
    (best_params, cv_table)."""
    X, y, _, columns = dataset.design("train")
    weights = class_weights(y) if formulation == "classification" else None
    spec = GridSearchSpec(grid=grid or DEFAULT_GRID, folds=5, seed=seed)
    return grid_search("gbt", spec, X, y, task=formulation,
                       n_classes=dataset.n_classes, weights=weights,
                       feature_names=columns, threads=threads)


# ---------------------------------------------------------------------------
# On-disk interchange between the CLI stages


def save_prompt_dataset(dataset: PromptDataset, out_dir: str | Path) -> None:
    """Write raw features, labels, splits, vocabulary and extraction flags."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset.raw_matrix.to_csv(out_dir / "features.csv")
    with open(out_dir / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["response_id", "ordinal", "length", "ordinal2"])
        for rid in dataset.raw_matrix.response_ids:
            writer.writerow([rid, dataset.y[rid], repr(dataset.lengths[rid]),
                             dataset.y2.get(rid, "")])
    payload = dataset.split.to_json()
    payload["prompt_id"] = dataset.prompt_id
    payload["n_classes"] = dataset.n_classes
    (out_dir / "splits.json").write_text(json.dumps(payload, sort_keys=True),
                                         encoding="utf-8")
    if dataset.vocabulary is not None:
        dataset.vocabulary.save(out_dir / "vocabulary.tsv")
    (out_dir / "flags.json").write_text(
        json.dumps(dataset.raw_matrix.flags, sort_keys=True), encoding="utf-8")


def load_prompt_dataset(directory: str | Path) -> PromptDataset:
    """Rebuild a PromptDataset from an extract-stage directory; the
    standardizer is refit on the stored train split (deterministic)."""
    directory = Path(directory)
    raw = FeatureMatrix.from_csv(directory / "features.csv")
    flags_path = directory / "flags.json"
    if flags_path.exists():
        raw.flags = json.loads(flags_path.read_text(encoding="utf-8"))
    payload = json.loads((directory / "splits.json").read_text(encoding="utf-8"))
    split = SplitAssignment.from_json(payload)
    y, y2, lengths = {}, {}, {}
    with open(directory / "labels.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rid, ordinal, length, ordinal2 in reader:
            y[rid] = int(ordinal)
            lengths[rid] = float(length)
            if ordinal2 != "":
                y2[rid] = int(ordinal2)
    vocabulary = None
    vocab_path = directory / "vocabulary.tsv"
    if vocab_path.exists():
        vocabulary = TfidfVocabulary.load(vocab_path)
    standardizer = fit_standardizer(raw.restrict(split.train))
    return PromptDataset(prompt_id=payload["prompt_id"],
                         matrix=standardizer.transform(raw), raw_matrix=raw,
                         standardizer=standardizer, vocabulary=vocabulary,
                         split=split, y=y, y2=y2,
                         n_classes=int(payload["n_classes"]), lengths=lengths)
