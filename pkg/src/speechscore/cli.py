"""Command-line pipeline: extract | train | evaluate | explain | ablate |
synth | report.

Every command is deterministic given its inputs, ``--seed`` and ``--threads``
(thread count never changes results). Failures print a machine-readable JSON
error to stderr and exit nonzero. A ``--config`` file of ``key = value``
lines supplies defaults for any long option of the chosen subcommand.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import harness, svg
from .corpus import LexicalResources, load_corpus
from .explain import gain_importance, pdp, shap_summary
from .features import GROUP_ORDER, ExtractorConfig
from .learners import class_weights, load_model, make_estimator, save_model
from .synth import SCORE_FUNCTIONS, SynthSpec, synth_corpus, write_corpus


def _parse_config_file(path: str) -> dict:
    values = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {raw!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        text = text.strip("\"'")
        if text.lower() in ("true", "false"):
            value = text.lower() == "true"
        else:
            try:
                value = int(text)
            except ValueError:
                try:
                    value = float(text)
                except ValueError:
                    value = text
        values[key.replace("-", "_")] = value
    return values


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Config values fill in any option still at its parser default."""
    if not getattr(args, "config", None):
        return
    subparser = parser.speechscore_subcommands[args.command]
    for key, value in _parse_config_file(args.config).items():
        if hasattr(args, key) and getattr(args, key) == subparser.get_default(key):
            setattr(args, key, value)


def _groups(text: str) -> tuple[str, ...]:
    return tuple(g.strip().upper() for g in text.split(",") if g.strip())


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1),
                    encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_extract(args) -> int:
    resources = LexicalResources.load(args.resources)
    corpus = load_corpus(args.manifest)
    out = _out_dir(args)
    if corpus.rejected:
        _write_json(out / "rejects.json",
                    [{"source": s, "reason": r} for s, r in corpus.rejected])
    if not corpus.responses:
        raise ValueError("no valid responses in the corpus")
    by_prompt = corpus.by_prompt()
    config = ExtractorConfig(
        groups=_groups(args.groups), min_df=args.min_df,
        max_terms=args.max_terms, rank_threshold=args.rank_threshold,
        ld_mode=args.ld_mode,
        stress_includes_secondary=args.include_secondary_stress,
        fmin=args.fmin, fmax=args.fmax, frame=args.frame, hop=args.hop,
        seed=args.seed)
    ratios = tuple(float(r) for r in args.ratios.split(":"))
    ratios = tuple(r / sum(ratios) for r in ratios)
    for prompt_id, responses in sorted(by_prompt.items()):
        dataset = harness.prepare_prompt(responses, resources, config,
                                         seed=args.seed, ratios=ratios,
                                         threads=args.threads)
        target = out if len(by_prompt) == 1 else out / prompt_id
        harness.save_prompt_dataset(dataset, target)
        print(f"{prompt_id}: {len(responses)} responses, "
              f"{len(dataset.raw_matrix.columns)} features -> {target}")
    return 0


def cmd_train(args) -> int:
    dataset = harness.load_prompt_dataset(args.features)
    out = _out_dir(args)
    X, y, _, columns = dataset.design("train")
    task = args.task
    weights = class_weights(y) if task == "classification" else None
    params = json.loads(args.params) if args.params else {}
    cv_table = None
    if args.grid:
        grid = json.loads(args.grid)
        from .learners import GridSearchSpec, grid_search
        kind = args.model if args.model != "linear" else (
            "linear" if task == "regression" else "logistic")
        best, cv_table = grid_search(
            kind, GridSearchSpec(grid=grid, folds=args.folds, seed=args.seed),
            X, y, task=task, n_classes=dataset.n_classes, weights=weights,
            feature_names=columns, threads=args.threads)
        params = dict(best, **params)
    model = harness._train(dataset, args.model, task, params, seed=args.seed,
                           threads=args.threads)
    save_model(model, out / "model.json", extra={
        "model_key": args.model, "formulation": task,
        "params": params, "seed": args.seed,
        "n_grade_levels": dataset.n_classes,
        "standardizer": dataset.standardizer.to_json()})
    if cv_table is not None:
        _write_json(out / "cv_table.json", cv_table)
        with open(out / "cv_table.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["params", "mean_qwk", "mean_mse", "flagged"])
            for row in cv_table:
                writer.writerow([json.dumps(row["params"], sort_keys=True),
                                 repr(row["mean_qwk"]), repr(row["mean_mse"]),
                                 row["flagged"]])
    print(f"trained {args.model} ({task}) -> {out / 'model.json'}")
    return 0


def cmd_evaluate(args) -> int:
    dataset = harness.load_prompt_dataset(args.features)
    model, payload = load_model(args.model, with_payload=True)
    out = _out_dir(args)
    formulation = payload.get("formulation", "regression")
    model_key = payload.get("model_key", "gbt")
    report = {"prompt": dataset.prompt_id, "model": model_key,
              "formulation": formulation, "n_classes": dataset.n_classes}
    for split_name in ("valid", "test"):
        report[split_name] = harness._evaluate(dataset, model, split_name,
                                               formulation, model_key)
    hh = {s: harness.human_agreement(dataset, s) for s in ("valid", "test")}
    if any(v is not None for v in hh.values()):
        report["human_human"] = hh
    _write_json(out / "report.json", report)
    print(json.dumps({s: round(report[s]["qwk"], 4) for s in ("valid", "test")}))
    return 0


def cmd_explain(args) -> int:
    dataset = harness.load_prompt_dataset(args.features)
    model, payload = load_model(args.model, with_payload=True)
    out = _out_dir(args)
    matrix = dataset.matrix.restrict(dataset.split.train)
    kind = args.kind
    if kind == "importance":
        ranking = gain_importance(model)
        with open(out / "importance.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "importance"])
            for name, value in ranking.entries:
                writer.writerow([name, repr(value)])
        top = ranking.entries[:25]
        svg.bar_chart([n for n, _ in top], [v for _, v in top],
                      "feature importance (gain)", out / "importance.svg")
    elif kind == "pdp":
        if not args.feature:
            raise ValueError("explain pdp requires --feature")
        curve = pdp(model, matrix, args.feature, n_grid=args.n_grid)
        with open(out / f"pdp_{_slug(args.feature)}.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["grid", "mean_prediction"])
            for g, v in zip(curve.grid, curve.mean_prediction):
                writer.writerow([repr(float(g)), repr(float(v))])
        svg.line_chart(curve.grid, curve.mean_prediction,
                       f"partial dependence: {args.feature}",
                       out / f"pdp_{_slug(args.feature)}.svg",
                       x_label=args.feature, y_label="mean prediction")
    elif kind == "shap":
        rows = matrix.values[:args.max_samples]
        summary = shap_summary(model, rows)
        with open(out / "shap_values.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(summary.columns)
            for row in summary.phi:
                writer.writerow([repr(float(v)) for v in row])
        with open(out / "shap_ranking.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "mean_abs_phi"])
            for name, value in summary.ranking:
                writer.writerow([name, repr(value)])
        svg.beeswarm(summary.ranking, summary.phi, summary.feature_values,
                     summary.columns, "SHAP summary", out / "shap_summary.svg")
    else:
        raise ValueError(f"unknown explain kind {kind!r}")
    print(f"wrote {kind} artifacts to {out}")
    return 0


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in name)


def cmd_ablate(args) -> int:
    dataset = harness.load_prompt_dataset(args.features)
    out = _out_dir(args)
    params = json.loads(args.params) if args.params else None
    if args.mode == "add":
        order = _groups(args.order) if args.order else None
        report = harness.ablation_additive(dataset, order=order, seed=args.seed,
                                           params=params, threads=args.threads)
    elif args.mode == "drop":
        report = harness.ablation_leave_one_out(dataset, seed=args.seed,
                                                params=params,
                                                threads=args.threads)
    else:
        raise ValueError(f"unknown ablation mode {args.mode!r}")
    _write_json(out / f"ablation_{args.mode}.json", report.to_json())
    with open(out / f"ablation_{args.mode}.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["configuration", "qwk", "r", "mse", "pct_change"])
        for row in report.rows:
            writer.writerow([row["configuration"], repr(row["qwk"]),
                             repr(row["r"]), repr(row["mse"]),
                             repr(row["pct_change"])])
    svg.bar_chart([r["configuration"] for r in report.rows],
                  [r["qwk"] for r in report.rows],
                  f"ablation ({args.mode}): test QWK",
                  out / f"ablation_{args.mode}.svg")
    for row in report.rows:
        print(f"{row['configuration']:>24s}  qwk={row['qwk']:.4f} "
              f"({row['pct_change']:+.1f}%)")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(n=args.n, grade_levels=args.grades, seed=args.seed,
                     score_function=args.score_function, noise=args.noise,
                     audio=args.audio,
                     second_rater_disagreement=args.second_rater,
                     prompt_id=args.prompt_id)
    responses, audio = synth_corpus(spec)
    out = _out_dir(args)
    manifest = write_corpus(responses, out, audio)
    bundled = Path(__file__).parent / "resources"
    resdir = out / "resources"
    resdir.mkdir(exist_ok=True)
    for name in ("frequency.tsv", "complexity.tsv", "stopwords.txt", "fillers.txt"):
        (resdir / name).write_text((bundled / name).read_text(encoding="utf-8"),
                                   encoding="utf-8")
    print(f"wrote {len(responses)} responses, manifest {manifest}")
    return 0


def cmd_report(args) -> int:
    dataset = harness.load_prompt_dataset(args.features)
    out = _out_dir(args)
    models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    formulations = tuple(f.strip() for f in args.formulations.split(",") if f.strip())
    report = harness.run_benchmark(dataset, models=models,
                                   formulations=formulations, seed=args.seed,
                                   threads=args.threads)
    _write_json(out / "benchmark.json", report)
    with open(out / "benchmark.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prompt", "model", "formulation", "split",
                         "qwk", "r", "mse"])
        for row in report["rows"]:
            for split_name in ("valid", "test"):
                cell = row[split_name]
                writer.writerow([row["prompt"], row["model"],
                                 row["formulation"], split_name,
                                 repr(cell["qwk"]), repr(cell["pearson_r"]),
                                 repr(cell["mse"])])
            target = out / row["prompt"] / row["model"] / row["formulation"]
            target.mkdir(parents=True, exist_ok=True)
            _write_json(target / "report.json", row)
    if "human_human" in report:
        _write_json(out / "human_human.json", report["human_human"])
    for row in report["rows"]:
        print(f"{row['model']:>16s} {row['formulation']:<14s} "
              f"test qwk={row['test']['qwk']:.4f} r={row['test']['pearson_r']:.4f} "
              f"mse={row['test']['mse']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speechscore",
        description="Interpretable feature-based scoring of spoken responses")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (never changes results)")
        p.add_argument("--config", default=None,
                       help="key = value file supplying option defaults")

    p = sub.add_parser("extract", help="extract feature matrices from a corpus",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.add_argument("--manifest", required=True,
                   help="alignment manifest file or corpus directory")
    p.add_argument("--resources", required=True,
                   help="directory with frequency/complexity/stopword/filler lists")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--groups", default=",".join(GROUP_ORDER),
                   help="comma-separated feature groups")
    p.add_argument("--ratios", default="0.7:0.1:0.2", help="train:valid:test")
    p.add_argument("--min-df", type=int, default=2, help="tf-idf min document frequency")
    p.add_argument("--max-terms", type=int, default=1000, help="tf-idf vocabulary cap")
    p.add_argument("--rank-threshold", type=int, default=2000,
                   help="frequency rank beyond which a word is sophisticated")
    p.add_argument("--ld-mode", choices=("density", "diversity"), default="density",
                   help="lexical-diversity reading of the ld feature")
    p.add_argument("--include-secondary-stress", action="store_true",
                   help="count secondary stress as stressed")
    p.add_argument("--fmin", type=float, default=75.0, help="pitch floor, Hz")
    p.add_argument("--fmax", type=float, default=500.0, help="pitch ceiling, Hz")
    p.add_argument("--frame", type=float, default=0.040, help="analysis frame, s")
    p.add_argument("--hop", type=float, default=0.010, help="frame hop, s")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train one model on extracted features",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.add_argument("--features", required=True, help="extract-stage directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--model", default="gbt",
                   choices=harness.MODEL_KEYS, help="model family")
    p.add_argument("--task", default="regression",
                   choices=("regression", "classification"), help="formulation")
    p.add_argument("--grid", default=None,
                   help='JSON hyperparameter grid, e.g. {"max_depth": [3, 6]}')
    p.add_argument("--folds", type=int, default=5, help="cross-validation folds")
    p.add_argument("--params", default=None,
                   help="JSON parameter overrides applied after grid search")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained model on the splits",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.add_argument("--features", required=True, help="extract-stage directory")
    p.add_argument("--model", required=True, help="model.json path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="importance, PDP or SHAP artifacts",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.add_argument("--features", required=True, help="extract-stage directory")
    p.add_argument("--model", required=True, help="model.json path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--kind", required=True, choices=("importance", "pdp", "shap"),
                   help="explanation artifact to produce")
    p.add_argument("--feature", default=None, help="feature name for PDP")
    p.add_argument("--n-grid", type=int, default=20, help="PDP grid points")
    p.add_argument("--max-samples", type=int, default=200,
                   help="train rows explained by SHAP")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("ablate", help="additive or leave-one-out group ablation",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.add_argument("--features", required=True, help="extract-stage directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", required=True, choices=("add", "drop"),
                   help="add groups one by one, or drop one at a time")
    p.add_argument("--order", default=None,
                   help="comma-separated group order for additive mode")
    p.add_argument("--params", default=None, help="JSON model parameters")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="generate a synthetic graded corpus",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.add_argument("--n", type=int, required=True, help="number of responses")
    p.add_argument("--grades", type=int, default=3, help="grade levels (2-5)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--score-function", default="rate_ttr_pause",
                   choices=sorted(SCORE_FUNCTIONS), help="grade driver")
    p.add_argument("--noise", type=float, default=0.25,
                   help="grading noise relative to unit signal spread")
    p.add_argument("--audio", action="store_true", help="also synthesize WAVs")
    p.add_argument("--second-rater", type=float, default=None,
                   help="simulated second-rater disagreement probability")
    p.add_argument("--prompt-id", default="synth-1", help="prompt identifier")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="benchmark every model and formulation",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.add_argument("--features", required=True, help="extract-stage directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--models", default=",".join(harness.MODEL_KEYS),
                   help="comma-separated model keys")
    p.add_argument("--formulations", default="regression,classification",
                   help="comma-separated formulations")
    p.set_defaults(func=cmd_report)

    parser.speechscore_subcommands = sub.choices
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, parser)
        return args.func(args)
    except Exception as exc:    # contract: JSON error channel, nonzero exit
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
