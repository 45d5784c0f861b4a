"""Command-line interface wiring the triage pipeline end to end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence
escalated by --strict.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import actionability as act
from . import corpus, evaluation, features, informativeness, profiles
from .categories import ActionabilityType, action_codes
from .corpus import BinaryInformativeness, Source
from .text import load_embeddings

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NONCONVERGED = 3

# Named sub-seed offsets so each component is individually reproducible
# from the single top-level seed.
SEED_SPLIT = 101
SEED_INIT = 211
SEED_DOWNSAMPLE = 307
SEED_TUNE = 401


def load_config_file(path: str) -> dict[str, str]:
    """Simple key=value configuration; '#' starts a comment."""
    config: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path} line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        config[key.strip().replace("-", "_")] = value.strip()
    return config


def coerce_config_values(config: dict[str, str]) -> dict[str, object]:
    coerced: dict[str, object] = {}
    for key, raw in config.items():
        for cast in (int, float):
            try:
                coerced[key] = cast(raw)
                break
            except ValueError:
                continue
        else:
            coerced[key] = raw
    return coerced


def _write_or_stdout(path: str | None, content: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(content)
    else:
        Path(path).write_text(content, encoding="utf-8")


def _message_record(m: corpus.Message, label: BinaryInformativeness | None = None) -> dict:
    rec: dict = {"id": m.id, "text": m.text, "source": m.source.value}
    if m.timestamp is not None:
        rec["timestamp"] = m.timestamp
    if label is not None:
        rec["label"] = label.value
    return rec


def cmd_ingest(args) -> int:
    if args.format == "crisislex":
        ms = corpus.load_crisislex_csv(args.input)
    else:
        ms = corpus.load_jsonl(args.input)
    for err in ms.errors:
        print(f"warning: {err}", file=sys.stderr)
    if args.dedupe:
        ms = corpus.dedupe(ms)
    lines = [json.dumps(_message_record(m, ms.labels.get(m.id))) for m in ms]
    _write_or_stdout(args.output, "\n".join(lines) + ("\n" if lines else ""))
    return EXIT_OK


def cmd_adjudicate(args) -> int:
    judgments = corpus.load_judgments(args.judgments)
    excluded_workers: set[str] = set()
    if args.gold:
        gold = {}
        with open(args.gold, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                label = corpus._JUDGMENT_LABELS[rec["correct"].strip().lower()]
                gold[rec["message_id"]] = corpus.GoldQuestion(rec["message_id"], label)
        by_worker: dict[str, dict] = defaultdict(dict)
        for j in judgments:
            by_worker[j.worker_id][j.message_id] = j.label
        for worker_id, answers in by_worker.items():
            if not any(mid in gold for mid in answers):
                continue
            score = corpus.score_gold(worker_id, gold, answers, threshold=args.gold_threshold)
            if score.flagged:
                excluded_workers.add(worker_id)
                print(
                    f"warning: worker {worker_id} flagged at gold accuracy "
                    f"{score.accuracy:.2f}, judgments excluded",
                    file=sys.stderr,
                )
    by_message: dict[str, list] = defaultdict(list)
    for j in judgments:
        if j.worker_id not in excluded_workers:
            by_message[j.message_id].append(j.label)
    lines = []
    for message_id in sorted(by_message):
        verdict = corpus.adjudicate(by_message[message_id])
        binary = corpus.collapse_labels(verdict)
        lines.append(
            json.dumps(
                {"message_id": message_id, "level": int(verdict), "label": binary.value}
            )
        )
    _write_or_stdout(args.output, "\n".join(lines) + ("\n" if lines else ""))
    return EXIT_OK


def cmd_split(args) -> int:
    ccsid = corpus.load_jsonl(args.ccsid, default_source=Source.CCSID)
    crisislex = (
        corpus.load_crisislex_csv(args.crisislex)
        if args.crisislex.endswith(".csv")
        else corpus.load_jsonl(args.crisislex, default_source=Source.CRISISLEX)
    )
    split = corpus.build_split(ccsid, crisislex, seed=args.seed + SEED_SPLIT)
    for path, part in [(args.train_out, split.train), (args.val_out, split.validation)]:
        lines = [json.dumps(_message_record(m, part.labels.get(m.id))) for m in part]
        _write_or_stdout(path, "\n".join(lines) + ("\n" if lines else ""))
    print(
        f"train={len(split.train)} validation={len(split.validation)}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_induce_keywords(args) -> int:
    from .text import tokenize

    tagged = act.load_tagged_jsonl(args.tagged)
    docs = [(tokenize(m.text), actions) for m, actions in tagged]
    lists = {}
    for category in ActionabilityType:
        positives = [toks for toks, actions in docs if category in actions]
        negatives = [toks for toks, actions in docs if category not in actions]
        lists[category] = features.induce_keywords(
            positives, negatives, category, k=args.k, min_count=args.min_count
        )
        if lists[category].underfilled:
            print(
                f"warning: category {category.code} has fewer than {args.k} eligible tokens",
                file=sys.stderr,
            )
    _write_or_stdout(args.output, features.format_keyword_file(lists))
    return EXIT_OK


def cmd_train_inf(args) -> int:
    train_set = corpus.load_jsonl(args.train)
    val_set = corpus.load_jsonl(args.val)
    labels = [train_set.labels[m.id] for m in train_set]
    config = informativeness.CnnConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        max_len=args.max_len,
        class_weights=informativeness.inverse_frequency_weights(labels),
        seed=args.seed + SEED_INIT,
    )
    model = informativeness.init_model(config)
    split = corpus.Split(train=train_set, validation=val_set)
    trained, trace = informativeness.train(model, split, config)
    informativeness.save_model(trained, args.model_out)
    print(
        f"epochs={len(trace.training_loss)} selected={trace.selected_epoch} "
        f"crossover={trace.crossover_epoch}",
        file=sys.stderr,
    )
    return EXIT_OK


def _keyword_lists(path: str | None) -> dict:
    return features.load_keyword_file(path) if path else features.default_keyword_lists()


def cmd_train_act(args) -> int:
    tagged = act.load_tagged_jsonl(args.tagged)
    table = load_embeddings(args.embeddings, expected_d=args.dimension)
    hp = act.SvmHyperparams(C=args.C, gamma=args.gamma)
    ensemble = act.train_ensemble(
        tagged,
        _keyword_lists(args.keywords),
        table,
        features.FeatureConfig(cutoff=args.cutoff),
        hp,
        seed=args.seed + SEED_DOWNSAMPLE,
    )
    act.save_ensemble(ensemble, args.model_out)
    stragglers = [c.code for c, m in ensemble.models.items() if not m.converged]
    if stragglers:
        print(f"warning: non-converged categories: {stragglers}", file=sys.stderr)
        if args.strict:
            return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_tune(args) -> int:
    from .text import tokenize

    tagged = act.load_tagged_jsonl(args.tagged)
    table = load_embeddings(args.embeddings, expected_d=args.dimension)
    category = ActionabilityType.from_code(args.category)
    kws = _keyword_lists(args.keywords)[category]
    fc = features.FeatureConfig(cutoff=args.cutoff)
    positives = [m for m, actions in tagged if category in actions]
    negatives = [m for m, actions in tagged if category not in actions]
    positives, negatives = act.downsample_negatives(
        positives, negatives, args.seed + SEED_DOWNSAMPLE
    )
    x = np.array(
        [features.vectorize(tokenize(m.text), kws, table, fc).values for m in positives + negatives]
    )
    y = np.array([1.0] * len(positives) + [-1.0] * len(negatives))
    c_grid = [float(v) for v in args.c_grid.split(",")]
    gamma_grid = [float(v) for v in args.gamma_grid.split(",")]
    result = act.grid_search(x, y, c_grid, gamma_grid, folds=args.folds, seed=args.seed + SEED_TUNE)
    rows = ["C,gamma,mean_f1"] + [
        f"{c},{g},{f1:.6f}" for c, g, f1 in result.heatmap_rows()
    ]
    _write_or_stdout(args.heatmap_out, "\n".join(rows) + "\n")
    print(f"best C={result.best[0]} gamma={result.best[1]}", file=sys.stderr)
    return EXIT_OK


def cmd_classify(args) -> int:
    inf_model = informativeness.load_model(args.inf_model)
    ensemble = act.load_ensemble(args.act_model)
    messages = corpus.load_jsonl(args.messages)
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", encoding="utf-8")
    try:
        for m in messages:
            decision = informativeness.classify(inf_model, m, threshold=args.threshold)
            informative = decision.decision is BinaryInformativeness.INFORMATIVE
            if informative:
                actions = act.classify_actionability(ensemble, m)
            else:
                actions = frozenset()
            rec = {
                "id": m.id,
                "informative": informative,
                "p": round(decision.probability_informative, 6),
                "actions": action_codes(actions),
            }
            if m.timestamp is not None:
                rec["timestamp"] = m.timestamp
            out.write(json.dumps(rec) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_evaluate(args) -> int:
    gold = act.load_tagged_jsonl(args.gold)
    gold_by_id = {m.id: actions for m, actions in gold}
    predictions: dict[str, set[str]] = {}
    with open(args.predictions, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            predictions[str(rec["id"])] = set(rec.get("actions", []))
    from .text import tokenize

    kws = _keyword_lists(args.keywords)
    reports = {}
    baseline_f1 = {}
    for category in ActionabilityType:
        preds, golds, base_preds = [], [], []
        for m, actions in gold:
            if m.id not in predictions:
                continue
            golds.append(1 if category in actions else -1)
            preds.append(1 if category.code in predictions[m.id] else -1)
            base_preds.append(act.keyword_baseline(tokenize(m.text), kws[category]))
        if not golds:
            raise ValueError("no overlapping ids between predictions and gold")
        reports[category] = evaluation.metrics(evaluation.confusion(preds, golds))
        baseline_f1[category] = evaluation.metrics(
            evaluation.confusion(base_preds, golds)
        ).f1
    table, csv_twin = evaluation.report_table(reports, baseline_f1)
    _write_or_stdout(args.table_out, table)
    _write_or_stdout(args.csv_out, csv_twin)
    return EXIT_OK


def cmd_profile(args) -> int:
    tagged = []
    with open(args.tagged, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            message = corpus.Message(
                id=str(rec["id"]),
                text=rec.get("text", "-"),
                timestamp=int(rec["timestamp"]) if "timestamp" in rec else None,
            )
            actions = frozenset(ActionabilityType.from_code(c) for c in rec.get("actions", []))
            tagged.append((message, actions))
    profile = profiles.build_profile(tagged, width=args.width_hours * 3600)
    _write_or_stdout(args.chart_out, profiles.render_chart(profile))
    _write_or_stdout(args.csv_out, profiles.profile_csv(profile))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crisistriage",
        description="Two-stage crisis message triage: informativeness filtering "
        "then actionability tagging.",
    )
    parser.add_argument("--config", help="key=value configuration file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and optionally dedupe a message dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "crisislex"], default="jsonl")
    p.add_argument("--dedupe", action="store_true")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("adjudicate", help="adjudicate crowd judgments into labels")
    p.add_argument("--judgments", required=True)
    p.add_argument("--gold", help="gold questions for worker quality gating")
    p.add_argument("--gold-threshold", type=float, default=0.7)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("split", help="build the train/validation split")
    p.add_argument("--ccsid", required=True)
    p.add_argument("--crisislex", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True)
    p.add_argument("--val-out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("induce-keywords", help="induce per-category keyword lists")
    p.add_argument("--tagged", required=True)
    p.add_argument("-k", type=int, default=features.DEFAULT_KEYWORD_COUNT)
    p.add_argument("--min-count", type=int, default=features.DEFAULT_MIN_COUNT)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_induce_keywords)

    p = sub.add_parser("train-inf", help="train the informativeness classifier")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--max-len", type=int, default=280)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_inf)

    p = sub.add_parser("train-act", help="train the nine actionability classifiers")
    p.add_argument("--tagged", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dimension", type=int, default=25)
    p.add_argument("--keywords")
    p.add_argument("--cutoff", type=float, default=0.45)
    p.add_argument("--C", type=float, default=20.0)
    p.add_argument("--gamma", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train_act)

    p = sub.add_parser("tune", help="grid-search C and gamma for one category")
    p.add_argument("--tagged", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dimension", type=int, default=25)
    p.add_argument("--keywords")
    p.add_argument("--cutoff", type=float, default=0.45)
    p.add_argument("--category", required=True)
    p.add_argument("--c-grid", default=",".join(str(c) for c in act.DEFAULT_C_GRID))
    p.add_argument("--gamma-grid", default=",".join(str(g) for g in act.DEFAULT_GAMMA_GRID))
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--heatmap-out", default="-")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("classify", help="run the full pipeline over a message stream")
    p.add_argument("--messages", required=True)
    p.add_argument("--inf-model", required=True)
    p.add_argument("--act-model", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="score predictions against gold tags")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--keywords")
    p.add_argument("--table-out", default="-")
    p.add_argument("--csv-out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("profile", help="build the crisis profile chart")
    p.add_argument("--tagged", required=True)
    p.add_argument("--width-hours", type=int, default=24)
    p.add_argument("--chart-out", required=True)
    p.add_argument("--csv-out", required=True)
    p.set_defaults(func=cmd_profile)

    return parser


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    # Config file supplies defaults; explicit flags override them.
    config_path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path:
        try:
            defaults = coerce_config_values(load_config_file(config_path))
        except (OSError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_DATA
        parser.set_defaults(**defaults)
        # Subcommands parse into their own namespace, so their defaults
        # must be overridden individually for the config file to apply.
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for subparser in action.choices.values():
                    subparser.set_defaults(**defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
