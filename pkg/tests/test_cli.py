import json

import pytest

from crisistriage import actionability as act
from crisistriage import cli, features
from crisistriage.categories import ActionabilityType

from conftest import write_embedding_file


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, crisis_world):
    """Shared on-disk corpus, embeddings, keywords, and trained models."""
    root = tmp_path_factory.mktemp("cliwork")

    emb = root / "embeddings.txt"
    write_embedding_file(emb, crisis_world["table"])

    kw = root / "keywords.txt"
    kw.write_text(features.format_keyword_file(crisis_world["keyword_lists"]), encoding="utf-8")

    # Actionability corpus: per category, ten positives built from that
    # category's keyword/similar words and a shared pool of filler negatives.
    tagged_lines = []
    t0 = 1_500_000_000
    n = 0
    for cat in ActionabilityType:
        code = cat.code.lower()
        words = [f"kw{code}one", f"kw{code}two", f"sim{code}"]
        for i in range(10):
            text = f"{words[i % 3]} filler18 filler19"
            tagged_lines.append(
                json.dumps(
                    {"id": f"p{n}", "text": text, "timestamp": t0 + n * 3600, "actions": [cat.code]}
                )
            )
            n += 1
    for i in range(12):
        tagged_lines.append(
            json.dumps(
                {
                    "id": f"n{i}",
                    "text": f"filler20 filler21 filler{18 + i % 7}",
                    "timestamp": t0 + (n + i) * 3600,
                    "actions": [],
                }
            )
        )
    tagged = root / "tagged.jsonl"
    tagged.write_text("\n".join(tagged_lines) + "\n", encoding="utf-8")

    # Informativeness corpus: separable by the presence of 'x' vs 'q'.
    def inf_lines(ids, offset):
        lines = []
        for i in ids:
            marker = "x" if i % 2 == 0 else "q"
            label = "informative" if marker == "x" else "not_informative"
            lines.append(
                json.dumps(
                    {
                        "id": f"i{offset + i}",
                        "text": f"alpha beta {marker} gamma",
                        "label": label,
                        "timestamp": t0 + i * 60,
                    }
                )
            )
        return lines

    train = root / "inf_train.jsonl"
    train.write_text("\n".join(inf_lines(range(12), 0)) + "\n", encoding="utf-8")
    val = root / "inf_val.jsonl"
    val.write_text("\n".join(inf_lines(range(6), 100)) + "\n", encoding="utf-8")

    inf_model = root / "inf_model.bin"
    rc = cli.main(
        [
            "train-inf",
            "--train", str(train),
            "--val", str(val),
            "--model-out", str(inf_model),
            "--epochs", "4",
            "--max-len", "48",
            "--batch-size", "4",
        ]
    )
    assert rc == cli.EXIT_OK

    act_model = root / "act_model.bin"
    rc = cli.main(
        [
            "train-act",
            "--tagged", str(tagged),
            "--embeddings", str(emb),
            "--keywords", str(kw),
            "--model-out", str(act_model),
        ]
    )
    assert rc == cli.EXIT_OK

    return {
        "root": root,
        "embeddings": emb,
        "keywords": kw,
        "tagged": tagged,
        "inf_train": train,
        "inf_val": val,
        "inf_model": inf_model,
        "act_model": act_model,
    }


class TestConfigFile:
    def test_parse_and_coerce(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("threshold = 0.8  # gate\nmax-len=120\nname=run one\n", encoding="utf-8")
        raw = cli.load_config_file(str(cfg))
        assert raw == {"threshold": "0.8", "max_len": "120", "name": "run one"}
        coerced = cli.coerce_config_values(raw)
        assert coerced == {"threshold": 0.8, "max_len": 120, "name": "run one"}

    def test_malformed_line_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just some words\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 1"):
            cli.load_config_file(str(cfg))

    def test_config_supplies_default_flag_overrides(self, workdir, tmp_path):
        cfg = tmp_path / "profile.cfg"
        cfg.write_text("width_hours=1000\n", encoding="utf-8")
        def rows(extra):
            chart, csvp = tmp_path / "c.svg", tmp_path / "p.csv"
            args = ["--config", str(cfg), "profile", "--tagged", str(workdir["tagged"]),
                    "--chart-out", str(chart), "--csv-out", str(csvp)] + extra
            assert cli.main(args) == cli.EXIT_OK
            return len(csvp.read_text().strip().splitlines())
        wide = rows([])  # 1000 h buckets from config
        narrow = rows(["--width-hours", "24"])  # flag wins over config
        assert wide < narrow

    def test_missing_config_file_is_data_error(self, workdir, tmp_path):
        rc = cli.main(
            ["--config", str(tmp_path / "absent.cfg"), "profile",
             "--tagged", str(workdir["tagged"]),
             "--chart-out", str(tmp_path / "c.svg"), "--csv-out", str(tmp_path / "p.csv")]
        )
        assert rc == cli.EXIT_DATA


class TestExitCodes:
    def test_no_arguments_is_usage_error(self, capsys):
        assert cli.main([]) == cli.EXIT_USAGE
        capsys.readouterr()

    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert cli.main(["frobnicate"]) == cli.EXIT_USAGE
        capsys.readouterr()

    def test_help_exits_zero(self, capsys):
        assert cli.main(["--help"]) == cli.EXIT_OK
        capsys.readouterr()

    def test_missing_input_file_is_data_error(self, tmp_path, capsys):
        rc = cli.main(["ingest", "--input", str(tmp_path / "nope.jsonl")])
        assert rc == cli.EXIT_DATA
        assert "error:" in capsys.readouterr().err

    def test_strict_nonconvergence_exits_three(self, workdir, tmp_path, monkeypatch):
        real = act.train_ensemble

        def sabotaged(*args, **kwargs):
            ensemble = real(*args, **kwargs)
            for model in ensemble.models.values():
                model.converged = False
            return ensemble

        monkeypatch.setattr(act, "train_ensemble", sabotaged)
        args = [
            "train-act",
            "--tagged", str(workdir["tagged"]),
            "--embeddings", str(workdir["embeddings"]),
            "--keywords", str(workdir["keywords"]),
            "--model-out", str(tmp_path / "m.bin"),
        ]
        assert cli.main(args + ["--strict"]) == cli.EXIT_NONCONVERGED
        assert cli.main(args) == cli.EXIT_OK  # without --strict only a warning


class TestIngest:
    def test_jsonl_roundtrip(self, tmp_path):
        src = tmp_path / "in.jsonl"
        src.write_text(
            json.dumps({"id": "1", "text": "hello", "label": "informative"}) + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "out.jsonl"
        assert cli.main(["ingest", "--input", str(src), "--output", str(out)]) == cli.EXIT_OK
        rec = json.loads(out.read_text())
        assert rec["id"] == "1" and rec["text"] == "hello" and rec["label"] == "informative"

    def test_dedupe_drops_retweet(self, tmp_path):
        src = tmp_path / "in.jsonl"
        src.write_text(
            "\n".join(
                [
                    json.dumps({"id": "1", "text": "bridge closed on main street", "timestamp": 10}),
                    json.dumps({"id": "2", "text": "RT @user: bridge closed on main street", "timestamp": 20}),
                ]
            )
            + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "out.jsonl"
        assert cli.main(["ingest", "--input", str(src), "--dedupe", "--output", str(out)]) == cli.EXIT_OK
        ids = [json.loads(line)["id"] for line in out.read_text().strip().splitlines()]
        assert ids == ["1"]


class TestAdjudicate:
    def test_majority_with_gold_gating(self, tmp_path, capsys):
        judgments = tmp_path / "j.jsonl"
        records = []
        # w1/w2 agree on "informative"; w3 (who always disagrees) fails gold.
        for worker, label in [("w1", "informative"), ("w2", "informative"), ("w3", "not")]:
            records.append({"message_id": "m1", "worker_id": worker, "label": label})
            records.append({"message_id": "g1", "worker_id": worker, "label": label})
        judgments.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
        gold = tmp_path / "gold.jsonl"
        gold.write_text(json.dumps({"message_id": "g1", "correct": "informative"}) + "\n", encoding="utf-8")
        out = tmp_path / "labels.jsonl"
        rc = cli.main(
            ["adjudicate", "--judgments", str(judgments), "--gold", str(gold), "--output", str(out)]
        )
        assert rc == cli.EXIT_OK
        assert "w3" in capsys.readouterr().err
        by_id = {r["message_id"]: r for r in map(json.loads, out.read_text().strip().splitlines())}
        assert by_id["m1"]["level"] == 2 and by_id["m1"]["label"] == "informative"


class TestInduceKeywords:
    def test_recovers_planted_keywords(self, workdir, tmp_path):
        out = tmp_path / "induced.txt"
        rc = cli.main(
            ["induce-keywords", "--tagged", str(workdir["tagged"]), "-k", "2", "--output", str(out)]
        )
        assert rc == cli.EXIT_OK
        lists = features.load_keyword_file(out)
        for cat in ActionabilityType:
            code = cat.code.lower()
            assert set(lists[cat].keywords) <= {f"kw{code}one", f"kw{code}two", f"sim{code}"}


class TestPipeline:
    def test_classify_output_schema_and_gate(self, workdir, tmp_path):
        out = tmp_path / "pred.jsonl"
        rc = cli.main(
            [
                "classify",
                "--messages", str(workdir["tagged"]),
                "--inf-model", str(workdir["inf_model"]),
                "--act-model", str(workdir["act_model"]),
                "--threshold", "0.001",
                "--output", str(out),
            ]
        )
        assert rc == cli.EXIT_OK
        records = [json.loads(line) for line in out.read_text().strip().splitlines()]
        assert len(records) == 102
        for rec in records:
            assert set(rec) == {"id", "informative", "p", "actions", "timestamp"}
            assert rec["informative"] is True  # near-zero threshold admits everything

    def test_gate_rejection_empties_actions(self, workdir, tmp_path):
        out = tmp_path / "pred.jsonl"
        rc = cli.main(
            [
                "classify",
                "--messages", str(workdir["tagged"]),
                "--inf-model", str(workdir["inf_model"]),
                "--act-model", str(workdir["act_model"]),
                "--threshold", "0.999",
                "--output", str(out),
            ]
        )
        assert rc == cli.EXIT_OK
        for line in out.read_text().strip().splitlines():
            rec = json.loads(line)
            assert rec["informative"] is False and rec["actions"] == []

    def test_evaluate_against_gold(self, workdir, tmp_path):
        pred = tmp_path / "pred.jsonl"
        assert cli.main(
            [
                "classify",
                "--messages", str(workdir["tagged"]),
                "--inf-model", str(workdir["inf_model"]),
                "--act-model", str(workdir["act_model"]),
                "--threshold", "0.001",
                "--output", str(pred),
            ]
        ) == cli.EXIT_OK
        table_out, csv_out = tmp_path / "table.txt", tmp_path / "table.csv"
        rc = cli.main(
            [
                "evaluate",
                "--predictions", str(pred),
                "--gold", str(workdir["tagged"]),
                "--keywords", str(workdir["keywords"]),
                "--table-out", str(table_out),
                "--csv-out", str(csv_out),
            ]
        )
        assert rc == cli.EXIT_OK
        assert len(table_out.read_text().strip().splitlines()) == 10
        header = csv_out.read_text().splitlines()[0]
        assert header == "category,accuracy,f1,recall,baseline_f1"

    def test_profile_chart_and_csv(self, workdir, tmp_path):
        chart, csvp = tmp_path / "chart.svg", tmp_path / "profile.csv"
        rc = cli.main(
            ["profile", "--tagged", str(workdir["tagged"]),
             "--chart-out", str(chart), "--csv-out", str(csvp)]
        )
        assert rc == cli.EXIT_OK
        assert chart.read_text().startswith("<svg")
        assert csvp.read_text().startswith("bucket_start,")


class TestTune:
    def test_heatmap_covers_grid(self, workdir, tmp_path):
        out = tmp_path / "heatmap.csv"
        rc = cli.main(
            [
                "tune",
                "--tagged", str(workdir["tagged"]),
                "--embeddings", str(workdir["embeddings"]),
                "--keywords", str(workdir["keywords"]),
                "--category", "A",
                "--c-grid", "1,20",
                "--gamma-grid", "0.5,3",
                "--folds", "2",
                "--heatmap-out", str(out),
            ]
        )
        assert rc == cli.EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "C,gamma,mean_f1"
        assert len(lines) == 1 + 4  # |C| x |gamma| cells


class TestSplit:
    def test_desk_scale_split(self, tmp_path, capsys):
        ccsid = tmp_path / "ccsid.jsonl"
        lines = []
        for i in range(60):
            label = "informative" if i % 2 == 0 else "not_informative"
            lines.append(json.dumps({"id": f"c{i}", "text": f"ccsid text {i}", "label": label}))
        ccsid.write_text("\n".join(lines) + "\n", encoding="utf-8")
        crisislex = tmp_path / "lex.jsonl"
        lines = []
        for i in range(30):
            label = "informative" if i % 2 == 0 else "not_informative"
            lines.append(json.dumps({"id": f"l{i}", "text": f"lex text {i}", "label": label}))
        crisislex.write_text("\n".join(lines) + "\n", encoding="utf-8")
        train_out, val_out = tmp_path / "train.jsonl", tmp_path / "val.jsonl"
        rc = cli.main(
            ["split", "--ccsid", str(ccsid), "--crisislex", str(crisislex),
             "--train-out", str(train_out), "--val-out", str(val_out)]
        )
        assert rc == cli.EXIT_OK
        capsys.readouterr()
        # scale = min(1, 60/300, 15/150) = 0.1 -> validation 30+15+15, rest to train
        n_train = len(train_out.read_text().strip().splitlines())
        n_val = len(val_out.read_text().strip().splitlines())
        assert n_val == 60 and n_train == 30
