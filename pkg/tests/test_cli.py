import json

import pytest

from relaudit.cli import EXIT_ERROR, EXIT_LEAK, EXIT_OK, main

from oracles import scan_jsonl


def oracle_flags(d):
    return ["--binary-kind", "scripted_oracle", "--binary-ledger", str(d / "binary_ledger.jsonl"),
            "--semantic-kind", "scripted_oracle", "--semantic-ledger", str(d / "semantic_ledger.jsonl")]


def run_flags(d):
    return ["--train", str(d / "synth_train.jsonl"), "--test", str(d / "synth_test.jsonl")] + oracle_flags(d)


@pytest.fixture(scope="module")
def replay_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("replay")
    assert main(["synth", "--kind", "replay", "--out", str(d)]) == EXIT_OK
    return d


def test_ingest_counts_match_line_counts(fixture_dir, capsys):
    assert main(["ingest", "--test", str(fixture_dir / "synth_test.jsonl"), "--json"]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    n_lines, labels = scan_jsonl(fixture_dir / "synth_test.jsonl")
    assert summary["test"]["samples"] == n_lines
    assert set(summary["test"]["labels"]) == labels


def test_missing_file_exits_2_and_names_it(tmp_path, capsys):
    missing = tmp_path / "absent.jsonl"
    assert main(["ingest", "--train", str(missing)]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert "[file]" in err and str(missing) in err


def test_malformed_record_exits_2_with_module(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x"}\n')
    assert main(["ingest", "--test", str(bad)]) == EXIT_ERROR
    assert "error [dataset]: record 0" in capsys.readouterr().err


def test_decompose_counts_match_manifest(fixture_dir, corpus, capsys, tmp_path):
    argv = ["decompose", "--train", str(fixture_dir / "synth_train.jsonl"),
            "--test", str(fixture_dir / "synth_test.jsonl"), "--json", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["counts_by_source"] == corpus.manifest["catalog_counts"]
    assert sorted(d["pair"] for d in result["diff"]["differences"]) == \
        sorted(d["pair"] for d in corpus.manifest["planted_divergences"])
    assert (tmp_path / "catalog.jsonl").exists()


def test_decompose_single_pair(tmp_path, capsys):
    path = tmp_path / "one.jsonl"
    rows = [{"id": f"r{i}", "token": ["A", "B"], "subj_start": 0, "subj_end": 0, "obj_start": 1,
             "obj_end": 1, "subj_type": "PERSON", "obj_type": "TITLE", "relation": rel}
            for i, rel in enumerate(["per:title", "no_relation"])]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    assert main(["decompose", "--train", str(path), "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["counts"] == {"simple": 1, "complicated": 0, "degenerate": 0}


def test_run_both_reproduces_reference_rows(replay_dir, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", *run_flags(replay_dir), "--out", str(out)])
    text = capsys.readouterr().out
    assert code == EXIT_LEAK
    for cell in ("89.86", "65.62", "75.85", "64.70", "65.16", "2182", "1190", "1143"):
        assert cell in text
    scores = json.loads((out / "scores.json").read_text())
    assert list(scores) == ["leaky (original)", "corrected"]
    audit = json.loads((out / "audit.json").read_text())
    assert audit["rescued_count"] == 944 and all(audit["checks"].values())
    assert len((out / "rescued_ids.txt").read_text().split()) == 944

    assert main(["report", "--out", str(out), "--reference"]) == EXIT_OK
    report = capsys.readouterr().out
    assert report.count("75.85") >= 2 and "65.16" in report


def test_run_is_byte_identical_across_repeats(fixture_dir, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["run", "--train", str(fixture_dir / "synth_train.jsonl"),
              "--test", str(fixture_dir / "synth_test.jsonl"),
              "--binary-kind", "frequency_prior", "--semantic-kind", "nearest_neighbor_bow",
              "--seed", "4", "--out", str(out)])
        outputs.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    assert outputs[0] == outputs[1]
    assert any(str(p).startswith("predictions_") for p in outputs[0])


def test_perfect_binary_corrected_equals_leaky(fixture_dir, fixture_test, tmp_path):
    ledger = tmp_path / "perfect.jsonl"
    ledger.write_text("".join(json.dumps({"id": s.id, "label": s.gold_relation}) + "\n" for s in fixture_test))
    out = tmp_path / "run"
    flags = run_flags(fixture_dir)
    flags[flags.index("--binary-ledger") + 1] = str(ledger)
    main(["run", *flags, "--out", str(out)])
    leaky = [json.loads(l)["label"] for l in (out / "predictions_leaky.jsonl").read_text().splitlines()]
    corrected = [json.loads(l)["label"] for l in (out / "predictions_corrected.jsonl").read_text().splitlines()]
    assert leaky == corrected
    assert json.loads((out / "audit.json").read_text())["rescued_count"] == 0


def test_train_predict_score_audit_chain(fixture_dir, tmp_path, capsys):
    model = tmp_path / "model"
    test = str(fixture_dir / "synth_test.jsonl")
    assert main(["train", "--train", str(fixture_dir / "synth_train.jsonl"), *oracle_flags(fixture_dir),
                 "--model-dir", str(model)]) == EXIT_OK
    assert main(["predict", "--test", test, "--model-dir", str(model), "--out", str(tmp_path)]) == EXIT_OK
    leaky, corrected = tmp_path / "predictions_leaky.jsonl", tmp_path / "predictions_corrected.jsonl"
    assert main(["score", "--test", test, "--predictions", str(leaky), str(corrected), "--json"]) == EXIT_OK
    capsys.readouterr()
    code = main(["audit", "--test", test, "--model-dir", str(model),
                 "--leaky", str(leaky), "--corrected", str(corrected), "--out", str(tmp_path)])
    assert code == EXIT_LEAK
    assert "rescued samples: 3" in capsys.readouterr().out
    assert main(["audit", "--test", test, "--model-dir", str(model), "--predictions", str(corrected)]) == EXIT_OK


def test_env_and_config_overrides(fixture_dir, tmp_path, monkeypatch, capsys):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"test": str(fixture_dir / "synth_test.jsonl"), "json": True}))
    assert main(["--config", str(config), "ingest"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["test"]["samples"] == 40

    monkeypatch.setenv("RELAUDIT_TEST", str(fixture_dir / "synth_dev.jsonl"))
    assert main(["--config", str(config), "ingest"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["test"]["samples"] == 17

    assert main(["--config", str(config), "ingest", "--test", str(fixture_dir / "synth_train.jsonl")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["test"]["samples"] == 55


def test_bad_config_exits_2(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "nope.json"), "ingest"]) == EXIT_ERROR
    assert "[config]" in capsys.readouterr().err


def test_missing_required_option(capsys):
    assert main(["run"]) == EXIT_ERROR
    assert "--train" in capsys.readouterr().err


def test_report_reference_without_results(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "89.86" in out and "64.70" in out
