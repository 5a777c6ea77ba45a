import json

import pytest

from leanctx.cli import main

CONFIG = "fixture_config.json"


@pytest.fixture
def paths(tmp_path, data_dir):
    return {
        "corpus": str(data_dir / "fixture_corpus.jsonl"),
        "train": str(data_dir / "fixture_qa_train.jsonl"),
        "test": str(data_dir / "fixture_qa_test.jsonl"),
        "config": str(data_dir / CONFIG),
        "store": str(tmp_path / "store.json"),
        "agent": str(tmp_path / "agent.json"),
        "tmp": tmp_path,
    }


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _ingest(capsys, p):
    return _run(capsys, ["ingest", p["corpus"], "--store", p["store"], "--config", p["config"]])


def test_ingest_counts_and_is_reproducible(capsys, paths, tmp_path):
    code, out, _ = _ingest(capsys, paths)
    assert code == 0
    info = json.loads(out)
    assert info["documents"] == 10 and info["chunks"] >= 10
    first = open(paths["store"], "rb").read()
    paths["store"] = str(tmp_path / "store2.json")
    _ingest(capsys, paths)
    assert open(paths["store"], "rb").read() == first


def test_ingest_missing_file(capsys, paths):
    paths["corpus"] = str(paths["tmp"] / "nope.jsonl")
    code, _, err = _ingest(capsys, paths)
    assert code != 0 and "nope.jsonl" in err


def test_ingest_bad_line_reports_location(capsys, paths):
    bad = paths["tmp"] / "bad.jsonl"
    bad.write_text('{"doc_id": "a", "text": "ok"}\n{not json}\n')
    paths["corpus"] = str(bad)
    code, _, err = _ingest(capsys, paths)
    assert code == 1 and "bad.jsonl:2" in err


def test_unknown_config_key_is_usage_error(capsys, paths):
    cfg = paths["tmp"] / "cfg.json"
    cfg.write_text('{"retrieval": {"n_chunk": 3}}')
    paths["config"] = str(cfg)
    code, _, err = _ingest(capsys, paths)
    assert code == 2 and "n_chunk" in err


def _train(capsys, p, qa=None, agent=None):
    return _run(capsys, ["train", qa or p["train"], "--store", p["store"], "--config", p["config"],
                         "--agent", agent or p["agent"]])


def test_train_call_count_and_determinism(capsys, paths):
    _ingest(capsys, paths)
    lines = open(paths["train"]).read().splitlines()[:3]
    qa = paths["tmp"] / "three.jsonl"
    qa.write_text("\n".join(lines) + "\n")
    code, out, _ = _train(capsys, paths, str(qa))
    assert code == 0
    rep = json.loads(out)
    assert rep["llm_calls"] == 3 * 9 + 3
    first = open(paths["agent"], "rb").read()
    other = str(paths["tmp"] / "agent2.json")
    _train(capsys, paths, str(qa), other)
    assert open(other, "rb").read() == first


def test_train_empty_file(capsys, paths):
    _ingest(capsys, paths)
    empty = paths["tmp"] / "empty.jsonl"
    empty.write_text("")
    code, _, err = _train(capsys, paths, str(empty))
    assert code != 0 and err


def test_ask_reports_fields(capsys, paths):
    _ingest(capsys, paths)
    _train(capsys, paths)
    question = json.loads(open(paths["test"]).readline())["question"]
    code, out, _ = _run(capsys, ["ask", question, "--store", paths["store"], "--config",
                                 paths["config"], "--agent", paths["agent"]])
    assert code == 0
    res = json.loads(out)
    assert {"answer", "theta", "state", "tau", "tokens"} <= set(res)
    assert 0 < res["tau"] <= 1 and res["theta"] in [i / 20 for i in range(9)]


def _eval(capsys, p, methods, report="report.json", extra=()):
    return _run(capsys, ["eval", p["test"], "--store", p["store"], "--config", p["config"],
                         "--methods", methods, "--report", str(p["tmp"] / report), *extra])


def test_eval_original_only(capsys, paths):
    _ingest(capsys, paths)
    code, out, _ = _eval(capsys, paths, "original")
    assert code == 0 and "original" in out
    report = json.loads((paths["tmp"] / "report.json").read_text())
    assert all(r["savings_vs_original"] == 0.0 for r in report["records"])
    assert report["methods"][0]["cost_savings"] == 0.0
    assert (paths["tmp"] / "report.txt").read_text() == out


def test_eval_fixed_k_saves_tokens(capsys, paths):
    _ingest(capsys, paths)
    assert _eval(capsys, paths, "original,fixed_k:0.1")[0] == 0
    rows = {r["method"]: r for r in json.loads((paths["tmp"] / "report.json").read_text())["methods"]}
    assert rows["fixed_k:0.1"]["total_tokens"] < rows["original"]["total_tokens"]
    assert rows["fixed_k:0.1"]["cost_savings"] > 0


def test_eval_bad_method(capsys, paths):
    _ingest(capsys, paths)
    code, _, err = _eval(capsys, paths, "original,bogus")
    assert code == 2 and "valid methods" in err


def test_eval_adaptive_needs_agent(capsys, paths):
    _ingest(capsys, paths)
    code, _, err = _eval(capsys, paths, "adaptive_k")
    assert code == 2 and "--agent" in err


def test_missing_store(capsys, paths):
    code, _, err = _eval(capsys, paths, "original")
    assert code == 1 and "store.json" in err


def test_argparse_usage():
    with pytest.raises(SystemExit) as ei:
        main(["ingest"])
    assert ei.value.code == 2
