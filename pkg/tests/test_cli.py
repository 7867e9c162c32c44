from __future__ import annotations

import json

import pytest
import yaml

from cook.cli import build_parser, main


def stub_registry_file(tmp_path, *, script: dict[str, str], pipeline: dict | None = None,
                       corpus: list | None = None):
    """One-card all-stub registry plus its scripted-LLM table on disk."""
    (tmp_path / "script.json").write_text(json.dumps(script), encoding="utf-8")
    providers = {
        "card-lm": {"stub": "echo"},
        "embedder": {"stub": "bag-of-chars"},
        "summarizer": {"stub": "first-sentence"},
        "fact_scorer": {"stub": "token-overlap"},
        "retriever": {"stub": "memory-retriever"},
        "llm": {"stub": "scripted", "script": "script.json"},
    }
    if corpus is not None:
        (tmp_path / "corpus.jsonl").write_text(
            "\n".join(json.dumps(row) for row in corpus) + "\n", encoding="utf-8")
        providers["retriever"] = {"stub": "memory-retriever", "corpus": "corpus.jsonl"}
    doc = {
        "cards": [{"id": "card", "description": "test domain", "provider": "card-lm"}],
        "pipeline": pipeline or {"n1": 1, "n2": 1, "n3": 1, "fact_top_k": 2},
        "providers": providers,
    }
    path = tmp_path / "registry.yaml"
    path.write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")
    return path


def test_query_vanilla_prints_scripted_answer(tmp_path, capsys):
    registry = stub_registry_file(tmp_path, script={"Question: Q?\nAnswer:": "42"})
    code = main(["query", "Q?", "--engine", "vanilla", "--registry", str(registry)])
    assert code == 0
    assert capsys.readouterr().out == "42\n"


def test_query_bottom_up_with_stub_pipeline(tmp_path, capsys):
    prompt = "Knowledge: Q?:gen0\nQuestion: Q?\nAnswer:"
    registry = stub_registry_file(tmp_path, script={prompt: "the answer"})
    code = main(["query", "Q?", "--engine", "bottom-up", "--registry", str(registry)])
    assert code == 0
    assert capsys.readouterr().out == "the answer\n"


def test_query_writes_transcript(tmp_path, capsys):
    registry = stub_registry_file(tmp_path, script={"Question: Q?\nAnswer:": "42"})
    out = tmp_path / "turns.jsonl"
    code = main(["query", "Q?", "--engine", "vanilla", "--registry", str(registry),
                 "--transcript", str(out)])
    assert code == 0
    turns = [json.loads(line) for line in out.read_text().splitlines()]
    assert turns == [{"prompt": "Question: Q?\nAnswer:", "response": "42", "provider_id": "llm"}]


def test_missing_registry_exits_2_naming_path(tmp_path, capsys):
    code = main(["query", "Q?", "--registry", str(tmp_path / "missing.yaml")])
    assert code == 2
    assert "missing.yaml" in capsys.readouterr().err


def test_registry_env_var_default(tmp_path, capsys, monkeypatch):
    registry = stub_registry_file(tmp_path, script={"Question: Q?\nAnswer:": "42"})
    monkeypatch.setenv("COOK_REGISTRY", str(registry))
    code = main(["query", "Q?", "--engine", "vanilla"])
    assert code == 0
    assert capsys.readouterr().out == "42\n"


def test_nonexistent_dataset_exits_4(tmp_path, capsys):
    registry = stub_registry_file(tmp_path, script={})
    code = main(["eval", "--dataset", str(tmp_path / "absent.jsonl"),
                 "--registry", str(registry), "--engine", "vanilla"])
    assert code == 4


def test_eval_writes_report_and_summary(tmp_path, capsys):
    question = "What is item 00?"
    script = {f"Question: {question}\nAnswer:": "gold answer"}
    registry = stub_registry_file(tmp_path, script=script)
    dataset = tmp_path / "data.jsonl"
    dataset.write_text(json.dumps({"id": "1", "question": question, "gold": "gold answer"}) + "\n",
                       encoding="utf-8")
    out = tmp_path / "report.json"
    code = main(["eval", "--dataset", str(dataset), "--registry", str(registry),
                 "--engine", "vanilla", "--out", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "engine=vanilla" in stdout and "accuracy=1.0000" in stdout
    report = json.loads(out.read_text())
    assert report["report_version"] == 1
    assert report["aggregates"]["accuracy"] == 1.0


def test_eval_comparison_mode_two_sections(tmp_path, capsys):
    question = "What is item 00?"
    vanilla_prompt = f"Question: {question}\nAnswer:"
    bottom_prompt = f"Knowledge: {question}:gen0\nQuestion: {question}\nAnswer:"
    script = {vanilla_prompt: "nope", bottom_prompt: "gold answer"}
    registry = stub_registry_file(tmp_path, script=script)
    dataset = tmp_path / "data.jsonl"
    dataset.write_text(json.dumps({"id": "1", "question": question, "gold": "gold answer"}) + "\n",
                       encoding="utf-8")
    out = tmp_path / "report.json"
    code = main(["eval", "--dataset", str(dataset), "--registry", str(registry),
                 "--engine", "vanilla,bottom-up", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert set(report["engines"]) == {"vanilla", "bottom_up"}
    ids = {engine: [r["id"] for r in section["records"]]
           for engine, section in report["engines"].items()}
    assert ids["vanilla"] == ids["bottom_up"]


def test_eval_seeded_runs_are_byte_identical(tmp_path, capsys):
    question = "What is item 00?"
    script = {f"Question: {question}\nAnswer:": "gold answer"}
    registry = stub_registry_file(tmp_path, script=script)
    dataset = tmp_path / "data.jsonl"
    dataset.write_text(json.dumps({"id": "1", "question": question, "gold": "gold answer"}) + "\n",
                       encoding="utf-8")

    def run(name):
        out = tmp_path / name
        code = main(["eval", "--dataset", str(dataset), "--registry", str(registry),
                     "--engine", "vanilla", "--seed", "7", "--out", str(out)])
        assert code == 0
        return out.read_bytes(), capsys.readouterr().out

    first_bytes, first_stdout = run("a.json")
    second_bytes, second_stdout = run("b.json")
    assert first_bytes == second_bytes
    assert first_stdout == second_stdout


def test_probe_all_stub_registry(tmp_path, capsys):
    registry = stub_registry_file(tmp_path, script={})
    code = main(["probe", "--registry", str(registry)])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("ok (in-process)") == len(yaml.safe_load(
        (tmp_path / "registry.yaml").read_text())["providers"])


def test_probe_dead_url_exits_3(tmp_path, capsys):
    registry_path = stub_registry_file(tmp_path, script={})
    doc = yaml.safe_load(registry_path.read_text())
    doc["providers"]["llm"] = {"url": "http://127.0.0.1:9", "timeout": 1}
    registry_path.write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")
    code = main(["probe", "--registry", str(registry_path)])
    assert code == 3
    assert "unreachable" in capsys.readouterr().out


def test_registry_subcommand_summary_and_dump(tmp_path, capsys):
    registry = stub_registry_file(tmp_path, script={})
    assert main(["registry", "--registry", str(registry)]) == 0
    out = capsys.readouterr().out
    assert "cards: 1" in out and "test domain" in out
    assert main(["registry", "--registry", str(registry), "--dump"]) == 0
    dumped = yaml.safe_load(capsys.readouterr().out)
    assert dumped["cards"][0]["id"] == "card"


def test_transcript_subcommand_pretty_prints(tmp_path, capsys):
    registry = stub_registry_file(tmp_path, script={"Question: Q?\nAnswer:": "42"})
    path = tmp_path / "turns.jsonl"
    main(["query", "Q?", "--engine", "vanilla", "--registry", str(registry),
          "--transcript", str(path)])
    capsys.readouterr()
    assert main(["transcript", str(path)]) == 0
    out = capsys.readouterr().out
    assert "turn 1" in out and ">>> 42" in out


def test_pipeline_override_flags(tmp_path, capsys):
    prompt = "Knowledge: Q?:gen0 Q?:gen0\nQuestion: Q?\nAnswer:"
    registry = stub_registry_file(
        tmp_path, script={prompt: "two docs"},
        pipeline={"n1": 1, "n2": 1, "n3": 1, "fact_top_k": 2},
    )
    code = main(["query", "Q?", "--engine", "bottom-up", "--registry", str(registry),
                 "--n1", "2", "--n2", "2", "--n3", "2", "--fact-top-k", "3"])
    assert code == 0
    assert capsys.readouterr().out == "two docs\n"


def test_invalid_override_combination_exits_2(tmp_path, capsys):
    registry = stub_registry_file(tmp_path, script={})
    code = main(["query", "Q?", "--registry", str(registry), "--fact-top-k", "1"])
    assert code == 2


def test_help_enumerates_documented_flags():
    documented = [
        "--registry", "--engine", "--dataset", "--out", "--seed", "--jobs",
        "--transcript", "--max-iterations", "--n1", "--n2", "--n3", "--fact-top-k",
    ]
    documented_engines = ["vanilla", "bottom-up", "top-down-auto", "top-down-exp"]
    parser = build_parser()
    subparsers_action = next(
        action for action in parser._actions
        if isinstance(action, type(parser._subparsers._group_actions[0])))
    combined = "\n".join(sub.format_help() for sub in subparsers_action.choices.values())
    for flag in documented:
        assert flag in combined, f"flag {flag} missing from --help output"
    for engine in documented_engines:
        assert engine in combined
