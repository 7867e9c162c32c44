"""Operator command line: run queries and evaluations, inspect the registry,
probe provider endpoints, and dump transcripts."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from random import Random

from .errors import ConfigError, CookError, DatasetError, ProviderError
from .evaluation import DatasetFormat, EngineKind, load_dataset, run_eval
from .integration import (
    QueryTask,
    SelectionStrategy,
    run_bottom_up,
    run_top_down,
    run_vanilla,
    transcript_to_jsonl,
)
from .providers import build_provider_set
from .registry import Registry, dump_registry, load_registry

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_DATASET = 4

ENGINE_FLAGS = {
    "vanilla": EngineKind.VANILLA,
    "bottom-up": EngineKind.BOTTOM_UP,
    "top-down-auto": EngineKind.TOP_DOWN_AUTO,
    "top-down-exp": EngineKind.TOP_DOWN_EXP,
}

FORMAT_FLAGS = {
    "multiple-choice": DatasetFormat.MULTIPLE_CHOICE,
    "open-book": DatasetFormat.OPEN_BOOK,
    "classification": DatasetFormat.CLASSIFICATION,
}


def _add_registry_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--registry", metavar="PATH", default=os.environ.get("COOK_REGISTRY"),
        help="registry file (defaults to $COOK_REGISTRY)",
    )


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, metavar="INT", help="override pipeline rng_seed")
    parser.add_argument("--max-iterations", type=int, metavar="INT",
                        help="override top-down iteration budget")
    parser.add_argument("--n1", type=int, metavar="INT", help="override documents per card")
    parser.add_argument("--n2", type=int, metavar="INT", help="override relevance retention")
    parser.add_argument("--n3", type=int, metavar="INT", help="override factuality retention")
    parser.add_argument("--fact-top-k", type=int, metavar="INT",
                        help="override factuality sampling pool size")


def _overrides_from(args: argparse.Namespace) -> dict:
    return {
        "rng_seed": getattr(args, "seed", None),
        "max_iterations": getattr(args, "max_iterations", None),
        "n1": getattr(args, "n1", None),
        "n2": getattr(args, "n2", None),
        "n3": getattr(args, "n3", None),
        "fact_top_k": getattr(args, "fact_top_k", None),
    }


def _load(args: argparse.Namespace) -> Registry:
    if not args.registry:
        raise ConfigError("no registry given: pass --registry PATH or set COOK_REGISTRY")
    return load_registry(args.registry, overrides=_overrides_from(args))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cook",
        description="Empower a black-box LLM with modular knowledge cards.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_query = sub.add_parser("query", help="answer a single question")
    p_query.add_argument("question", help="the question to answer")
    _add_registry_flag(p_query)
    p_query.add_argument("--engine", choices=sorted(ENGINE_FLAGS), default="bottom-up")
    p_query.add_argument("--transcript", metavar="PATH",
                         help="write the LLM turn log as JSON lines")
    p_query.add_argument("--jobs", type=int, metavar="INT", default=4,
                         help="parallel generation fan-out (default 4)")
    _add_override_flags(p_query)

    p_eval = sub.add_parser("eval", help="evaluate a dataset with one or more engines")
    p_eval.add_argument("--dataset", metavar="PATH", required=True)
    p_eval.add_argument("--engine", default="bottom-up",
                        help="engine name, or comma-separated names for comparison "
                             f"(choices: {'|'.join(sorted(ENGINE_FLAGS))})")
    p_eval.add_argument("--format", choices=sorted(FORMAT_FLAGS), default=None,
                        help="dataset format (default: inferred from the first record)")
    p_eval.add_argument("--out", metavar="PATH", help="write the report JSON here")
    p_eval.add_argument("--icl", metavar="PATH",
                        help="JSON file mapping icl_group names to demonstration blocks")
    p_eval.add_argument("--jobs", type=int, metavar="INT", default=4,
                        help="parallel record evaluation (default 4)")
    p_eval.add_argument("--transcript", metavar="PATH",
                        help="write all LLM turn logs as JSON lines")
    _add_registry_flag(p_eval)
    _add_override_flags(p_eval)

    p_registry = sub.add_parser("registry", help="validate and inspect a registry file")
    _add_registry_flag(p_registry)
    p_registry.add_argument("--dump", action="store_true",
                            help="print the normalized registry document")

    p_probe = sub.add_parser("probe", help="check every provider endpoint")
    _add_registry_flag(p_probe)

    p_transcript = sub.add_parser("transcript", help="pretty-print a transcript file")
    p_transcript.add_argument("path", help="JSON-lines transcript written by query/eval")

    return parser


def cmd_query(args: argparse.Namespace) -> int:
    registry = _load(args)
    providers = build_provider_set(registry)
    config = registry.pipeline
    task = QueryTask(question=args.question)
    rng = Random(config.rng_seed)
    engine = ENGINE_FLAGS[args.engine]
    if engine is EngineKind.VANILLA:
        result = run_vanilla(task, providers)
    elif engine is EngineKind.BOTTOM_UP:
        result = run_bottom_up(task, registry, providers, config, rng, jobs=args.jobs)
    elif engine is EngineKind.TOP_DOWN_AUTO:
        result = run_top_down(task, registry, providers, config, SelectionStrategy.AUTO, rng)
    else:
        result = run_top_down(task, registry, providers, config, SelectionStrategy.EXP, rng)
    print(result.answer)
    if args.transcript:
        Path(args.transcript).write_text(transcript_to_jsonl(result.transcript), encoding="utf-8")
    return EXIT_OK


def _infer_format(path: str) -> DatasetFormat:
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                if isinstance(record, dict) and record.get("choices") is not None:
                    return DatasetFormat.MULTIPLE_CHOICE
                return DatasetFormat.OPEN_BOOK
    return DatasetFormat.OPEN_BOOK


def cmd_eval(args: argparse.Namespace) -> int:
    engines = []
    for name in args.engine.split(","):
        name = name.strip()
        if name not in ENGINE_FLAGS:
            raise ConfigError(f"unknown engine '{name}' (choices: {sorted(ENGINE_FLAGS)})")
        engines.append(ENGINE_FLAGS[name])

    registry = _load(args)
    providers = build_provider_set(registry)

    if args.format:
        dataset_format = FORMAT_FLAGS[args.format]
    else:
        try:
            dataset_format = _infer_format(args.dataset)
        except OSError as exc:
            raise DatasetError(f"dataset file not found: {args.dataset}") from exc
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{args.dataset}: invalid JSON ({exc})") from exc
    dataset = load_dataset(args.dataset, dataset_format)

    icl_blocks = None
    if args.icl:
        try:
            icl_blocks = json.loads(Path(args.icl).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DatasetError(f"icl file {args.icl} failed to load: {exc}") from exc

    transcript_sink = open(args.transcript, "w", encoding="utf-8") if args.transcript else None
    reports = {}
    try:
        for engine in engines:
            def dump_turns(record, result, _sink=transcript_sink):
                if _sink is not None:
                    _sink.write(transcript_to_jsonl(result.transcript))

            report = run_eval(
                dataset, engine, registry, providers,
                icl_blocks=icl_blocks, jobs=args.jobs, on_result=dump_turns,
            )
            reports[engine.value] = report
            aggregates = report.aggregates
            print(
                f"engine={engine.value} records={len(report.outcomes)} "
                f"accuracy={aggregates['accuracy']:.4f} "
                f"balanced_accuracy={aggregates['balanced_accuracy']:.4f} "
                f"macro_f1={aggregates['macro_f1']:.4f} "
                f"exact_match={aggregates['exact_match']:.4f} "
                f"token_f1={aggregates['token_f1']:.4f}"
            )
    finally:
        if transcript_sink is not None:
            transcript_sink.close()

    if args.out:
        if len(reports) == 1:
            payload = next(iter(reports.values())).to_json()
        else:
            document = {
                "report_version": 1,
                "engines": {name: report.to_dict() for name, report in reports.items()},
            }
            payload = json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
        Path(args.out).write_text(payload, encoding="utf-8")
    return EXIT_OK


def cmd_registry(args: argparse.Namespace) -> int:
    registry = _load(args)
    if args.dump:
        print(dump_registry(registry), end="")
        return EXIT_OK
    print(f"cards: {len(registry.cards)}")
    for card in registry.cards:
        print(f"  {card.id}: {card.description!r} -> {card.provider_ref} "
              f"(n={card.default_gen_params.num_documents})")
    pipeline = registry.pipeline
    print(f"pipeline: n1={pipeline.n1} n2={pipeline.n2} n3={pipeline.n3} "
          f"fact_top_k={pipeline.fact_top_k} retrieval_k={pipeline.retrieval_k} "
          f"max_iterations={pipeline.max_iterations} temperature={pipeline.temperature} "
          f"rng_seed={pipeline.rng_seed}")
    print(f"filters: relevance={pipeline.filters.relevance} "
          f"pruning={pipeline.filters.pruning} factuality={pipeline.filters.factuality}")
    print(f"providers: {len(registry.providers)}")
    for endpoint_id, spec in registry.providers.items():
        target = spec.url if spec.kind == "http" else f"stub:{spec.stub}"
        print(f"  {endpoint_id}: {target}")
    return EXIT_OK


def cmd_probe(args: argparse.Namespace) -> int:
    registry = _load(args)
    failures = 0
    for endpoint_id, spec in registry.providers.items():
        if spec.kind == "stub":
            print(f"{endpoint_id}: ok (in-process)")
            continue
        import httpx

        started = time.monotonic()
        try:
            # Any HTTP response proves the endpoint is alive, even an error.
            httpx.post(f"{spec.url.rstrip('/')}/v1/embed", json={"texts": ["ping"]},
                       timeout=min(spec.timeout, 10.0))
            elapsed_ms = (time.monotonic() - started) * 1000
            print(f"{endpoint_id}: ok ({elapsed_ms:.1f} ms)")
        except httpx.HTTPError as exc:
            print(f"{endpoint_id}: unreachable ({type(exc).__name__})")
            failures += 1
    return EXIT_PROVIDER if failures else EXIT_OK


def cmd_transcript(args: argparse.Namespace) -> int:
    path = Path(args.path)
    if not path.exists():
        raise DatasetError(f"transcript file not found: {path}")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            turn = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        print(f"--- turn {lineno} [{turn.get('provider_id', '?')}] ---")
        print(turn.get("prompt", ""))
        print(f">>> {turn.get('response', '')}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "query":
            return cmd_query(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "registry":
            return cmd_registry(args)
        if args.command == "probe":
            return cmd_probe(args)
        if args.command == "transcript":
            return cmd_transcript(args)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except CookError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
