"""Command-line entry points: ingest, serve, ask, export-collection, replay."""

from __future__ import annotations

import argparse
import json
import sys
import textwrap
from pathlib import Path

from .config import ServiceConfig, load_config
from .errors import EngineError
from .filters import parse_filter
from .pipeline import ExtractionColumn, make_request, replay_response
from .ragchain import RemoteModelProvider, StubModelProvider
from .service import build_state, create_app
from .vectorstore import Page


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data-dir", help="engine data directory")
    parser.add_argument("--config", help="path to a JSON config file")


def _config_from_args(args: argparse.Namespace, extra: dict | None = None) -> ServiceConfig:
    overrides: dict = {}
    if args.data_dir:
        overrides["data_dir"] = args.data_dir
    overrides.update(extra or {})
    return load_config(overrides=overrides, config_file=args.config)


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _config_from_args(
        args,
        {"min_title_chars": args.min_title, "min_abstract_chars": args.min_abstract},
    )
    state = build_state(config)
    with open(args.input, "r", encoding="utf-8") as fh:
        lines = (line for line in fh if line.strip())
        report = state.engine.ingest(lines, state.policy)
    state.engine.index.save(Path(config.data_dir) / "index.bin")
    report_json = json.dumps(report.to_dict(), indent=2)
    if args.report:
        Path(args.report).write_text(report_json + "\n", encoding="utf-8")
    print(report_json)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    config = _config_from_args(args, {"bind_addr": args.bind} if args.bind else None)
    app = create_app(build_state(config))
    host, _, port = config.bind_addr.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    return 0


def _format_cell(cell: dict) -> str:
    if "error" in cell:
        return f"<error: {cell['error']['code']}>"
    marker = " (cached)" if cell["provenance"] == "cached" else ""
    return cell["parsed_text"].replace("\n", " ") + marker


def cmd_ask(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    state = build_state(config)
    columns = []
    for spec in args.column or []:
        name, _, instruction = spec.partition("=")
        if not instruction:
            print(f"bad --column '{spec}', expected NAME=INSTRUCTION", file=sys.stderr)
            return 2
        columns.append(ExtractionColumn(name.lower().replace(" ", "_"), name, instruction))
    request = make_request(
        args.question,
        filter_expr=parse_filter(args.filter) if args.filter else None,
        page=Page(offset=0, limit=args.limit),
        columns=columns,
        synthesis_n=config.synthesis_n,
    )
    response = state.engine.ask(request)
    payload = response.to_dict()

    for rank, hit in enumerate(payload["hits"], start=1):
        print(f"[{rank}] {hit['title']}  (score {hit['score']:.4f}, {hit['source']})")
        for column in payload["columns"]:
            cell = payload["cells"][hit["doc_id"]][column["column_id"]]
            print(f"    {column['name']}: {_format_cell(cell)}")
    if payload["synthesis"]:
        print("\nSynthesized answer:")
        print(textwrap.indent(payload["synthesis"]["text"], "  "))
    print(f"\n{payload['warning']}")
    if args.save:
        Path(args.save).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8"
        )
        print(f"saved response record to {args.save}")
    return 0


def cmd_export_collection(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    state = build_state(config)
    data = state.collections.export(args.id, args.format)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
        sys.stdout.write("\n")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    payload = json.loads(Path(args.record).read_text(encoding="utf-8"))
    model = RemoteModelProvider(config.llm_endpoint) if config.llm_endpoint else StubModelProvider()
    results = replay_response(payload, model)
    failures = 0
    for result in results:
        status = "OK" if result["ok"] else "MISMATCH"
        print(f"{status}  {result['artifact']}")
        if not result["ok"]:
            failures += 1
            print(f"  expected: {result['expected']!r}")
            print(f"  actual:   {result['actual']!r}")
    print(f"replayed {len(results)} artifacts, {failures} mismatches")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="askengine",
        description="Self-hosted scholarly literature search and exploration engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="curate and index newline-delimited JSON records")
    _add_common(p_ingest)
    p_ingest.add_argument("--input", required=True, help="NDJSON records file")
    p_ingest.add_argument("--min-title", type=int, default=10)
    p_ingest.add_argument("--min-abstract", type=int, default=200)
    p_ingest.add_argument("--report", help="write the ingest report JSON here")
    p_ingest.set_defaults(func=cmd_ingest)

    p_serve = sub.add_parser("serve", help="run the HTTP API")
    _add_common(p_serve)
    p_serve.add_argument("--bind", help="host:port to bind")
    p_serve.set_defaults(func=cmd_serve)

    p_ask = sub.add_parser("ask", help="one-shot query printed as a table")
    _add_common(p_ask)
    p_ask.add_argument("question")
    p_ask.add_argument("--filter", help="filter grammar string")
    p_ask.add_argument("--limit", type=int, default=5)
    p_ask.add_argument("--column", action="append", help="extra column as NAME=INSTRUCTION")
    p_ask.add_argument("--save", help="save the full response record to this file")
    p_ask.set_defaults(func=cmd_ask)

    p_export = sub.add_parser("export-collection", help="export a bookmark collection")
    _add_common(p_export)
    p_export.add_argument("--id", required=True)
    p_export.add_argument("--format", default="citation-json", choices=["citation-json", "bibtex"])
    p_export.add_argument("--output")
    p_export.set_defaults(func=cmd_export_collection)

    p_replay = sub.add_parser("replay", help="re-run generations from a saved response record")
    _add_common(p_replay)
    p_replay.add_argument("--record", required=True, help="response record file from ask --save")
    p_replay.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error [{exc.stage or 'engine'}/{exc.code}]: {exc.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
