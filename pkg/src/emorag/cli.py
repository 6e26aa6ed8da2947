"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from .config import EngineConfig
from .engine import Engine, build_backends
from .errors import BackendError, EmoRagError, FormatError, ParseError
from .evaluation import CharacterCase, compare_strategies, evaluate_character, load_labels, load_questionnaire
from .retrieval import Variant
from .store import MemoryFragment, MemoryUnit, load_memory, precompute_vectors, save_memory

logger = logging.getLogger("emorag")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3
CONFIG_ENV = "EMOMEM_CONFIG"
STRATEGY_NAMES = [v.value for v in Variant]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _strategy_flags(p):
    g = p.add_argument_group("retrieval")
    g.add_argument("--strategy", choices=STRATEGY_NAMES)
    g.add_argument("-k", type=int, help="number of fragments to retrieve (default 10)")
    g.add_argument("--pool-size", type=int, help="shortlist size for s-s / s-e (default 3k)")
    g.add_argument("--weight", type=float, help="semantic weight for c-a (default 0.5)")
    g.add_argument("--metric", choices=["euclidean", "cosine"])
    g.add_argument("--raw-scores", action="store_true", help="fuse raw instead of min-max normalized distances")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emorag", description="Emotion-aware memory retrieval for role-playing agents.")
    parser.add_argument("--config", help=f"YAML config file (default: ${CONFIG_ENV} or ./emorag.yaml)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="turn question/answer rows into a memory file")
    p.add_argument("input", help="JSONL (or .csv) rows with question and answer columns")
    p.add_argument("output", help="memory JSONL to write")
    p.add_argument("--character-id", required=True)

    p = sub.add_parser("precompute", help="cache semantic and emotion vectors in a memory file")
    p.add_argument("memory")
    p.add_argument("--out", help="write here instead of updating in place")
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("retrieve", help="show the ranked memory for a query")
    p.add_argument("query")
    p.add_argument("--character", required=True)
    p.add_argument("--json", action="store_true")
    _strategy_flags(p)

    p = sub.add_parser("chat", help="interactive role-play session")
    p.add_argument("--character", required=True)
    p.add_argument("--show-memory", action="store_true")
    p.add_argument("--transcript", help="append each turn as JSON to this file")
    _strategy_flags(p)

    p = sub.add_parser("evaluate", help="personality evaluation under one strategy")
    p.add_argument("--questionnaire", required=True)
    p.add_argument("--instrument", choices=["MBTI", "BFI"])
    p.add_argument("--labels")
    p.add_argument("--characters", nargs="*")
    p.add_argument("--out", help="write transcripts and assessments as JSON")
    _strategy_flags(p)

    p = sub.add_parser("compare", help="compare retrieval strategies")
    p.add_argument("--questionnaire", required=True)
    p.add_argument("--instrument", choices=["MBTI", "BFI"])
    p.add_argument("--labels")
    p.add_argument("--characters", nargs="*")
    p.add_argument("--strategies", default=",".join(STRATEGY_NAMES))
    p.add_argument("-k", type=int)
    p.add_argument("--csv", help="write the report CSV here")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    return parser


def load_config(path: str | None) -> EngineConfig:
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        return EngineConfig.from_file(path)
    if Path("emorag.yaml").exists():
        return EngineConfig.from_file("emorag.yaml")
    return EngineConfig()


def _retrieval_overrides(args) -> dict:
    return {
        "strategy": args.strategy,
        "k": args.k,
        "pool_size": args.pool_size,
        "weight": args.weight,
        "metric": args.metric,
        "normalize": False if args.raw_scores else None,
    }


def _engine(args, config) -> Engine:
    return Engine(config.with_retrieval(**_retrieval_overrides(args)) if hasattr(args, "raw_scores") else config)


# --- ingest -----------------------------------------------------------------

def _read_rows(path: Path):
    if path.suffix.lower() == ".csv":
        with open(path, encoding="utf-8", newline="") as fh:
            for rowno, row in enumerate(csv.DictReader(fh), 2):
                yield rowno, row
        return
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", line=lineno) from None
            if not isinstance(row, dict):
                raise FormatError("row is not a JSON object", line=lineno)
            yield lineno, row


def ingest(input_path, output_path, character_id: str) -> MemoryUnit:
    fragments = []
    for n, (rowno, row) in enumerate(_read_rows(Path(input_path)), 1):
        question, answer = row.get("question"), row.get("answer")
        for key, value in (("question", question), ("answer", answer)):
            if not isinstance(value, str) or not value.strip():
                raise FormatError(f"row is missing {key}", line=rowno)
        fid = str(row.get("id") or f"{character_id}-{n:05d}")
        text = f"Q: {question.strip()}\nA: {answer.strip()}"
        fragments.append(MemoryFragment(fid, character_id, text, source=row.get("source") or None))
    try:
        unit = MemoryUnit(tuple(fragments))
    except FormatError as exc:
        raise FormatError(f"{input_path}: {exc}") from None
    save_memory(unit, output_path)
    return unit


def cmd_ingest(args, config) -> int:
    unit = ingest(args.input, args.output, args.character_id)
    if not len(unit):
        logger.warning("no rows in %s; wrote an empty memory file", args.input)
    print(f"wrote {len(unit)} fragments to {args.output}")
    return EXIT_OK


# --- precompute -------------------------------------------------------------

def cmd_precompute(args, config) -> int:
    unit = load_memory(args.memory)
    backends = build_backends(config)
    unit, report = precompute_vectors(
        unit, backends.embedder, backends.scorer, overwrite=args.overwrite, lang=config.lang, workers=args.workers
    )
    out = args.out or args.memory
    save_memory(unit, out)
    print(f"{report.summary()}; saved to {out}")
    for fid, err in report.failed.items():
        print(f"  failed {fid}: {err}", file=sys.stderr)
    return EXIT_OK if report.all_ok else EXIT_BACKEND


# --- retrieve / chat --------------------------------------------------------

def format_ranked(rows) -> str:
    lines = [f"{'rank':>4}  {'id':<24} {'semantic':>10} {'emotional':>10} {'final':>10}"]
    for rank, (scored, _frag) in enumerate(rows, 1):
        lines.append(
            f"{rank:>4}  {scored.fragment_id:<24} {scored.semantic_score:>10.6f} "
            f"{scored.emotional_score:>10.6f} {scored.final_score:>10.6f}"
        )
    return "\n".join(lines)


def cmd_retrieve(args, config) -> int:
    engine = _engine(args, config)
    rows = engine.retrieve(args.character, args.query)
    if args.json:
        print(json.dumps([dict(s.to_dict(), text=f.text) for s, f in rows], ensure_ascii=False, indent=2))
    else:
        print(format_ranked(rows))
    return EXIT_OK


def cmd_chat(args, config, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    engine = _engine(args, config)
    profile = engine.profile(args.character)
    log = open(args.transcript, "a", encoding="utf-8") if args.transcript else None
    print(f"Chatting with {profile.name}. Empty line or /quit to leave.", file=stdout)
    try:
        while True:
            print("you> ", end="", file=stdout, flush=True)
            line = stdin.readline()
            if not line or line.strip() in ("", "/quit", "/exit"):
                break
            text = line.strip()
            try:
                turn = engine.chat(args.character, text)
            except EmoRagError as exc:
                print(f"[error] {type(exc).__name__}: {exc}", file=stdout)
                continue
            if args.show_memory:
                by_id = engine.unit(args.character).by_id()
                for s in turn.retrieved:
                    snippet = by_id[s.fragment_id].text.replace("\n", " ")[:100]
                    print(f"  [memory {s.fragment_id} final={s.final_score:.4f}] {snippet}", file=stdout)
            print(f"{profile.name}> {turn.reply}", file=stdout)
            if log:
                log.write(json.dumps({"query": text, "reply": turn.reply, "fragment_ids": turn.fragment_ids},
                                     ensure_ascii=False) + "\n")
                log.flush()
    finally:
        if log:
            log.close()
    return EXIT_OK


# --- evaluate / compare -----------------------------------------------------

def _cases(engine: Engine, ids, labels_path) -> list[CharacterCase]:
    labels = load_labels(labels_path) if labels_path else {}
    ids = ids or sorted(engine.profiles)
    return [CharacterCase(engine.profile(c), engine.unit(c), labels.get(c)) for c in ids]


def cmd_evaluate(args, config) -> int:
    from .evaluation import compute_metrics

    engine = _engine(args, config)
    questionnaire = load_questionnaire(args.questionnaire, args.instrument)
    strategy, k = engine.strategy()
    results, labels, dump = {}, {}, []
    for case in _cases(engine, args.characters, args.labels):
        transcript, result = evaluate_character(case, questionnaire, strategy, engine.backends, k)
        cid = case.profile.character_id
        print(f"{cid}: {result.type_string or 'incomplete'} {dict(result.scores)}")
        for dim, err in result.errors.items():
            print(f"  {dim}: {err}", file=sys.stderr)
        dump.append({"transcript": transcript.to_dict(), "scores": dict(result.scores), "errors": dict(result.errors)})
        label = case.label or case.profile.labels
        if result.complete and label is not None and label.letters(questionnaire.instrument) is not None:
            results[cid], labels[cid] = result, label
    if results:
        m = compute_metrics(results, labels, questionnaire.instrument)
        print(f"{strategy.label}: Acc(Dim)={m.acc_dim:.4f} Acc(Full)={m.acc_full:.4f} MSE={m.mse:.4f} MAE={m.mae:.4f}"
              f" over {m.n_characters} characters")
    if args.out:
        Path(args.out).write_text(json.dumps(dump, ensure_ascii=False, indent=2), encoding="utf-8")
    return EXIT_OK


def cmd_compare(args, config) -> int:
    engine = Engine(config.with_retrieval(k=args.k))
    names = [s.strip() for s in args.strategies.split(",") if s.strip()]
    bad = [n for n in names if n not in STRATEGY_NAMES]
    if bad:
        raise UsageError(f"unknown strategies: {', '.join(bad)}")
    questionnaire = load_questionnaire(args.questionnaire, args.instrument)
    strategies = [engine.strategy(name)[0] for name in names]
    k = engine.strategy()[1]
    report = compare_strategies(
        _cases(engine, args.characters, args.labels), questionnaire, strategies, engine.backends,
        k=k, workers=args.workers,
    )
    print(report.to_table())
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_serve(args, config) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(Engine(config)), host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "precompute": cmd_precompute,
    "retrieve": cmd_retrieve,
    "chat": cmd_chat,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"emorag: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BackendError, ParseError) as exc:
        print(f"emorag: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (EmoRagError, FileNotFoundError, ValueError, yaml.YAMLError) as exc:
        print(f"emorag: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
