"""Command-line entry points: serve the sandbox, replay transcripts, report."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .analytics import engagement_report, export_report
from .clients import CorpusFixture
from .errors import PaperbotError
from .events import read_event_log
from .generation import Condition
from .knowledge import DEFAULT_BOT_ACTOR
from .simulate import load_transcript, replay

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paperbot",
        description="Social paper-recommendation bot: sandbox service, replay, reports.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the chat sandbox HTTP service")
    serve.add_argument("--config", required=True, help="service settings JSON")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    rep = sub.add_parser("replay", help="replay a transcript deterministically")
    rep.add_argument("--transcript", required=True, help="transcript JSON")
    rep.add_argument("--corpus", help="paper corpus JSONL (default: bound in the transcript)")
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument(
        "--condition",
        choices=[c.value for c in Condition],
        default=Condition.C4_SYNTHESIS.value,
    )
    rep.add_argument("--log", help="write the resulting event log to this JSONL file")
    rep.add_argument("--report", choices=["csv", "json"], help="print the engagement report")

    report = sub.add_parser("report", help="engagement report from an event log")
    report.add_argument("--log", default="events.jsonl", help="event log JSONL")
    report.add_argument("--channel", help="restrict to one channel")
    report.add_argument("--format", choices=["csv", "json"], default="csv")
    report.add_argument("--bot-actor", default=DEFAULT_BOT_ACTOR)

    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app, load_settings

    app = create_app(load_settings(args.config))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    transcript = load_transcript(args.transcript)
    corpus_path = args.corpus or transcript.corpus_path
    if corpus_path is None:
        print("error: no corpus given and the transcript binds none", file=sys.stderr)
        return 2
    corpus = CorpusFixture.load(corpus_path)
    log_path = Path(args.log) if args.log else None
    if log_path is not None and log_path.exists():
        log_path.unlink()
    result = replay(
        transcript,
        corpus,
        base_seed=args.seed,
        condition=Condition(args.condition),
        log_path=log_path,
    )
    posts = result.bot_posts
    print(
        f"replayed {transcript.horizon_days} days in {transcript.channel!r}: "
        f"{len(result.events)} events, {len(posts)} bot recommendations"
    )
    for post in posts:
        print(f"  [{post.ts.isoformat()}] seq {post.seq}: {post.payload.get('paper_ref')}")
    if args.report:
        print(export_report(result.series, args.report), end="")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    events = read_event_log(args.log)
    if args.channel:
        events = [e for e in events if e.channel == args.channel]
    series = engagement_report(events, bot_actor=args.bot_actor)
    print(export_report(series, args.format), end="")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {"serve": _cmd_serve, "replay": _cmd_replay, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except PaperbotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
