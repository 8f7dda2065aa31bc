"""Command-line interface: replay and report round trip."""
from __future__ import annotations

import json

from paperbot.analytics import CSV_HEADER
from paperbot.cli import main

from conftest import CHANNEL, MEMBERS, SEED1


def write_fixtures(tmp_path, corpus, bind_corpus=True):
    corpus_file = tmp_path / "papers.jsonl"
    corpus.save(corpus_file)
    transcript = {
        "channel": CHANNEL,
        "start_ts": "2026-03-02T09:00:00+00:00",
        "horizon_days": 3,
        "config": {"frequency": "daily"},
        "members": [m.to_record() for m in MEMBERS],
        "seed_links": [SEED1],
        "seed_actor": "u_ada",
        "events": [
            {"at_hours": 1, "kind": "reaction", "actor": "u_bo", "emoji": "thumbsup", "target": 1}
        ],
    }
    if bind_corpus:
        transcript["corpus"] = "papers.jsonl"
    transcript_file = tmp_path / "transcript.json"
    transcript_file.write_text(json.dumps(transcript), encoding="utf-8")
    return transcript_file, corpus_file


def test_replay_command_prints_posts_and_writes_the_log(tmp_path, corpus, capsys):
    transcript_file, _ = write_fixtures(tmp_path, corpus)
    log_file = tmp_path / "events.jsonl"
    code = main(
        [
            "replay",
            "--transcript",
            str(transcript_file),
            "--log",
            str(log_file),
            "--report",
            "csv",
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "3 days" in out
    assert "bot recommendations" in out
    assert CSV_HEADER in out
    assert log_file.exists()

    # the report command recounts the same numbers from the written log
    code = main(["report", "--log", str(log_file), "--channel", CHANNEL])
    report_out = capsys.readouterr().out
    assert code == 0
    assert report_out.splitlines()[0] == CSV_HEADER
    assert report_out in out or report_out.splitlines()[-1] in out


def test_replay_command_accepts_an_explicit_corpus(tmp_path, corpus, capsys):
    transcript_file, corpus_file = write_fixtures(tmp_path, corpus, bind_corpus=False)
    code = main(
        ["replay", "--transcript", str(transcript_file), "--corpus", str(corpus_file)]
    )
    assert code == 0
    assert "bot recommendations" in capsys.readouterr().out


def test_replay_command_requires_some_corpus(tmp_path, corpus, capsys):
    transcript_file, _ = write_fixtures(tmp_path, corpus, bind_corpus=False)
    code = main(["replay", "--transcript", str(transcript_file)])
    captured = capsys.readouterr()
    assert code == 2
    assert "no corpus" in captured.err


def test_domain_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text("{not json", encoding="utf-8")
    code = main(["replay", "--transcript", str(bad)])
    captured = capsys.readouterr()
    assert code == 2
    assert captured.err.startswith("error:")
