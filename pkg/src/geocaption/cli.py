"""Command-line entry point: ``geocaption <verb> [options]``.

Exit codes: 0 success, 1 other failure, 2 config error,
3 failure cap exceeded, 4 transport failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from decimal import Decimal
from pathlib import Path
from typing import Optional, Sequence

from .dataset import ConfigError, IoFailure, SchemaViolation, load_config, parse_mix, read_records, write_records
from .llm import TransportError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAP, EXIT_TRANSPORT = 0, 1, 2, 3, 4

log = logging.getLogger("geocaption")


def _config(args, **extra):
    overrides = {"seed": args.seed, "count": getattr(args, "count", None), "out_dir": args.out}
    if getattr(args, "difficulty_mix", None):
        overrides["difficulty_mix"] = parse_mix(args.difficulty_mix)
    overrides.update(extra)
    return load_config(args.config, overrides)


def _dataset_path(args, cfg) -> Path:
    return Path(args.dataset) if args.dataset else Path(cfg.out_dir) / "dataset.jsonl"


def cmd_generate(args) -> int:
    from .pipeline import cmd_generate as run

    cfg = _config(args, dump_scene=True if args.dump_scene else None, workers=args.workers,
                  style_variation=True if args.style_variation else None,
                  shuffle_captions=True if args.shuffle_captions else None)
    res = run(cfg)
    print(f"wrote {len(res.records)} records to {res.out_dir} ({len(res.failures)} skipped)")
    return EXIT_OK


def cmd_render(args) -> int:
    from .construction import Scene, extract_facts
    from .render import StyleConfig, export_png, render_svg

    scene = Scene.from_dict(json.loads(Path(args.scene).read_text(encoding="utf-8")))
    doc = render_svg(scene, extract_facts(scene), StyleConfig(canvas_size=args.size))
    out = Path(args.output or Path(args.scene).with_suffix(".svg"))
    out.write_text(doc.text, encoding="utf-8")
    for w in doc.warnings:
        log.warning(w)
    if args.png:
        export_png(doc, out.with_suffix(".png"), args.size)
    print(out)
    return EXIT_OK


def cmd_qa(args) -> int:
    from .pipeline import cmd_qa as run, make_client

    cfg = _config(args)
    path = _dataset_path(args, cfg)
    res = run(read_records(path), make_client(cfg, mock=args.mock), cfg.llm.retry_budget,
              transcripts_path=path.with_name("qa_transcripts.jsonl"))
    write_records(Path(args.output) if args.output else path, res.records)
    if res.dropped:
        path.with_name("qa_dropped.jsonl").write_text("".join(json.dumps(d) + "\n" for d in res.dropped))
    print(f"{len(res.records)} records with questions, {len(res.dropped)} dropped")
    return EXIT_OK


def cmd_score(args) -> int:
    from .pipeline import make_client
    from .reward import composite_reward

    cfg = _config(args)
    b = composite_reward(args.candidate, args.gold, args.question, Decimal(args.answer),
                         make_client(cfg, mock=args.mock, solver=True), cfg.weights)
    print(json.dumps(b.to_dict(), indent=1))
    return EXIT_OK


def cmd_raft(args) -> int:
    from dataclasses import replace

    from .pipeline import cmd_raft as run, make_client

    cfg = _config(args)
    r = cfg.raft
    r = replace(r, **{k: v for k, v in {
        "epochs": args.epochs, "selection_policy": args.policy, "generator": args.generator,
        "candidates_file": args.candidates_file, "hook": args.hook}.items() if v is not None})
    cfg = replace(cfg, raft=r)
    path = _dataset_path(args, cfg)
    records, report, sft = run(read_records(path), cfg, make_client(cfg, mock=args.mock, solver=True),
                               root=path.parent)
    for e in report.epochs:
        print(f"epoch {e.epoch}: mean {e.mean:.4f} max {e.max:.4f} min {e.min:.4f} "
              f"replaced {e.replacements} failed {e.failures}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .pipeline import cmd_validate as run

    cfg = _config(args)
    problems = run(_dataset_path(args, cfg), rebuild=not args.no_rebuild)
    for p in problems:
        print(p)
    print(f"{len(problems)} alignment problems")
    return EXIT_OK if not problems else EXIT_FAIL


def cmd_stats(args) -> int:
    from .pipeline import cmd_stats as run

    cfg = _config(args)
    print(json.dumps(run(read_records(_dataset_path(args, cfg))), indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="geocaption", description="Geometry diagram/caption dataset tools.")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", parents=[common], help="build diagrams, facts and captions")
    g.add_argument("--count", type=int)
    g.add_argument("--difficulty-mix", help='e.g. "easy:0.5,medium:0.3,hard:0.2"')
    g.add_argument("--dump-scene", action="store_true", help="also write scenes/<id>.json")
    g.add_argument("--workers", type=int)
    g.add_argument("--style-variation", action="store_true")
    g.add_argument("--shuffle-captions", action="store_true")
    g.set_defaults(fn=cmd_generate)

    r = sub.add_parser("render", parents=[common], help="re-render a dumped scene")
    r.add_argument("scene")
    r.add_argument("-o", "--output")
    r.add_argument("--size", type=int, default=512)
    r.add_argument("--png", action="store_true")
    r.set_defaults(fn=cmd_render)

    q = sub.add_parser("qa", parents=[common], help="attach questions and gold answers")
    q.add_argument("--dataset")
    q.add_argument("-o", "--output")
    q.add_argument("--mock", action="store_true", help="use the offline rule-based responder")
    q.set_defaults(fn=cmd_qa)

    s = sub.add_parser("score", parents=[common], help="reward one candidate caption")
    s.add_argument("--candidate", required=True)
    s.add_argument("--gold", required=True)
    s.add_argument("--question", required=True)
    s.add_argument("--answer", required=True)
    s.add_argument("--mock", action="store_true")
    s.set_defaults(fn=cmd_score)

    f = sub.add_parser("raft", parents=[common], help="refine captions by best-of-N selection")
    f.add_argument("--dataset")
    f.add_argument("--epochs", type=int)
    f.add_argument("--policy", choices=["paper_faithful", "monotone_guard"])
    f.add_argument("--generator", choices=["stub", "replay", "remote"])
    f.add_argument("--candidates-file")
    f.add_argument("--hook", help="trainer command template with {sft_file} and {epoch}")
    f.add_argument("--mock", action="store_true")
    f.set_defaults(fn=cmd_raft)

    v = sub.add_parser("validate", parents=[common], help="check caption/diagram/fact alignment")
    v.add_argument("--dataset")
    v.add_argument("--no-rebuild", action="store_true", help="skip re-extracting facts from scenes")
    v.set_defaults(fn=cmd_validate)

    t = sub.add_parser("stats", parents=[common], help="difficulty and fact-kind histograms")
    t.add_argument("--dataset")
    t.set_defaults(fn=cmd_stats)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .pipeline import FailureCapExceeded
    from .raft import HookFailure, ShortCandidateFile

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FailureCapExceeded as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_CAP
    except TransportError as exc:
        print(f"transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (SchemaViolation, IoFailure, ShortCandidateFile, HookFailure, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
