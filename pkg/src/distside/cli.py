"""Command-line entry point: ``distside <command> [options]``.

Exit status is 0 on success, 1 when a verification exceeds its tolerance (or a
solver fails to converge) and 2 on invalid input, with a JSON error report on
stderr.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .experiments import INVALID, Artifact, ConfigError, run
from .presets import COMMANDS, DEFAULTS, PRESET_INDEX, deep_update, default_preset, list_presets

TOOL = "distside"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="JSON file with experiment parameters")
    p.add_argument("--preset", help="start from a built-in preset (see list-presets)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one field; dotted keys reach nested fields, VALUE is parsed as JSON")
    p.add_argument("--seed", type=int, help="64-bit seed (default: the preset's)")
    p.add_argument("--out", metavar="DIR", help="write artifacts here instead of stdout")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=TOOL, description="Rate-distortion experiments with distortion side information.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd, exp in COMMANDS.items():
        _add_common(sub.add_parser(cmd, help=f"run the {exp} experiment"))
    lp = sub.add_parser("list-presets", help="show built-in configurations")
    lp.add_argument("--tag", help="only presets carrying this tag")
    lp.add_argument("--format", choices=("csv", "json"), default="json")
    return parser


def _parse_set(items: list[str]) -> dict:
    out: dict = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = val
    return out


def resolve(args) -> tuple[str, dict, int]:
    """Experiment name, fully resolved config and seed."""
    experiment = COMMANDS[args.command]
    if args.preset:
        preset = PRESET_INDEX.get(args.preset)
        if preset is None:
            raise ConfigError(f"unknown preset {args.preset!r}")
        if preset.experiment != experiment:
            raise ConfigError(f"preset {args.preset!r} belongs to {preset.experiment}, not {experiment}")
    else:
        preset = default_preset(experiment)
    cfg = preset.resolved()
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        deep_update(cfg, doc)
    deep_update(cfg, _parse_set(args.set))
    seed = preset.seed if args.seed is None else args.seed
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if args.jobs < 1:
        raise ConfigError("--jobs must be positive")
    return experiment, cfg, seed


def config_hash(experiment: str, cfg: dict, seed: int) -> str:
    canon = json.dumps({"experiment": experiment, "config": cfg, "seed": seed}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def header(experiment: str, cfg: dict, seed: int) -> dict:
    return {"tool": TOOL, "version": __version__, "experiment": experiment, "seed": seed,
            "config_hash": config_hash(experiment, cfg, seed), "config": cfg}


def _csv_text(columns, rows, head: dict | None) -> str:
    buf = io.StringIO()
    if head:
        for key in ("tool", "version", "experiment", "seed", "config_hash"):
            buf.write(f"# {key}: {head[key]}\n")
        buf.write(f"# config: {json.dumps(head['config'], sort_keys=True)}\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def render(art: Artifact, head: dict, fmt: str) -> dict[str, str]:
    """File name -> contents for one run."""
    name = art.experiment
    files = {}
    if fmt == "csv":
        files[f"{name}.csv"] = _csv_text(art.columns, art.rows, head)
    else:
        files[f"{name}.json"] = _json_text({"header": head, "rows": art.rows})
    files[f"{name}.summary.json"] = _json_text({"header": head, "status": art.status, "summary": art.summary})
    for extra, text in art.files.items():
        files[extra] = text
    return files


def _error(kind: str, message: str, out: str | None = None) -> int:
    report = _json_text({"status": INVALID, "error": kind, "message": message})
    sys.stderr.write(report)
    if out:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(report)
        except OSError:
            pass
    return INVALID


def _list(args) -> int:
    entries = list_presets(args.tag)
    if args.format == "json":
        sys.stdout.write(_json_text(entries))
    else:
        rows = [{**e, "tags": " ".join(e["tags"])} for e in entries]
        sys.stdout.write(_csv_text(["name", "experiment", "tags", "description"], rows, None))
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _error("usage", str(exc))
    if args.command == "list-presets":
        return _list(args)
    try:
        experiment, cfg, seed = resolve(args)
        art = run(experiment, copy.deepcopy(cfg), seed, args.jobs)
    except ConfigError as exc:
        return _error("validation", str(exc), args.out)
    files = render(art, header(experiment, cfg, seed), args.format)
    if args.out:
        try:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            for fname, text in files.items():
                (out / fname).write_text(text)
        except OSError as exc:
            return _error("output", f"cannot write to {args.out}: {exc}")
    else:
        main_name = f"{experiment}.{args.format}"
        sys.stdout.write(files[main_name])
        sys.stderr.write(files[f"{experiment}.summary.json"])
    return art.status


if __name__ == "__main__":
    sys.exit(main())
