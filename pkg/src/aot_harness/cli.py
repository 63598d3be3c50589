"""Command-line front end.

One binary covers the whole workflow: ``run`` executes a configured
experiment and writes report files, ``solve`` answers a single Game of 24
instance from the oracle, ``parse`` summarizes a saved transcript,
``export-finetune`` turns a manifest into tuning records, ``probe``
measures positional bias, and ``report`` re-aggregates an existing
records file.

Exit codes: 0 on success, 2 for configuration problems (bad flags or
config file, missing paths, malformed inputs), 3 for systemic backend
failures (authentication, retry budget exhausted).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .backends import (
    Backend,
    BackendError,
    CachedBackend,
    FinishReason,
    HttpBackend,
    RateLimiter,
    ScriptedBackend,
)
from .core import (
    ChatMessage,
    MethodConfig,
    Role,
    Strategy,
    TokenUsage,
    aggregate,
    percent,
    render_mean,
)
from .game24 import oracle_solve, reference_dfs, render_expr, validate_answer
from .prompts import FinetuneStyle, export_finetune_dataset
from .runner import (
    ExperimentSpec,
    RunnerError,
    _write_summary,
    emit_report,
    load_manifest,
    record_from_json,
    run_bias_probe,
    run_experiment,
    write_probe_csv,
)
from .trace import LineKind, classify24, count_nodes, parse_trace24, parse_trace_xword

_log = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4"

_BACKEND_NAMES = ("scripted", "http")


class ConfigError(ValueError):
    """The command cannot start as configured."""


# -------------------------------------------------------------- configuration


@dataclass(frozen=True)
class RunConfig:
    """Everything ``run`` needs, checked before any backend is built.

    Input paths must exist at validation time; output locations are
    created on demand. Unknown keys anywhere in the config file are
    rejected rather than ignored.
    """

    manifest: Path
    output_dir: Path
    methods: tuple[MethodConfig, ...]
    backend_name: str = "http"
    model: str = DEFAULT_MODEL
    base_url: str = DEFAULT_BASE_URL
    api_key_env: str = "OPENAI_API_KEY"
    scripts: Optional[Path] = None
    requests_per_minute: Optional[int] = None
    cache_dir: Optional[Path] = None
    concurrency: int = 1
    seed: int = 0
    exclude_errors: bool = False

    def __post_init__(self) -> None:
        if self.backend_name not in _BACKEND_NAMES:
            raise ConfigError(
                f"unknown backend {self.backend_name!r}; choose from {', '.join(_BACKEND_NAMES)}"
            )
        if not self.methods:
            raise ConfigError("at least one method is required")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be at least 1")
        if self.requests_per_minute is not None and self.requests_per_minute < 1:
            raise ConfigError("requests_per_minute must be at least 1")
        if not self.manifest.is_file():
            raise ConfigError(f"manifest not found: {self.manifest}")
        if self.backend_name == "scripted":
            if self.scripts is None:
                raise ConfigError("the scripted backend needs a scripts file")
            if not self.scripts.is_file():
                raise ConfigError(f"scripts file not found: {self.scripts}")
        elif self.scripts is not None:
            raise ConfigError("a scripts file only applies to the scripted backend")


_CONFIG_KEYS = {
    "manifest",
    "methods",
    "backend",
    "cache_dir",
    "concurrency",
    "output_dir",
    "seed",
    "exclude_errors",
}
_BACKEND_KEYS = {
    "name",
    "model",
    "base_url",
    "api_key_env",
    "scripts",
    "requests_per_minute",
}
_METHOD_KEYS = {
    "strategy",
    "samples",
    "refine_limit",
    "breadth",
    "temperature",
    "max_tokens",
}


def _reject_unknown(mapping: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")


def _read_config_file(path: Path) -> dict[str, Any]:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: the config must be a JSON object")
    _reject_unknown(data, _CONFIG_KEYS, "config")
    backend = data.get("backend", {})
    if not isinstance(backend, dict):
        raise ConfigError(f"{path}: backend must be a JSON object")
    _reject_unknown(backend, _BACKEND_KEYS, "backend")
    return data


def parse_method(entry: Any) -> MethodConfig:
    """One method spec: either a strategy name or an object with tuning
    fields (samples, refine_limit, breadth, temperature, max_tokens)."""
    if isinstance(entry, str):
        entry = {"strategy": entry}
    if not isinstance(entry, Mapping):
        raise ConfigError("each method must be a strategy name or an object")
    _reject_unknown(entry, _METHOD_KEYS, "method")
    if "strategy" not in entry:
        raise ConfigError("method objects need a strategy field")
    kwargs: dict[str, Any] = {}
    try:
        kwargs["strategy"] = Strategy(entry["strategy"])
        for field_name in ("samples", "refine_limit", "breadth", "max_tokens"):
            if field_name in entry:
                value = entry[field_name]
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ValueError(f"{field_name} must be an integer")
                kwargs[field_name] = value
        if "temperature" in entry:
            kwargs["temperature"] = Fraction(str(entry["temperature"]))
        return MethodConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad method {entry!r}: {exc}") from None


def _merge(file_value: Any, flag_value: Any, default: Any) -> Any:
    if flag_value is not None:
        return flag_value
    if file_value is not None:
        return file_value
    return default


def _typed(value: Any, kind: type, key: str) -> Any:
    if value is None:
        return None
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{key} must be an integer")
    if not isinstance(value, kind):
        raise ConfigError(f"{key} must be of type {kind.__name__}")
    return value


def load_run_config(config_path: Optional[Path], args: argparse.Namespace) -> RunConfig:
    """Fold defaults, the config file, and command-line flags, in rising
    precedence, into a validated RunConfig."""
    data: dict[str, Any] = _read_config_file(config_path) if config_path else {}
    backend: dict[str, Any] = data.get("backend") or {}

    manifest = _merge(_typed(data.get("manifest"), str, "manifest"), args.manifest, None)
    output_dir = _merge(_typed(data.get("output_dir"), str, "output_dir"), args.output_dir, None)
    if manifest is None:
        raise ConfigError("a manifest path is required (config file or --manifest)")
    if output_dir is None:
        raise ConfigError("an output directory is required (config file or --output-dir)")

    raw_methods = _merge(_typed(data.get("methods"), list, "methods"), args.method or None, None)
    if not raw_methods:
        raise ConfigError("at least one method is required (config file or --method)")

    scripts = _merge(_typed(backend.get("scripts"), str, "backend.scripts"), args.scripts, None)
    cache_dir = _merge(_typed(data.get("cache_dir"), str, "cache_dir"), args.cache_dir, None)
    return RunConfig(
        manifest=Path(manifest),
        output_dir=Path(output_dir),
        methods=tuple(parse_method(entry) for entry in raw_methods),
        backend_name=_merge(_typed(backend.get("name"), str, "backend.name"), args.backend, "http"),
        model=_merge(_typed(backend.get("model"), str, "backend.model"), args.model, DEFAULT_MODEL),
        base_url=_merge(
            _typed(backend.get("base_url"), str, "backend.base_url"),
            args.base_url,
            DEFAULT_BASE_URL,
        ),
        api_key_env=_merge(
            _typed(backend.get("api_key_env"), str, "backend.api_key_env"),
            args.api_key_env,
            "OPENAI_API_KEY",
        ),
        scripts=Path(scripts) if scripts is not None else None,
        requests_per_minute=_merge(
            _typed(backend.get("requests_per_minute"), int, "backend.requests_per_minute"),
            args.requests_per_minute,
            None,
        ),
        cache_dir=Path(cache_dir) if cache_dir is not None else None,
        concurrency=_merge(_typed(data.get("concurrency"), int, "concurrency"), args.concurrency, 1),
        seed=_merge(_typed(data.get("seed"), int, "seed"), args.seed, 0),
        exclude_errors=_merge(
            _typed(data.get("exclude_errors"), bool, "exclude_errors"),
            args.exclude_errors,
            False,
        ),
    )


# ------------------------------------------------------------------- backends


def load_scripts(backend: ScriptedBackend, path: Path) -> None:
    """Load a JSONL scripts file into a scripted backend.

    Each line is one exchange: ``messages`` ([{role, content}, ...]) and
    ``completion`` (a string, or a list matching the request's n), plus
    optional ``usage`` ({prompt_tokens, completion_tokens}) and ``finish``
    (stop | length | other).
    """
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            _reject_unknown(entry, {"messages", "completion", "usage", "finish"}, "script")
            messages = [
                ChatMessage(Role(message["role"]), message["content"])
                for message in entry["messages"]
            ]
            completion = entry["completion"]
            usage = None
            if entry.get("usage") is not None:
                raw = entry["usage"]
                usage = TokenUsage(int(raw["prompt_tokens"]), int(raw["completion_tokens"]))
            finish = FinishReason(entry.get("finish", "stop"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path} line {lineno}: {exc}") from None
        backend.register(messages, completion, finish=finish, usage=usage)


def build_backend(
    name: str,
    *,
    scripts: Optional[Path] = None,
    base_url: str = DEFAULT_BASE_URL,
    api_key_env: str = "OPENAI_API_KEY",
    requests_per_minute: Optional[int] = None,
    cache_dir: Optional[Path] = None,
) -> Backend:
    if name == "scripted":
        if scripts is None:
            raise ConfigError("the scripted backend needs a scripts file")
        inner: Backend = ScriptedBackend()
        load_scripts(inner, scripts)
    elif name == "http":
        limiter = RateLimiter(requests_per_minute) if requests_per_minute else None
        inner = HttpBackend(base_url, api_key_env, rate_limiter=limiter)
    else:
        raise ConfigError(f"unknown backend {name!r}; choose from {', '.join(_BACKEND_NAMES)}")
    if cache_dir is not None:
        return CachedBackend(inner, cache_dir)
    return inner


def _config_backend(config: RunConfig) -> Backend:
    return build_backend(
        config.backend_name,
        scripts=config.scripts,
        base_url=config.base_url,
        api_key_env=config.api_key_env,
        requests_per_minute=config.requests_per_minute,
        cache_dir=config.cache_dir,
    )


# ------------------------------------------------------------------- commands


def _print_rows(rows: Mapping[str, Any]) -> None:
    print("Method Success Queries PTs CTs")
    for method, row in rows.items():
        print(
            f"{method} {percent(row.success_rate)} {render_mean(row.mean_queries)}"
            f" {render_mean(row.mean_prompt_tokens)} {render_mean(row.mean_completion_tokens)}"
        )


def cmd_run(args: argparse.Namespace) -> int:
    config = load_run_config(Path(args.config) if args.config else None, args)
    backend = _config_backend(config)
    spec = ExperimentSpec(
        manifest=config.manifest,
        methods=config.methods,
        model=config.model,
        output_dir=config.output_dir,
        concurrency=config.concurrency,
        exclude_errors=config.exclude_errors,
    )
    report = run_experiment(spec, backend)
    emit_report(report, config.output_dir)
    _print_rows(report.rows)
    print(f"report written to {config.output_dir}")
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    numbers = tuple(args.numbers)
    try:
        if args.dfs:
            stats = reference_dfs(numbers)
            solution = stats.solution
        else:
            solution = oracle_solve(numbers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"{render_expr(solution)} = 24" if solution is not None else "no solution")
    if args.dfs:
        print(f"nodes visited: {stats.nodes_visited}")
    return 0


def cmd_parse(args: argparse.Namespace) -> int:
    text = Path(args.transcript).read_text(encoding="utf-8")
    if args.kind == "crossword":
        events = parse_trace_xword(text)
        by_kind: dict[str, int] = {}
        for event in events:
            name = type(event).__name__
            by_kind[name] = by_kind.get(name, 0) + 1
        print(f"events: {len(events)}")
        for name in sorted(by_kind):
            print(f"  {name}: {by_kind[name]}")
        return 0
    trace = parse_trace24(text)
    print(f"first operations: {len(trace.first_ops)}")
    print(f"nodes: {count_nodes(trace)}")
    print(f"found: {'yes' if trace.found_marker is not None else 'no'}")
    print(f"answer: {trace.answer_line if trace.answer_line is not None else '-'}")
    if args.numbers:
        if len(args.numbers) != 4:
            raise ConfigError("classification needs the four game numbers")
        validation = validate_answer(trace.answer_line or "", tuple(args.numbers))
        error = classify24(trace, validation)
        print(f"error class: {error.value if error is not None else 'none'}")
    else:
        print("error class: unknown (pass the four game numbers to classify)")
    opaque = sum(1 for line in trace.lines if line.kind is LineKind.OPAQUE)
    if opaque:
        print(f"opaque lines: {opaque}")
    if trace.diagnostics:
        print(f"diagnostics: {len(trace.diagnostics)}")
    return 0


def cmd_export_finetune(args: argparse.Namespace) -> int:
    instances = load_manifest(Path(args.manifest))
    records = list(export_finetune_dataset(instances, FinetuneStyle(args.style)))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"{len(records)} records")
    skipped = len(instances) - len(records)
    if skipped:
        print(f"warning: skipped {skipped} of {len(instances)} instances", file=sys.stderr)
    return 0


def cmd_probe(args: argparse.Namespace) -> int:
    try:
        k_values = [int(token) for token in args.k.split(",") if token.strip()]
    except ValueError:
        raise ConfigError(f"--k expects comma-separated integers, got {args.k!r}") from None
    if args.samples < 1:
        raise ConfigError("--samples must be at least 1")
    scripts = Path(args.scripts) if args.scripts else None
    if scripts is not None and not scripts.is_file():
        raise ConfigError(f"scripts file not found: {scripts}")
    backend = build_backend(
        args.backend or "http",
        scripts=scripts,
        base_url=args.base_url or DEFAULT_BASE_URL,
        api_key_env=args.api_key_env or "OPENAI_API_KEY",
        requests_per_minute=args.requests_per_minute,
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
    )
    rows = run_bias_probe(
        backend,
        args.model or DEFAULT_MODEL,
        k_values,
        args.samples,
        rng_seed=args.seed if args.seed is not None else 0,
    )
    for k, accuracy in rows:
        print(f"k={k} accuracy={float(accuracy):.4f}")
    write_probe_csv(rows, Path(args.out))
    print(f"wrote {args.out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.records)
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            body = json.loads(line)
            records.append(record_from_json(body))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path} line {lineno}: {exc}") from None
    if not records:
        raise ConfigError(f"{path} holds no records")
    methods: list[str] = []
    for record in records:
        if record.method not in methods:
            methods.append(record.method)
    rows = {}
    for method in methods:
        outcomes = [
            record.outcome
            for record in records
            if record.method == method and not (args.exclude_errors and record.errored)
        ]
        if not outcomes:
            _log.warning("every record errored under %s; row omitted", method)
            continue
        rows[method] = aggregate(outcomes)
    _print_rows(rows)
    if args.out:
        _write_summary(rows, Path(args.out))
        print(f"wrote {args.out}")
    return 0


# --------------------------------------------------------------------- parser


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=_BACKEND_NAMES, help="backend kind")
    parser.add_argument("--model", help="model name sent to the backend")
    parser.add_argument("--base-url", help="chat completions endpoint base URL")
    parser.add_argument("--api-key-env", help="environment variable holding the API key")
    parser.add_argument("--scripts", help="JSONL scripts file for the scripted backend")
    parser.add_argument(
        "--requests-per-minute", type=int, help="rate limit for the live backend"
    )
    parser.add_argument("--cache-dir", help="response cache directory")
    parser.add_argument("--seed", type=int, help="seed recorded with the run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aot",
        description="Batch evaluation of prompting strategies over puzzle tasks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a configured experiment and write reports")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--manifest", help="task manifest (JSONL)")
    run.add_argument("--output-dir", help="directory for report files")
    run.add_argument(
        "--method",
        action="append",
        help="strategy to run (repeatable); overrides the config file list",
    )
    run.add_argument("--concurrency", type=int, help="instances in flight at once")
    run.add_argument(
        "--exclude-errors",
        action="store_true",
        default=None,
        help="drop errored instances from summary rows instead of counting them as failures",
    )
    _add_backend_flags(run)
    run.set_defaults(handler=cmd_run)

    solve = commands.add_parser("solve", help="solve one Game of 24 instance with the oracle")
    solve.add_argument("numbers", type=int, nargs=4, help="the four game numbers")
    solve.add_argument(
        "--dfs",
        action="store_true",
        help="use the reference depth-first search and report nodes visited",
    )
    solve.set_defaults(handler=cmd_solve)

    parse = commands.add_parser("parse", help="summarize a saved transcript")
    parse.add_argument("transcript", help="path to the transcript text file")
    parse.add_argument(
        "numbers",
        type=int,
        nargs="*",
        help="the four game numbers, enabling error classification",
    )
    parse.add_argument(
        "--kind", choices=("game24", "crossword"), default="game24", help="transcript task"
    )
    parse.set_defaults(handler=cmd_parse)

    export = commands.add_parser(
        "export-finetune", help="write tuning records for solvable games"
    )
    export.add_argument("manifest", help="task manifest (JSONL)")
    export.add_argument(
        "--style", choices=tuple(style.value for style in FinetuneStyle), default="aot"
    )
    export.add_argument("--out", required=True, help="output JSONL path")
    export.set_defaults(handler=cmd_export_finetune)

    probe = commands.add_parser("probe", help="measure answer-position bias")
    probe.add_argument("--k", default="0,1,2,4,8", help="comma-separated context sizes")
    probe.add_argument("--samples", type=int, default=20, help="instances per context size")
    probe.add_argument("--out", required=True, help="output CSV path")
    _add_backend_flags(probe)
    probe.set_defaults(handler=cmd_probe)

    report = commands.add_parser("report", help="re-aggregate a records file")
    report.add_argument("records", help="records.jsonl from an earlier run")
    report.add_argument("--out", help="also write summary.csv here")
    report.add_argument(
        "--exclude-errors",
        action="store_true",
        default=False,
        help="drop errored records from the aggregation",
    )
    report.set_defaults(handler=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (ConfigError, RunnerError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
