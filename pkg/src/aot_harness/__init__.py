"""Evaluation harness for single-query algorithmic prompting.

The package splits into task oracles (game24, crossword, auxiliary), prompt
assembly (prompts), transcript parsing and classification (trace), chat
backends (backends), and the method drivers that tie them together (runner,
cli). Import the submodule you need; this namespace only re-exports the
shared core types.
"""

from .core import (
    ChatMessage,
    Exactness,
    MethodConfig,
    Outcome,
    ReportRow,
    Role,
    Strategy,
    TaskInstance,
    TaskKind,
    TokenUsage,
    aggregate,
)

__version__ = "0.1.0"

__all__ = [
    "ChatMessage",
    "Exactness",
    "MethodConfig",
    "Outcome",
    "ReportRow",
    "Role",
    "Strategy",
    "TaskInstance",
    "TaskKind",
    "TokenUsage",
    "aggregate",
    "__version__",
]
