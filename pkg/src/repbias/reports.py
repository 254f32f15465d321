"""Report emission: canonical JSON for machines, aligned text tables for humans.

Reports are pure functions of their inputs; serialization is canonicalized
(sorted keys, fixed separators, trailing newline) so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def report_envelope(command: str, config: dict, seed: int) -> dict:
    return {
        "command": command,
        "tool_version": __version__,
        "config_digest": config_digest(config),
        "seed": seed,
    }


def write_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="ascii")


def render_table(headers: list[str], rows: list[list[str]]) -> str:
    """Space-aligned columns: first column left, the rest right-aligned."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = []
    for row in [headers] + rows:
        cells = [row[0].ljust(widths[0])]
        cells += [cell.rjust(widths[i]) for i, cell in enumerate(row) if i > 0]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="ascii")


def pct(x: float) -> str:
    return f"{100.0 * x:.2f}%"


def signed_pct(x: float) -> str:
    return f"{100.0 * x:+.2f}%"
