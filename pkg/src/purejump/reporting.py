"""Deterministic, locale-independent output helpers.

Raw numeric values carry 17 significant digits (lossless for float64);
summary values carry 6. Every CSV starts with a versioned schema line so
golden files can detect format drift. All writers emit ``\\n`` newlines
and sorted, reproducible content: identical inputs give identical bytes.
"""

from __future__ import annotations

import math
import os
from pathlib import Path

from .errors import UsageError

CSV_VERSION = 1


def fmt_raw(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(x)


def fmt_summary(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return fmt_raw(x)


def ensure_outdir(path) -> Path:
    out = Path(os.environ.get("PUREJUMP_OUTDIR", "") or path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def write_csv(path: Path, schema: str, header, rows) -> Path:
    lines = [f"# purejump-csv v{CSV_VERSION} schema={schema}", ",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_raw(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def write_text(path: Path, lines) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path
