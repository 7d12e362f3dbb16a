"""CSV tables with a metadata header, plus one JSON sidecar per run."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from typing import Any, Sequence

from . import __version__


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def fmt(v: Any) -> str:
    """Cell text: ``repr`` for floats, ``inf`` for the infinite sentinel, empty for ``None``."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if hasattr(v, "item"):
        return fmt(v.item())
    return str(v)


def _jsonable(v: Any):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "tolist"):
        return _jsonable(v.tolist())
    if hasattr(v, "item"):
        return _jsonable(v.item())
    return v


def metadata(config: dict) -> dict:
    return {
        "tool": "gwrdt",
        "version": __version__,
        "config_digest": config_digest(config),
        "seed": config.get("seed"),
        "command": config.get("command"),
    }


def csv_text(columns: Sequence[str], rows: Sequence[Sequence], meta: dict | None = None) -> str:
    buf = io.StringIO()
    if meta:
        for k, v in meta.items():
            buf.write(f"# {k}: {fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def json_text(config: dict, summary: dict, files: Sequence[str] = ()) -> str:
    doc = {"metadata": metadata(config), "config": config, "summary": summary, "files": list(files)}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


class Writer:
    """Collects tables for one run; writes them to ``out`` or echoes to stdout."""

    def __init__(self, config: dict, out: str | None, stem: str, stream=None):
        self.config = config
        self.out = out
        self.stem = stem
        self.stream = stream
        self.files: list[str] = []

    def table(self, name: str, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
        text = csv_text(columns, rows, metadata(self.config))
        if self.out is None:
            print(text, end="", file=self.stream)
            self.files.append(name)
            return
        os.makedirs(self.out, exist_ok=True)
        fname = f"{self.stem}_{name}.csv"
        with open(os.path.join(self.out, fname), "w", newline="") as fh:
            fh.write(text)
        self.files.append(fname)

    def text(self, name: str, body: str) -> None:
        """Free-form text (tree lists); gets the same ``#`` metadata header."""
        header = "".join(f"# {k}: {fmt(v)}\n" for k, v in metadata(self.config).items())
        if self.out is None:
            print(header + body, end="", file=self.stream)
            return
        os.makedirs(self.out, exist_ok=True)
        fname = f"{self.stem}_{name}.txt"
        with open(os.path.join(self.out, fname), "w") as fh:
            fh.write(header + body)
        self.files.append(fname)

    def finish(self, summary: dict) -> None:
        if self.out is None:
            return
        with open(os.path.join(self.out, f"{self.stem}.json"), "w") as fh:
            fh.write(json_text(self.config, summary, self.files))
