"""Bounded single-letter distortions between vertex marks of two models."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConfigError
from .model import GWModel, VertexMark


@dataclass(eq=False)
class DistortionTable:
    """``matrix[i, j] = rho(marks_x[i], marks_y[j])`` over the two kernel supports.

    ``fn``, when present, evaluates the distortion for marks outside the
    supports too (builtins have one, tables read from files do not).
    """

    name: str
    marks_x: tuple[VertexMark, ...]
    marks_y: tuple[VertexMark, ...]
    matrix: np.ndarray
    fn: Callable[[VertexMark, VertexMark], float] | None = None

    def __post_init__(self):
        if self.matrix.shape != (len(self.marks_x), len(self.marks_y)):
            raise ConfigError("distortion matrix shape does not match the mark lists")
        if not np.all(np.isfinite(self.matrix)) or np.any(self.matrix < 0):
            raise ConfigError("distortion values must be finite and nonnegative")

    @cached_property
    def _ix(self):
        return {m: i for i, m in enumerate(self.marks_x)}

    @cached_property
    def _iy(self):
        return {m: j for j, m in enumerate(self.marks_y)}

    @property
    def bound(self) -> float:
        return float(self.matrix.max()) if self.matrix.size else 0.0

    def __call__(self, mx, my) -> float:
        i = self._ix.get(VertexMark(*mx))
        j = self._iy.get(VertexMark(*my))
        if i is not None and j is not None:
            return float(self.matrix[i, j])
        if self.fn is None:
            raise KeyError(f"no distortion value for marks {mx!r}, {my!r}")
        return float(self.fn(VertexMark(*mx), VertexMark(*my)))


def _tabulate(name, model_x, model_y, fn) -> DistortionTable:
    mat = np.array([[fn(mx, my) for my in model_y.marks] for mx in model_x.marks], dtype=float)
    mat = mat.reshape(len(model_x.marks), len(model_y.marks))
    return DistortionTable(name, model_x.marks, model_y.marks, mat, fn)


def type_hamming(model_x: GWModel, model_y: GWModel) -> DistortionTable:
    """1 when the vertex types differ, else 0."""
    return _tabulate("type-hamming", model_x, model_y, lambda mx, my: float(mx[0] != my[0]))


def mark_hamming(model_x: GWModel, model_y: GWModel) -> DistortionTable:
    """Type mismatch plus the fraction of the ``cap`` child slots that differ.

    A slot differs when the two offspring strings disagree there, including
    when only one string has a child in that position.  Values lie in [0, 2].
    """
    cap = max(model_x.cap, model_y.cap)

    def fn(mx, my):
        cx, cy = mx[1], my[1]
        slots = sum(
            1
            for s in range(cap)
            if (s < len(cx)) != (s < len(cy)) or (s < len(cx) and cx[s] != cy[s])
        )
        return float(mx[0] != my[0]) + slots / cap

    return _tabulate("mark-hamming", model_x, model_y, fn)


def zero_distortion(model_x: GWModel, model_y: GWModel) -> DistortionTable:
    return _tabulate("zero", model_x, model_y, lambda mx, my: 0.0)


BUILTINS = {"type-hamming": type_hamming, "mark-hamming": mark_hamming, "zero": zero_distortion}


def _parse_mark(text: str, model: GWModel, where: str) -> VertexMark:
    sym, sep, kids = text.strip().partition("|")
    if not sep:
        raise ConfigError(f"{where}: mark {text!r} is not of the form type|children")
    try:
        a = model.alphabet.index(sym)
        parts = kids.split() if " " in kids.strip() else list(kids)
        return VertexMark(a, tuple(model.alphabet.index(s) for s in parts))
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_distortion(path: str, model_x: GWModel, model_y: GWModel) -> DistortionTable:
    """Read a CSV with header ``mark1,mark2,value``.

    Marks are written ``type|c1c2...`` (children separated by spaces when
    labels are longer than one character).  A ``*,*,value`` row supplies a
    default for pairs not listed; without it every support pair is required.
    """
    values: dict[tuple[VertexMark, VertexMark], float] = {}
    default = None
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read distortion table: {exc.strerror}") from None
    if not rows or [h.strip() for h in rows[0]] != ["mark1", "mark2", "value"]:
        raise ConfigError(f"{path}:1: header must be mark1,mark2,value")
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or row[0].startswith("#"):
            continue
        where = f"{path}:{lineno}"
        if len(row) != 3:
            raise ConfigError(f"{where}: expected 3 columns, got {len(row)}")
        try:
            v = float(row[2])
        except ValueError:
            raise ConfigError(f"{where}: value {row[2]!r} is not a number") from None
        if not math.isfinite(v) or v < 0:
            raise ConfigError(f"{where}: distortion must be finite and >= 0, got {v}")
        if row[0].strip() == "*" and row[1].strip() == "*":
            default = v
            continue
        values[(_parse_mark(row[0], model_x, where), _parse_mark(row[1], model_y, where))] = v
    mat = np.empty((len(model_x.marks), len(model_y.marks)))
    missing = 0
    for i, mx in enumerate(model_x.marks):
        for j, my in enumerate(model_y.marks):
            v = values.get((mx, my), default)
            if v is None:
                missing += 1
                v = 0.0
            mat[i, j] = v
    if missing:
        raise ConfigError(f"{path}: {missing} support mark pairs have no value and no '*,*' default row")
    return DistortionTable(path, model_x.marks, model_y.marks, mat)


def resolve_distortion(spec: str, model_x: GWModel, model_y: GWModel) -> DistortionTable:
    if spec in BUILTINS:
        return BUILTINS[spec](model_x, model_y)
    return load_distortion(spec, model_x, model_y)
