"""Empirical measures of trees and tree pairs, and the shift-invariance defect.

Measures are sparse ``dict`` tables.  A :class:`PairMeasure` lives in one of
two views related by a re-keying bijection:

* ``"marked-pair"``: keys ``(mark_x, mark_y)`` with ``mark = (type, offspring)``;
* ``"paired-marks"``: keys ``((type_x, type_y), (offspring_x, offspring_y))``.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .errors import SizeMismatch
from .model import Alphabet, GWModel, VertexMark
from .trees import Tree, vertex_marks

MARKED_PAIR = "marked-pair"
PAIRED_MARKS = "paired-marks"


@dataclass
class MarkMeasure:
    weights: dict[VertexMark, float]

    def total(self) -> float:
        return math.fsum(self.weights.values())

    def type_marginal(self) -> dict[int, float]:
        out: dict[int, float] = defaultdict(float)
        for m, w in self.weights.items():
            out[m[0]] += w
        return dict(out)

    def child_type_law(self) -> dict[int, float]:
        """``a -> sum_{(b,c)} m(a,c) w(b,c)``."""
        out: dict[int, float] = defaultdict(float)
        for m, w in self.weights.items():
            for a in m[1]:
                out[a] += w
        return dict(out)


@dataclass
class PairMeasure:
    weights: dict
    view: str = MARKED_PAIR

    def total(self) -> float:
        return math.fsum(self.weights.values())

    def as_view(self, view: str) -> "PairMeasure":
        return self if self.view == view else reindex(self)

    def marginal(self, coord: int) -> MarkMeasure:
        out: dict[VertexMark, float] = defaultdict(float)
        for (mx, my), w in self.as_view(MARKED_PAIR).weights.items():
            out[VertexMark(*(mx if coord == 0 else my))] += w
        return MarkMeasure(dict(out))

    def type_pair_marginal(self) -> dict[tuple[int, int], float]:
        out: dict[tuple[int, int], float] = defaultdict(float)
        for (ab, _), w in self.as_view(PAIRED_MARKS).weights.items():
            out[ab] += w
        return dict(out)


@dataclass
class ShiftDefect:
    per_type_first: dict[int, float]
    per_type_second: dict[int, float]

    @property
    def max_defect(self) -> float:
        vals = list(self.per_type_first.values()) + list(self.per_type_second.values())
        return max(vals, default=0.0)


def offspring_measure(t: Tree) -> MarkMeasure:
    counts = Counter(vertex_marks(t))
    return MarkMeasure({m: c / t.n for m, c in counts.items()})


def joint_measure(tx: Tree, ty: Tree) -> PairMeasure:
    """Empirical measure of the vertex-wise mark pairs, vertices paired by BFS index."""
    if tx.n != ty.n:
        raise SizeMismatch(f"trees have {tx.n} and {ty.n} vertices")
    counts = Counter(zip(vertex_marks(tx), vertex_marks(ty)))
    return PairMeasure({k: c / tx.n for k, c in counts.items()}, MARKED_PAIR)


def _phi(key):
    (a, c), (b, d) = key
    return ((a, b), (tuple(c), tuple(d)))


def _phi_inv(key):
    (a, b), (c, d) = key
    return (VertexMark(a, tuple(c)), VertexMark(b, tuple(d)))


def reindex(mu: PairMeasure) -> PairMeasure:
    """Toggle between the marked-pair and paired-marks views (mass preserving)."""
    if mu.view == MARKED_PAIR:
        return PairMeasure({_phi(k): w for k, w in mu.weights.items()}, PAIRED_MARKS)
    return PairMeasure({_phi_inv(k): w for k, w in mu.weights.items()}, MARKED_PAIR)


def product_measure(m1: MarkMeasure, m2: MarkMeasure) -> PairMeasure:
    return PairMeasure(
        {(a, b): wa * wb for a, wa in m1.weights.items() for b, wb in m2.weights.items() if wa * wb > 0},
        MARKED_PAIR,
    )


def kernel_mark_law(model: GWModel, type_law: Mapping[int, float] | Iterable[float]) -> MarkMeasure:
    """The mark law ``q (x) K``: ``(b, c) -> q(b) K{c | b}``."""
    if not isinstance(type_law, Mapping):
        type_law = dict(enumerate(type_law))
    out = {}
    for m, p in zip(model.marks, model.mark_probs):
        w = type_law.get(m.vtype, 0.0) * p
        if w > 0:
            out[m] = float(w)
    return MarkMeasure(out)


def _single_defect(m: MarkMeasure, types: Iterable[int]) -> dict[int, float]:
    own = m.type_marginal()
    kids = m.child_type_law()
    return {a: abs(own.get(a, 0.0) - kids.get(a, 0.0)) for a in types}


def shift_defect(mu: PairMeasure, n_types: int | None = None) -> ShiftDefect:
    """Per-type absolute defects of the shift-invariance identities of both marginals."""
    mu = mu.as_view(MARKED_PAIR)
    m1, m2 = mu.marginal(0), mu.marginal(1)
    if n_types is None:
        seen: set[int] = set()
        for m in (m1, m2):
            for mk in m.weights:
                seen.add(mk[0])
                seen.update(mk[1])
        types = sorted(seen)
    else:
        types = range(n_types)
    return ShiftDefect(_single_defect(m1, types), _single_defect(m2, types))


def expect(rho: Callable | Mapping, mu: PairMeasure) -> float:
    """``<rho, mu>`` where ``rho`` takes (or is keyed by) a pair of marks."""
    if mu.view == PAIRED_MARKS:
        pairs = ((_phi_inv(k), w) for k, w in mu.weights.items())
    else:
        pairs = (((VertexMark(*k[0]), VertexMark(*k[1])), w) for k, w in mu.weights.items())
    f = rho if callable(rho) else (lambda mx, my: rho[(mx, my)])
    return math.fsum(w * f(mx, my) for (mx, my), w in pairs)


def mark_to_text(m, alphabet: Alphabet | None = None) -> str:
    lab = (lambda a: a) if alphabet is None else alphabet.label
    return f"{lab(m[0])}|{''.join(str(lab(a)) for a in m[1])}"


def measure_csv(mu: PairMeasure | MarkMeasure, alphabet: Alphabet | None = None) -> str:
    """CSV text with columns ``mark1,mark2,weight`` (``mark,weight`` for a single measure)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(mu, MarkMeasure):
        w.writerow(["mark", "weight"])
        for m in sorted(mu.weights):
            w.writerow([mark_to_text(m, alphabet), repr(mu.weights[m])])
    else:
        mu = mu.as_view(MARKED_PAIR)
        w.writerow(["mark1", "mark2", "weight"])
        for k in sorted(mu.weights):
            w.writerow([mark_to_text(k[0], alphabet), mark_to_text(k[1], alphabet), repr(mu.weights[k])])
    return buf.getvalue()
