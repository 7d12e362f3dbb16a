"""Finite typed trees in breadth-first layout; GW sampling and enumeration.

A tree is stored as two parallel tuples in BFS order: the type of each
vertex and its number of children.  The children of vertex ``i`` are the
next ``child_counts[i]`` vertices after all children of vertices ``< i``, so
the pair of tuples determines the tree and equality of trees is tuple
equality.  Vertex indices are shared across trees of the same size and are
what pairs ``x(v)`` with ``y(v)`` downstream.
"""
from __future__ import annotations

import math
import os
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConditioningFailed, CountExceeded, InvalidTree, NoSuchSize
from .model import Alphabet, GWModel, VertexMark

SIZE_CAP = 10**6
ENUM_BUDGET = 200_000
TASK_CHUNK = 5000
_BUF = 1 << 16


@dataclass(frozen=True)
class Tree:
    types: tuple[int, ...]
    child_counts: tuple[int, ...]

    def __post_init__(self):
        n = len(self.types)
        if n == 0 or len(self.child_counts) != n:
            raise InvalidTree("types and child_counts must be non-empty and of equal length")
        if any(c < 0 for c in self.child_counts):
            raise InvalidTree("negative child count")
        discovered = 1
        for i, c in enumerate(self.child_counts):
            if i >= discovered:
                raise InvalidTree(f"vertex {i} is not reachable from the root in BFS layout")
            discovered += c
        if discovered != n:
            raise InvalidTree(f"child counts sum to {discovered - 1}, expected {n - 1}")

    @property
    def n(self) -> int:
        return len(self.types)

    @cached_property
    def first_child(self) -> tuple[int, ...]:
        out, nxt = [], 1
        for c in self.child_counts:
            out.append(nxt)
            nxt += c
        return tuple(out)

    @cached_property
    def parent(self) -> tuple[int, ...]:
        par = [-1] * self.n
        for v, (f, c) in enumerate(zip(self.first_child, self.child_counts)):
            for w in range(f, f + c):
                par[w] = v
        return tuple(par)

    def offspring(self, v: int) -> tuple[int, ...]:
        f = self.first_child[v]
        return self.types[f : f + self.child_counts[v]]

    def check(self, model: GWModel) -> None:
        """Raise :class:`InvalidTree` unless every type and child count fits ``model``."""
        k = model.n_types
        for v, a in enumerate(self.types):
            if not (isinstance(a, (int, np.integer)) and 0 <= a < k):
                raise InvalidTree(f"vertex {v} has type {a!r} outside the alphabet")
        for v, c in enumerate(self.child_counts):
            if c > model.cap:
                raise InvalidTree(f"vertex {v} has {c} children, cap is {model.cap}")


@dataclass(frozen=True)
class Overflow:
    """Returned by :func:`sample_tree` when the realization outgrows ``size_cap``."""

    size_cap: int


@dataclass
class WeightedTreeList:
    items: list[tuple[Tree, float]] = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(p for _, p in self.items)

    def __len__(self) -> int:
        return len(self.items)

    def conditional(self) -> list[tuple[Tree, float]]:
        tot = self.total
        return [(t, p / tot) for t, p in self.items]


def vertex_marks(t: Tree) -> list[VertexMark]:
    return [VertexMark(t.types[v], t.offspring(v)) for v in range(t.n)]


def tree_from_marks(marks: Sequence[VertexMark]) -> Tree:
    """Inverse of :func:`vertex_marks`; checks that the offspring strings agree."""
    t = Tree(tuple(m[0] for m in marks), tuple(len(m[1]) for m in marks))
    for v, m in enumerate(marks):
        if t.offspring(v) != tuple(m[1]):
            raise InvalidTree(f"mark {v} lists offspring {m[1]!r} but BFS layout gives {t.offspring(v)!r}")
    return t


def tree_prob(model: GWModel, t: Tree) -> float:
    t.check(model)
    p = model.root_law[t.types[0]]
    for v in range(t.n):
        if p == 0.0:
            break
        p *= model.kernel_prob(t.types[v], t.offspring(v))
    return p


# ---------------------------------------------------------------------------
# text format: "n a:c a:c ..." one tree per line


def tree_to_text(t: Tree, alphabet: Alphabet) -> str:
    toks = " ".join(f"{alphabet.label(a)}:{c}" for a, c in zip(t.types, t.child_counts))
    return f"{t.n} {toks}"


def tree_from_text(line: str, alphabet: Alphabet) -> Tree:
    parts = line.split()
    if not parts:
        raise InvalidTree("empty tree line")
    try:
        n = int(parts[0])
    except ValueError:
        raise InvalidTree(f"first token must be the vertex count, got {parts[0]!r}") from None
    toks = parts[1:]
    if len(toks) != n:
        raise InvalidTree(f"declared {n} vertices, found {len(toks)} tokens")
    types, counts = [], []
    for tok in toks:
        sym, sep, cnt = tok.rpartition(":")
        if not sep:
            raise InvalidTree(f"token {tok!r} is not of the form type:childcount")
        try:
            types.append(alphabet.index(sym))
        except Exception as exc:
            raise InvalidTree(str(exc)) from None
        counts.append(int(cnt))
    return Tree(tuple(types), tuple(counts))


# ---------------------------------------------------------------------------
# sampling


def task_rng(seed: int, task: int = 0) -> np.random.Generator:
    """Stream for ``(seed, task)``: ``SeedSequence(seed, spawn_key=(task,))``.

    Every parallel experiment splits work into fixed-size tasks and derives
    one stream per task index this way, so results do not depend on how
    many workers run them.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(task),)))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return task_rng(seed, 0)


def sample_tree(model: GWModel, seed, size_cap: int = SIZE_CAP) -> Tree | Overflow:
    """One unconditioned realization, grown breadth-first."""
    rng = _as_rng(seed)
    tables = model.sampling_tables
    buf = rng.random(_BUF).tolist()
    pos = 1
    types = [bisect_right(model.root_cum, buf[0])]
    counts: list[int] = []
    i = 0
    while i < len(types):
        if pos == _BUF:
            buf = rng.random(_BUF).tolist()
            pos = 0
        cum, strings = tables[types[i]]
        c = strings[bisect_right(cum, buf[pos])]
        pos += 1
        if len(types) + len(c) > size_cap:
            return Overflow(size_cap)
        types.extend(c)
        counts.append(len(c))
        i += 1
    return Tree(tuple(types), tuple(counts))


def _rejection_batch(model: GWModel, n: int, count: int, rng: np.random.Generator, max_attempts: int):
    """Raw ``(types, counts)`` tuples of ``count`` trees of size exactly ``n``."""
    tables = model.sampling_tables
    root_cum = model.root_cum
    out = []
    buf = rng.random(_BUF).tolist()
    pos = 0
    attempts = 0
    while len(out) < count:
        if attempts >= max_attempts:
            raise ConditioningFailed(
                f"gave up after {attempts} attempts with {len(out)} accepted trees of size {n} "
                f"(acceptance rate ~ {len(out) / max(attempts, 1):.3g})",
                attempts=attempts,
                accepted=len(out),
            )
        attempts += 1
        if pos + n + 1 > _BUF:
            buf = rng.random(_BUF).tolist()
            pos = 0
        types = [bisect_right(root_cum, buf[pos])]
        pos += 1
        counts = []
        size = 1
        i = 0
        while i < size:
            cum, strings = tables[types[i]]
            c = strings[bisect_right(cum, buf[pos])]
            pos += 1
            size += len(c)
            if size > n:
                break
            types.extend(c)
            counts.append(len(c))
            i += 1
        if size == n and i == n:
            out.append((tuple(types), tuple(counts)))
    return out, attempts


def achievable_sizes(model: GWModel, n: int) -> np.ndarray:
    """Boolean table ``ok[a, s]``: a finite tree of size ``s <= n`` rooted at ``a`` has positive probability."""
    k = model.n_types
    ok = np.zeros((k, n + 1), dtype=bool)
    while True:
        new = np.zeros_like(ok)
        for a, row in enumerate(model.kernel):
            for c, _ in row:
                acc = np.zeros(n + 1, dtype=bool)
                acc[1] = True
                for b in c:
                    acc = np.convolve(acc, ok[b]).astype(bool)[: n + 1]
                    if not acc.any():
                        break
                new[a] |= acc
        if np.array_equal(new, ok):
            return ok
        ok = new


def _check_size(model: GWModel, n: int) -> None:
    if n < 1:
        raise NoSuchSize(f"tree size must be >= 1, got {n}")
    if n > 512:
        return
    ok = achievable_sizes(model, n)
    if not any(ok[a, n] for a, p in enumerate(model.root_law) if p > 0):
        raise NoSuchSize(f"no tree with exactly {n} vertices has positive probability")


def sample_conditioned(model: GWModel, n: int, seed, max_rejects: int = 10**6) -> Tree:
    """One tree distributed as the GW law conditioned on exactly ``n`` vertices (rejection)."""
    _check_size(model, n)
    raw, _ = _rejection_batch(model, n, 1, _as_rng(seed), max_rejects)
    return Tree(*raw[0])


def _task(args):
    model, n, count, seed, task, max_attempts = args
    raw, attempts = _rejection_batch(model, n, count, task_rng(seed, task), max_attempts)
    return raw, attempts


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("GWRDT_THREADS")
    if env:
        return max(1, int(env))
    return 1


def run_tasks(fn, arglist: list, workers: int | None = None) -> list:
    """Map ``fn`` over ``arglist`` in order, optionally in a process pool."""
    w = min(worker_count(workers), len(arglist))
    if w <= 1:
        return [fn(a) for a in arglist]
    with ProcessPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, arglist))


@dataclass
class ConditionedSample:
    trees: list[Tree]
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        return len(self.trees) / self.attempts if self.attempts else float("nan")


def sample_conditioned_many(
    model: GWModel,
    n: int,
    count: int,
    seed: int,
    max_rejects: int = 10**4,
    workers: int | None = None,
    chunk: int = TASK_CHUNK,
) -> ConditionedSample:
    """``count`` i.i.d. size-``n`` trees.

    Work is split into tasks of ``chunk`` trees; task ``j`` uses
    ``task_rng(seed, j)``.  ``max_rejects`` bounds the attempts per accepted
    tree.
    """
    _check_size(model, n)
    args = []
    for j, start in enumerate(range(0, count, chunk)):
        m = min(chunk, count - start)
        args.append((model, n, m, seed, j, max_rejects * m))
    results = run_tasks(_task, args, workers)
    trees = [Tree(*raw) for part, _ in results for raw in part]
    return ConditionedSample(trees, sum(a for _, a in results))


# ---------------------------------------------------------------------------
# exact enumeration


def enumerate_trees(model: GWModel, n: int, budget: int = ENUM_BUDGET) -> WeightedTreeList:
    """All size-``n`` trees with positive probability and their exact probabilities."""
    out = WeightedTreeList()
    if n < 1:
        return out
    kernel = model.kernel
    types: list[int] = []
    counts: list[int] = []

    def grow(i: int, prob: float) -> None:
        if i == len(types):
            if i == n:
                if len(out.items) >= budget:
                    raise CountExceeded(f"more than {budget} trees of size {n}")
                out.items.append((Tree(tuple(types), tuple(counts)), prob))
            return
        room = n - len(types)
        for c, p in kernel[types[i]]:
            if len(c) > room:
                continue
            types.extend(c)
            counts.append(len(c))
            grow(i + 1, prob * p)
            counts.pop()
            del types[len(types) - len(c) :]

    for a, mu in enumerate(model.root_law):
        if mu > 0:
            types.append(a)
            grow(0, mu)
            types.pop()
    return out
