"""Multitype Galton-Watson models: alphabet, root law, ordered offspring kernel.

A model is built from plain Python data (or a JSON config) and is treated as
immutable afterwards.  Construction only checks structure (known symbols,
probabilities in ``[0, 1]``, no duplicate offspring strings); stochasticity,
the offspring cap and criticality are reported by :func:`validate_model`.

Types are stored internally as alphabet indices ``0..K-1``; labels only
matter at the I/O boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Hashable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    CriticalityViolation,
    InvalidParameter,
    InvalidSymbol,
    StochasticityViolation,
)

PROB_TOL = 1e-12
CRITICALITY_TOL = 1e-9


class VertexMark(NamedTuple):
    """``(type, offspring string)`` of a vertex, both as alphabet indices."""

    vtype: int
    offspring: tuple[int, ...]


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        if len(self.symbols) == 0:
            raise InvalidSymbol("alphabet must be non-empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise InvalidSymbol(f"duplicate symbols in alphabet {self.symbols!r}")
        if len({str(s) for s in self.symbols}) != len(self.symbols):
            raise InvalidSymbol(f"symbols collide after str(): {self.symbols!r}")

    def __len__(self) -> int:
        return len(self.symbols)

    @cached_property
    def _lookup(self) -> dict:
        table: dict[Hashable, int] = {}
        for i, s in enumerate(self.symbols):
            table[str(s)] = i
        for i, s in enumerate(self.symbols):
            table[s] = i
        return table

    def index(self, symbol) -> int:
        """Index of ``symbol``; the string form of a label is accepted too."""
        try:
            return self._lookup[symbol]
        except (KeyError, TypeError):
            pass
        try:
            return self._lookup[str(symbol)]
        except KeyError:
            raise InvalidSymbol(f"symbol {symbol!r} not in alphabet {self.symbols!r}") from None

    def label(self, index: int):
        return self.symbols[index]


def multiplicity(a, c: Sequence, alphabet: Alphabet | None = None) -> int:
    """Number of occurrences of type ``a`` in the offspring string ``c``.

    When an alphabet is given, ``a`` and every entry of ``c`` are checked
    against it (labels or indices are both accepted, but not mixed).
    """
    if alphabet is not None:
        a = alphabet.index(a)
        c = [alphabet.index(s) for s in c]
    return sum(1 for s in c if s == a)


@dataclass(frozen=True, eq=False)
class GWModel:
    """A multitype Galton-Watson specification.

    ``kernel[b]`` is a tuple of ``(children, p)`` pairs where ``children`` is
    a tuple of type indices; atoms with ``p == 0`` are dropped on build.
    """

    alphabet: Alphabet
    root_law: tuple[float, ...]
    kernel: tuple[tuple[tuple[tuple[int, ...], float], ...], ...]
    cap: int
    name: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        alphabet: Sequence,
        root_law: Mapping | Sequence[float],
        kernel: Mapping[Any, Any],
        cap: int,
        name: str = "custom",
        params: Mapping[str, Any] | None = None,
    ) -> "GWModel":
        """Build a model from labels.

        ``root_law`` is either a ``{label: p}`` mapping or a sequence aligned
        with ``alphabet``.  ``kernel`` maps a parent label to an iterable of
        ``(children_labels, p)`` pairs or a ``{children_tuple: p}`` mapping.
        """
        alpha = Alphabet(tuple(alphabet))
        if not isinstance(cap, (int, np.integer)) or isinstance(cap, bool) or cap < 1:
            raise InvalidParameter(f"cap must be a positive integer, got {cap!r}")
        k = len(alpha)
        if isinstance(root_law, Mapping):
            mu = [0.0] * k
            for sym, p in root_law.items():
                mu[alpha.index(sym)] = float(p)
        else:
            mu = [float(p) for p in root_law]
            if len(mu) != k:
                raise InvalidParameter(f"root law has {len(mu)} entries for {k} types")
        for p in mu:
            if not (0.0 <= p <= 1.0):
                raise InvalidParameter(f"root law probability {p} outside [0, 1]")

        rows: list[list] = [[] for _ in range(k)]
        seen: list[set] = [set() for _ in range(k)]
        for parent, entries in kernel.items():
            b = alpha.index(parent)
            items = entries.items() if isinstance(entries, Mapping) else entries
            for children, p in items:
                c = tuple(alpha.index(s) for s in children)
                p = float(p)
                if not (0.0 <= p <= 1.0):
                    raise InvalidParameter(
                        f"kernel probability {p} for parent {parent!r}, children {tuple(children)!r} outside [0, 1]"
                    )
                if c in seen[b]:
                    raise InvalidParameter(f"duplicate offspring string {tuple(children)!r} for parent {parent!r}")
                seen[b].add(c)
                if p > 0.0:
                    rows[b].append((c, p))
        return cls(
            alphabet=alpha,
            root_law=tuple(mu),
            kernel=tuple(tuple(r) for r in rows),
            cap=int(cap),
            name=name,
            params=dict(params or {}),
        )

    @property
    def n_types(self) -> int:
        return len(self.alphabet)

    @cached_property
    def marks(self) -> tuple[VertexMark, ...]:
        """Kernel support as marks, ordered by parent type then kernel order."""
        return tuple(VertexMark(b, c) for b, row in enumerate(self.kernel) for c, _ in row)

    @cached_property
    def mark_index(self) -> dict[VertexMark, int]:
        return {m: i for i, m in enumerate(self.marks)}

    @cached_property
    def mark_probs(self) -> np.ndarray:
        """``K{c | b}`` aligned with :attr:`marks`."""
        return np.array([p for row in self.kernel for _, p in row], dtype=float)

    @cached_property
    def mark_types(self) -> np.ndarray:
        return np.array([m.vtype for m in self.marks], dtype=int)

    @cached_property
    def mark_multiplicity(self) -> np.ndarray:
        """``mult[i, a]`` = occurrences of type ``a`` in the offspring of mark ``i``."""
        out = np.zeros((len(self.marks), self.n_types))
        for i, m in enumerate(self.marks):
            for a in m.offspring:
                out[i, a] += 1
        return out

    def kernel_prob(self, parent: int, children: tuple[int, ...]) -> float:
        i = self.mark_index.get(VertexMark(parent, tuple(children)))
        return 0.0 if i is None else float(self.mark_probs[i])

    @cached_property
    def sampling_tables(self) -> tuple[tuple[list[float], list[tuple[int, ...]]], ...]:
        """Per parent type: cumulative probabilities and the matching strings."""
        tables = []
        for row in self.kernel:
            cum, strings, acc = [], [], 0.0
            for c, p in row:
                acc += p
                cum.append(acc)
                strings.append(c)
            if cum:
                cum[-1] = max(cum[-1], 1.0)
            tables.append((cum, strings))
        return tuple(tables)

    @cached_property
    def root_cum(self) -> list[float]:
        cum = np.cumsum(self.root_law).tolist()
        cum[-1] = max(cum[-1], 1.0)
        return cum

    def label_string(self, c: Sequence[int]) -> str:
        return "".join(str(self.alphabet.label(a)) for a in c)

    def to_dict(self) -> dict:
        """JSON-ready config in the documented schema."""
        lab = self.alphabet.label
        return {
            "alphabet": [lab(i) for i in range(self.n_types)],
            "root_law": {str(lab(i)): p for i, p in enumerate(self.root_law) if p > 0},
            "cap": self.cap,
            "kernel": {
                str(lab(b)): [{"children": [lab(a) for a in c], "p": p} for c, p in row]
                for b, row in enumerate(self.kernel)
            },
        }


def mean_matrix(model: GWModel) -> np.ndarray:
    """``m[b, a]`` = expected number of type-``a`` children of a type-``b`` parent."""
    m = np.zeros((model.n_types, model.n_types))
    np.add.at(m, model.mark_types, model.mark_probs[:, None] * model.mark_multiplicity)
    return m


def spectral_radius(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def _reachable(adj: np.ndarray, sources) -> set[int]:
    seen = set(sources)
    stack = list(seen)
    while stack:
        b = stack.pop()
        for a in np.flatnonzero(adj[b]):
            a = int(a)
            if a not in seen:
                seen.add(a)
                stack.append(a)
    return seen


@dataclass
class ValidationReport:
    stochasticity: list[str]
    cap_violations: list[str]
    eigenvalue: float
    tol: float
    critical: bool
    reachable: tuple[int, ...]
    weakly_irreducible: bool
    strongly_irreducible: bool

    @property
    def ok(self) -> bool:
        return not self.stochasticity and not self.cap_violations and self.critical

    def lines(self, model: GWModel | None = None) -> list[str]:
        lab = (lambda i: model.alphabet.label(i)) if model is not None else (lambda i: i)
        out = [
            f"stochastic: {'yes' if not self.stochasticity else 'NO'}",
            *[f"  violation: {v}" for v in self.stochasticity],
            f"cap respected: {'yes' if not self.cap_violations else 'NO'}",
            *[f"  violation: {v}" for v in self.cap_violations],
            f"mean-matrix Perron eigenvalue: {self.eigenvalue:.15g}",
            f"critical (|lambda-1| <= {self.tol:g}): {'yes' if self.critical else 'NO'}",
            f"types reachable from root support: {[lab(a) for a in self.reachable]}",
            f"weakly irreducible: {'yes' if self.weakly_irreducible else 'no'}",
            f"strongly irreducible: {'yes' if self.strongly_irreducible else 'no'}",
            f"verdict: {'PASS' if self.ok else 'FAIL'}",
        ]
        return out


def validate_model(model: GWModel, tol: float = CRITICALITY_TOL, strict: bool = False) -> ValidationReport:
    """Check stochasticity, the offspring cap, criticality and irreducibility.

    Weak irreducibility means every type is reachable from the support of
    the root law in the digraph ``b -> a`` iff ``m[b, a] > 0``; strong
    irreducibility means that digraph is strongly connected.  With
    ``strict=True`` the first failing check raises instead.
    """
    lab = model.alphabet.label
    stoch = []
    mu_sum = sum(model.root_law)
    if abs(mu_sum - 1.0) > PROB_TOL:
        stoch.append(f"root law sums to {mu_sum!r}")
    for b, row in enumerate(model.kernel):
        s = sum(p for _, p in row)
        if abs(s - 1.0) > PROB_TOL:
            stoch.append(f"kernel row for parent {lab(b)!r} sums to {s!r}")
    caps = [
        f"parent {lab(b)!r} has offspring string of length {len(c)} > cap {model.cap}"
        for b, row in enumerate(model.kernel)
        for c, _ in row
        if len(c) > model.cap
    ]
    m = mean_matrix(model)
    lam = spectral_radius(m)
    adj = m > 0
    roots = [a for a, p in enumerate(model.root_law) if p > 0]
    reach = _reachable(adj, roots)
    strong = all(len(_reachable(adj, [a])) == model.n_types for a in range(model.n_types))
    report = ValidationReport(
        stochasticity=stoch,
        cap_violations=caps,
        eigenvalue=lam,
        tol=tol,
        critical=abs(lam - 1.0) <= tol,
        reachable=tuple(sorted(reach)),
        weakly_irreducible=len(reach) == model.n_types,
        strongly_irreducible=strong,
    )
    if strict:
        if stoch:
            raise StochasticityViolation("; ".join(stoch))
        if caps:
            raise InvalidParameter("; ".join(caps))
        if not report.critical:
            raise CriticalityViolation(f"mean-matrix Perron eigenvalue {lam!r} is not within {tol:g} of 1")
    return report


# ---------------------------------------------------------------------------
# built-in models


def mtdna_model(alpha: float) -> GWModel:
    """Two-type normal/mutant mtDNA model started from one normal (type 1).

    Each parent leaves no offspring with probability 1/2 and two ordered
    children with probability 1/2; a normal child of a normal mutates with
    probability ``alpha``, mutants only produce mutants.
    """
    if not (0.0 <= alpha <= 1.0):
        raise InvalidParameter(f"alpha must lie in [0, 1], got {alpha!r}")
    k_alpha = {1: {1: 1.0 - alpha, 0: alpha}, 0: {0: 1.0, 1: 0.0}}
    kernel = {}
    for parent in (0, 1):
        row = {(): 0.5}
        for a1 in (1, 0):
            for a2 in (1, 0):
                row[(a1, a2)] = 0.5 * k_alpha[parent][a1] * k_alpha[parent][a2]
        kernel[parent] = row
    return GWModel.build([0, 1], [0.0, 1.0], kernel, cap=2, name="mtdna", params={"alpha": float(alpha)})


def uniform_binary_model() -> GWModel:
    """Two types; no children w.p. 1/2, else two children of uniform type."""
    row = {(): 0.5, (0, 0): 0.125, (0, 1): 0.125, (1, 0): 0.125, (1, 1): 0.125}
    return GWModel.build([0, 1], [0.5, 0.5], {0: row, 1: dict(row)}, cap=2, name="uniform-binary")


def toy_cap1_model() -> GWModel:
    """Critical two-type single-child chain (never dies).

    Type 0 always has one type-1 child; type 1 has one child of either type.
    Useful as a tiny rate-function test case; trees are a.s. infinite, so it
    cannot be sampled.
    """
    kernel = {0: {(1,): 1.0}, 1: {(0,): 0.5, (1,): 0.5}}
    return GWModel.build([0, 1], [0.5, 0.5], kernel, cap=1, name="toy-cap1")


PRESETS = {
    "mtdna": mtdna_model,
    "uniform-binary": uniform_binary_model,
    "toy-cap1": toy_cap1_model,
}


# ---------------------------------------------------------------------------
# JSON config


def _field_error(path: str, msg: str) -> ConfigError:
    return ConfigError(f"{path}: {msg}")


def model_from_dict(cfg: Mapping, source: str = "<config>") -> GWModel:
    """Parse the documented JSON schema; the result is validated strictly
    for stochasticity (criticality is left to :func:`validate_model`)."""
    if not isinstance(cfg, Mapping):
        raise _field_error(source, "top level must be an object")
    for key in ("alphabet", "root_law", "cap", "kernel"):
        if key not in cfg:
            raise _field_error(f"{source}:{key}", "missing required field")
    alphabet = cfg["alphabet"]
    if not isinstance(alphabet, list) or not all(isinstance(s, (str, int)) for s in alphabet):
        raise _field_error(f"{source}:alphabet", "expected a list of strings or integers")
    root = cfg["root_law"]
    if not isinstance(root, Mapping):
        raise _field_error(f"{source}:root_law", "expected an object {symbol: probability}")
    known = {str(s) for s in alphabet}
    for sym, p in root.items():
        if str(sym) not in known:
            raise _field_error(f"{source}:root_law.{sym}", f"symbol {sym!r} not in alphabet")
        if not isinstance(p, (int, float)) or isinstance(p, bool):
            raise _field_error(f"{source}:root_law.{sym}", f"expected a number, got {p!r}")
    cap = cfg["cap"]
    if not isinstance(cap, int) or isinstance(cap, bool) or cap < 1:
        raise _field_error(f"{source}:cap", f"expected a positive integer, got {cap!r}")
    kern = cfg["kernel"]
    if not isinstance(kern, Mapping):
        raise _field_error(f"{source}:kernel", "expected an object {parent: [atoms]}")
    kernel = {}
    for parent, atoms in kern.items():
        if str(parent) not in known:
            raise _field_error(f"{source}:kernel.{parent}", f"parent {parent!r} not in alphabet")
        if not isinstance(atoms, list):
            raise _field_error(f"{source}:kernel.{parent}", "expected a list of atoms")
        entries = []
        for j, atom in enumerate(atoms):
            where = f"{source}:kernel.{parent}[{j}]"
            if not isinstance(atom, Mapping) or "children" not in atom or "p" not in atom:
                raise _field_error(where, 'expected {"children": [...], "p": number}')
            if not isinstance(atom["children"], list):
                raise _field_error(f"{where}.children", "expected a list")
            if len(atom["children"]) > cap:
                raise _field_error(f"{where}.children", f"{len(atom['children'])} children exceed cap {cap}")
            for s in atom["children"]:
                if str(s) not in known:
                    raise _field_error(f"{where}.children", f"symbol {s!r} not in alphabet")
            p = atom["p"]
            if not isinstance(p, (int, float)) or isinstance(p, bool):
                raise _field_error(f"{where}.p", f"expected a number, got {p!r}")
            entries.append((tuple(atom["children"]), p))
        kernel[parent] = entries
    try:
        model = GWModel.build(alphabet, root, kernel, cap, name=str(cfg.get("name", "custom")))
        rep = validate_model(model)
        if rep.stochasticity:
            raise StochasticityViolation("; ".join(rep.stochasticity))
        if rep.cap_violations:
            raise InvalidParameter("; ".join(rep.cap_violations))
    except (InvalidSymbol, InvalidParameter, StochasticityViolation) as exc:
        raise ConfigError(f"{source}: {type(exc).__name__}: {exc}") from exc
    return model


def load_model(path: str) -> GWModel:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read model config: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    return model_from_dict(cfg, source=path)
