"""Pair matrix of two offspring kernels and its Perron-Frobenius data."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AlphabetMismatch, DegenerateMatrix, NoConvergence, NotCritical
from .model import CRITICALITY_TOL, GWModel

PERRON_TOL = 1e-12
PERRON_MAX_ITERS = 10**5


@dataclass
class PairMatrix:
    """``entries[(a, a2), (b, b2)] = sum m(a,c) m(a2,c2) Kx{c|b} Ky{c2|b2}``.

    Rows are indexed by the child type pair, columns by the parent type
    pair; pair ``(a, a2)`` sits at index ``a * n_types + a2``.
    """

    entries: np.ndarray
    n_types: int

    @property
    def pairs(self) -> list[tuple[int, int]]:
        k = self.n_types
        return [(a, b) for a in range(k) for b in range(k)]

    def display(self) -> np.ndarray:
        """Rows indexed by the parent pair ``(b, b2)``: the transpose of :attr:`entries`."""
        return self.entries.T


@dataclass
class PerronData:
    eigenvalue: float
    pi: np.ndarray
    orientation: str
    iterations: int
    residual: float
    unique: bool = True
    pi1: np.ndarray | None = None
    pi2: np.ndarray | None = None


def pair_matrix(kx: GWModel, ky: GWModel) -> PairMatrix:
    if kx.alphabet != ky.alphabet:
        raise AlphabetMismatch(f"{kx.alphabet.symbols!r} != {ky.alphabet.symbols!r}")
    k = kx.n_types
    a = np.zeros((k, k, k, k))
    # literal sum over offspring-string pairs (c, c2) of the two kernels
    for i, mx in enumerate(kx.marks):
        px = kx.mark_probs[i] * kx.mark_multiplicity[i]
        for j, my in enumerate(ky.marks):
            py = ky.mark_probs[j] * ky.mark_multiplicity[j]
            a[:, :, mx.vtype, my.vtype] += np.outer(px, py)
    return PairMatrix(a.reshape(k * k, k * k), k)


def perron(
    m,
    orientation: str = "right",
    tol: float = PERRON_TOL,
    max_iters: int = PERRON_MAX_ITERS,
) -> PerronData:
    """Dominant eigenpair of a nonnegative matrix by normalized power iteration.

    ``orientation="right"`` solves ``M v = lam v``, ``"left"`` solves
    ``v M = lam v``.  Iteration starts from the uniform vector; if the
    residual stalls (periodic or nearly periodic spectra) it restarts on
    ``M + s I`` with a growing shift ``s``, which has the same Perron vector.
    A :class:`PairMatrix` input also gets the coordinate marginals of ``pi``.
    """
    pm = m if isinstance(m, PairMatrix) else None
    mat = np.asarray(pm.entries if pm is not None else m, dtype=float)
    if orientation not in ("left", "right"):
        raise ValueError(f"orientation must be 'left' or 'right', got {orientation!r}")
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(mat < 0) or not np.all(np.isfinite(mat)):
        raise ValueError("matrix must be nonnegative and finite")
    if not np.any(mat):
        raise DegenerateMatrix("zero matrix has no Perron vector")
    b = mat.T if orientation == "left" else mat
    dim = b.shape[0]
    v = np.full(dim, 1.0 / dim)
    shift = 0.0
    checkpoint = np.inf
    resid = np.inf
    lam = 0.0
    it = 0
    for it in range(1, max_iters + 1):
        w = b @ v + shift * v
        s = w.sum()
        if s <= 0:
            raise DegenerateMatrix("iterate collapsed to zero (nilpotent direction)")
        v = w / s
        bv = b @ v
        lam = bv.sum()
        resid = float(np.max(np.abs(bv - lam * v)))
        if resid <= tol:
            break
        if it % 500 == 0:
            if resid > 0.5 * checkpoint:
                shift = max(2.0 * shift, float(np.abs(b).sum(axis=1).mean()))
            checkpoint = resid
    else:
        raise NoConvergence(f"power iteration did not reach {tol:g} in {max_iters} iterations", residual=resid)

    unique = True
    if dim <= 512:
        ev = np.linalg.eigvals(b)
        if np.sum(np.abs(ev - lam) <= 1e-8 * max(1.0, abs(lam))) > 1:
            unique = False
            warnings.warn(
                f"Perron eigenvalue {lam:.12g} is not simple; returned the limit from the uniform start",
                RuntimeWarning,
                stacklevel=2,
            )
    out = PerronData(float(lam), v, orientation, it, resid, unique)
    if pm is not None:
        grid = v.reshape(pm.n_types, pm.n_types)
        out.pi1 = grid.sum(axis=1)
        out.pi2 = grid.sum(axis=0)
    return out


def stationary_pair(model_x: GWModel, model_y: GWModel, tol: float = CRITICALITY_TOL) -> PerronData:
    """Probability-normalized right Perron vector of the parent-pair-row matrix.

    For the mtDNA kernel this is the uniform vector on type pairs.  Its
    first and second marginals are returned as ``pi1`` and ``pi2``.
    """
    pm = pair_matrix(model_x, model_y)
    shown = PairMatrix(pm.display(), pm.n_types)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pd = perron(shown, orientation="right")
    if abs(pd.eigenvalue - 1.0) > tol:
        raise NotCritical(f"pair-matrix Perron eigenvalue {pd.eigenvalue!r} differs from 1 by more than {tol:g}")
    return pd


def left_pair_vector(model_x: GWModel, model_y: GWModel) -> PerronData:
    """The other orientation: left Perron vector of the parent-pair-row matrix."""
    pm = pair_matrix(model_x, model_y)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return perron(PairMatrix(pm.display(), pm.n_types), orientation="left")
