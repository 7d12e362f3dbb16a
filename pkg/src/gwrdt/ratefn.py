"""Relative entropy, rate functions, log-MGFs and the rate-distortion curve.

All logarithms are natural (results are in nats).  ``INF`` is returned
explicitly wherever a rate is infinite by definition (a failed
shift-invariance gate, a distortion below ``d_min``, an unreachable ball);
it is never the product of an overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .distortion import DistortionTable
from .empirical import (
    MARKED_PAIR,
    PAIRED_MARKS,
    MarkMeasure,
    PairMeasure,
    ShiftDefect,
    reindex,
    shift_defect,
)
from .errors import CountExceeded, OptFailed
from .model import GWModel, VertexMark
from .spectral import PerronData, stationary_pair
from .trees import Tree, enumerate_trees, sample_conditioned_many, vertex_marks

INF = math.inf
SHIFT_TOL = 1e-9
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# relative entropy and the two rate functions


def rel_entropy(nu, mu) -> float:
    """``H(nu || mu) = sum nu log(nu / mu)`` with ``0 log 0 = 0``; ``INF`` if ``nu`` is not ``<< mu``."""
    if isinstance(nu, (MarkMeasure, PairMeasure)):
        nu = nu.weights
    if isinstance(mu, (MarkMeasure, PairMeasure)):
        mu = mu.weights
    if isinstance(nu, Mapping):
        terms = []
        for k, p in nu.items():
            if p <= 0:
                continue
            q = mu.get(k, 0.0)
            if q <= 0:
                return INF
            terms.append(p * math.log(p / q))
        return max(math.fsum(terms), 0.0)
    p = np.asarray(nu, dtype=float).ravel()
    q = np.asarray(mu, dtype=float).ravel()
    pos = p > 0
    if np.any(q[pos] <= 0):
        return INF
    return max(float(np.sum(p[pos] * np.log(p[pos] / q[pos]))), 0.0)


@dataclass
class RateValue:
    value: float
    argmin: PairMeasure | None = None
    defect: ShiftDefect | None = None
    residuals: dict = field(default_factory=dict)

    @property
    def is_infinite(self) -> bool:
        return self.value == INF


def _n_types(kx: GWModel, ky: GWModel) -> int:
    return max(kx.n_types, ky.n_types)


def rate_I1(nu: PairMeasure, kx: GWModel, ky: GWModel, tol: float = SHIFT_TOL) -> RateValue:
    """``H(nu || nu11 (x) Kx  x  nu21 (x) Ky)`` if ``nu`` is shift-invariant, else ``INF``."""
    nu = nu.as_view(MARKED_PAIR)
    defect = shift_defect(nu, _n_types(kx, ky))
    if defect.max_defect > tol:
        return RateValue(INF, None, defect)
    t1 = nu.marginal(0).type_marginal()
    t2 = nu.marginal(1).type_marginal()
    base = {}
    for (mx, my) in nu.weights:
        base[(mx, my)] = (
            t1.get(mx[0], 0.0) * kx.kernel_prob(mx[0], tuple(mx[1])) * t2.get(my[0], 0.0) * ky.kernel_prob(my[0], tuple(my[1]))
        )
    return RateValue(rel_entropy(nu.weights, base), nu, defect)


def rate_I2(omega: PairMeasure, kx: GWModel, ky: GWModel, tol: float = SHIFT_TOL) -> RateValue:
    """``H(omega || omega1 (x) Kx x Ky)`` on the paired-marks view, gated on shift-invariance."""
    omega = omega.as_view(PAIRED_MARKS)
    defect = shift_defect(reindex(omega), _n_types(kx, ky))
    if defect.max_defect > tol:
        return RateValue(INF, None, defect)
    w1 = omega.type_pair_marginal()
    base = {}
    for key in omega.weights:
        (a, b), (ca, cb) = key
        base[key] = w1[(a, b)] * kx.kernel_prob(a, tuple(ca)) * ky.kernel_prob(b, tuple(cb))
    return RateValue(rel_entropy(omega.weights, base), omega, defect)


# ---------------------------------------------------------------------------
# dense helpers over the kernel supports


def _type_onehot(model: GWModel) -> np.ndarray:
    out = np.zeros((len(model.marks), model.n_types))
    out[np.arange(len(model.marks)), model.mark_types] = 1.0
    return out


def dense_to_measure(nu: np.ndarray, kx: GWModel, ky: GWModel, floor: float = 0.0) -> PairMeasure:
    w = {}
    for i, mx in enumerate(kx.marks):
        for j, my in enumerate(ky.marks):
            if nu[i, j] > floor:
                w[(mx, my)] = float(nu[i, j])
    return PairMeasure(w, MARKED_PAIR)


def measure_to_dense(nu: PairMeasure, kx: GWModel, ky: GWModel) -> np.ndarray:
    """Dense table over the kernel supports; mass outside them raises ``KeyError``."""
    out = np.zeros((len(kx.marks), len(ky.marks)))
    for (mx, my), w in nu.as_view(MARKED_PAIR).weights.items():
        out[kx.mark_index[VertexMark(*mx)], ky.mark_index[VertexMark(*my)]] += w
    return out


def _constraints(kx: GWModel, ky: GWModel, rho: np.ndarray):
    """Rows of the linear constraints on the flattened joint table.

    One row per type of each coordinate (``own type - child multiplicity``,
    target 0), then the distortion row (target ``z``).
    """
    nx, ny = len(kx.marks), len(ky.marks)
    sx = _type_onehot(kx) - kx.mark_multiplicity  # (nx, Kx)
    sy = _type_onehot(ky) - ky.mark_multiplicity  # (ny, Ky)
    rows = []
    for a in range(kx.n_types):
        rows.append(np.repeat(sx[:, a], ny))
    for a in range(ky.n_types):
        rows.append(np.tile(sy[:, a], nx))
    rows.append(rho.ravel())
    return np.array(rows)


def _base(kx: GWModel, ky: GWModel, q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    bx = q1[kx.mark_types] * kx.mark_probs
    by = q2[ky.mark_types] * ky.mark_probs
    return np.outer(bx, by).ravel()


def _i_projection(base: np.ndarray, g: np.ndarray, h: np.ndarray, lam0: np.ndarray, tol: float = 1e-13, max_iter: int = 200):
    """``argmin H(nu || base)`` subject to ``g nu = h``, ``sum nu = 1``.

    Newton ascent on the concave dual ``lam . h - log sum base exp(g^T lam)``.
    Returns ``(nu, lam, kl, max_residual)``.
    """
    supp = base > 0
    logb = np.full(base.shape, -np.inf)
    logb[supp] = np.log(base[supp])
    gs = g[:, supp]
    lb = logb[supp]

    def dual(lam):
        s = lb + lam @ gs
        lz = logsumexp(s)
        return float(lam @ h - lz), np.exp(s - lz)

    lam = lam0.copy()
    val, p = dual(lam)
    resid = np.inf
    for _ in range(max_iter):
        mean = gs @ p
        grad = h - mean
        resid = float(np.max(np.abs(grad)))
        if resid <= tol:
            break
        cov = (gs * p) @ gs.T - np.outer(mean, mean)
        step = np.linalg.lstsq(cov + 1e-15 * np.eye(len(h)), grad, rcond=None)[0]
        t = 1.0
        while t > 1e-12:
            nval, np_ = dual(lam + t * step)
            if nval >= val - 1e-15:
                break
            t *= 0.5
        else:
            break
        lam = lam + t * step
        val, p = nval, np_
    nu = np.zeros(base.shape)
    nu[supp] = p
    mean = gs @ p
    resid = float(np.max(np.abs(h - mean)))
    kl = rel_entropy(nu, base)
    return nu, lam, kl, resid


def _feasible(g: np.ndarray, h: np.ndarray, n: int) -> bool:
    a_eq = np.vstack([g, np.ones((1, n))])
    b_eq = np.concatenate([h, [1.0]])
    res = linprog(np.zeros(n), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def _starts(kx: GWModel, ky: GWModel) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    if kx.alphabet == ky.alphabet:
        try:
            pd = stationary_pair(kx, ky, tol=1e-6)
            out.append((pd.pi1, pd.pi2))
        except Exception:
            pass
    out.append((np.full(kx.n_types, 1.0 / kx.n_types), np.full(ky.n_types, 1.0 / ky.n_types)))
    return out


def i_rho(
    z: float,
    model_x: GWModel,
    model_y: GWModel,
    rho: DistortionTable,
    tol: float = 1e-12,
    max_outer: int = 20000,
) -> RateValue:
    """Infimum of ``I1(nu)`` over shift-invariant ``nu`` with ``<rho, nu> = z``.

    Alternating minimization: for fixed type laws ``(q1, q2)`` the problem
    ``min H(nu || q1 (x) Kx  x  q2 (x) Ky)`` under the linear constraints is
    an exact I-projection (dual Newton); then ``(q1, q2)`` are reset to the
    type marginals of ``nu``, which minimizes the objective over the type
    laws.  Each step is monotone.  Runs from a couple of starting type laws
    and keeps the best.
    """
    r = rho.matrix
    if z < r.min() - 1e-15 or z > r.max() + 1e-15:
        return RateValue(INF)
    g = _constraints(model_x, model_y, r)
    h = np.zeros(g.shape[0])
    h[-1] = z
    if not _feasible(g, h, g.shape[1]):
        return RateValue(INF)
    nx, ny = len(model_x.marks), len(model_y.marks)
    tx, ty = _type_onehot(model_x), _type_onehot(model_y)
    best = None
    for q1, q2 in _starts(model_x, model_y):
        lam = np.zeros(g.shape[0])
        prev = np.inf
        for it in range(max_outer):
            base = _base(model_x, model_y, q1, q2)
            nu, lam, kl, resid = _i_projection(base, g, h, lam)
            table = nu.reshape(nx, ny)
            q1n = table.sum(axis=1) @ tx
            q2n = table.sum(axis=0) @ ty
            obj = rel_entropy(nu, _base(model_x, model_y, q1n, q2n))
            done = abs(prev - obj) <= tol * max(1.0, obj) and max(
                np.max(np.abs(q1n - q1)), np.max(np.abs(q2n - q2))
            ) <= 1e-10
            q1, q2, prev = q1n, q2n, obj
            if done:
                break
        if not math.isfinite(prev):
            continue
        if best is None or prev < best[0]:
            best = (prev, nu, resid, it + 1)
    if best is None:
        raise OptFailed(f"no start produced a finite objective at z={z}")
    value, nu, resid, iters = best
    table = nu.reshape(nx, ny)
    meas = dense_to_measure(table, model_x, model_y)
    defect = shift_defect(meas, _n_types(model_x, model_y))
    residuals = {
        "shift": defect.max_defect,
        "distortion": abs(float(np.sum(table * r)) - z),
        "mass": abs(float(table.sum()) - 1.0),
        "dual": resid,
        "outer_iterations": iters,
    }
    return RateValue(max(value, 0.0), meas, defect, residuals)


# ---------------------------------------------------------------------------
# log-moment generating functions


class LogMGF:
    """``scale * sum_o w_out[o] * log sum_i w_in[i] exp(t * r[o, i])``.

    Repeated values of ``r`` are pooled per outer row, so large tables of
    integer-valued total distortions evaluate quickly.
    """

    def __init__(self, w_out: np.ndarray, w_in: np.ndarray, r: np.ndarray, scale: float = 1.0):
        w_out = np.asarray(w_out, dtype=float)
        w_in = np.asarray(w_in, dtype=float)
        r = np.asarray(r, dtype=float)
        keep_o = w_out > 0
        keep_i = w_in > 0
        w_out, r = w_out[keep_o], r[keep_o][:, keep_i]
        w_in = w_in[keep_i]
        self.scale = float(scale)
        self.w_out = w_out / w_out.sum()
        w_in = w_in / w_in.sum()
        vals, inv = np.unique(np.round(r, 12), return_inverse=True)
        inv = inv.reshape(r.shape)
        mass = np.zeros((r.shape[0], len(vals)))
        for o in range(r.shape[0]):
            np.add.at(mass[o], inv[o], w_in)
        self.values = vals
        with np.errstate(divide="ignore"):
            self.log_mass = np.log(mass)
        self.row_min = np.array([vals[mass[o] > 0].min() for o in range(r.shape[0])])
        self.row_mean = mass @ vals

    def __call__(self, t: float) -> float:
        if t == 0:
            return 0.0  # log of the (normalized) inner mass
        s = t * self.values[None, :] + self.log_mass
        return self.scale * float(self.w_out @ logsumexp(s, axis=1))

    def deriv(self, t: float) -> float:
        s = t * self.values[None, :] + self.log_mass
        s = s - logsumexp(s, axis=1, keepdims=True)
        return self.scale * float(self.w_out @ (np.exp(s) @ self.values))

    def mean(self) -> float:
        """Derivative at ``t = 0``."""
        return self.scale * float(self.w_out @ self.row_mean)

    def slope_at_minus_inf(self) -> float:
        """``lim_{t -> -inf} value(t) / t``."""
        return self.scale * float(self.w_out @ self.row_min)


def _mark_law(model: GWModel, type_law: np.ndarray) -> np.ndarray:
    return np.asarray(type_law)[model.mark_types] * model.mark_probs


def lambda_inf_evaluator(pi: PerronData, kx: GWModel, ky: GWModel, rho: DistortionTable, order: str = "outer-y") -> LogMGF:
    """Limiting log-MGF as an evaluator.

    ``order="outer-y"`` (default) averages over codebook marks ``(pi2 (x) Ky)`` outside
    the log and takes the log-MGF over source marks ``(pi1 (x) Kx)`` inside;
    ``order="outer-x"`` exchanges the roles.
    """
    wx = _mark_law(kx, pi.pi1)
    wy = _mark_law(ky, pi.pi2)
    if order == "outer-y":
        return LogMGF(wy, wx, rho.matrix.T)
    if order == "outer-x":
        return LogMGF(wx, wy, rho.matrix)
    raise ValueError(f"order must be 'paper' or 'swapped', got {order!r}")


def lambda_inf(t: float, pi: PerronData, kx: GWModel, ky: GWModel, rho: DistortionTable, order: str = "outer-y") -> float:
    return lambda_inf_evaluator(pi, kx, ky, rho, order)(t)


def d_average(pi: PerronData, kx: GWModel, ky: GWModel, rho: DistortionTable) -> float:
    """Mean distortion of independent marks ``pi1 (x) Kx`` and ``pi2 (x) Ky``."""
    wx = _mark_law(kx, pi.pi1)
    wy = _mark_law(ky, pi.pi2)
    return float(wx @ rho.matrix @ wy)


def d_min_inf(pi: PerronData, kx: GWModel, ky: GWModel, rho: DistortionTable, order: str = "outer-y") -> float:
    """Slope of the limiting log-MGF at ``t -> -inf``."""
    return lambda_inf_evaluator(pi, kx, ky, rho, order).slope_at_minus_inf()


# ---------------------------------------------------------------------------
# finite-n quantities from exact enumeration


@dataclass
class ExactLaw:
    """Conditioned law of size-``n`` trees: trees, probabilities, mark-index array."""

    n: int
    trees: list[Tree]
    probs: np.ndarray
    marks: np.ndarray
    total: float


@lru_cache(maxsize=64)
def exact_law(model: GWModel, n: int, budget: int = 200_000) -> ExactLaw:
    wl = enumerate_trees(model, n, budget)
    if not wl.items:
        raise CountExceeded(f"no tree of size {n} has positive probability")
    trees = [t for t, _ in wl.items]
    probs = np.array([p for _, p in wl.items])
    return ExactLaw(n, trees, probs / probs.sum(), mark_array(trees, model), wl.total)


def mark_array(trees: Sequence[Tree], model: GWModel) -> np.ndarray:
    idx = model.mark_index
    return np.array([[idx[m] for m in vertex_marks(t)] for t in trees], dtype=int).reshape(len(trees), -1)


def total_distortion(mx: np.ndarray, my: np.ndarray, rho: DistortionTable) -> np.ndarray:
    """``D[i, j] = sum_v rho(x_i(v), y_j(v))`` for mark arrays ``(Tx, n)``, ``(Ty, n)``."""
    d = np.zeros((mx.shape[0], my.shape[0]))
    for v in range(mx.shape[1]):
        d += rho.matrix[mx[:, v][:, None], my[:, v][None, :]]
    return d


def lambda_n_evaluator(model_x: GWModel, model_y: GWModel, n: int, rho: DistortionTable) -> LogMGF:
    """Exact ``t -> (1/n) E_{P_n} log E_{Q_n} exp(t * n * rho_n(X, Y))``."""
    lx, ly = exact_law(model_x, n), exact_law(model_y, n)
    return LogMGF(lx.probs, ly.probs, total_distortion(lx.marks, ly.marks, rho), scale=1.0 / n)


@dataclass
class Estimate:
    value: float
    stderr: float
    samples: int


def _derived_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


def lambda_n(
    t: float,
    model_x: GWModel,
    model_y: GWModel,
    n: int,
    rho: DistortionTable,
    mode: str = "exact",
    samples: int = 1000,
    seed: int = 0,
    inner_samples: int = 10_000,
    workers: int | None = None,
):
    """Finite-``n`` log-MGF.  ``exact`` returns a float; ``mc`` an :class:`Estimate`.

    In ``mc`` mode the outer average over ``X ~ P_n`` is sampled; the inner
    expectation is exact when the size-``n`` codebook law can be enumerated
    and sampled otherwise.
    """
    if mode == "exact":
        return lambda_n_evaluator(model_x, model_y, n, rho)(t)
    if mode != "mc":
        raise ValueError(f"mode must be 'exact' or 'mc', got {mode!r}")
    xs = sample_conditioned_many(model_x, n, samples, _derived_seed(seed, 0), workers=workers).trees
    mx = mark_array(xs, model_x)
    try:
        ly = exact_law(model_y, n)
        my, qy = ly.marks, ly.probs
    except CountExceeded:
        ys = sample_conditioned_many(model_y, n, inner_samples, _derived_seed(seed, 1), workers=workers).trees
        my, qy = mark_array(ys, model_y), np.full(len(ys), 1.0 / len(ys))
    if t == 0:
        return Estimate(0.0, 0.0, len(xs))
    d = total_distortion(mx, my, rho)
    vals = logsumexp(t * d, b=qy[None, :], axis=1) / n
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan, len(vals))


def d_min_n(
    model_x: GWModel,
    model_y: GWModel,
    n: int,
    rho: DistortionTable,
    mode: str = "exact",
    samples: int = 1000,
    seed: int = 0,
    workers: int | None = None,
):
    """``E_{P_n}[ min_{y in supp Q_n} rho_n(X, y) ]``; ``mc`` samples the outer ``X``."""
    ly = exact_law(model_y, n)
    if mode == "exact":
        lx = exact_law(model_x, n)
        d = total_distortion(lx.marks, ly.marks, rho)
        return float(lx.probs @ d.min(axis=1)) / n
    xs = sample_conditioned_many(model_x, n, samples, _derived_seed(seed, 0), workers=workers).trees
    d = total_distortion(mark_array(xs, model_x), ly.marks, rho).min(axis=1) / n
    return Estimate(float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else math.nan, len(d))


# ---------------------------------------------------------------------------
# Legendre transform


def _deriv_fn(lam) -> Callable[[float], float]:
    if hasattr(lam, "deriv"):
        return lam.deriv
    h = 1e-6
    return lambda t: (lam(t + h) - lam(t - h)) / (2 * h)


def rd_function(d: float, lam, d_min: float, d_av: float, tol: float = 1e-12, t_floor: float = -1e8) -> float:
    """``sup_{t <= 0} [t d - lam(t)]`` with ``INF`` below ``d_min`` and ``0`` from ``d_av`` on.

    The supremum is restricted to ``t <= 0`` because the distortion ball is
    the lower set ``{rho <= d}``.  The maximizer is bracketed by doubling,
    located by golden-section search and refined by bisection on the
    derivative.
    """
    if d < d_min:
        return INF
    if d >= d_av:
        return 0.0
    dlam = _deriv_fn(lam)

    def g(t):
        v = t * d - lam(t)
        if not math.isfinite(v):
            raise OptFailed(f"non-finite objective at t={t}")
        return v

    lo = -1.0
    while d - dlam(lo) <= 0.0:
        lo *= 2.0
        if lo < t_floor:
            # d sits at (or numerically on) the slope limit: the sup is the limit at -inf
            return max(g(t_floor), 0.0)
    hi = 0.0
    a, b = lo, hi
    c1 = b - GOLDEN * (b - a)
    c2 = a + GOLDEN * (b - a)
    g1, g2 = g(c1), g(c2)
    while b - a > 1e-4 * max(1.0, abs(a)):
        if g1 < g2:
            a, c1, g1 = c1, c2, g2
            c2 = a + GOLDEN * (b - a)
            g2 = g(c2)
        else:
            b, c2, g2 = c2, c1, g1
            c1 = b - GOLDEN * (b - a)
            g1 = g(c1)
    if d - dlam(a) >= 0.0 >= d - dlam(b):
        for _ in range(200):
            mid = 0.5 * (a + b)
            if d - dlam(mid) > 0.0:
                a = mid
            else:
                b = mid
            if b - a <= tol * max(1.0, abs(a)):
                break
        t_star = 0.5 * (a + b)
    else:
        t_star = c1 if g1 >= g2 else c2
    return max(g(t_star), 0.0)


def legendre_n(d: float, model_x: GWModel, model_y: GWModel, n: int, rho: DistortionTable) -> float:
    """Exact finite-``n`` rate ``R_n(d)`` via the Legendre transform of ``lambda_n``."""
    ev = lambda_n_evaluator(model_x, model_y, n, rho)
    return rd_function(d, ev, ev.slope_at_minus_inf(), ev.mean())


def mtdna_threshold(alpha: float) -> float:
    return 0.75 * (1.0 - alpha) + 0.25 * alpha * (1.0 - alpha) ** 3


@dataclass
class RDSummary:
    d_min: float
    d_av: float
    curve: list[tuple[float, float]]
    lambda_samples: list[tuple[float, float]]
    d_min_n: list[tuple[int, float]] = field(default_factory=list)
    d_min_inf_proxy: float | None = None
    threshold: float | None = None
    notes: list[str] = field(default_factory=list)


def rd_summary(
    model_x: GWModel,
    model_y: GWModel,
    rho: DistortionTable,
    grid: Sequence[float],
    t_grid: Sequence[float] = tuple(np.linspace(-5.0, 5.0, 21)),
    n_list: Sequence[int] = (),
    order: str = "outer-y",
) -> RDSummary:
    """Limiting rate-distortion curve plus the finite-``n`` ``d_min`` trend.

    ``d_min_inf_proxy`` is the smallest grid point where every computed
    ``R_n`` is finite (``R_n(d) < inf`` iff ``d >= d_min^(n)``); it is a
    finite-``n`` proxy only.
    """
    pi = stationary_pair(model_x, model_y)
    ev = lambda_inf_evaluator(pi, model_x, model_y, rho, order)
    dmin = ev.slope_at_minus_inf()
    dav = d_average(pi, model_x, model_y, rho)
    curve = [(float(d), rd_function(float(d), ev, dmin, dav)) for d in grid]
    lam = [(float(t), ev(float(t))) for t in t_grid]
    dmn = []
    for n in n_list:
        try:
            dmn.append((int(n), d_min_n(model_x, model_y, int(n), rho)))
        except CountExceeded:
            continue
    proxy = None
    if dmn:
        worst = max(v for _, v in dmn)
        ok = [float(d) for d in grid if d >= worst - 1e-12]
        proxy = min(ok) if ok else None
    thr = None
    if model_x.name == "mtdna" and model_y.name == "mtdna" and model_x.params == model_y.params:
        thr = mtdna_threshold(model_x.params["alpha"])
    notes = [
        "R(d) = sup over t <= 0 of [t d - Lambda(t)], clamped to 0 for d >= d_av (one-sided distortion ball)",
        "d_av is the mean distortion Lambda'(0); logs are natural (nats)",
    ]
    return RDSummary(dmin, dav, curve, lam, dmn, proxy, thr, notes)
