"""Desk-scale checks of the lossy AEP and the empirical-measure LDPs.

Each experiment returns a :class:`Report`: a flat table of raw numbers plus
a summary whose verdicts are computed from those numbers only, so the
CSV/JSON outputs are enough to reproduce every verdict.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distortion import DistortionTable
from .empirical import joint_measure
from .errors import CountExceeded, InvalidParameter
from .model import GWModel
from .ratefn import (
    INF,
    _derived_seed,
    d_average,
    exact_law,
    i_rho,
    mark_array,
    lambda_inf_evaluator,
    lambda_n_evaluator,
    rd_function,
    total_distortion,
)
from .spectral import left_pair_vector, stationary_pair
from .trees import Tree, sample_conditioned_many, tree_to_text, vertex_marks

WILSON_Z = 1.959963984540054


@dataclass
class BallExponent:
    n: int
    d: float
    exponent: float | None
    method: str
    stderr: float | None
    x_digest: str
    prob: float
    censored: bool = False
    lower_bound: float | None = None
    hits: int | None = None
    samples: int | None = None


@dataclass
class Report:
    kind: str
    columns: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)


def wilson_interval(hits: int, total: int, z: float = WILSON_Z) -> tuple[float, float]:
    p = hits / total
    denom = 1.0 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total))
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == total else min(1.0, centre + half)
    return lo, hi


def _x_marks(x: Tree, rho: DistortionTable) -> np.ndarray:
    idx = {m: i for i, m in enumerate(rho.marks_x)}
    return np.array([[idx[m] for m in vertex_marks(x)]], dtype=int)


def ball_exponent(
    x: Tree,
    d: float,
    model_y: GWModel,
    rho: DistortionTable,
    mode: str = "exact",
    samples: int = 100_000,
    seed: int = 0,
    workers: int | None = None,
) -> BallExponent:
    """``-(1/n) log Q_n(B(x, d))`` for the ball ``{y : rho_n(x, y) <= d}``."""
    n = x.n
    mx = _x_marks(x, rho)
    digest = tree_to_text(x, model_y.alphabet)
    cut = n * d + 1e-9
    if mode == "exact":
        ly = exact_law(model_y, n)
        dist = total_distortion(mx, ly.marks, rho)[0]
        inside = ly.probs[dist <= cut]
        q = float(inside.sum()) / float(ly.probs.sum()) if len(inside) < len(ly.probs) else 1.0
        expo = INF if q == 0.0 else (0.0 if q == 1.0 else -math.log(q) / n)
        return BallExponent(n, d, expo, "exact", None, digest, q)
    if mode != "mc":
        raise ValueError(f"mode must be 'exact' or 'mc', got {mode!r}")
    ys = sample_conditioned_many(model_y, n, samples, seed, workers=workers).trees
    dist = total_distortion(mx, mark_array(ys, model_y), rho)[0]
    hits = int(np.sum(dist <= cut))
    lo, hi = wilson_interval(hits, samples)
    if hits == 0:
        lb = INF if hi == 0.0 else -math.log(hi) / n
        return BallExponent(n, d, None, "mc", None, digest, 0.0, True, lb, hits, samples)
    p = hits / samples
    expo = 0.0 if hits == samples else -math.log(p) / n
    se_p = (hi - lo) / (2 * WILSON_Z)
    return BallExponent(n, d, expo, "mc", se_p / (n * p), digest, p, False, None, hits, samples)


def _nonincreasing(vals: Sequence[float], slack: float = 1e-12) -> bool:
    return all(b <= a + slack for a, b in zip(vals, vals[1:]))


def _fmt_n_list(n_list) -> list[int]:
    return [int(n) for n in n_list]


def verify_aep(
    model_x: GWModel,
    model_y: GWModel,
    rho: DistortionTable,
    d: float,
    n_list: Sequence[int],
    trees_per_n: int,
    samples: int = 100_000,
    seed: int = 0,
    workers: int | None = None,
) -> Report:
    """Ball exponents of ``P_n``-sampled trees against ``Lambda_n*(d)`` and ``R(d)``.

    Exponents are exact whenever the size-``n`` codebook law can be
    enumerated and Monte Carlo otherwise.  Verdict: the median gap
    ``|exponent - Lambda_n*(d)|`` is nonincreasing in ``n``.
    """
    pi = stationary_pair(model_x, model_y)
    ev = lambda_inf_evaluator(pi, model_x, model_y, rho)
    dmin, dav = ev.slope_at_minus_inf(), d_average(pi, model_x, model_y, rho)
    r_inf = rd_function(d, ev, dmin, dav)
    rows = []
    medians = []
    per_n = []
    for n in _fmt_n_list(n_list):
        xs = sample_conditioned_many(model_x, n, trees_per_n, _derived_seed(seed, n), workers=workers).trees
        try:
            evn = lambda_n_evaluator(model_x, model_y, n, rho)
            rn = rd_function(d, evn, evn.slope_at_minus_inf(), evn.mean())
            exact = True
        except CountExceeded:
            rn, exact = None, False
        gaps = []
        for k, x in enumerate(xs):
            if exact:
                be = ball_exponent(x, d, model_y, rho, "exact")
            else:
                be = ball_exponent(x, d, model_y, rho, "mc", samples, _derived_seed(seed, n, k), workers)
            gap = None
            if rn is not None and be.exponent is not None:
                gap = abs(be.exponent - rn)
                gaps.append(gap)
            rows.append([n, k, be.x_digest, be.method, be.prob, be.exponent, be.stderr, be.lower_bound, rn, r_inf, gap])
        med = float(np.median(gaps)) if gaps else None
        medians.append(med)
        per_n.append({"n": n, "median_gap": med, "lambda_n_star": rn, "exact": exact})
    finite = [m for m in medians if m is not None]
    summary = {
        "d": d,
        "d_min": dmin,
        "d_av": dav,
        "regime": "interior" if dmin < d < dav else ("at-or-above-d_av" if d >= dav else "below-d_min"),
        "R_d": r_inf,
        "per_n": per_n,
        "verdict_median_gap_nonincreasing": _nonincreasing(finite) if len(finite) == len(medians) else None,
    }
    cols = ["n", "tree", "x", "method", "q_ball", "exponent", "stderr", "lower_bound", "lambda_n_star", "R_d", "gap"]
    return Report("verify-aep", cols, rows, summary)


def ldp_decay(
    model_x: GWModel,
    model_y: GWModel,
    rho: DistortionTable,
    interval: tuple[float, float],
    n_list: Sequence[int],
    samples: int = 100_000,
    seed: int = 0,
    z_points: int = 9,
    workers: int | None = None,
) -> Report:
    """Decay of ``P{rho_n(x, Y) in [lo, hi]}`` for a fixed ``P_n``-sampled ``x``.

    The probability is exact where ``Q_n`` can be enumerated and sampled
    otherwise; zero-hit samples are censored and only yield lower bounds.
    The reference is the infimum of ``i_rho`` over a grid on the interval.
    """
    lo, hi = map(float, interval)
    if not lo < hi:
        raise InvalidParameter(f"interval must satisfy lo < hi, got ({lo}, {hi})")
    pi = stationary_pair(model_x, model_y)
    dav = d_average(pi, model_x, model_y, rho)
    zs = list(np.linspace(lo, hi, z_points))
    if lo <= dav <= hi:
        zs.append(dav)
    vals = [i_rho(z, model_x, model_y, rho).value for z in zs]
    ref = min(vals)
    rows = []
    rates = []
    for n in _fmt_n_list(n_list):
        x = sample_conditioned_many(model_x, n, 1, _derived_seed(seed, n), workers=workers).trees[0]
        mx = _x_marks(x, rho)
        try:
            ly = exact_law(model_y, n)
            dist = total_distortion(mx, ly.marks, rho)[0] / n
            mask = (dist >= lo - 1e-12) & (dist <= hi + 1e-12)
            p = float(ly.probs[mask].sum() / ly.probs.sum())
            rate = INF if p == 0.0 else -math.log(p) / n
            rows.append([n, tree_to_text(x, model_x.alphabet), "exact", p, rate, False, None])
            rates.append(rate)
        except CountExceeded:
            ys = sample_conditioned_many(model_y, n, samples, _derived_seed(seed, n, 1), workers=workers).trees
            dist = total_distortion(mx, mark_array(ys, model_y), rho)[0] / n
            hits = int(np.sum((dist >= lo - 1e-12) & (dist <= hi + 1e-12)))
            if hits == 0:
                _, up = wilson_interval(0, samples)
                rows.append([n, tree_to_text(x, model_x.alphabet), "mc", 0.0, None, True, -math.log(up) / n])
            else:
                p = hits / samples
                rate = -math.log(p) / n
                rows.append([n, tree_to_text(x, model_x.alphabet), "mc", p, rate, False, None])
                rates.append(rate)
    summary = {
        "interval": [lo, hi],
        "d_av": dav,
        "i_rho_grid": [[float(z), v] for z, v in zip(zs, vals)],
        "i_rho_inf": ref,
        "last_rate": rates[-1] if rates else None,
        "gap_last": abs(rates[-1] - ref) if rates and math.isfinite(rates[-1]) else None,
    }
    cols = ["n", "x", "method", "p_n", "rate", "censored", "rate_lower_bound"]
    return Report("ldp-decay", cols, rows, summary)


def _tv(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def stationarity_check(
    model_x: GWModel,
    model_y: GWModel,
    n_list: Sequence[int],
    samples: int,
    seed: int = 0,
    workers: int | None = None,
) -> Report:
    """Distance of the averaged type-pair law of ``L_n`` to both Perron candidates.

    The right candidate is the vector used by the rate functions (uniform for
    mtDNA), the left one the stationary type-pair law of the pair matrix.
    """
    k = model_x.n_types
    right = stationary_pair(model_x, model_y).pi
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        left = left_pair_vector(model_x, model_y).pi
    rows = []
    for n in _fmt_n_list(n_list):
        xs = sample_conditioned_many(model_x, n, samples, _derived_seed(seed, n, 0), workers=workers).trees
        ys = sample_conditioned_many(model_y, n, samples, _derived_seed(seed, n, 1), workers=workers).trees
        acc = np.zeros(k * k)
        for x, y in zip(xs, ys):
            for (a, b), w in joint_measure(x, y).type_pair_marginal().items():
                acc[a * k + b] += w
        acc /= len(xs)
        rows.append([n, len(xs), _tv(acc, right), _tv(acc, left), *acc.tolist()])
    last = rows[-1]
    dr = [r[2] for r in rows]
    dl = [r[3] for r in rows]
    summary = {
        "right_candidate": right.tolist(),
        "left_candidate": left.tolist(),
        "favoured_at_largest_n": "right" if last[2] < last[3] else ("left" if last[3] < last[2] else "tie"),
        "right_distance_nonincreasing": _nonincreasing(dr),
        "left_distance_nonincreasing": _nonincreasing(dl),
    }
    pairs = [f"mass_{model_x.alphabet.label(a)}{model_y.alphabet.label(b)}" for a in range(k) for b in range(k)]
    return Report("stationarity", ["n", "samples", "tv_right", "tv_left", *pairs], rows, summary)

