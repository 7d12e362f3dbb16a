"""Independent reference computations used by the tests.

Nothing here imports the rate-function or spectral code under test; the
oracles work from first principles (closed forms, brute-force grids,
polynomial root finding).
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import null_space


# ---------------------------------------------------------------------------
# i_rho on the cap-1 toy model with type Hamming distortion
#
# Marks: (0,(1)), (1,(0)), (1,(1)).  A single-process mark law (w0, w10, w11)
# is shift-invariant iff w0 = w10 = s, w11 = 1 - 2s with s in [0, 1/2]; its
# divergence from (type marginal) x kernel is h(s) below.  Type Hamming only
# sees the type coupling, so the mutual-information part of I_1 collapses
# (data processing, with equality for couplings conditionally independent
# given the types) to the KL divergence of a 2x2 type coupling with
# marginals (s, 1-s), (s', 1-s') and P(types differ) = z from the product.


def _xlogy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    pos = np.broadcast_to(x > 0, out.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = x * np.log(x / y)
    out[pos] = np.broadcast_to(val, out.shape)[pos]
    return out


def toy_h(s):
    s = np.asarray(s, dtype=float)
    return _xlogy(s, (1 - s) / 2) + _xlogy(1 - 2 * s, (1 - s) / 2)


def toy_i_rho_grid(z: float, step: float = 1e-3) -> float:
    s = np.arange(0.0, 0.5 + step / 2, step)
    s1, s2 = np.meshgrid(s, s, indexing="ij")
    x00 = (s1 + s2 - z) / 2
    x01 = s1 - x00
    x10 = s2 - x00
    x11 = 1 - s1 - s2 + x00
    ok = (x00 >= -1e-15) & (x01 >= -1e-15) & (x10 >= -1e-15) & (x11 >= -1e-15)
    cells = [np.clip(c, 0, None) for c in (x00, x01, x10, x11)]
    prods = [s1 * s2, s1 * (1 - s2), (1 - s1) * s2, (1 - s1) * (1 - s2)]
    kl = sum(_xlogy(c, p) for c, p in zip(cells, prods))
    total = toy_h(s1) + toy_h(s2) + kl
    total = np.where(ok, total, np.inf)
    return float(total.min())


# ---------------------------------------------------------------------------
# dominant eigenvalue of a 3x3 nonnegative matrix via its characteristic polynomial


def char_poly_3(m: np.ndarray):
    a = np.asarray(m, dtype=float)
    tr = a[0, 0] + a[1, 1] + a[2, 2]
    minors = (
        a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
        + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    )
    det = (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )
    return lambda x: x**3 - tr * x**2 + minors * x - det


def dominant_root_3(m: np.ndarray, scan: int = 20000) -> float:
    """Largest real root, located by scanning down from the max row sum and bisecting."""
    p = char_poly_3(m)
    hi = float(np.max(np.sum(m, axis=1))) + 1e-9
    lo_bound = 0.0
    xs = np.linspace(hi, lo_bound, scan)
    prev = xs[0]
    for x in xs[1:]:
        if p(x) <= 0 < p(prev) or p(x) == 0:
            lo, up = x, prev
            break
        prev = x
    else:
        raise AssertionError("no sign change found")
    for _ in range(200):
        mid = 0.5 * (lo + up)
        if p(mid) > 0:
            up = mid
        else:
            lo = mid
    return 0.5 * (lo + up)


# ---------------------------------------------------------------------------
# random shift-invariant mark laws of one model


def shift_constraint_matrix(marks, n_types: int) -> np.ndarray:
    """Rows: for each type a, ``sum_m [type(m)=a] w_m - sum_m mult(a, c_m) w_m``; plus a mass row."""
    rows = []
    for a in range(n_types):
        rows.append([float(m[0] == a) - sum(1 for x in m[1] if x == a) for m in marks])
    rows.append([1.0] * len(marks))
    return np.array(rows)


def random_shift_invariant(marks, n_types: int, anchor: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A random point of the shift-invariant simplex slice through ``anchor``.

    Moves from ``anchor`` (assumed shift-invariant and strictly positive)
    along a random null-space direction of the constraints, staying inside
    the simplex.
    """
    g = shift_constraint_matrix(marks, n_types)
    ns = null_space(g)
    if ns.shape[1] == 0:
        return anchor.copy()
    d = ns @ rng.normal(size=ns.shape[1])
    neg = d < 0
    tmax = np.min(-anchor[neg] / d[neg]) if np.any(neg) else 1.0
    t = rng.uniform(0.0, 0.95) * tmax
    w = anchor + t * d
    return np.clip(w, 0.0, None) / np.clip(w, 0.0, None).sum()


def kl(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pos = p > 0
    if np.any(q[pos] <= 0):
        return math.inf
    return float(np.sum(p[pos] * np.log(p[pos] / q[pos])))
