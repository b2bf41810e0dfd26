"""Globally adaptive Gauss-Legendre quadrature over boxes (d = 1 or 2).

The integrand must be vectorised: it receives an (m, d) array of points and
returns an (m,) array of values. Each panel is scored with a low/high order
rule pair; the worst panels are bisected until the summed error estimate
drops below ``max(abs_tol, rel_tol * |integral|)``.

Initial panels are laid out from caller-supplied breakpoints (component
means plus a few multiples of each component's standard deviation), so
narrow spikes inside a wide box are resolved from the start instead of
being hunted for by bisection.
"""

from __future__ import annotations

import heapq
from functools import lru_cache
from itertools import count
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import QuadratureError

_ORDER_LO_1D, _ORDER_HI_1D = 15, 31
_ORDER_LO_2D, _ORDER_HI_2D = 8, 16
_SPLIT_BATCH = 16


@lru_cache(maxsize=None)
def _rule(n: int):
    x, w = leggauss(n)
    return x, w


def _clean_breaks(breaks: Sequence[float], lo: float, hi: float) -> np.ndarray:
    """Sorted unique breakpoints spanning [lo, hi]."""
    b = np.asarray(list(breaks) + [lo, hi], dtype=float)
    b = b[(b >= lo) & (b <= hi)]
    b = np.unique(b)
    scale = max(hi - lo, 1e-300)
    keep = [b[0]]
    for v in b[1:]:
        if v - keep[-1] > 1e-12 * scale:
            keep.append(v)
    keep[-1] = hi
    if len(keep) == 1:
        keep = [lo, hi]
    return np.asarray(keep)


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    breakpoints: Sequence[float] = (),
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-15,
    max_panels: int = 20000,
) -> tuple[float, float]:
    """Integrate f over [lo, hi]; returns (value, error_bound)."""
    if not hi > lo:
        raise ValueError(f"empty integration interval [{lo}, {hi}]")
    xl, wl = _rule(_ORDER_LO_1D)
    xh, wh = _rule(_ORDER_HI_1D)
    n_lo = len(xl)

    def eval_panels(edges: list[tuple[float, float]]):
        """One vectorised f call for a batch of panels; returns (vals, errs)."""
        pts = np.concatenate(
            [np.concatenate([(b - a) / 2 * xl + (a + b) / 2, (b - a) / 2 * xh + (a + b) / 2]) for a, b in edges]
        )
        fv = np.asarray(f(pts[:, None]), dtype=float)
        vals, errs = [], []
        stride = n_lo + len(xh)
        for j, (a, b) in enumerate(edges):
            h = (b - a) / 2
            block = fv[j * stride : (j + 1) * stride]
            i_lo = h * block[:n_lo] @ wl
            i_hi = h * block[n_lo:] @ wh
            vals.append(i_hi)
            errs.append(abs(i_hi - i_lo))
        return vals, errs

    b = _clean_breaks(breakpoints, lo, hi)
    edges = list(zip(b[:-1], b[1:]))
    vals, errs = eval_panels(edges)
    tick = count()
    heap = [(-e, next(tick), a, b, v, e) for (a, b), v, e in zip(edges, vals, errs)]
    heapq.heapify(heap)
    total = float(np.sum(vals))
    err_total = float(np.sum(errs))

    while err_total > max(abs_tol, rel_tol * abs(total)):
        if len(heap) >= max_panels:
            raise QuadratureError("1-D quadrature did not converge", total, err_total)
        batch = []
        while heap and len(batch) < _SPLIT_BATCH:
            _, _, a, b, v, e = heapq.heappop(heap)
            batch.append((a, b, v, e))
            if err_total - sum(x[3] for x in batch) <= 0.25 * max(abs_tol, rel_tol * abs(total)):
                break
        children = []
        for a, b, _, _ in batch:
            m = 0.5 * (a + b)
            children.extend([(a, m), (m, b)])
        cvals, cerrs = eval_panels(children)
        for a, b, v, e in batch:
            total -= v
            err_total -= e
        for (a, b), v, e in zip(children, cvals, cerrs):
            total += v
            err_total += e
            heapq.heappush(heap, (-e, next(tick), a, b, v, e))

    return total, err_total


def integrate_2d(
    f: Callable[[np.ndarray], np.ndarray],
    box: Sequence[tuple[float, float]],
    breakpoints: Sequence[Sequence[float]] = ((), ()),
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-15,
    max_panels: int = 40000,
) -> tuple[float, float]:
    """Integrate f over a rectangle; returns (value, error_bound)."""
    (x0, x1), (y0, y1) = box
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"empty integration box {box!r}")
    xl, wl = _rule(_ORDER_LO_2D)
    xh, wh = _rule(_ORDER_HI_2D)
    n_lo, n_hi = len(xl) ** 2, len(xh) ** 2
    scale = (x1 - x0, y1 - y0)

    def rect_points(r):
        ax, bx, ay, by = r
        out = np.empty((n_lo + n_hi, 2))
        for (x, _), off, n in (( (xl, wl), 0, len(xl)), ((xh, wh), n_lo, len(xh))):
            px = (bx - ax) / 2 * x + (ax + bx) / 2
            py = (by - ay) / 2 * x + (ay + by) / 2
            gx, gy = np.meshgrid(px, py, indexing="ij")
            out[off : off + n * n, 0] = gx.ravel()
            out[off : off + n * n, 1] = gy.ravel()
        return out

    w2_lo = np.outer(wl, wl).ravel()
    w2_hi = np.outer(wh, wh).ravel()

    def eval_rects(rects):
        pts = np.concatenate([rect_points(r) for r in rects])
        fv = np.asarray(f(pts), dtype=float)
        stride = n_lo + n_hi
        vals, errs = [], []
        for j, (ax, bx, ay, by) in enumerate(rects):
            area4 = (bx - ax) * (by - ay) / 4
            block = fv[j * stride : (j + 1) * stride]
            i_lo = area4 * block[:n_lo] @ w2_lo
            i_hi = area4 * block[n_lo:] @ w2_hi
            vals.append(i_hi)
            errs.append(abs(i_hi - i_lo))
        return vals, errs

    bx_ = _clean_breaks(breakpoints[0], x0, x1)
    by_ = _clean_breaks(breakpoints[1], y0, y1)
    rects = [(ax, bx, ay, by) for ax, bx in zip(bx_[:-1], bx_[1:]) for ay, by in zip(by_[:-1], by_[1:])]
    vals, errs = eval_rects(rects)
    tick = count()
    heap = [(-e, next(tick), r, v, e) for r, v, e in zip(rects, vals, errs)]
    heapq.heapify(heap)
    total = float(np.sum(vals))
    err_total = float(np.sum(errs))

    while err_total > max(abs_tol, rel_tol * abs(total)):
        if len(heap) >= max_panels:
            raise QuadratureError("2-D quadrature did not converge", total, err_total)
        batch = []
        while heap and len(batch) < _SPLIT_BATCH:
            _, _, r, v, e = heapq.heappop(heap)
            batch.append((r, v, e))
            if err_total - sum(x[2] for x in batch) <= 0.25 * max(abs_tol, rel_tol * abs(total)):
                break
        children = []
        for (ax, bx, ay, by), _, _ in batch:
            if (bx - ax) / scale[0] >= (by - ay) / scale[1]:
                m = 0.5 * (ax + bx)
                children.extend([(ax, m, ay, by), (m, bx, ay, by)])
            else:
                m = 0.5 * (ay + by)
                children.extend([(ax, bx, ay, m), (ax, bx, m, by)])
        cvals, cerrs = eval_rects(children)
        for _, v, e in batch:
            total -= v
            err_total -= e
        for r, v, e in zip(children, cvals, cerrs):
            total += v
            err_total += e
            heapq.heappush(heap, (-e, next(tick), r, v, e))

    return total, err_total
