"""Zeros of holomorphic functions in rectangles, counted by the argument principle.

Rectangles are subdivided until each one carries winding number 1, after
which Newton's method converges inside it.  Boxes that still carry a
winding number >= 2 at the minimum size are reported as a single clustered
zero (a tangency, when the function is a difference of graphs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

MAX_ARG_STEP = math.pi / 4
SPLITS = (0.5, 0.4637, 0.5389, 0.4171, 0.5823, 0.4412, 0.5617)


class BoundaryZero(ArithmeticError):
    """The function (numerically) vanishes on the contour."""


class RootFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Zero:
    point: complex
    multiplicity: int
    certified: bool

    @property
    def tangential(self) -> bool:
        return self.multiplicity > 1


def _eval(f, t):
    with np.errstate(all="ignore"):
        return np.asarray(f(np.asarray(t, dtype=complex)), dtype=complex)


def _edge_winding(f, a: complex, b: complex, n0: int = 64, max_points: int = 1 << 18) -> float:
    """Total change of arg f along the segment [a, b], adaptively resolved.

    Once every step is below MAX_ARG_STEP the sampling is doubled once more
    and the total must not change; this catches aliased windings.
    """
    s = np.linspace(0.0, 1.0, n0 + 1)
    vals = _eval(f, a + (b - a) * s)
    previous = None
    while True:
        if not np.all(np.isfinite(vals)):
            raise RootFindingError("function is not finite on the contour")
        mag = np.abs(vals)
        if np.any(mag <= 1e-300):
            raise BoundaryZero
        # a sample far below both neighbours sits on (or next to) a zero
        lm = np.log(mag)
        nb = np.empty_like(lm)
        nb[1:-1] = 0.5 * (lm[:-2] + lm[2:])
        nb[0], nb[-1] = lm[1], lm[-2]
        if np.any(lm < nb - 27.6):
            raise BoundaryZero
        d = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(d) > MAX_ARG_STEP
        if not bad.any():
            total = float(d.sum())
            if previous is not None and abs(total - previous) < 0.5:
                return total
            previous = total
            bad = np.ones_like(bad)
        if bad.any() and np.min((s[1:] - s[:-1])[bad]) < 1e-12:
            raise BoundaryZero("argument jumps across an unresolvable interval")
        if len(s) > max_points:
            raise BoundaryZero("argument did not resolve along the contour")
        mids = 0.5 * (s[:-1][bad] + s[1:][bad])
        mvals = _eval(f, a + (b - a) * mids)
        s = np.concatenate([s, mids])
        vals = np.concatenate([vals, mvals])
        order = np.argsort(s, kind="stable")
        s, vals = s[order], vals[order]


def winding_number(f, x0: float, x1: float, y0: float, y1: float) -> int:
    """Number of zeros of holomorphic ``f`` inside the rectangle, with multiplicity."""
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    total = sum(_edge_winding(f, corners[i], corners[(i + 1) % 4]) for i in range(4))
    k = total / (2 * math.pi)
    n = int(round(k))
    if abs(k - n) > 1e-3:
        raise RootFindingError(f"non-integer winding number {k}")
    if n < 0:
        raise RootFindingError("negative winding number for a holomorphic function")
    return n


def _derivative(f, t, scale):
    d = 1e-7 * scale
    v = _eval(f, np.array([t + d, t - d, t + 1j * d, t - 1j * d]))
    return 0.5 * ((v[0] - v[1]) / (2 * d) + (v[2] - v[3]) / (2j * d))


def _newton(f, df, t0: complex, box, scale: float, iters: int = 60):
    x0, x1, y0, y1 = box
    pad = 1e-9 * scale
    t = t0
    for _ in range(iters):
        ft = _eval(f, np.array([t]))[0]
        dft = df(t) if df is not None else _derivative(f, t, scale)
        if dft == 0 or not np.isfinite(dft) or not np.isfinite(ft):
            return None
        step = ft / dft
        t = t - step
        if not (x0 - pad <= t.real <= x1 + pad and y0 - pad <= t.imag <= y1 + pad):
            return None
        if abs(step) <= 1e-15 * max(1.0, abs(t)) + 1e-15 * scale:
            return t
    return t if abs(step) <= 1e-10 * scale else None


def _split(f, box):
    x0, x1, y0, y1 = box
    last = None
    for fx in SPLITS:
        for fy in SPLITS:
            xm = x0 + fx * (x1 - x0)
            ym = y0 + fy * (y1 - y0)
            kids = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]
            try:
                counts = [winding_number(f, *k) for k in kids]
            except BoundaryZero as exc:
                last = exc
                continue
            return kids, counts
    raise RootFindingError("every split line passes through a zero") from last


def find_zeros(f: Callable, box: tuple[float, float, float, float], df: Callable | None = None,
               min_size: float | None = None, expected: int | None = None) -> list[Zero]:
    """All zeros of holomorphic ``f`` in ``box = (x0, x1, y0, y1)``.

    The outer contour is enlarged by a relative 1e-9 so zeros on the box
    edges are found; callers apply their own half-open membership rule.
    Raises BoundaryZero when ``f`` vanishes on the enlarged contour.
    """
    x0, x1, y0, y1 = box
    scale = max(x1 - x0, y1 - y0)
    pad = 1e-9 * scale
    root_box = (x0 - pad, x1 + pad, y0 - pad, y1 + pad)
    if min_size is None:
        min_size = 1e-7 * scale
    n = winding_number(f, *root_box)
    if expected is not None and n != expected:
        raise RootFindingError(f"contour count {n} differs from the expected {expected}")
    zeros: list[Zero] = []
    stack = [(root_box, n)]
    while stack:
        bx, cnt = stack.pop()
        if cnt == 0:
            continue
        size = max(bx[1] - bx[0], bx[3] - bx[2])
        centre = complex(0.5 * (bx[0] + bx[1]), 0.5 * (bx[2] + bx[3]))
        if cnt == 1 and size < 0.25 * scale:
            t = _newton(f, df, centre, bx, size)
            if t is not None:
                zeros.append(Zero(complex(t), 1, True))
                continue
        if size <= min_size:
            t = _newton(f, df, centre, bx, size)
            zeros.append(Zero(complex(t if t is not None else centre), cnt, cnt == 1))
            continue
        kids, counts = _split(f, bx)
        if sum(counts) != cnt:
            raise RootFindingError(f"children count {sum(counts)} != parent count {cnt}")
        # reverse so that the stack pops children in lexicographic order
        stack.extend(reversed(list(zip(kids, counts))))
    return _merge_clusters(zeros, 10 * min_size)


def _merge_clusters(zeros: list[Zero], radius: float) -> list[Zero]:
    """Fuse zeros closer than ``radius``; the fused zero is uncertified."""
    zeros = sorted(zeros, key=lambda z: (z.point.real, z.point.imag))
    out: list[Zero] = []
    used = [False] * len(zeros)
    for i, zi in enumerate(zeros):
        if used[i]:
            continue
        group = [zi]
        used[i] = True
        for j in range(i + 1, len(zeros)):
            if not used[j] and abs(zeros[j].point - zi.point) < radius:
                group.append(zeros[j])
                used[j] = True
        if len(group) == 1:
            out.append(zi)
        else:
            mult = sum(g.multiplicity for g in group)
            pt = sum(g.point * g.multiplicity for g in group) / mult
            out.append(Zero(complex(pt), mult, False))
    return out
