"""Concrete currents: product families, the max(log+) current, max-Green
currents of planar compacts, and Hénon maps with their Green functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .geometry import AtomicMeasure
from .laminar import (AnnulusBase, DiskBase, GraphDisk, HORIZONTAL, Polynomial, RectBase,
                      UniformLaminarPiece, VERTICAL, constant)
from .roots import RootFindingError, find_zeros


# Hénon maps -----------------------------------------------------------------

@dataclass(frozen=True)
class HenonMap:
    """``f(z, w) = (p(z) - a w, z)`` with ``p`` given by ascending coefficients."""

    p: Polynomial = Polynomial((-1.2, 0, 1))
    a: complex = 0.3

    def __post_init__(self):
        if not isinstance(self.p, Polynomial):
            object.__setattr__(self, "p", Polynomial(tuple(self.p)))
        if self.a == 0:
            raise ValueError("a must be nonzero")
        if self.p.degree < 2:
            raise ValueError("p must have degree at least 2")

    @property
    def d(self) -> int:
        return self.p.degree

    @cached_property
    def dp(self) -> Polynomial:
        return self.p.derivative()

    @property
    def escape_radius(self) -> float:
        """A radius beyond which the filtration is invariant."""
        return 2 + abs(self.a) + sum(abs(c) for c in self.p.coeffs)

    def forward(self, z, w):
        return self.p(z) - self.a * w, np.asarray(z, dtype=complex)

    def inverse(self, z, w):
        return np.asarray(w, dtype=complex), (self.p(w) - z) / self.a

    def forward_tangent(self, z, w, dz, dw):
        return self.p(z) - self.a * w, z, self.dp(z) * dz - self.a * dw, dz

    def inverse_tangent(self, z, w, dz, dw):
        return w, (self.p(w) - z) / self.a, dw, (self.dp(w) * dw - dz) / self.a

    def iterate(self, z, w, n: int):
        step = self.forward if n >= 0 else self.inverse
        z, w = np.asarray(z, dtype=complex), np.asarray(w, dtype=complex)
        for _ in range(abs(n)):
            z, w = step(z, w)
        return z, w


def henon_green(f: HenonMap, sign: int = 1, n_iter: int = 60, R: float | None = None,
                big: float = 1e8) -> Callable:
    """Escape-rate Green function ``G+`` (sign=+1) or ``G-`` (sign=-1).

    Each orbit is followed until its max-norm exceeds ``big`` (or ``n_iter``
    steps); the value is ``d^-k log+ |x_k|`` at the stopping step ``k``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    step = f.forward if sign == 1 else f.inverse
    d = f.d

    def G(z, w):
        z = np.array(np.broadcast_to(z, np.broadcast(z, w).shape), dtype=complex)
        w = np.array(np.broadcast_to(w, z.shape), dtype=complex)
        shape = z.shape
        z, w = z.ravel(), w.ravel()
        out = np.zeros(z.shape)
        active = np.arange(z.size)
        zz, ww = z.copy(), w.copy()
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(n_iter + 1):
                norm = np.maximum(np.abs(zz), np.abs(ww))
                done = (norm > big) | (k == n_iter)
                if done.any():
                    out[active[done]] = np.log(np.maximum(norm[done], 1.0)) / float(d) ** k
                    keep = ~done
                    active, zz, ww = active[keep], zz[keep], ww[keep]
                if active.size == 0:
                    break
                zz, ww = step(zz, ww)
        return out.reshape(shape)

    return G


@dataclass(frozen=True)
class AffineLine:
    """``t -> base + t * direction`` in C^2."""

    base: tuple = (0j, 0.37 + 0.21j)
    direction: tuple = (1 + 0j, 0.13 - 0.05j)

    def __call__(self, t):
        t = np.asarray(t, dtype=complex)
        return self.base[0] + t * self.direction[0], self.base[1] + t * self.direction[1]


@dataclass(frozen=True)
class LinearEquation:
    """The line ``{alpha z + beta w + gamma = 0}``."""

    alpha: complex = 1.0
    beta: complex = 0.29 + 0.11j
    gamma: complex = -0.17 + 0.23j

    def __call__(self, z, w):
        return self.alpha * z + self.beta * w + self.gamma


DEFAULT_L = AffineLine()
DEFAULT_LPRIME = LinearEquation()


def iterated_line_roots(f: HenonMap, L: AffineLine = DEFAULT_L, Lp: LinearEquation = DEFAULT_LPRIME,
                        n: int = 1, radius: float | None = None):
    """Parameters ``t`` with ``f^{2n}(L(t))`` on ``Lp``; exactly ``d^{2n}`` of them."""
    R = radius if radius is not None else f.escape_radius

    def g(t):
        z, w = f.iterate(*L(t), 2 * n)
        return Lp(z, w)

    expected = f.d ** (2 * n)
    zeros = find_zeros(g, (-R, R, -R, R), expected=expected)
    bad = [z for z in zeros if not z.certified]
    if bad or sum(z.multiplicity for z in zeros) != expected:
        raise RootFindingError(f"{len(bad)} uncertified root clusters, count "
                               f"{sum(z.multiplicity for z in zeros)} != {expected}")
    return np.array([z.point for z in zeros])


def iterated_line_measure(f: HenonMap, L: AffineLine = DEFAULT_L, Lp: LinearEquation = DEFAULT_LPRIME,
                          n: int = 1, radius: float | None = None) -> AtomicMeasure:
    """Normalized intersection ``d^{-2n} [f^n(L) ∩ f^{-n}(Lp)]``."""
    t = iterated_line_roots(f, L, Lp, n, radius)
    z, w = f.iterate(*L(t), n)
    weight = 1.0 / f.d ** (2 * n)
    return AtomicMeasure(z, w, np.full(len(t), weight)).sorted()


# the max(log+) current --------------------------------------------------------

def demailly_potential(z, w):
    return np.maximum(np.log(np.maximum(np.abs(z), 1.0)), np.log(np.maximum(np.abs(w), 1.0)))


def demailly_current(N: int = 16, outer: float = 1.5):
    """Potential and the three disk families (verticals, horizontals, cones).

    Cone disks ``w = e^{-i theta} z`` are kept over ``1 < |z| < outer``.
    """
    th = 2 * np.pi * np.arange(N) / N
    unit = DiskBase(0j, 1.0)
    ann = AnnulusBase(1.0, outer)
    wt = [1.0 / N] * N
    verticals = UniformLaminarPiece(
        [GraphDisk(unit, constant(np.exp(1j * t)), VERTICAL, label=f"vert{i}") for i, t in enumerate(th)],
        wt, VERTICAL, "verticals")
    horizontals = UniformLaminarPiece(
        [GraphDisk(unit, constant(np.exp(1j * t)), HORIZONTAL, label=f"horiz{i}") for i, t in enumerate(th)],
        wt, HORIZONTAL, "horizontals")
    cones = UniformLaminarPiece(
        [GraphDisk(ann, Polynomial((0, np.exp(-1j * t))), HORIZONTAL, label=f"cone{i}") for i, t in enumerate(th)],
        wt, HORIZONTAL, "cones")
    return demailly_potential, [verticals, horizontals, cones]


# product families over a finite set ----------------------------------------------

@dataclass
class CantorProduct:
    horizontal: UniformLaminarPiece
    vertical: UniformLaminarPiece
    alt_horizontal: UniformLaminarPiece
    alt_vertical: UniformLaminarPiece


def _strips(points: Sequence[complex]):
    """Open rectangles of the unit disk's bounding box cut along the coordinates of ``points``."""
    xs = sorted({-1.0, 1.0, *(p.real for p in points)})
    ys = sorted({-1.0, 1.0, *(p.imag for p in points)})
    unit = DiskBase(0j, 1.0)
    return [RectBase(x0, x1, y0, y1, disk=unit)
            for x0, x1 in zip(xs, xs[1:]) for y0, y1 in zip(ys, ys[1:])]


def cantor_product_currents(X: Sequence[complex], mu: Sequence[float]) -> CantorProduct:
    """``D x {x}`` and ``{x} x D`` families weighted by ``mu``, plus a
    representation whose disks avoid the other family's fibers."""
    X = [complex(x) for x in X]
    mu = [float(m) for m in mu]
    if len(X) != len(mu):
        raise ValueError("one weight per point")
    if not math.isclose(math.fsum(mu), 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError("weights must sum to 1")
    if any(abs(x) >= 1 for x in X):
        raise ValueError("points must lie in the unit disk")
    unit = DiskBase(0j, 1.0)
    th = UniformLaminarPiece([GraphDisk(unit, constant(x), HORIZONTAL, label=f"h{i}") for i, x in enumerate(X)],
                             mu, HORIZONTAL, "T_h")
    tv = UniformLaminarPiece([GraphDisk(unit, constant(x), VERTICAL, label=f"v{i}") for i, x in enumerate(X)],
                             mu, VERTICAL, "T_v")
    strips = _strips(X)
    ah_d, ah_w, av_d, av_w = [], [], [], []
    for i, (x, m) in enumerate(zip(X, mu)):
        for k, s in enumerate(strips):
            ah_d.append(GraphDisk(s, constant(x), HORIZONTAL, label=f"h{i}.{k}"))
            av_d.append(GraphDisk(s, constant(x), VERTICAL, label=f"v{i}.{k}"))
            ah_w.append(m)
            av_w.append(m)
    return CantorProduct(th, tv, UniformLaminarPiece(ah_d, ah_w, HORIZONTAL, "T_h'"),
                         UniformLaminarPiece(av_d, av_w, VERTICAL, "T_v'"))


def product_measure(X: Sequence[complex], mu: Sequence[float]) -> AtomicMeasure:
    return AtomicMeasure.from_atoms((a, b, ma * mb) for a, ma in zip(X, mu) for b, mb in zip(X, mu)).sorted()


def product_potentials(X: Sequence[complex], mu: Sequence[float]):
    """Potentials of the horizontal and vertical product families."""
    X = np.asarray(X, dtype=complex)
    mu = np.asarray(mu, dtype=float)

    def u_h(z, w):
        return sum(m * np.log(np.abs(w - x)) for x, m in zip(X, mu))

    def u_v(z, w):
        return sum(m * np.log(np.abs(z - x)) for x, m in zip(X, mu))

    return u_h, u_v


# one-variable Green functions -------------------------------------------------------

def cantor_stage(depth: int, a: float = 0.0, b: float = 1.0) -> list[tuple[float, float]]:
    """Intervals of the middle-thirds construction after ``depth`` steps."""
    if not 0 <= depth <= 6:
        raise ValueError("depth must be between 0 and 6")
    ivs = [(a, b)]
    for _ in range(depth):
        ivs = [iv for lo, hi in ivs for iv in ((lo, lo + (hi - lo) / 3), (hi - (hi - lo) / 3, hi))]
    return ivs


def _log_integral(z, a, b):
    """``int_a^b log|z - s| ds`` for real ``a < b``."""
    def F(s):
        x = s - z
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(x == 0, 0.0, (x * np.log(np.where(x == 0, 1.0, x))).real)
        return val - x.real
    z = np.asarray(z, dtype=complex)
    return F(b) - F(a)


class OneDimGreen:
    """Green function of a finite union of real intervals with pole at infinity.

    The equilibrium measure is approximated by piecewise-constant charges on
    Chebyshev-graded subsegments, balanced so the log potential is constant
    at the subsegment midpoints.
    """

    def __init__(self, intervals: Sequence[tuple[float, float]], per_interval: int = 48):
        self.intervals = [(float(a), float(b)) for a, b in intervals]
        edges = []
        for a, b in self.intervals:
            if not b > a:
                raise ValueError("empty interval")
            k = np.arange(per_interval + 1)
            edges.append(a + (b - a) * 0.5 * (1 - np.cos(np.pi * k / per_interval)))
        self.seg_a = np.concatenate([e[:-1] for e in edges])
        self.seg_b = np.concatenate([e[1:] for e in edges])
        mids = 0.5 * (self.seg_a + self.seg_b)
        m = len(mids)
        A = np.zeros((m + 1, m + 1))
        A[:m, :m] = _log_integral(mids[:, None] + 0j, self.seg_a[None, :], self.seg_b[None, :])
        A[:m, m] = -1.0
        A[m, :m] = self.seg_b - self.seg_a
        rhs = np.zeros(m + 1)
        rhs[m] = 1.0
        sol = np.linalg.solve(A, rhs)
        self.density = sol[:m]
        self.robin = sol[m]            # log capacity
        self.charges = self.density * (self.seg_b - self.seg_a)

    @property
    def capacity(self) -> float:
        return math.exp(self.robin)

    def raw(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for a, b, q in zip(self.seg_a, self.seg_b, self.density):
            out += q * _log_integral(z, a, b)
        return out - self.robin

    def __call__(self, z):
        return np.maximum(self.raw(z), 0.0)


def interval_green_exact(z, a: float = 0.0, b: float = 1.0):
    """Closed-form Green function of ``[a, b]``."""
    u = (2 * np.asarray(z, dtype=complex) - (a + b)) / (b - a)
    s = np.sqrt(u - 1) * np.sqrt(u + 1)
    return np.log(np.maximum(np.abs(u + s), np.abs(u - s)))


def max_green_current(GK: Callable) -> Callable:
    def G(z, w):
        return np.maximum(GK(z), GK(w))
    return G


# named fixtures ----------------------------------------------------------------------

FIXTURES = {
    "demailly": "max(log+|z|, log+|w|) with its vertical, horizontal and cone disk families",
    "cantor_product": "horizontal and vertical graph families over a weighted finite set",
    "henon": "quadratic Hénon map p(z) = z^2 - 1.2, a = 0.3, Green functions and iterated lines",
    "max_green": "max(G_K(z), G_K(w)) for a middle-thirds stage K",
    "pencils": "three vertical and three horizontal lines",
}


def pencils(values: Sequence[complex] = (-1, 0, 1), extent: float = 10.0):
    big = RectBase(-extent, extent, -extent, extent)
    n = len(values)
    v = UniformLaminarPiece([GraphDisk(big, constant(a), VERTICAL, label=f"z={a}") for a in values],
                            [1.0 / n] * n, VERTICAL, "vertical pencil")
    h = UniformLaminarPiece([GraphDisk(big, constant(b), HORIZONTAL, label=f"w={b}") for b in values],
                            [1.0 / n] * n, HORIZONTAL, "horizontal pencil")
    return v, h
