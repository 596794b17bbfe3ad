"""Sampled plurisubharmonic potentials on 4-D grids and their wedge products.

A grid covers a box in R^4 = C^2 with coordinates ``(x, y, s, t)`` where
``z = x + iy`` and ``w = s + it``; node ``(i, j, k, l)`` sits at
``lo + h * (i, j, k, l)``.  The operator dd^c is ``(i/pi) d dbar``, so in
one variable dd^c log|z| is the unit Dirac mass at 0.  For smooth u, v the
measure dd^c u ^ dd^c v has Lebesgue density

    (4/pi^2) * (u_zz' v_ww' + u_ww' v_zz' - 2 Re(u_zw' conj(v_zw'))).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .geometry import AffineSquare, CubeGrid, FourCube, LinearForm

MA_CONSTANT = 4.0 / math.pi ** 2


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridPotential:
    """Real samples of a function of (z, w) on a uniform 4-D grid."""

    lo: tuple[float, float, float, float]
    h: float
    values: np.ndarray = field(repr=False)
    label: str = "u"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 4:
            raise GridError("grid values must be a 4-D array")
        if not self.h > 0:
            raise GridError("grid spacing must be positive")
        if not np.all(np.isfinite(v)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(v))[0])
            raise GridError(f"non-finite sample at node {bad}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lo", tuple(float(a) for a in self.lo))

    @property
    def shape(self):
        return self.values.shape

    @property
    def hi(self):
        return tuple(a + self.h * (n - 1) for a, n in zip(self.lo, self.shape))

    def axis(self, k: int) -> np.ndarray:
        return self.lo[k] + self.h * np.arange(self.shape[k])

    def node_point(self, idx) -> tuple[complex, complex]:
        x, y, s, t = (self.lo[k] + self.h * idx[k] for k in range(4))
        return complex(x, y), complex(s, t)

    def slab_coords(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Complex coordinates (z, w) of the 3-D slab of nodes with first index ``i``."""
        x = self.lo[0] + self.h * i
        y, s, t = self.axis(1), self.axis(2), self.axis(3)
        Y, S, T = np.meshgrid(y, s, t, indexing="ij")
        return x + 1j * Y, S + 1j * T

    def trimmed(self, k: int) -> "GridPotential":
        if k == 0:
            return self
        sl = (slice(k, -k),) * 4
        return GridPotential(tuple(a + k * self.h for a in self.lo), self.h, self.values[sl], self.label)

    def window(self, lower, upper) -> "GridPotential":
        """Nodes inside the box ``lower <= x <= upper`` (per real axis)."""
        sl, lo = [], []
        for k in range(4):
            ax = self.axis(k)
            idx = np.nonzero((ax >= lower[k] - 1e-9 * self.h) & (ax <= upper[k] + 1e-9 * self.h))[0]
            if len(idx) == 0:
                raise GridError(f"window is empty along axis {k}")
            sl.append(slice(idx[0], idx[-1] + 1))
            lo.append(float(ax[idx[0]]))
        return GridPotential(tuple(lo), self.h, self.values[tuple(sl)], self.label)

    def compatible(self, other: "GridPotential") -> bool:
        return (self.shape == other.shape and math.isclose(self.h, other.h, rel_tol=1e-12)
                and all(math.isclose(a, b, abs_tol=1e-9 * self.h) for a, b in zip(self.lo, other.lo)))

    def save(self, path) -> None:
        header = {"lo": list(self.lo), "h": self.h, "shape": list(self.shape), "label": self.label}
        with open(path, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode())
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "GridPotential":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            data = np.frombuffer(fh.read(), dtype="<f8")
        return cls(tuple(header["lo"]), header["h"], data.reshape(header["shape"]).copy(), header["label"])


def box_grid(half_widths: Sequence[float], h: float, center=(0.0, 0.0, 0.0, 0.0),
             offset: float = 0.0) -> tuple[tuple, tuple]:
    """Lower corner and node counts of a grid covering ``center +- half_widths``.

    ``offset`` shifts every node by that fraction of ``h`` (use 0.5 to keep
    nodes off lattice points where log-singular potentials blow up).
    """
    lo, counts = [], []
    for c, hw in zip(center, half_widths):
        n = int(math.ceil(2 * hw / h - 1e-9)) + 1
        lo.append(c - 0.5 * (n - 1) * h + offset * h)
        counts.append(n)
    return tuple(lo), tuple(counts)


def staggered_grid(half_widths: Sequence[float], h: float) -> tuple[tuple, tuple]:
    """Grid symmetric about 0 whose nodes sit at odd multiples of ``h/2``.

    Log-singular potentials with poles on the ``h/2``-lattice never hit a node.
    """
    lo, counts = [], []
    for hw in half_widths:
        m = int(math.ceil(hw / h - 0.5 - 1e-9))
        lo.append(-(m + 0.5) * h)
        counts.append(2 * m + 2)
    return tuple(lo), tuple(counts)


def sample_potential(formula: Callable, lo, counts, h: float, label: str = "u") -> GridPotential:
    """Evaluate ``formula(z, w)`` (vectorized) at every node of the grid."""
    values = np.empty(counts)
    for i in range(counts[0]):
        x = lo[0] + h * i
        y = lo[1] + h * np.arange(counts[1])
        s = lo[2] + h * np.arange(counts[2])
        t = lo[3] + h * np.arange(counts[3])
        Y, S, T = np.meshgrid(y, s, t, indexing="ij")
        slab = np.asarray(formula(x + 1j * Y, S + 1j * T), dtype=float)
        bad = ~np.isfinite(slab)
        if bad.any():
            j, k, l = (int(a) for a in np.argwhere(bad)[0])
            raise GridError(f"potential {label!r} is not finite at node {(i, j, k, l)}")
        values[i] = slab
    return GridPotential(lo, h, values, label)


def mollifier_kernel(sigma: float, h: float) -> np.ndarray:
    """Normalized discrete 4-D kernel ``(1 - rho^2)^3`` of support radius ``3 sigma``."""
    radius = 3.0 * sigma
    k = int(math.floor(radius / h))
    ax = h * np.arange(-k, k + 1)
    X, Y, S, T = np.meshgrid(ax, ax, ax, ax, indexing="ij")
    rho2 = (X ** 2 + Y ** 2 + S ** 2 + T ** 2) / radius ** 2
    ker = np.where(rho2 < 1.0, (1.0 - rho2) ** 3, 0.0)
    return ker / ker.sum()


def mollify(u: GridPotential, sigma: float) -> GridPotential:
    """Convolve with the radial bump of radius ``3 sigma``; the grid shrinks by that radius."""
    if sigma < u.h * (1 - 1e-12):
        raise GridError(f"smoothing length {sigma} is below the grid spacing {u.h}")
    ker = mollifier_kernel(sigma, u.h)
    k = ker.shape[0] // 2
    if min(u.shape) <= 2 * k:
        raise GridError("grid too small for this smoothing length")
    out = fftconvolve(u.values, ker, mode="valid")
    return GridPotential(tuple(a + k * u.h for a in u.lo), u.h, out, u.label)


def _slab_hessian(a0, a1, a2, h):
    """Complex Hessian coefficients on the interior of the middle slab ``a1``.

    ``a0, a1, a2`` are consecutive 3-D slabs along x.  Central differences,
    exact on polynomials of degree <= 2.
    """
    c = (slice(1, -1),) * 3
    h2 = h * h
    uxx = (a2[c] - 2 * a1[c] + a0[c]) / h2
    uyy = (a1[2:, 1:-1, 1:-1] - 2 * a1[c] + a1[:-2, 1:-1, 1:-1]) / h2
    uss = (a1[1:-1, 2:, 1:-1] - 2 * a1[c] + a1[1:-1, :-2, 1:-1]) / h2
    utt = (a1[1:-1, 1:-1, 2:] - 2 * a1[c] + a1[1:-1, 1:-1, :-2]) / h2
    q = 4 * h2
    uxs = (a2[1:-1, 2:, 1:-1] - a2[1:-1, :-2, 1:-1] - a0[1:-1, 2:, 1:-1] + a0[1:-1, :-2, 1:-1]) / q
    uxt = (a2[1:-1, 1:-1, 2:] - a2[1:-1, 1:-1, :-2] - a0[1:-1, 1:-1, 2:] + a0[1:-1, 1:-1, :-2]) / q
    uyt = (a1[2:, 1:-1, 2:] - a1[2:, 1:-1, :-2] - a1[:-2, 1:-1, 2:] + a1[:-2, 1:-1, :-2]) / q
    uys = (a1[2:, 2:, 1:-1] - a1[2:, :-2, 1:-1] - a1[:-2, 2:, 1:-1] + a1[:-2, :-2, 1:-1]) / q
    uzz = 0.25 * (uxx + uyy)
    uww = 0.25 * (uss + utt)
    uzw = 0.25 * ((uxs + uyt) + 1j * (uxt - uys))
    return uzz, uww, uzw


def complex_hessian(u: GridPotential, node) -> tuple[float, float, complex]:
    """``(u_zz', u_ww', u_zw')`` at one node at least two nodes from the boundary."""
    node = tuple(int(i) for i in node)
    if any(i < 2 or i > n - 3 for i, n in zip(node, u.shape)):
        raise GridError(f"node {node} is closer than 2h to the grid boundary")
    i, j, k, l = node
    block = u.values[i - 1:i + 2, j - 1:j + 2, k - 1:k + 2, l - 1:l + 2]
    uzz, uww, uzw = _slab_hessian(block[0], block[1], block[2], u.h)
    return float(uzz[0, 0, 0]), float(uww[0, 0, 0]), complex(uzw[0, 0, 0])


def mixed_ma_density(u: GridPotential, v: GridPotential) -> GridPotential:
    """Lebesgue density of dd^c u ^ dd^c v on the interior nodes of the common grid."""
    if not u.compatible(v):
        raise GridError("potentials live on different grids")
    a, b = u.values, v.values
    n0 = u.shape[0]
    out = np.empty(tuple(n - 2 for n in u.shape))
    for i in range(1, n0 - 1):
        uzz, uww, uzw = _slab_hessian(a[i - 1], a[i], a[i + 1], u.h)
        if b is a:
            vzz, vww, vzw = uzz, uww, uzw
        else:
            vzz, vww, vzw = _slab_hessian(b[i - 1], b[i], b[i + 1], u.h)
        out[i - 1] = MA_CONSTANT * (uzz * vww + uww * vzz
                                    - 2.0 * (uzw.real * vzw.real + uzw.imag * vzw.imag))
    return GridPotential(tuple(x + u.h for x in u.lo), u.h, out, f"ddc{u.label}^ddc{v.label}")


def disk_cell_fractions(axis_x: np.ndarray, axis_y: np.ndarray, h: float,
                        radius: float, center: complex = 0j) -> np.ndarray:
    """Exact area fraction of each node-centred cell ``h x h`` inside a closed disk."""
    X, Y = np.meshgrid(axis_x - center.real, axis_y - center.imag, indexing="ij")
    frac = np.zeros(X.shape)
    half = 0.5 * h
    # nearest / farthest corner distances decide the trivially full and empty cells
    dx_near = np.maximum(np.abs(X) - half, 0.0)
    dy_near = np.maximum(np.abs(Y) - half, 0.0)
    far = np.hypot(np.abs(X) + half, np.abs(Y) + half)
    near = np.hypot(dx_near, dy_near)
    frac[far <= radius] = 1.0
    cut = (near < radius) & (far > radius)
    R2 = radius * radius
    for i, j in np.argwhere(cut):
        x0, x1 = X[i, j] - half, X[i, j] + half
        y0, y1 = Y[i, j] - half, Y[i, j] + half

        def chord(x):
            s = math.sqrt(max(R2 - x * x, 0.0))
            return max(0.0, min(y1, s) - max(y0, -s))

        a, b = max(x0, -radius), min(x1, radius)
        if b <= a:
            continue
        pts = [p for p in (-math.sqrt(max(R2 - y0 * y0, 0)), math.sqrt(max(R2 - y0 * y0, 0)),
                           -math.sqrt(max(R2 - y1 * y1, 0)), math.sqrt(max(R2 - y1 * y1, 0)))
               if a < p < b]
        area, _ = integrate.quad(chord, a, b, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=200)
        frac[i, j] = area / (h * h)
    return frac


def polydisk_weights(g: GridPotential, radius: float, center=(0j, 0j)) -> np.ndarray:
    """Fraction of each node's 4-D cell lying in the polydisk ``|z-c1|, |w-c2| <= radius``."""
    fz = disk_cell_fractions(g.axis(0), g.axis(1), g.h, radius, center[0])
    fw = disk_cell_fractions(g.axis(2), g.axis(3), g.h, radius, center[1])
    return fz[:, :, None, None] * fw[None, None, :, :]


@dataclass
class BinnedMeasure:
    """Masses of a measure per 4-cube, plus the node-level masses that produced them."""

    bins: CubeGrid
    masses: dict
    node_mass: GridPotential | None = None
    cauchy: float = 0.0
    cauchy_flagged: bool = False
    history: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(self.masses[k] for k in sorted(self.masses, key=lambda k: (k is None, k)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["j1", "k1", "j2", "k2", "mass"])
            for key in sorted(self.masses, key=lambda k: (k is None, k)):
                idx = ["overflow"] * 4 if key is None else list(key)
                wr.writerow(idx + [repr(float(self.masses[key]))])


def bin_field(mass: GridPotential, bins: CubeGrid) -> dict:
    """Accumulate node masses into cubes slab by slab, in index order."""
    known1 = {(j, k) for j, k, _ in bins.sub1.squares}
    known2 = {(j, k) for j, k, _ in bins.sub2.squares}
    out: dict = {}
    for i in range(mass.shape[0]):
        z, w = mass.slab_coords(i)
        m = mass.values[i].ravel()
        nz = m != 0
        if not nz.any():
            continue
        keys = bins.keys(z.ravel()[nz], w.ravel()[nz])
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        sums = np.zeros(len(uniq))
        np.add.at(sums, inv.ravel(), m[nz])
        for key, val in zip(map(tuple, uniq.tolist()), sums.tolist()):
            if key[:2] not in known1 or key[2:] not in known2:
                key = None
            out[key] = out.get(key, 0.0) + val
    return out


def wedge_masses(u: GridPotential, v: GridPotential, sigma: float, weights=None) -> GridPotential:
    """Node masses (density times h^4) of dd^c u_sigma ^ dd^c v_sigma.

    ``weights`` is an optional callable ``(GridPotential) -> array`` giving
    the fraction of each node cell to keep (e.g. ``polydisk_weights``).
    """
    us = mollify(u, sigma)
    vs = us if v is u else mollify(v, sigma)
    dens = mixed_ma_density(us, vs)
    m = dens.values * dens.h ** 4
    if weights is not None:
        m = m * weights(dens)
    return GridPotential(dens.lo, dens.h, m, dens.label)


def wedge_by_potentials(u: GridPotential, v: GridPotential, sigmas: Sequence[float],
                        bins: CubeGrid, weights=None, cauchy_tol: float = 0.05) -> BinnedMeasure:
    """Binned dd^c u ^ dd^c v along a decreasing sequence of smoothing lengths.

    The returned measure is the one for the last (smallest) sigma; ``cauchy``
    is the largest change of a bin mass between the last two sigmas and is
    flagged when it exceeds ``cauchy_tol`` times the total mass.
    """
    sigmas = list(sigmas)
    if not sigmas:
        raise ValueError("need at least one smoothing length")
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("smoothing lengths must be strictly decreasing")
    history = []
    field_ = None
    for s in sigmas:
        field_ = wedge_masses(u, v, s, weights)
        history.append(bin_field(field_, bins))
    cauchy = 0.0
    if len(history) > 1:
        a, b = history[-2], history[-1]
        cauchy = max((abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b)), default=0.0)
    out = BinnedMeasure(bins, history[-1], field_, cauchy, False, history)
    out.cauchy_flagged = len(history) > 1 and cauchy > cauchy_tol * max(abs(out.total), 1e-300)
    return out


# plateau functions ---------------------------------------------------------

def _psi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    a = _psi(x)
    b = _psi(1.0 - np.asarray(x, dtype=float))
    return a / (a + b)


def plateau_profile(x, r: float, lam: float):
    """1-D bump on [0, r]: 1 on the centred interval of length lam*r, 0 within (1-lam)r/8 of the ends."""
    gap = 0.5 * (1 - lam) * r
    margin = gap / 4
    width = gap - margin
    x = np.asarray(x, dtype=float)
    return smooth_step((x - margin) / width) * smooth_step((r - x - margin) / width)


def _profile_derivs(x, r, lam):
    gap = 0.5 * (1 - lam) * r
    d = 1e-4 * (gap - gap / 4)
    f0 = plateau_profile(x, r, lam)
    fp = plateau_profile(x + d, r, lam)
    fm = plateau_profile(x - d, r, lam)
    return f0, (fp - fm) / (2 * d), (fp - 2 * f0 + fm) / (d * d)


@dataclass(frozen=True)
class PlateauFunction:
    cube: FourCube
    lam: float
    nodes: tuple = field(repr=False)     # per local axis sample positions in [0, r)
    values: np.ndarray = field(repr=False)
    hessian_bound: float = 0.0

    def __call__(self, z, w):
        """Evaluate the plateau function at points of C^2."""
        cube = self.cube
        out = np.ones(np.shape(z))
        for sq, pi in ((cube.s1, cube.pi1), (cube.s2, cube.pi2)):
            loc = sq.local(pi(z, w))
            inside = (loc.real >= 0) & (loc.real < sq.size) & (loc.imag >= 0) & (loc.imag < sq.size)
            out = out * np.where(inside, plateau_profile(loc.real, sq.size, self.lam)
                                 * plateau_profile(loc.imag, sq.size, self.lam), 0.0)
        return out


def plateau_function(cube: FourCube, lam: float, n_uniform: int = 9, n_layer: int = 12) -> PlateauFunction:
    """Product of four 1-D bumps composed with the real coordinates of the cube.

    The sup of the complex Hessian coefficients is measured on a tensor grid
    that is uniform on the cube plus dense inside each transition layer.
    """
    if not (0 < lam < 1):
        raise ValueError(f"plateau ratio must lie in (0, 1), got {lam}")
    r = cube.s1.size
    if not math.isclose(cube.s2.size, r):
        raise ValueError("plateau functions need squares of equal size")
    gap = 0.5 * (1 - lam) * r
    layer = np.linspace(gap / 4, gap, n_layer)
    ax = np.unique(np.concatenate([np.linspace(0, r, n_uniform, endpoint=False), layer, r - layer]))
    f, fp, fpp = _profile_derivs(ax, r, lam)
    # complex Hessian of F(zeta1, zeta2) = f(u1) f(v1) f(u2) f(v2) in square coordinates
    F = np.einsum("a,b,c,d->abcd", f, f, f, f)
    H11 = 0.25 * (np.einsum("a,b,c,d->abcd", fpp, f, f, f) + np.einsum("a,b,c,d->abcd", f, fpp, f, f))
    H22 = 0.25 * (np.einsum("a,b,c,d->abcd", f, f, fpp, f) + np.einsum("a,b,c,d->abcd", f, f, f, fpp))
    H12 = 0.25 * ((np.einsum("a,b,c,d->abcd", fp, f, fp, f) + np.einsum("a,b,c,d->abcd", f, fp, f, fp))
                  + 1j * (np.einsum("a,b,c,d->abcd", fp, f, f, fp) - np.einsum("a,b,c,d->abcd", f, fp, fp, f)))
    # squares carry rotations e^{i a}; fold them into the Jacobian of (z, w) -> (zeta1, zeta2)
    r1 = np.conj(cube.s1.isometry.rotation)
    r2 = np.conj(cube.s2.isometry.rotation)
    J = np.array([[r1 * cube.pi1.a, r1 * cube.pi1.b], [r2 * cube.pi2.a, r2 * cube.pi2.b]])
    bound = 0.0
    for i in range(2):
        for j in range(i, 2):
            c = (np.conj(J[0, i]) * J[0, j] * H11 + np.conj(J[1, i]) * J[1, j] * H22
                 + np.conj(J[0, i]) * J[1, j] * H12 + np.conj(J[1, i]) * J[0, j] * np.conj(H12))
            bound = max(bound, float(np.abs(c).max()))
    return PlateauFunction(cube, lam, (ax,) * 4, F, bound)


# modulus of continuity -----------------------------------------------------

def _pair_directions() -> list[tuple[int, int, int, int]]:
    dirs = []
    for i in range(4):
        e = [0, 0, 0, 0]
        e[i] = 1
        dirs.append(tuple(e))
    for i in range(4):
        for j in range(i + 1, 4):
            for sgn in (1, -1):
                e = [0, 0, 0, 0]
                e[i], e[j] = 1, sgn
                dirs.append(tuple(e))
    return dirs


def _shift_pair(a: np.ndarray, off):
    src, dst = [], []
    for o, n in zip(off, a.shape):
        if o >= 0:
            src.append(slice(o, n))
            dst.append(slice(0, n - o))
        else:
            src.append(slice(0, n + o))
            dst.append(slice(-o, n))
    return a[tuple(src)], a[tuple(dst)]


def modulus_of_continuity(u: GridPotential, r: float) -> float:
    """Sup of ``|u(p) - u(q)|`` over axis and diagonal node pairs at distance <= r."""
    if r < u.h * (1 - 1e-12):
        raise GridError(f"radius {r} is below the grid spacing {u.h}")
    best = 0.0
    a = u.values
    for d in _pair_directions():
        step = u.h * math.sqrt(sum(c * c for c in d))
        for m in range(1, int(math.floor(r / step + 1e-9)) + 1):
            off = tuple(m * c for c in d)
            if any(abs(o) >= n for o, n in zip(off, a.shape)):
                break
            p, q = _shift_pair(a, off)
            best = max(best, float(np.abs(p - q).max()))
    return best
