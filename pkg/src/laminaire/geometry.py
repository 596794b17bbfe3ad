"""Squares, subdivisions, 4-cubes and finite atomic measures in C^2.

Squares are half-open: a point belongs to the square when its local
coordinates lie in ``[0, size)``.  Tilings therefore partition the plane
exactly and boundary points are assigned deterministically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Isometry:
    """Orientation preserving isometry of C: ``z -> rotation * z + shift``."""

    rotation: complex = 1.0 + 0.0j
    shift: complex = 0.0j

    def __post_init__(self):
        if not math.isclose(abs(self.rotation), 1.0, abs_tol=1e-12):
            raise ValueError("rotation must have modulus 1")

    def apply(self, z):
        return self.rotation * z + self.shift

    def inverse(self, z):
        return (z - self.shift) / self.rotation


IDENTITY = Isometry()
BOUNDARY_SNAP = 1e-12


@dataclass(frozen=True)
class LinearForm:
    """A linear projection ``(z, w) -> a*z + b*w`` of C^2 onto C."""

    a: complex
    b: complex
    name: str = ""

    def __call__(self, z, w):
        return self.a * z + self.b * w

    def proportional_to(self, other: "LinearForm") -> bool:
        return abs(self.a * other.b - self.b * other.a) < 1e-12


Z_PROJ = LinearForm(1.0, 0.0, "z")
W_PROJ = LinearForm(0.0, 1.0, "w")


@dataclass(frozen=True)
class AffineSquare:
    """Image under ``isometry`` of ``{j r <= Re < (j+1) r, k r <= Im < (k+1) r}``.

    ``corner`` is the lower-left corner of the standard square, before the
    isometry is applied.
    """

    corner: complex
    size: float
    isometry: Isometry = IDENTITY
    base_projection: str = "z"

    def __post_init__(self):
        if not self.size > 0:
            raise ValueError(f"square size must be positive, got {self.size}")

    @property
    def center(self) -> complex:
        return self.isometry.apply(self.corner + 0.5 * self.size * (1 + 1j))

    def local(self, z):
        """Coordinates in ``[0, size)^2`` for points of the square."""
        return self.isometry.inverse(z) - self.corner

    def contains(self, z) -> np.ndarray:
        u = np.asarray(self.local(np.asarray(z, dtype=complex)))
        return (u.real >= 0) & (u.real < self.size) & (u.imag >= 0) & (u.imag < self.size)

    def vertices(self) -> np.ndarray:
        c = self.corner
        s = self.size
        return self.isometry.apply(np.array([c, c + s, c + s + 1j * s, c + 1j * s]))

    def area(self) -> float:
        return self.size ** 2


def _lattice_reduce(Z: complex, r: float) -> complex:
    # exact for dyadic inputs: fmod of binary floats by binary floats is exact
    return complex(math.fmod(Z.real, r) % r, math.fmod(Z.imag, r) % r)


@dataclass(frozen=True)
class Subdivision:
    """Square lattice of side ``size`` translated by ``translation``.

    ``squares`` lists the squares meeting the region it was built for, keyed
    by integer index ``(j, k)``.
    """

    size: float
    translation: complex = 0.0j
    isometry: Isometry = IDENTITY
    squares: tuple = ()
    base_projection: str = "z"

    def _lattice_coords(self, z):
        # points within BOUNDARY_SNAP of a grid line are put on it, so the
        # half-open rule decides them regardless of round-off sign
        u = (self.isometry.inverse(np.asarray(z, dtype=complex)) - self.offset) / self.size
        out = []
        for part in (u.real, u.imag):
            near = np.round(part)
            out.append(np.where(np.abs(part - near) * self.size <= BOUNDARY_SNAP, near, part))
        return out

    def index_of(self, z) -> tuple[np.ndarray, np.ndarray]:
        x, y = self._lattice_coords(z)
        return np.floor(x).astype(np.int64), np.floor(y).astype(np.int64)

    @property
    def offset(self) -> complex:
        return _lattice_reduce(complex(self.translation), self.size)

    def square(self, j: int, k: int) -> AffineSquare:
        corner = self.offset + complex(j * self.size, k * self.size)
        return AffineSquare(corner, self.size, self.isometry, self.base_projection)

    def local_fraction(self, z) -> np.ndarray:
        """Position of ``z`` inside its square, as a complex in ``[0,1)^2``."""
        x, y = self._lattice_coords(z)
        return (x - np.floor(x)) + 1j * (y - np.floor(y))

    def __len__(self):
        return len(self.squares)

    def keys(self) -> list[tuple[int, int]]:
        return [(sq_j, sq_k) for sq_j, sq_k, _ in self.squares]


def make_subdivision(region_bounds: tuple[float, float, float, float], r: float,
                     isometry: Isometry = IDENTITY, Z: complex = 0.0j,
                     contains: Callable | None = None,
                     base_projection: str = "z") -> Subdivision:
    """All squares of the ``r``-lattice meeting a bounded base region.

    ``region_bounds = (xmin, xmax, ymin, ymax)`` is a bounding box of the
    region in the isometry's frame.  When ``contains`` is given, squares
    whose closure misses the region (tested on a 9x9 sample of the square
    closure) are dropped.
    """
    if not r > 0:
        raise ValueError(f"subdivision size must be positive, got {r}")
    xmin, xmax, ymin, ymax = region_bounds
    if not (math.isfinite(xmin) and math.isfinite(xmax) and math.isfinite(ymin) and math.isfinite(ymax)):
        raise ValueError("region must be bounded")
    off = _lattice_reduce(complex(Z), r)
    j0 = math.floor((xmin - off.real) / r)
    j1 = math.ceil((xmax - off.real) / r)
    k0 = math.floor((ymin - off.imag) / r)
    k1 = math.ceil((ymax - off.imag) / r)
    sub = Subdivision(r, Z, isometry, (), base_projection)
    squares = []
    g = np.linspace(0.0, 1.0, 9)
    gx, gy = np.meshgrid(g, g)
    for j in range(j0, j1):
        for k in range(k0, k1):
            sq = sub.square(j, k)
            if contains is not None:
                pts = isometry.apply(sq.corner + r * (gx + 1j * gy))
                if not np.any(contains(pts)):
                    continue
            squares.append((j, k, sq))
    return Subdivision(r, Z, isometry, tuple(squares), base_projection)


def disk_region(radius: float, center: complex = 0.0j):
    """Bounds and membership predicate of a closed disk in C."""
    bounds = (center.real - radius, center.real + radius, center.imag - radius, center.imag + radius)
    return bounds, (lambda z: np.abs(np.asarray(z) - center) <= radius)


@dataclass(frozen=True)
class FourCube:
    """``pi1^{-1}(s1) & pi2^{-1}(s2)`` for squares s1, s2 under independent forms."""

    pi1: LinearForm
    pi2: LinearForm
    s1: AffineSquare
    s2: AffineSquare

    def __post_init__(self):
        if self.pi1.proportional_to(self.pi2):
            raise ValueError("the two projections of a 4-cube must be independent")

    def contains(self, z, w) -> np.ndarray:
        return self.s1.contains(self.pi1(z, w)) & self.s2.contains(self.pi2(z, w))

    @property
    def center(self) -> tuple[complex, complex]:
        m = np.array([[self.pi1.a, self.pi1.b], [self.pi2.a, self.pi2.b]])
        z, w = np.linalg.solve(m, np.array([self.s1.center, self.s2.center]))
        return complex(z), complex(w)

    def volume(self) -> float:
        # Lebesgue volume of the preimage of s1 x s2 under the real-linear map (pi1, pi2)
        det = abs(self.pi1.a * self.pi2.b - self.pi1.b * self.pi2.a) ** 2
        return self.s1.area() * self.s2.area() / det


def shrink(region, lam: float):
    """Homothety of ratio ``lam`` about the center of a square or 4-cube."""
    if not (0 < lam <= 1):
        raise ValueError(f"shrink ratio must lie in (0, 1], got {lam}")
    if isinstance(region, AffineSquare):
        if lam == 1:
            return region
        new_size = region.size * lam
        corner = region.corner + 0.5 * (region.size - new_size) * (1 + 1j)
        return AffineSquare(corner, new_size, region.isometry, region.base_projection)
    if isinstance(region, FourCube):
        return FourCube(region.pi1, region.pi2, shrink(region.s1, lam), shrink(region.s2, lam))
    raise TypeError(f"cannot shrink {type(region).__name__}")


@dataclass(frozen=True)
class CubeGrid:
    """The 4-cube subdivision induced by two square lattices under two forms."""

    pi1: LinearForm
    pi2: LinearForm
    sub1: Subdivision
    sub2: Subdivision

    def keys(self, z, w) -> np.ndarray:
        """Integer (j1, k1, j2, k2) cube index of each point, shape (N, 4)."""
        j1, k1 = self.sub1.index_of(self.pi1(z, w))
        j2, k2 = self.sub2.index_of(self.pi2(z, w))
        return np.stack([np.atleast_1d(j1), np.atleast_1d(k1),
                         np.atleast_1d(j2), np.atleast_1d(k2)], axis=-1)

    def cubes(self) -> list[FourCube]:
        return [FourCube(self.pi1, self.pi2, s1, s2)
                for _, _, s1 in self.sub1.squares for _, _, s2 in self.sub2.squares]

    def in_shrunk(self, z, w, lam: float) -> np.ndarray:
        """Membership in the union of the ``lam``-shrunk cubes."""
        lo, hi = 0.5 * (1 - lam), 0.5 * (1 + lam)
        ok = np.ones(np.shape(z), dtype=bool)
        for sub, pi in ((self.sub1, self.pi1), (self.sub2, self.pi2)):
            f = sub.local_fraction(pi(z, w))
            ok &= (f.real >= lo) & (f.real < hi) & (f.imag >= lo) & (f.imag < hi)
        return ok


def coordinate_grid(r: float, bounds: float, Z: tuple[complex, complex] = (0j, 0j)) -> CubeGrid:
    """Axis-aligned 4-cube grid of side ``r`` on ``[-bounds, bounds]^4``."""
    box = (-bounds, bounds, -bounds, bounds)
    return CubeGrid(Z_PROJ, W_PROJ,
                    make_subdivision(box, r, Z=Z[0], base_projection="z"),
                    make_subdivision(box, r, Z=Z[1], base_projection="w"))


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite weighted point cloud in C^2."""

    z: np.ndarray
    w: np.ndarray
    weights: np.ndarray
    mass: float = field(init=False)

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=complex))
        w = np.atleast_1d(np.asarray(self.w, dtype=complex))
        wt = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if not (z.shape == w.shape == wt.shape) or z.ndim != 1:
            raise ValueError("atoms need matching 1-D arrays z, w, weights")
        if np.any(wt < 0) or not np.all(np.isfinite(wt)):
            raise ValueError("atom weights must be finite and nonnegative")
        for arr in (z, w, wt):
            arr.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "weights", wt)
        # fixed left-to-right accumulation order
        object.__setattr__(self, "mass", float(math.fsum(wt.tolist())))

    @classmethod
    def empty(cls) -> "AtomicMeasure":
        return cls(np.zeros(0, complex), np.zeros(0, complex), np.zeros(0))

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[complex, complex, float]]) -> "AtomicMeasure":
        atoms = list(atoms)
        if not atoms:
            return cls.empty()
        z, w, wt = zip(*atoms)
        return cls(np.array(z, complex), np.array(w, complex), np.array(wt, float))

    def __len__(self):
        return len(self.weights)

    def scaled(self, c: float) -> "AtomicMeasure":
        return AtomicMeasure(self.z, self.w, self.weights * c)

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return AtomicMeasure(np.concatenate([self.z, other.z]), np.concatenate([self.w, other.w]),
                             np.concatenate([self.weights, other.weights]))

    def sorted(self) -> "AtomicMeasure":
        """Atoms in lexicographic order of (Re z, Im z, Re w, Im w, weight)."""
        order = np.lexsort((self.weights, self.w.imag, self.w.real, self.z.imag, self.z.real))
        return AtomicMeasure(self.z[order], self.w[order], self.weights[order])

    def merged(self, decimals: int = 10) -> "AtomicMeasure":
        """Coalesce atoms at the same point (after rounding) into one."""
        if len(self) == 0:
            return self
        key = np.stack([np.round(a, decimals) for a in (self.z.real, self.z.imag, self.w.real, self.w.imag)], 1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        wt = np.zeros(len(uniq))
        np.add.at(wt, inv.ravel(), self.weights)
        return AtomicMeasure(uniq[:, 0] + 1j * uniq[:, 1], uniq[:, 2] + 1j * uniq[:, 3], wt)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re_z", "im_z", "re_w", "im_w", "weight"])
            for z, w, wt in zip(self.z, self.w, self.weights):
                writer.writerow([repr(float(z.real)), repr(float(z.imag)),
                                 repr(float(w.real)), repr(float(w.imag)), repr(float(wt))])

    @classmethod
    def from_csv(cls, path) -> "AtomicMeasure":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["re_z", "im_z", "re_w", "im_w", "weight"]:
                raise ValueError(f"{path}: bad or missing header {header!r}")
            rows = [tuple(map(float, row)) for row in reader if row]
        if not rows:
            return cls.empty()
        a = np.array(rows)
        return cls(a[:, 0] + 1j * a[:, 1], a[:, 2] + 1j * a[:, 3], a[:, 4])


def restrict_measure(nu: AtomicMeasure, region: Callable | None) -> AtomicMeasure:
    """Atoms of ``nu`` whose point satisfies ``region(z, w)``."""
    if region is None or len(nu) == 0:
        return nu
    keep = np.asarray(region(nu.z, nu.w), dtype=bool)
    return AtomicMeasure(nu.z[keep], nu.w[keep], nu.weights[keep])


def bin_masses(nu: AtomicMeasure, grid: CubeGrid) -> dict[tuple, float]:
    """Mass of ``nu`` per 4-cube of ``grid``; atoms outside all cubes go to key ``None``."""
    out: dict = {}
    if len(nu) == 0:
        return out
    keys = grid.keys(nu.z, nu.w)
    known1 = {(j, k) for j, k, _ in grid.sub1.squares}
    known2 = {(j, k) for j, k, _ in grid.sub2.squares}
    for key, wt in zip(map(tuple, keys.tolist()), nu.weights.tolist()):
        if key[:2] not in known1 or key[2:] not in known2:
            key = None
        out[key] = out.get(key, 0.0) + wt
    return out


def binned_distance(nu1: AtomicMeasure, nu2: AtomicMeasure, grid: CubeGrid) -> float:
    """Sum over cubes (plus an overflow bin) of ``|nu1(cube) - nu2(cube)|``."""
    b1 = bin_masses(nu1, grid)
    b2 = bin_masses(nu2, grid)
    keys = sorted(set(b1) | set(b2), key=lambda k: (k is None, k))
    return math.fsum(abs(b1.get(k, 0.0) - b2.get(k, 0.0)) for k in keys)


def masses_distance(m1: dict, m2: dict) -> float:
    keys = sorted(set(m1) | set(m2), key=lambda k: (k is None, k))
    return math.fsum(abs(m1.get(k, 0.0) - m2.get(k, 0.0)) for k in keys)
