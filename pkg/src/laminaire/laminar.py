"""Currents given by weighted families of holomorphic graph disks.

A disk is a graph ``eta = phi(zeta)`` over a planar base in a linear chart
``(zeta, eta) = M (z, w)``.  Two disks meet in the Dirac masses at their
isolated common points, counted once each; disks that agree on an open set
meet in nothing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .geometry import AffineSquare, AtomicMeasure, CubeGrid, bin_masses, masses_distance
from .roots import BoundaryZero, RootFindingError, find_zeros, winding_number

BOUNDARY_TOL = 1e-12
IDENTIFY_TOL = 1e-10
DISJOINT_TOL = 1e-10


class DiskIntersectionError(RuntimeError):
    """The intersection of two disks could not be computed reliably."""


@dataclass(frozen=True)
class Chart:
    """Linear coordinates ``(zeta, eta) = M @ (z, w)``."""

    matrix: tuple
    name: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2) or abs(np.linalg.det(m)) < 1e-12:
            raise ValueError("chart matrix must be an invertible 2x2 matrix")
        object.__setattr__(self, "matrix", tuple(tuple(complex(a) for a in row) for row in m))

    @property
    def M(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex)

    def forward(self, z, w):
        (a, b), (c, d) = self.matrix
        return a * z + b * w, c * z + d * w

    def backward(self, zeta, eta):
        (a, b), (c, d) = self.matrix
        det = a * d - b * c
        return (d * zeta - b * eta) / det, (-c * zeta + a * eta) / det

    @property
    def scale(self) -> float:
        return float(np.linalg.norm(self.M, 2))


HORIZONTAL = Chart(((1, 0), (0, 1)), "horizontal")   # w = phi(z)
VERTICAL = Chart(((0, 1), (1, 0)), "vertical")       # z = phi(w)


def sheared(lam: complex) -> Chart:
    """Chart ``(z + lam w, w)``: graphs over the sheared projection."""
    return Chart(((1, lam), (0, 1)), f"shear({lam})")


# planar bases ---------------------------------------------------------------

@dataclass(frozen=True)
class DiskBase:
    """Open disk ``|zeta - center| < radius``."""

    center: complex
    radius: float

    @property
    def bbox(self):
        c, r = self.center, self.radius
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)

    def contains(self, zeta):
        return np.abs(np.asarray(zeta) - self.center) < self.radius * (1 - BOUNDARY_TOL)


@dataclass(frozen=True)
class AnnulusBase:
    """Open annulus ``inner < |zeta - center| < outer``."""

    inner: float
    outer: float
    center: complex = 0j

    @property
    def bbox(self):
        c, r = self.center, self.outer
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)

    def contains(self, zeta):
        d = np.abs(np.asarray(zeta) - self.center)
        return (d > self.inner * (1 + BOUNDARY_TOL)) & (d < self.outer * (1 - BOUNDARY_TOL))


@dataclass(frozen=True)
class RectBase:
    """Open rectangle, optionally cut down to an open disk."""

    x0: float
    x1: float
    y0: float
    y1: float
    disk: DiskBase | None = None

    @property
    def bbox(self):
        return (self.x0, self.x1, self.y0, self.y1)

    def contains(self, zeta):
        zeta = np.asarray(zeta)
        tol = BOUNDARY_TOL * max(1.0, self.x1 - self.x0, self.y1 - self.y0)
        ok = ((zeta.real > self.x0 + tol) & (zeta.real < self.x1 - tol)
              & (zeta.imag > self.y0 + tol) & (zeta.imag < self.y1 - tol))
        if self.disk is not None:
            ok &= self.disk.contains(zeta)
        return ok


@dataclass(frozen=True)
class SquareBase:
    """Half-open affine square used as a base."""

    square: AffineSquare

    @property
    def bbox(self):
        v = self.square.vertices()
        return (v.real.min(), v.real.max(), v.imag.min(), v.imag.max())

    def contains(self, zeta):
        return self.square.contains(zeta)


def _as_base(base):
    return SquareBase(base) if isinstance(base, AffineSquare) else base


# graph maps -----------------------------------------------------------------

@dataclass(frozen=True)
class Polynomial:
    """``phi(zeta) = sum coeffs[k] zeta^k``."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs) or (0j,))

    def __call__(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        out = np.zeros_like(zeta) + self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            out = out * zeta + c
        return out

    def derivative(self) -> "Polynomial":
        return Polynomial(tuple(k * c for k, c in enumerate(self.coeffs))[1:] or (0j,))

    @property
    def degree(self) -> int:
        nz = [k for k, c in enumerate(self.coeffs) if c != 0]
        return nz[-1] if nz else 0


def constant(c: complex) -> Polynomial:
    return Polynomial((c,))


@dataclass(frozen=True, eq=False)
class GraphDisk:
    """The graph ``{eta = phi(zeta), zeta in base}`` in ``chart``."""

    base: object
    phi: object
    chart: Chart = HORIZONTAL
    dphi: Callable | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "base", _as_base(self.base))
        if isinstance(self.phi, Polynomial) and self.dphi is None:
            object.__setattr__(self, "dphi", self.phi.derivative())

    def key(self) -> tuple:
        """Deterministic identity used for canonical ordering of disk pairs."""
        ph = self.phi.coeffs if isinstance(self.phi, Polynomial) else (self.label,)
        return (self.chart.name, repr(self.chart.matrix), repr(self.base),
                tuple((c.real, c.imag) if isinstance(c, complex) else c for c in ph), self.label)

    def point(self, zeta):
        """Points of C^2 above base parameters ``zeta``."""
        zeta = np.asarray(zeta, dtype=complex)
        return self.chart.backward(zeta, self.phi(zeta))

    def base_samples(self, n: int = 33) -> np.ndarray:
        x0, x1, y0, y1 = self.base.bbox
        X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n), indexing="ij")
        pts = (X + 1j * Y).ravel()
        return pts[self.base.contains(pts)]

    def cr_residual(self, n: int = 17) -> float:
        """Discrete Cauchy-Riemann residual ``|d phi/d zbar|`` on base samples."""
        pts = self.base_samples(n)
        if len(pts) == 0:
            return 0.0
        x0, x1, _, _ = self.base.bbox
        d = 1e-6 * max(x1 - x0, 1e-300)
        fx = (self.phi(pts + d) - self.phi(pts - d)) / (2 * d)
        fy = (self.phi(pts + 1j * d) - self.phi(pts - 1j * d)) / (2 * d)
        scale = max(1.0, float(np.abs(fx).max()))
        return float(np.abs(0.5 * (fx + 1j * fy)).max() / scale)

    def area(self, n: int = 129) -> float:
        """Euclidean area of the graph in C^2 (its trace mass)."""
        x0, x1, y0, y1 = self.base.bbox
        hx, hy = (x1 - x0) / n, (y1 - y0) / n
        X, Y = np.meshgrid(x0 + hx * (np.arange(n) + 0.5), y0 + hy * (np.arange(n) + 0.5), indexing="ij")
        zeta = (X + 1j * Y).ravel()
        zeta = zeta[self.base.contains(zeta)]
        dphi = self.dphi(zeta) if self.dphi is not None else _numeric_derivative(self.phi, zeta)
        dz, dw = self.chart.backward(np.ones_like(zeta), dphi)
        return float(np.sum(np.abs(dz) ** 2 + np.abs(dw) ** 2) * hx * hy)


def c2_box(d: GraphDisk, n: int = 17) -> np.ndarray:
    """Real box ``[lo, hi]`` (4 coordinates) enclosing the graph over the base's bounding box.

    Sampled on an ``n x n`` grid and padded by twice a sampled Lipschitz
    bound times the sample spacing.
    """
    cached = d.__dict__.get("_c2box")
    if cached is not None:
        return cached
    x0, x1, y0, y1 = d.base.bbox
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n), indexing="ij")
    zeta = (X + 1j * Y).ravel()
    z, w = d.point(zeta)
    dphi = d.dphi(zeta) if d.dphi is not None else _numeric_derivative(d.phi, zeta)
    dz, dw = d.chart.backward(np.ones_like(zeta), dphi)
    spacing = math.hypot(x1 - x0, y1 - y0) / (n - 1)
    lip = float(max(np.abs(dz).max(), np.abs(dw).max()))
    pad = 2 * lip * spacing + 1e-9 * (1 + lip)
    coords = np.stack([z.real, z.imag, w.real, w.imag])
    box = np.stack([coords.min(axis=1) - pad, coords.max(axis=1) + pad])
    object.__setattr__(d, "_c2box", box)
    return box


def boxes_meet(d1: GraphDisk, d2: GraphDisk) -> bool:
    b1, b2 = c2_box(d1), c2_box(d2)
    return bool(np.all(b1[0] <= b2[1]) and np.all(b2[0] <= b1[1]))


def _numeric_derivative(phi, zeta, d=1e-6):
    return (phi(zeta + d) - phi(zeta - d)) / (2 * d)


@dataclass
class UniformLaminarPiece:
    """Weighted disjoint graphs: a finite transverse measure."""

    disks: list
    weights: list
    chart: Chart = HORIZONTAL
    label: str = ""

    def __post_init__(self):
        if len(self.disks) != len(self.weights):
            raise ValueError("need one weight per disk")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")

    def __iter__(self):
        return iter(zip(self.weights, self.disks))

    def scaled(self, c: float) -> "UniformLaminarPiece":
        return UniformLaminarPiece(list(self.disks), [c * w for w in self.weights], self.chart, self.label)

    @property
    def mass(self) -> float:
        return math.fsum(w * d.area() for w, d in self)

    def validated(self) -> "UniformLaminarPiece":
        bad = check_disjoint(self)
        if bad:
            raise ValueError(f"piece {self.label!r} has intersecting graphs {bad[:3]}")
        return self


# intersections --------------------------------------------------------------

@dataclass
class DiskIntersection:
    points: list            # list of (z, w)
    identified: bool = False
    tangential: list = field(default_factory=list)


def _difference(d1: GraphDisk, d2: GraphDisk):
    """``g(zeta) = eta2 - phi2(zeta2)`` along ``d1``; zeros are the common points."""
    def g(zeta):
        z, w = d1.point(zeta)
        zeta2, eta2 = d2.chart.forward(z, w)
        return eta2 - d2.phi(zeta2)
    return g


def disk_intersection(d1: GraphDisk, d2: GraphDisk, tol: float = IDENTIFY_TOL) -> DiskIntersection:
    """Isolated common points of two graph disks, each listed once."""
    g = _difference(d1, d2)

    def on_both(zeta):
        z, w = d1.point(zeta)
        zeta2, _ = d2.chart.forward(z, w)
        return d1.base.contains(zeta) & d2.base.contains(zeta2)

    samples = d1.base_samples(33)
    common = samples[on_both(samples)] if len(samples) else samples
    scale = max(d1.chart.scale, d2.chart.scale)
    if len(common) and float(np.abs(g(common)).max()) <= tol * scale:
        return DiskIntersection([], identified=True)
    if len(samples) and float(np.abs(g(samples)).max()) <= tol * scale:
        # same leaf, but the two bases do not overlap
        return DiskIntersection([], identified=False)
    try:
        zeros = find_zeros(g, d1.base.bbox)
    except (BoundaryZero, RootFindingError) as exc:
        raise DiskIntersectionError(f"cannot intersect {d1.label or d1.key()} with {d2.label or d2.key()}: {exc}") from exc
    pts, tang = [], []
    for zr in zeros:
        zeta = np.array([zr.point])
        if not on_both(zeta)[0]:
            continue
        z, w = d1.point(zeta)
        pts.append((complex(z[0]), complex(w[0])))
        if zr.tangential:
            tang.append(pts[-1])
    return DiskIntersection(pts, False, tang)


def check_disjoint(piece: UniformLaminarPiece, n: int = 33) -> list[tuple[int, int]]:
    """Pairs of graphs in a piece that meet (or come within 1e-10) over the base."""
    disks = list(piece.disks)
    bad = []
    for i in range(len(disks)):
        for j in range(i + 1, len(disks)):
            a, b = disks[i], disks[j]
            samples = a.base_samples(n)
            g = _difference(a, b)
            if len(samples) and float(np.abs(g(samples)).min()) <= DISJOINT_TOL:
                bad.append((i, j))
                continue
            x0, x1, y0, y1 = a.base.bbox
            pad = 1e-9 * max(x1 - x0, y1 - y0)
            try:
                if winding_number(g, x0 - pad, x1 + pad, y0 - pad, y1 + pad) == 0:
                    continue
            except (BoundaryZero, RootFindingError):
                pass
            try:
                hits = disk_intersection(a, b).points
            except DiskIntersectionError:
                bad.append((i, j))
                continue
            if hits:
                bad.append((i, j))
    return bad


@dataclass
class WedgeReport:
    measure: AtomicMeasure
    excluded_weight: float = 0.0
    failures: list = field(default_factory=list)
    tangencies: list = field(default_factory=list)
    identified_pairs: list = field(default_factory=list)


def _families(P) -> list[UniformLaminarPiece]:
    if isinstance(P, UniformLaminarPiece):
        return [P]
    return list(P)


def geometric_wedge_report(P1, P2) -> WedgeReport:
    """Geometric intersection measure of two disk families, with diagnostics."""
    atoms = []
    excluded = 0.0
    failures, tangencies, identified = [], [], []
    cache: dict = {}
    for i1, piece1 in enumerate(_families(P1)):
        for i2, piece2 in enumerate(_families(P2)):
            for a, (w1, d1) in enumerate(piece1):
                for b, (w2, d2) in enumerate(piece2):
                    if w1 == 0 or w2 == 0:
                        continue
                    if d1 is d2:
                        identified.append(((i1, a), (i2, b)))
                        continue
                    # canonical order makes the result symmetric in (P1, P2)
                    k1, k2 = d1.key(), d2.key()
                    first, second = (d1, d2) if k1 <= k2 else (d2, d1)
                    ck = (id(first), id(second))
                    if ck not in cache and not boxes_meet(first, second):
                        cache[ck] = DiskIntersection([])
                    if ck not in cache:
                        try:
                            cache[ck] = disk_intersection(first, second)
                        except DiskIntersectionError as exc:
                            cache[ck] = exc
                    res = cache[ck]
                    if isinstance(res, Exception):
                        excluded += w1 * w2
                        failures.append(((i1, a), (i2, b), str(res)))
                        continue
                    if res.identified:
                        identified.append(((i1, a), (i2, b)))
                        continue
                    tangencies.extend(res.tangential)
                    atoms.extend((z, w, w1 * w2) for z, w in res.points)
    meas = AtomicMeasure.from_atoms(atoms).sorted()
    return WedgeReport(meas, excluded, failures, tangencies, identified)


def geometric_wedge(P1, P2) -> AtomicMeasure:
    return geometric_wedge_report(P1, P2).measure


@dataclass
class Admissibility:
    verdict: str
    shared: list = field(default_factory=list)


def admissibility_check(P1, P2) -> Admissibility:
    """``shared_leaf_detected`` when some disk of P1 coincides with one of P2 on an open set."""
    shared = geometric_wedge_report(P1, P2).identified_pairs
    if shared:
        return Admissibility("shared_leaf_detected", shared)
    return Admissibility("admissible_evidence")


# increasing approximations ----------------------------------------------------

@dataclass
class Stage:
    """Uniformly laminar current on the union of ``cubes`` of ``grid`` (None: everywhere)."""

    pieces: list
    grid: CubeGrid | None = None
    cubes: frozenset | None = None


@dataclass
class LaminarApproximation:
    stages: list
    trace_masses: list
    skeleton_masses: list
    boundary_mass_tolerance: float


def _weights_by_disk(stage: Stage) -> dict:
    out: dict = {}
    for piece in stage.pieces:
        for w, d in piece:
            out[d.key()] = out.get(d.key(), 0.0) + w
    return out


def _skeleton_mass(stage: Stage, n: int = 17) -> float:
    """Trace mass of the stage's disks carried by the cube skeleton.

    A holomorphic disk meets a real face hyperplane ``Re pi = c`` (or ``Im``)
    in a set of zero area unless ``pi`` is constant on it, so only disks with
    a constant projection lying on a face line contribute, with their full area.
    """
    if stage.grid is None:
        return 0.0
    total = 0.0
    for piece in stage.pieces:
        for wt, d in piece:
            pts = d.base_samples(n)
            if len(pts) == 0:
                continue
            z, w = d.point(pts)
            for sub, pi in ((stage.grid.sub1, stage.grid.pi1), (stage.grid.sub2, stage.grid.pi2)):
                vals = pi(z, w)
                if float(np.ptp(vals.real) + np.ptp(vals.imag)) > 1e-12 * sub.size:
                    continue
                f = sub.local_fraction(vals[:1])[0]
                if min(f.real, 1 - f.real, f.imag, 1 - f.imag) * sub.size < 1e-9:
                    total += wt * d.area()
                    break
    return total


def assemble_increasing(stages: Sequence[Stage], boundary_mass_tolerance: float = 1e-9) -> LaminarApproximation:
    """Validate an increasing sequence of uniformly laminar stages."""
    stages = list(stages)
    prev: dict = {}
    traces, skeleton = [], []
    for i, st in enumerate(stages):
        cur = _weights_by_disk(st)
        for key, w in prev.items():
            if cur.get(key, 0.0) < w - 1e-15:
                raise ValueError(f"stage {i} decreases the weight of disk {key} ({w} -> {cur.get(key, 0.0)})")
        sk = _skeleton_mass(st)
        if sk > boundary_mass_tolerance:
            raise ValueError(f"stage {i} charges the cube skeleton with mass {sk}")
        traces.append(math.fsum(p.mass for p in st.pieces))
        skeleton.append(sk)
        prev = cur
    return LaminarApproximation(stages, traces, skeleton, boundary_mass_tolerance)


# potentials of disk families --------------------------------------------------

def family_potential(P) -> Callable:
    """``sum weight * log|eta - phi(zeta)|`` over all disks of the families."""
    items = [(w, d) for piece in _families(P) for w, d in piece]

    def u(z, w_):
        out = np.zeros(np.broadcast(z, w_).shape)
        for wt, d in items:
            zeta, eta = d.chart.forward(z, w_)
            out = out + wt * np.log(np.abs(eta - d.phi(zeta)))
        return out
    return u


def atoms_to_bins(nu: AtomicMeasure, grid: CubeGrid) -> dict:
    return bin_masses(nu, grid)


@dataclass
class CompareReport:
    binned_distance: float
    domination_defect: float
    potential: object
    geometric: AtomicMeasure
    geometric_bins: dict


def uniform_wedge_compare(P1, P2, lo, counts, h: float, sigmas: Sequence[float], bins: CubeGrid) -> CompareReport:
    """Potential-side and geometric wedge of two disk families, binned on ``bins``."""
    from .potentials import sample_potential, wedge_by_potentials

    u1 = sample_potential(family_potential(P1), lo, counts, h, "u1")
    u2 = u1 if P2 is P1 else sample_potential(family_potential(P2), lo, counts, h, "u2")
    pot = wedge_by_potentials(u1, u2, sigmas, bins)
    geo = geometric_wedge(P1, P2)
    gb = bin_masses(geo, bins)
    dist = masses_distance(gb, pot.masses)
    defect = max((gb.get(k, 0.0) - pot.masses.get(k, 0.0) for k in gb), default=0.0)
    return CompareReport(dist, max(defect, 0.0), pot, geo, gb)


# disk-family files ------------------------------------------------------------

def _base_to_json(base):
    if isinstance(base, SquareBase):
        sq = base.square
        return {"type": "square", "corner": [sq.corner.real, sq.corner.imag], "size": sq.size,
                "rotation": [sq.isometry.rotation.real, sq.isometry.rotation.imag],
                "shift": [sq.isometry.shift.real, sq.isometry.shift.imag]}
    if isinstance(base, DiskBase):
        return {"type": "disk", "center": [base.center.real, base.center.imag], "radius": base.radius}
    if isinstance(base, AnnulusBase):
        return {"type": "annulus", "inner": base.inner, "outer": base.outer,
                "center": [base.center.real, base.center.imag]}
    if isinstance(base, RectBase):
        out = {"type": "rect", "bounds": [base.x0, base.x1, base.y0, base.y1]}
        if base.disk is not None:
            out["disk"] = _base_to_json(base.disk)
        return out
    raise TypeError(f"cannot serialize base {base!r}")


def _base_from_json(d):
    from .geometry import Isometry
    t = d["type"]
    if t == "square":
        iso = Isometry(complex(*d["rotation"]), complex(*d["shift"]))
        return SquareBase(AffineSquare(complex(*d["corner"]), d["size"], iso))
    if t == "disk":
        return DiskBase(complex(*d["center"]), d["radius"])
    if t == "annulus":
        return AnnulusBase(d["inner"], d["outer"], complex(*d["center"]))
    if t == "rect":
        disk = _base_from_json(d["disk"]) if "disk" in d else None
        return RectBase(*d["bounds"], disk=disk)
    raise ValueError(f"unknown base type {t!r}")


def save_family(P, path) -> None:
    """Write disk families as a JSON list of {chart, base, coefficients, weight}."""
    rows = []
    for piece in _families(P):
        for w, d in piece:
            if not isinstance(d.phi, Polynomial):
                raise TypeError("only polynomial graphs can be serialized")
            rows.append({"chart": {"name": d.chart.name,
                                   "matrix": [[[c.real, c.imag] for c in row] for row in d.chart.matrix]},
                         "base": _base_to_json(d.base),
                         "coefficients": [[c.real, c.imag] for c in d.phi.coeffs],
                         "weight": w,
                         "label": d.label})
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=1)


def load_family(path) -> UniformLaminarPiece:
    with open(path) as fh:
        rows = json.load(fh)
    disks, weights = [], []
    for row in rows:
        ch = Chart(tuple(tuple(complex(*c) for c in r) for r in row["chart"]["matrix"]), row["chart"]["name"])
        disks.append(GraphDisk(_base_from_json(row["base"]), Polynomial(tuple(complex(*c) for c in row["coefficients"])),
                               ch, label=row.get("label", "")))
        weights.append(float(row["weight"]))
    return UniformLaminarPiece(disks, weights)
