"""Good and bad pieces of holomorphic curves over square subdivisions.

A parametrized curve ``gamma`` is classified over each square ``Q`` of a
subdivision of a projection ``pi``.  The sheets over ``Q`` are the roots of
``pi(gamma(t)) = centre(Q)``; lifting the straight segment from a critical
value to the centre joins the sheets that meet at that critical point.  The
resulting orbits are the connected components over ``Q`` and their sizes are
the projection degrees.  A component is good when its degree is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import (AffineSquare, AtomicMeasure, CubeGrid, LinearForm, Subdivision,
                       make_subdivision)
from .laminar import Chart, GraphDisk, UniformLaminarPiece, check_disjoint
from .roots import BoundaryZero, RootFindingError, find_zeros, winding_number


@dataclass(frozen=True)
class CurveIterate:
    """``t -> (z, w, dz/dt, dw/dt)`` over the parameter box ``domain``."""

    evaluator: Callable
    degree: int
    domain: tuple
    label: str = ""

    def __post_init__(self):
        if self.degree <= 0:
            raise ValueError("degree must be positive")

    def point(self, t):
        z, w, _, _ = self.evaluator(np.asarray(t, dtype=complex))
        return z, w

    def cr_residual(self, n: int = 9) -> float:
        """Relative mismatch between the returned derivative and a complex difference quotient."""
        x0, x1, y0, y1 = self.domain
        X, Y = np.meshgrid(np.linspace(x0, x1, n)[1:-1], np.linspace(y0, y1, n)[1:-1])
        t = (X + 1j * Y).ravel()
        d = 1e-6 * max(x1 - x0, y1 - y0)
        z, w, dz, dw = self.evaluator(t)
        err = 0.0
        for k, dv in ((0, dz), (1, dw)):
            fx = (self.evaluator(t + d)[k] - self.evaluator(t - d)[k]) / (2 * d)
            fy = (self.evaluator(t + 1j * d)[k] - self.evaluator(t - 1j * d)[k]) / (2j * d)
            scale = np.maximum(np.abs(dv), 1.0)
            err = max(err, float(np.max(np.abs(fx - fy) / scale)), float(np.max(np.abs(fx - dv) / scale)))
        return err


def line_curve(base=(0j, 0j), direction=(1 + 0j, 0j), radius: float = 1.0, label: str = "line") -> CurveIterate:
    b0, b1 = complex(base[0]), complex(base[1])
    v0, v1 = complex(direction[0]), complex(direction[1])

    def ev(t):
        t = np.asarray(t, dtype=complex)
        one = np.ones_like(t)
        return b0 + v0 * t, b1 + v1 * t, v0 * one, v1 * one
    return CurveIterate(ev, 1, (-radius, radius, -radius, radius), label)


def polynomial_curve(pz: Sequence[complex], pw: Sequence[complex], radius: float, degree: int | None = None,
                     label: str = "poly") -> CurveIterate:
    """``t -> (pz(t), pw(t))`` with ascending coefficient lists."""
    from .laminar import Polynomial
    Pz, Pw = Polynomial(tuple(pz)), Polynomial(tuple(pw))
    dPz, dPw = Pz.derivative(), Pw.derivative()

    def ev(t):
        t = np.asarray(t, dtype=complex)
        return Pz(t), Pw(t), dPz(t), dPw(t)
    deg = degree if degree is not None else max(Pz.degree, Pw.degree, 1)
    return CurveIterate(ev, deg, (-radius, radius, -radius, radius), label)


def henon_curve(f, line, n: int, radius: float | None = None) -> CurveIterate:
    """``f^n`` (n > 0) or ``f^{-n}`` (n < 0) applied to an affine line ``t -> base + t dir``."""
    R = radius if radius is not None else f.escape_radius
    step = f.forward_tangent if n >= 0 else f.inverse_tangent

    def ev(t):
        t = np.asarray(t, dtype=complex)
        z, w = line(t)
        dz = np.broadcast_to(np.complex128(line.direction[0]), t.shape).copy()
        dw = np.broadcast_to(np.complex128(line.direction[1]), t.shape).copy()
        for _ in range(abs(n)):
            z, w, dz, dw = step(z, w, dz, dw)
        return z, w, dz, dw
    return CurveIterate(ev, f.d ** abs(n), (-R, R, -R, R), f"f^{n}(L)")


# continuation -------------------------------------------------------------------

def _proj(C: CurveIterate, pi: LinearForm, t):
    z, w, dz, dw = C.evaluator(t)
    return pi.a * z + pi.b * w, pi.a * dz + pi.b * dw


def _newton_to(C, pi, t, target, iters=8):
    for _ in range(iters):
        v, dv = _proj(C, pi, t)
        with np.errstate(all="ignore"):
            step = np.where(dv != 0, (v - target) / dv, 0)
        t = t - step
    return t


def lift(C: CurveIterate, pi: LinearForm, t0, start, end, steps: int = 48):
    """Continue ``t0`` (with ``pi(gamma(t0)) = start``) along the segment to ``end``."""
    t = np.array(t0, dtype=complex)
    start = np.asarray(start, dtype=complex)
    end = np.asarray(end, dtype=complex)
    for s in np.linspace(0, 1, steps + 1)[1:]:
        t = _newton_to(C, pi, t, start + s * (end - start), iters=3)
    return _newton_to(C, pi, t, end, iters=6)


# classification --------------------------------------------------------------------

@dataclass
class ComponentRecord:
    square: AffineSquare
    key: tuple
    parameter_patch: np.ndarray      # sheets over the square centre
    kind: str
    projection_degree: int
    area: float

    def to_json(self) -> dict:
        return {"key": list(self.key), "center": [self.square.center.real, self.square.center.imag],
                "size": self.square.size, "kind": self.kind, "degree": self.projection_degree,
                "area": self.area,
                "sheets": [[complex(t).real, complex(t).imag] for t in self.parameter_patch]}


@dataclass
class DefectReport:
    r: float
    normalized_defect: float
    constant_estimate: float


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        a, b = self.find(i), self.find(j)
        if a != b:
            self.parent[max(a, b)] = min(a, b)


@dataclass
class Classification:
    curve: CurveIterate
    pi: LinearForm
    sub: Subdivision
    records: list
    sheets: dict = field(default_factory=dict)      # key -> (roots, good flags)
    critical_points: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    @property
    def good_area(self) -> float:
        return math.fsum(r.area for r in self.records if r.kind == "good")

    @property
    def bad_area(self) -> float:
        return math.fsum(r.area for r in self.records if r.kind == "bad")

    @property
    def total_area(self) -> float:
        return math.fsum(r.area for r in self.records)

    def is_good(self, t) -> np.ndarray:
        """Whether each parameter lies on a good component over its square."""
        t = np.atleast_1d(np.asarray(t, dtype=complex))
        zeta, _ = _proj(self.curve, self.pi, t)
        j, k = self.sub.index_of(zeta)
        out = np.zeros(t.shape, dtype=bool)
        for idx in range(t.size):
            key = (int(j[idx]), int(k[idx]))
            if key not in self.sheets:
                continue
            roots, good = self.sheets[key]
            if not good.any():
                continue
            q = self.sub.square(*key).center
            end = lift(self.curve, self.pi, t[idx:idx + 1], zeta[idx:idx + 1], np.array([q]))[0]
            d = np.abs(roots - end)
            i = int(np.argmin(d))
            out[idx] = bool(good[i]) and d[i] < 1e-6 * (1 + abs(end))
        return out


def _sheets(C, pi, q, omega):
    def F(t):
        return _proj(C, pi, t)[0] - q

    def dF(t):
        return _proj(C, pi, np.array([t]))[1][0]
    zeros = find_zeros(F, C.domain, df=dF)
    pts = np.array([z.point for z in zeros], dtype=complex)
    mult = np.array([z.multiplicity for z in zeros], dtype=int)
    if omega is not None and len(pts):
        keep = np.asarray(omega(*C.point(pts)), dtype=bool)
        pts, mult = pts[keep], mult[keep]
    return pts, mult


def critical_points(C: CurveIterate, pi: LinearForm):
    """Zeros of ``(pi o gamma)'`` in the parameter box, with multiplicities."""
    def dF(t):
        return _proj(C, pi, t)[1]
    try:
        zeros = find_zeros(dF, C.domain)
    except BoundaryZero:
        return np.zeros(0, complex), np.zeros(0, int)
    return (np.array([z.point for z in zeros], dtype=complex),
            np.array([z.multiplicity for z in zeros], dtype=int))


def classify_components(C: CurveIterate, pi: LinearForm, S: Subdivision, omega: Callable | None = None,
                        eps_frac: float = 1e-4) -> Classification:
    """Components of ``C`` over every square of ``S`` (restricted to ``omega``)."""
    crit, crit_mult = critical_points(C, pi)
    if len(crit) and omega is not None:
        keep = np.asarray(omega(*C.point(crit)), dtype=bool)
        crit, crit_mult = crit[keep], crit_mult[keep]
    crit_vals = _proj(C, pi, crit)[0] if len(crit) else np.zeros(0, complex)
    cj, ck = S.index_of(crit_vals) if len(crit) else (np.zeros(0, int), np.zeros(0, int))
    corner_cache: dict = {}

    def count_at(p):
        kk = (round(p.real, 12), round(p.imag, 12))
        if kk not in corner_cache:
            try:
                if omega is None:
                    x0, x1, y0, y1 = C.domain
                    corner_cache[kk] = winding_number(lambda t: _proj(C, pi, t)[0] - p, x0, x1, y0, y1)
                else:
                    corner_cache[kk] = int(_sheets(C, pi, p, omega)[1].sum())
            except (BoundaryZero, RootFindingError):
                corner_cache[kk] = -1
        return corner_cache[kk]

    records, sheets = [], {}
    area_unit = S.size ** 2
    for j, k, sq in S.squares:
        q = sq.center
        try:
            roots, mult = _sheets(C, pi, q, omega)
        except (BoundaryZero, RootFindingError):
            roots, mult = np.zeros(0, complex), np.zeros(0, int)
        n = int(mult.sum())
        corners = [count_at(v) for v in sq.vertices()]
        if n == 0 and all(c == 0 for c in corners):
            continue
        proper = all(c == n for c in corners) and (mult == 1).all()
        if not proper:
            deg = max(n, 1)
            records.append(ComponentRecord(sq, (j, k), roots, "bad", deg,
                                           area_unit * float(np.mean([max(c, 0) for c in corners] + [n]))))
            sheets[(j, k)] = (roots, np.zeros(len(roots), dtype=bool))
            continue
        uf = _UnionFind(len(roots))
        touched = np.zeros(len(roots), dtype=bool)
        here = np.nonzero((cj == j) & (ck == k))[0]
        for ci in here:
            c, m = crit[ci], crit_mult[ci] + 1
            v = crit_vals[ci]
            ends = _lift_from_critical(C, pi, c, m, v, q, eps_frac * S.size)
            idx = [int(np.argmin(np.abs(roots - e))) for e in ends]
            for a in idx:
                touched[a] = True
                uf.union(idx[0], a)
        groups: dict = {}
        for i in range(len(roots)):
            groups.setdefault(uf.find(i), []).append(i)
        good = np.zeros(len(roots), dtype=bool)
        for members in groups.values():
            deg = len(members)
            kind = "good" if deg == 1 and not touched[members[0]] else "bad"
            if kind == "good":
                good[members[0]] = True
            records.append(ComponentRecord(sq, (j, k), roots[members], kind, deg, deg * area_unit))
        sheets[(j, k)] = (roots, good)
    return Classification(C, pi, S, records, sheets, crit)


def _lift_from_critical(C, pi, c, m, v, q, eps):
    """The ``m`` sheets leaving the critical point ``c`` towards ``q``."""
    direction = (q - v) / abs(q - v) if abs(q - v) > eps else 1.0
    start = v + eps * direction
    # leading coefficient of pi(gamma(c + s)) - v ~ a s^m
    rho = 1e-3 * max(abs(C.domain[1] - C.domain[0]), 1.0)
    probe = c + rho * np.exp(2j * np.pi * np.arange(8) / 8)
    a = np.mean((_proj(C, pi, probe)[0] - v) / (probe - c) ** m)
    base = ((start - v) / a) ** (1.0 / m)
    t0 = c + base * np.exp(2j * np.pi * np.arange(m) / m)
    t0 = _newton_to(C, pi, t0, start, iters=6)
    return lift(C, pi, t0, np.full(m, start), np.full(m, q))


def defect_mass(records: Sequence[ComponentRecord], d_n: float, r: float | None = None) -> DefectReport:
    bad = math.fsum(rec.area for rec in records if rec.kind == "bad")
    if r is None:
        r = records[0].square.size if records else float("nan")
    nd = bad / d_n
    return DefectReport(r, nd, nd / r ** 2)


# uniform pieces ---------------------------------------------------------------------

def _complement(pi: LinearForm):
    """A second coordinate completing ``pi`` to a chart."""
    return (0, 1) if pi.a != 0 else (1, 0)


def _component_disk(C: CurveIterate, pi: LinearForm, sq: AffineSquare, t_center: complex, label: str) -> GraphDisk:
    eta = _complement(pi)
    chart = Chart(((pi.a, pi.b), eta), f"{pi.name or 'pi'}-graph")
    q = sq.center

    def phi(zeta):
        zeta = np.asarray(zeta, dtype=complex)
        flat = zeta.ravel()
        t = lift(C, pi, np.full(flat.shape, t_center), np.full(flat.shape, q), flat, steps=12)
        z, w = C.point(t)
        return (eta[0] * z + eta[1] * w).reshape(zeta.shape)
    return GraphDisk(sq, phi, chart, label=label)


def build_uniform_pieces(C: CurveIterate, pi1: LinearForm, pi2: LinearForm, S1: Subdivision, S2: Subdivision,
                         omega: Callable | None = None):
    """Good components of ``C`` over both subdivisions as graph disks of weight ``1/d_n``.

    Returns ``(pieces, defect1, defect2, classifications)``.
    """
    if pi1.proportional_to(pi2):
        raise ValueError("the two projections must be independent")
    out = []
    reports, classes = [], []
    for pi, S in ((pi1, S1), (pi2, S2)):
        cl = classify_components(C, pi, S, omega)
        classes.append(cl)
        reports.append(defect_mass(cl.records, C.degree, S.size))
        for key, (roots, good) in sorted(cl.sheets.items()):
            if not good.any():
                continue
            sq = S.square(*key)
            disks = [_component_disk(C, pi, sq, t, f"{C.label}/{pi.name}{key}#{i}")
                     for i, t in enumerate(roots[good])]
            out.append(UniformLaminarPiece(disks, [1.0 / C.degree] * len(disks), disks[0].chart,
                                           f"{pi.name}{key}"))
    return out, reports[0], reports[1], classes


def kept_mask(classes: Sequence[Classification], t) -> np.ndarray:
    """Parameters lying on a good component for at least one classification."""
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    keep = np.zeros(t.shape, dtype=bool)
    for cl in classes:
        todo = ~keep
        if todo.any():
            keep[todo] = cl.is_good(t[todo])
    return keep


# translation lemma --------------------------------------------------------------------

@dataclass
class TranslationResult:
    offset: tuple                # (offset for pi1 squares, offset for pi2 squares)
    escaped_min: float
    escaped_mean: float
    sigma: float
    escaped: np.ndarray


def translate_search(nu: AtomicMeasure, grid: CubeGrid, lam: float, samples: int = 9) -> TranslationResult:
    """Escaped mass ``nu(complement of the lam-shrunk cubes)`` over a grid of translations."""
    mass = nu.mass
    if mass > 1 + 1e-12:
        raise ValueError(f"measure mass {mass} exceeds 1; renormalize first")
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    r1, r2 = grid.sub1.size, grid.sub2.size
    coords = []
    for sub, pi, r in ((grid.sub1, grid.pi1, r1), (grid.sub2, grid.pi2, r2)):
        loc = (sub.isometry.inverse(pi(nu.z, nu.w)) - sub.offset) / r
        coords.extend([loc.real, loc.imag])
    u = np.arange(samples) / samples
    lo, hi = (1 - lam) / 2, (1 + lam) / 2
    inside = []
    for c in coords:
        frac = np.mod(c[None, :] - u[:, None], 1.0)
        inside.append(((frac >= lo) & (frac < hi)).astype(float))
    kept = np.einsum("ai,bi,ci,di,i->abcd", *inside, nu.weights, optimize=True)
    escaped = mass - kept
    idx = np.unravel_index(int(np.argmin(escaped)), escaped.shape)
    off1 = sub_offset(grid.sub1, u[idx[0]], u[idx[1]])
    off2 = sub_offset(grid.sub2, u[idx[2]], u[idx[3]])
    p = 1 - lam ** 4
    sigma = math.sqrt(p * (1 - p) * float(np.sum(nu.weights ** 2)))
    return TranslationResult((off1, off2), float(escaped.min()), float(escaped.mean()), sigma, escaped)


def sub_offset(sub: Subdivision, fx: float, fy: float) -> complex:
    """Translation (in the projected plane) shifting the squares by the local fraction ``(fx, fy)``."""
    return sub.isometry.rotation * complex(fx, fy) * sub.size


# end-to-end pipeline ------------------------------------------------------------------

class DominationError(RuntimeError):
    """A geometric bin mass exceeds the reference bin mass beyond tolerance."""


@dataclass
class CurveApproximation:
    """A curve with the two projections used to cut it into graphs."""

    curve: CurveIterate
    projections: tuple
    radius: float = 2.5            # squares cover the disk of this radius in each projection


@dataclass
class PipelineRow:
    r: float
    lam: float
    defect_mass: float
    omega_u1: float
    omega_u2: float
    nu_mass: float
    nuQ_mass: float
    rate_ratio: float
    domination_excess: float
    defect_1: float
    defect_2: float

    COLUMNS = ("r", "lambda", "defect_mass", "omega_u1", "omega_u2", "nu_mass", "nuQ_mass", "rate_ratio")

    def csv_values(self) -> list:
        return [self.r, self.lam, self.defect_mass, self.omega_u1, self.omega_u2, self.nu_mass,
                self.nuQ_mass, self.rate_ratio]


@dataclass
class PipelineReport:
    rows: list
    nu: object
    nuQ: list                      # AtomicMeasure per r
    tolerance: float


def node_atoms(mass_grid) -> AtomicMeasure:
    """Positive grid node masses as an atomic measure.

    Finite differences can leave tiny negative node masses; they are dropped.
    """
    vals = mass_grid.values
    idx = np.nonzero(vals > 0)
    pts = [mass_grid.lo[k] + mass_grid.h * idx[k] for k in range(4)]
    return AtomicMeasure(pts[0] + 1j * pts[1], pts[2] + 1j * pts[3], vals[idx])


def remark_lambda(omega_sum: float, lo: float = 0.05, hi: float = 0.95) -> float:
    """``1 - lambda = (omega_1 + omega_2)^(1/3)``, clamped to ``[lo, hi]``."""
    return float(min(hi, max(lo, 1.0 - omega_sum ** (1.0 / 3.0))))


def intersection_pipeline(approx1: CurveApproximation, approx2: CurveApproximation,
                          atoms: AtomicMeasure, params1, params2, u1, u2,
                          r_sequence: Sequence[float], bins: CubeGrid, sigma: float | None = None,
                          lam: float | None = None, samples: int = 9, abort_on_violation: bool = True,
                          omega_box: float | None = None,
                          progress: Callable | None = None) -> PipelineReport:
    """Compare the reference wedge of ``u1, u2`` with the geometric wedge of the good pieces.

    ``atoms`` are the intersection points of the two curves, located at
    parameters ``params1`` on the first curve and ``params2`` on the second.
    """
    from .geometry import W_PROJ, Z_PROJ, bin_masses, disk_region
    from .potentials import modulus_of_continuity, wedge_by_potentials

    r_sequence = [float(r) for r in r_sequence]
    if any(b >= a for a, b in zip(r_sequence, r_sequence[1:])):
        raise ValueError("r_sequence must be strictly decreasing")
    h = u1.h
    sig = sigma if sigma is not None else h
    nu = wedge_by_potentials(u1, u2, [sig], bins)
    ref = node_atoms(nu.node_mass)
    if ref.mass > 1:
        ref = ref.scaled(1.0 / ref.mass)
    tol = 10 * h * h * nu.total
    params1 = np.asarray(params1, dtype=complex)
    params2 = np.asarray(params2, dtype=complex)
    if omega_box is not None:
        v1 = u1.window((-omega_box,) * 4, (omega_box,) * 4)
        v2 = u2.window((-omega_box,) * 4, (omega_box,) * 4)
    else:
        v1, v2 = u1, u2
    rows, nuQs = [], []
    for r in r_sequence:
        w1, w2 = modulus_of_continuity(v1, r), modulus_of_continuity(v2, r)
        lam_r = lam if lam is not None else remark_lambda(w1 + w2)
        box = (-4 * r, 4 * r, -4 * r, 4 * r)
        grid = CubeGrid(Z_PROJ, W_PROJ, make_subdivision(box, r), make_subdivision(box, r, base_projection="w"))
        tr = translate_search(ref, grid, lam_r, samples)
        Z = tr.offset                     # translation of C^2 as (dz, dw)
        keeps, defects = [], []
        for approx, params in ((approx1, params1), (approx2, params2)):
            classes = []
            for pi in approx.projections:
                bounds, pred = disk_region(approx.radius)
                S = make_subdivision(bounds, r, Z=pi(Z[0], Z[1]), contains=pred, base_projection=pi.name)
                classes.append(classify_components(approx.curve, pi, S))
            defects.append(math.fsum(defect_mass(c.records, approx.curve.degree, r).normalized_defect
                                     for c in classes))
            keeps.append(kept_mask(classes, params))
        keep = keeps[0] & keeps[1]
        nuQ = AtomicMeasure(atoms.z[keep], atoms.w[keep], atoms.weights[keep])
        qb = bin_masses(nuQ, bins)
        excess = max((m - nu.masses.get(k, 0.0) for k, m in qb.items()), default=0.0)
        if excess > tol and abort_on_violation:
            raise DominationError(f"r={r}: geometric bin mass exceeds reference by {excess} > {tol}")
        dm = nu.total - nuQ.mass
        rate = dm / (w1 + w2) ** (1.0 / 3.0) if w1 + w2 > 0 else float("inf")
        row = PipelineRow(r, lam_r, dm, w1, w2, nu.total, nuQ.mass, rate, excess, defects[0], defects[1])
        rows.append(row)
        nuQs.append(nuQ)
        if progress is not None:
            progress(row)
    return PipelineReport(rows, nu, nuQs, tol)


def henon_intersection(f, L, Lp_line, n: int):
    """Points of ``f^n(L) ∩ f^{-n}(L')`` with their parameters on both curves.

    ``Lp_line`` is an :class:`AffineLine` of the form ``u -> (b + c u, u)``.
    """
    from .models import LinearEquation, iterated_line_roots
    b, c = Lp_line.base[0], Lp_line.direction[0]
    if Lp_line.base[1] != 0 or Lp_line.direction[1] != 1:
        raise ValueError("L' must be parametrized by its second coordinate")
    eq = LinearEquation(1.0, -c, -b)
    t = iterated_line_roots(f, L, eq, n)
    z, w = f.iterate(*L(t), n)
    _, u = f.iterate(z, w, n)
    weight = 1.0 / f.d ** (2 * n)
    return AtomicMeasure(z, w, np.full(len(t), weight)), t, u
