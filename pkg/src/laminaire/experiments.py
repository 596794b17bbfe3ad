"""Named experiments: each produces a CSV table and pass/fail criteria."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import geometry as geo
from . import laminar as lam
from . import models
from . import potentials as pot
from . import strong


@dataclass
class Criterion:
    name: str
    value: float
    threshold: float
    passed: bool
    comparison: str = "<="

    def to_json(self) -> dict:
        return {"name": self.name, "value": _num(self.value), "threshold": _num(self.threshold),
                "comparison": self.comparison, "pass": bool(self.passed)}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def check(name: str, value: float, threshold: float, comparison: str = "<=") -> Criterion:
    ops = {"<=": value <= threshold, "<": value < threshold, ">=": value >= threshold,
           ">": value > threshold, "==": value == threshold}
    return Criterion(name, float(value), float(threshold), bool(ops[comparison]), comparison)


@dataclass
class ExperimentResult:
    name: str
    columns: tuple
    rows: list
    criteria: list
    parameters: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return str(v)


def render_csv(result: ExperimentResult) -> str:
    """CSV text with exact float round-tripping; identical inputs give identical bytes."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(result.columns)
    for row in result.rows:
        wr.writerow([_cell(v) for v in row])
    return buf.getvalue()


def render_summary(result: ExperimentResult) -> str:
    doc = {"experiment": result.name,
           "parameters": {k: _jsonable(v) for k, v in result.parameters.items()},
           "criteria": [c.to_json() for c in result.criteria],
           "pass": result.passed}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return _num(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


class ConfigError(ValueError):
    """Experiment parameters that fail validation."""


def _floats(v, default):
    """A strictly decreasing positive sequence (every sweep here refines toward zero)."""
    if v is None:
        return list(default)
    try:
        if isinstance(v, str):
            out = [float(eval_fraction(x)) for x in v.replace(",", " ").split()]
        else:
            out = [float(x) for x in v]
    except ValueError as exc:
        raise ConfigError(f"not a number sequence: {v!r}") from exc
    if not out or any(x <= 0 or not math.isfinite(x) for x in out):
        raise ConfigError(f"sequence must be positive and finite: {v!r}")
    if any(b >= a for a, b in zip(out, out[1:])):
        raise ConfigError(f"sequence must be strictly decreasing: {v!r}")
    return out


def eval_fraction(text: str) -> float:
    """Parse ``0.25`` or ``1/24``."""
    text = str(text).strip()
    if "/" in text:
        a, b = text.split("/")
        return float(a) / float(b)
    return float(text)


def _param(params: dict, key: str, default, kind=float):
    if key not in params:
        return default
    v = params[key]
    try:
        if kind is float:
            out = eval_fraction(v)
            if not math.isfinite(out):
                raise ValueError(v)
            return out
        if kind is bool:
            return str(v).lower() in ("1", "true", "yes", "on")
        return kind(v)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad value for {key}: {v!r}") from exc


def henon_from_params(params: dict) -> models.HenonMap:
    """Hénon fixture from optional ``p_coeffs`` (ascending, space separated) and ``a``."""
    coeffs = params.get("p_coeffs")
    try:
        p = models.Polynomial(tuple(complex(c) for c in str(coeffs).replace(",", " ").split())) if coeffs else None
    except ValueError as exc:
        raise ConfigError(f"bad p_coeffs: {coeffs!r}") from exc
    a = complex(_param(params, "a", 0.3, complex))
    if a == 0 or (p is not None and p.degree < 2):
        raise ConfigError("Hénon map needs a != 0 and deg p >= 2")
    return models.HenonMap(p, a) if p is not None else models.HenonMap(a=a)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# uniform wedges -----------------------------------------------------------------

def quadratic_mass(h: float, eps: float = 0.0) -> float:
    """Wedge mass of ``|z|^2 + |w|^2 + eps |z|^2 |w|^2`` on the unit polydisk."""
    m = 3 * h + 2 * h
    lo, counts = pot.box_grid((1 + m,) * 4, h)

    def u(z, w):
        a, b = np.abs(z) ** 2, np.abs(w) ** 2
        return a + b + eps * a * b
    g = pot.sample_potential(u, lo, counts, h, "quadratic")
    mass = pot.wedge_masses(g, g, h)
    wts = pot.polydisk_weights(mass, 1.0)
    return math.fsum(np.ravel(mass.values * wts))


def pencil_compare(h: float):
    v, hz = models.pencils()
    m = 3 * h + 2 * h
    lo, counts = pot.staggered_grid((1.5 + m, 0.5 + m, 1.5 + m, 0.5 + m), h)
    sub = geo.make_subdivision((-1.5, 1.5, -0.5, 0.5), 1.0, Z=0.5 + 0.5j)
    bins = geo.CubeGrid(geo.Z_PROJ, geo.W_PROJ, sub,
                        geo.make_subdivision((-1.5, 1.5, -0.5, 0.5), 1.0, Z=0.5 + 0.5j, base_projection="w"))
    return lam.uniform_wedge_compare(v, hz, lo, counts, h, [h], bins)


def fixture_families() -> dict:
    """Every disk family the fixtures provide, by name."""
    fam = {}
    v, hz = models.pencils()
    fam["pencil_vertical"], fam["pencil_horizontal"] = v, hz
    _, dem = models.demailly_current(8)
    fam["demailly_decomposition"] = dem
    cp = models.cantor_product_currents(*cantor_points())
    fam["product_horizontal"], fam["product_vertical"] = cp.horizontal, cp.vertical
    fam["product_alternative"] = [cp.alt_horizontal, cp.alt_vertical]
    return fam


def uniform_wedge(params: dict, seed: int) -> ExperimentResult:
    hs = _floats(params.get("h_quadratic"), (0.2, 0.1, 0.05))
    eps = _param(params, "eps", 0.5)
    hp = _floats(params.get("h_pencil"), (0.1, 0.075, 0.05))
    rows, crit = [], []
    exact = 8.0
    errs_plain, errs_pert = [], []
    for h in hs:
        m0 = quadratic_mass(h)
        m1 = quadratic_mass(h, eps)
        e0 = abs(m0 - exact) / exact
        e1 = abs(m1 - exact * (1 + eps)) / (exact * (1 + eps))
        errs_plain.append(e0)
        errs_pert.append(e1)
        rows.append(["quadratic", h, m0, e0, m1, e1])
    at = [e for h, e in zip(hs, errs_plain) if math.isclose(h, 0.1)]
    crit.append(check("quadratic_rel_error_h0.1", at[0] if at else errs_plain[len(hs) // 2], 0.02))
    crit.append(check("perturbed_quadratic_error_slope", loglog_slope(hs, errs_pert), 1.8, ">="))
    dists = []
    geo_ok = True
    for h in hp:
        rep = pencil_compare(h)
        dists.append(rep.binned_distance)
        geo_ok &= len(rep.geometric) == 9 and rep.geometric.mass == 1.0
        rows.append(["pencil", h, rep.potential.total, rep.binned_distance, rep.geometric.mass, len(rep.geometric)])
    crit.append(check("pencil_distance_slope", loglog_slope(hp, dists), 1.0, ">="))
    crit.append(check("pencil_geometric_exact", float(geo_ok), 1.0, "=="))
    worst = 0.0
    for name, fam in fixture_families().items():
        mass = lam.geometric_wedge(fam, fam).mass
        worst = max(worst, mass)
        rows.append(["self_wedge", name, mass, "", "", ""])
    crit.append(check("self_wedge_mass_max", worst, 0.0, "=="))
    return ExperimentResult("uniform_wedge", ("case", "h", "value1", "value2", "value3", "value4"), rows, crit,
                            {"h_quadratic": hs, "eps": eps, "h_pencil": hp})


# Cantor products ---------------------------------------------------------------

def cantor_points():
    X = [0.25 + 0.25j, -0.25 + 0.25j, 0.25 - 0.25j, -0.25 - 0.25j,
         0.75 + 0.25j, -0.75 - 0.25j, 0.25 + 0.75j, -0.25 - 0.75j]
    mu = [k / 36 for k in range(1, 9)]
    return X, mu


def cantor_product(params: dict, seed: int) -> ExperimentResult:
    h = _param(params, "h", 1 / 24)
    X, mu = cantor_points()
    cp = models.cantor_product_currents(X, mu)
    bins = geo.coordinate_grid(0.5, 1.0)
    target = models.product_measure(X, mu)
    g = lam.geometric_wedge(cp.horizontal, cp.vertical)
    d_geo = geo.binned_distance(g, target, bins)
    atoms_equal = (len(g) == len(target)
                   and np.array_equal(np.sort(g.weights), np.sort(target.weights))
                   and float(np.max(np.abs(g.sorted().z - target.z) + np.abs(g.sorted().w - target.w))) <= 1e-12)
    alt = lam.geometric_wedge(cp.alt_horizontal, cp.alt_vertical)
    both = [cp.horizontal, cp.vertical]
    self_sum = lam.geometric_wedge(both, both)
    u_h, u_v = models.product_potentials(X, mu)
    m = 3 * h + 2 * h
    lo, counts = pot.staggered_grid((1 + m,) * 4, h)
    gh = pot.sample_potential(u_h, lo, counts, h, "u_h")
    gv = pot.sample_potential(u_v, lo, counts, h, "u_v")
    pw = pot.wedge_by_potentials(gh, gv, [h], bins)
    d_pot = geo.masses_distance(geo.bin_masses(target, bins), pw.masses)
    rows = [["geometric_hv", g.mass, d_geo], ["alternative", alt.mass, 0.0],
            ["sum_self_geometric", self_sum.mass, geo.binned_distance(self_sum, target.scaled(2.0), bins)],
            ["potential_hv", pw.total, d_pot]]
    crit = [check("geometric_equals_product_distance", d_geo, 0.0, "=="),
            check("geometric_atoms_match", float(atoms_equal), 1.0, "=="),
            check("alternative_mass", alt.mass, 0.0, "=="),
            check("potential_binned_distance", d_pot, 0.1)]
    return ExperimentResult("cantor_product", ("quantity", "mass", "binned_distance"), rows, crit, {"h": h})


# Demailly current --------------------------------------------------------------

def _annulus_squares(edges: np.ndarray, side: float, delta: float) -> np.ndarray:
    """Which squares ``[a, a+side] x [b, b+side]`` meet ``1 - delta <= |z| <= 1 + delta``."""
    a, b = edges[:, None], edges[None, :]

    def near(x):
        return np.where((x <= 0) & (x + side >= 0), 0.0, np.minimum(abs(x), abs(x + side)))

    inner = np.hypot(near(a), near(b))
    outer = np.hypot(np.maximum(abs(a), abs(a + side)), np.maximum(abs(b), abs(b + side)))
    return (inner <= 1 + delta) & (outer >= 1 - delta)


def _demailly_stats(mass: pot.GridPotential, delta: float, side: float):
    vals = mass.values
    total = math.fsum(vals.ravel())
    x, y, s, t = (mass.axis(k) for k in range(4))
    rz = np.hypot(x[:, None], y[None, :])
    rw = np.hypot(s[:, None], t[None, :])
    dist = np.sqrt((rz[:, :, None, None] - 1) ** 2 + (rw[None, None, :, :] - 1) ** 2)
    near = math.fsum(vals[dist <= delta]) / total
    # coarse-bin reading: mass in side-length bins meeting the product of annuli
    idx = [np.floor(a / side).astype(int) for a in (x, y, s, t)]
    k0 = min(i.min() for i in idx)
    k1 = max(i.max() for i in idx)
    meets = _annulus_squares(np.arange(k0, k1 + 1) * side, side, delta)
    zm = meets[np.ix_(idx[0] - k0, idx[1] - k0)]
    wm = meets[np.ix_(idx[2] - k0, idx[3] - k0)]
    binned = math.fsum(vals[zm[:, :, None, None] & wm[None, None]]) / total
    az = np.arctan2(y[None, :], x[:, None]) % (2 * np.pi)
    aw = np.arctan2(t[None, :], s[:, None]) % (2 * np.pi)
    bz = np.minimum((az / (np.pi / 2)).astype(int), 3)
    bw = np.minimum((aw / (np.pi / 2)).astype(int), 3)
    marg = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            marg[i, j] = vals[(bz == i)[:, :, None, None] & (bw == j)[None, None, :, :]].sum()
    marg_dist = float(np.abs(marg / total - 1 / 16).sum())
    return total, near, binned, marg_dist


def demailly_self(params: dict, seed: int) -> ExperimentResult:
    """Self-wedge of max(log+|z|, log+|w|); criteria judged at the last (smallest) sigma."""
    n = int(_param(params, "nodes", 48, int))
    half = _param(params, "half_width", 1.5)
    delta = _param(params, "delta", 0.1)
    N = int(_param(params, "angles", 8, int))
    h = 2 * half / (n - 1)
    ratios = [s / h for s in _floats(params.get("sigmas"), ())] or [2.0, 1.5, 1.0]
    if sorted(ratios, reverse=True) != ratios:
        raise ConfigError("sigmas must be decreasing")
    lo, counts = pot.box_grid((half,) * 4, h)
    potential, fams = models.demailly_current(N)
    g = pot.sample_potential(potential, lo, counts, h, "max log+")
    rows = []
    for ratio in ratios:
        stats = _demailly_stats(pot.wedge_masses(g, g, ratio * h), delta, delta)
        rows.append([ratio * h, *stats])
    total, near, _, marg_dist = rows[-1][1:]
    geo_mass = lam.geometric_wedge(fams, fams).mass
    rows.append(["geometric", geo_mass, "", "", ""])
    crit = [check("mass_error", abs(total - 1), 0.05),
            check("torus_fraction", near, 0.95, ">="),
            check("angular_binned_distance", marg_dist, 0.1),
            check("geometric_self_mass", geo_mass, 0.0, "==")]
    return ExperimentResult("demailly_self", ("sigma", "mass", "torus_fraction", "annulus_bin_fraction",
                                              "angular_distance"), rows, crit,
                            {"nodes": n, "half_width": half, "delta": delta, "angles": N,
                             "sigmas": [r * h for r in ratios]})


# translation lemma -------------------------------------------------------------

def lemma45(params: dict, seed: int) -> ExperimentResult:
    first = _lemma45_once(params, seed)
    again = _lemma45_once(params, seed)
    same = render_csv(first) == render_csv(again) and render_summary(first) == render_summary(again)
    first.criteria.append(check("rerun_byte_identical", float(same), 1.0, "=="))
    return first


def _lemma45_once(params: dict, seed: int) -> ExperimentResult:
    n_atoms = int(_param(params, "atoms", 10000, int))
    lam_ = _param(params, "lambda", 0.9)
    r = _param(params, "r", 1.0)
    cells = int(_param(params, "cells", 4, int))
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, cells * r, size=(n_atoms, 4))
    nu = geo.AtomicMeasure(pts[:, 0] + 1j * pts[:, 1], pts[:, 2] + 1j * pts[:, 3], np.full(n_atoms, 1.0 / n_atoms))
    box = (0.0, cells * r, 0.0, cells * r)
    grid = geo.CubeGrid(geo.Z_PROJ, geo.W_PROJ, geo.make_subdivision(box, r),
                        geo.make_subdivision(box, r, base_projection="w"))
    res = strong.translate_search(nu, grid, lam_)
    expected = 1 - lam_ ** 4
    rows = [["mean", res.escaped_mean], ["min", res.escaped_min], ["sigma", res.sigma],
            ["expected_mean", expected], ["bound", 2 * expected]]
    crit = [check("mean_deviation_in_sigmas", abs(res.escaped_mean - expected) / res.sigma, 3.0),
            check("min_escaped", res.escaped_min, 2 * expected, "<")]
    return ExperimentResult("lemma45", ("quantity", "value"), rows, crit,
                            {"atoms": n_atoms, "lambda": lam_, "r": r, "cells": cells, "seed": seed})


# defect sweep ------------------------------------------------------------------

def defect_sweep(params: dict, seed: int) -> ExperimentResult:
    rs = _floats(params.get("r"), (0.8, 0.4, 0.2))
    n = int(_param(params, "iterate", 2, int))
    radius = _param(params, "radius", 2.5)
    samples = int(_param(params, "disjoint_samples", 9, int))
    f = henon_from_params(params)
    C = strong.henon_curve(f, models.AffineLine(), n)
    pi2 = geo.LinearForm(1, 0.3, "z+0.3w")
    bounds, pred = geo.disk_region(radius)
    rows, defects = [], []
    violations, worst_cons = 0, 0.0
    for r in rs:
        S1 = geo.make_subdivision(bounds, r, contains=pred)
        S2 = geo.make_subdivision(bounds, r, contains=pred, base_projection=pi2.name)
        pieces, d1, d2, classes = strong.build_uniform_pieces(C, geo.Z_PROJ, pi2, S1, S2)
        for cl, S in zip(classes, (S1, S2)):
            # a proper curve of degree d_n covers every square d_n times
            reference = C.degree * math.fsum(sq.area() for _, _, sq in S.squares)
            cons = abs(cl.good_area + cl.bad_area - reference) / reference
            worst_cons = max(worst_cons, cons)
        bad = sum(1 for p in pieces if len(p.disks) > 1 and lam.check_disjoint(p, samples))
        violations += bad
        defects.append(d1.normalized_defect)
        rows.append([r, d1.normalized_defect, d1.constant_estimate, d2.normalized_defect,
                     d2.constant_estimate, len(pieces), bad])
    slope = loglog_slope(rs, defects)
    crit = [check("defect_slope", slope, 1.6, ">="),
            check("disjointness_violations", violations, 0, "=="),
            check("area_conservation_rel", worst_cons, 1e-6)]
    return ExperimentResult("defect_sweep", ("r", "defect_z", "C_z", "defect_sheared", "C_sheared", "pieces",
                                             "disjointness_violations"), rows, crit,
                            {"r": rs, "iterate": n, "radius": radius})


# intersection pipeline ---------------------------------------------------------

PIPELINE_COLUMNS = strong.PipelineRow.COLUMNS


def henon_pipeline_inputs(n: int = 3, h: float = 0.1, half: float = 2.2, f=None):
    f = f or models.HenonMap()
    L = models.AffineLine()
    Lp = models.AffineLine((0.21 - 0.13j, 0j), (0.17 + 0.06j, 1 + 0j))
    atoms, t, u = strong.henon_intersection(f, L, Lp, n)
    C1, C2 = strong.henon_curve(f, L, n), strong.henon_curve(f, Lp, -n)
    m = 5 * h
    lo, counts = pot.staggered_grid((half + m,) * 4, h)
    Gp = pot.sample_potential(models.henon_green(f, 1), lo, counts, h, "G+")
    Gm = pot.sample_potential(models.henon_green(f, -1), lo, counts, h, "G-")
    A1 = strong.CurveApproximation(C1, (geo.Z_PROJ, geo.LinearForm(1, 0.3, "z+0.3w")))
    A2 = strong.CurveApproximation(C2, (geo.W_PROJ, geo.LinearForm(0.3, 1, "w+0.3z")))
    return A1, A2, atoms, t, u, Gp, Gm


def pipeline(params: dict, seed: int) -> ExperimentResult:
    rs = _floats(params.get("r"), (0.8, 0.4, 0.2))
    n = int(_param(params, "iterate", 3, int))
    h = _param(params, "h", 0.1)
    fixed = params.get("lambda")
    if fixed is not None and str(fixed).strip().lower() == "rule":
        fixed = None
    lam_value = _param({"lambda": fixed}, "lambda", None) if fixed is not None else None
    if lam_value is not None and not 0 < lam_value < 1:
        raise ConfigError("lambda must lie in (0, 1)")
    A1, A2, atoms, t, u, Gp, Gm = henon_pipeline_inputs(n, h, f=henon_from_params(params))
    bins = geo.coordinate_grid(1.0, 2.0)
    try:
        rep = strong.intersection_pipeline(A1, A2, atoms, t, u, Gp, Gm, rs, bins,
                                           lam=lam_value, omega_box=2.0)
    except strong.DominationError as exc:
        return ExperimentResult("pipeline", PIPELINE_COLUMNS, [], [Criterion(f"domination: {exc}", 1, 0, False)],
                                {"r": rs, "iterate": n, "h": h,
                                 "lambda": "rule" if lam_value is None else lam_value})
    rows = [row.csv_values() for row in rep.rows]
    nuq = [row.nuQ_mass for row in rep.rows]
    dm = [row.defect_mass for row in rep.rows]
    excess = max(row.domination_excess for row in rep.rows)
    crit = [check("domination_excess", excess, rep.tolerance),
            check("nuQ_nondecreasing", float(all(b >= a for a, b in zip(nuq, nuq[1:]))), 1.0, "=="),
            check("defect_final_over_initial", dm[-1] / dm[0], 0.5, "<=")]
    return ExperimentResult("pipeline", PIPELINE_COLUMNS, rows, crit, {"r": rs, "iterate": n, "h": h,
                                 "lambda": "rule" if lam_value is None else lam_value})


# iterated-line measures --------------------------------------------------------

def henon_mu(params: dict, seed: int) -> ExperimentResult:
    nmax = int(_param(params, "n_max", 4, int))
    if nmax < 4:
        raise ConfigError("n_max must be at least 4 for the Cauchy comparison")
    f = henon_from_params(params)
    bins = geo.coordinate_grid(0.5, 2.0)
    meas, rows = [], []
    counts_ok = True
    for n in range(nmax + 1):
        m = models.iterated_line_measure(f, n=n)
        meas.append(m)
        ok = len(m) == f.d ** (2 * n) and m.mass == 1.0
        if n <= 3:
            counts_ok &= ok
        rows.append([n, len(m), m.mass])
    d23 = geo.binned_distance(meas[2], meas[3], bins)
    d34 = geo.binned_distance(meas[3], meas[4], bins)
    rows.append(["d(2,3)", d23, ""])
    rows.append(["d(3,4)", d34, ""])
    crit = [check("certified_counts_and_unit_mass", float(counts_ok), 1.0, "=="),
            check("cauchy_trend_d23_minus_d34", d23 - d34, 0.0, ">")]
    return ExperimentResult("henon_mu", ("n", "atoms", "mass"), rows, crit, {"n_max": nmax})


EXPERIMENTS: dict[str, Callable] = {
    "uniform_wedge": uniform_wedge,
    "cantor_product": cantor_product,
    "demailly_self": demailly_self,
    "lemma45": lemma45,
    "defect_sweep": defect_sweep,
    "pipeline": pipeline,
    "henon_mu": henon_mu,
}
