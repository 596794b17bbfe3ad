import math

import numpy as np
import pytest

from laminaire import geometry as geo
from laminaire import models
from laminaire import potentials as pot

MA = 4 / math.pi ** 2


def quad(z, w):
    return np.abs(z) ** 2 + np.abs(w) ** 2


def maxlog(z, w):
    return np.maximum(np.log(np.maximum(np.abs(z), 1)), np.log(np.maximum(np.abs(w), 1)))


def grid(f, half=1.0, h=0.25, **kw):
    lo, counts = pot.box_grid((half,) * 4, h, **kw)
    return pot.sample_potential(f, lo, counts, h)


def test_sample_quadratic_center_and_corner():
    g = grid(quad)
    assert g.shape == (9, 9, 9, 9)
    assert g.values[4, 4, 4, 4] == 0.0
    assert g.values[8, 4, 8, 4] == 2.0  # node (1, 0, 1, 0)


def test_sample_maxlog_vanishes_on_unit_bidisk():
    g = grid(maxlog, half=2.0)
    z, w = np.meshgrid(g.axis(0), g.axis(1), indexing="ij")
    rz = np.abs(z + 1j * w)
    inside = rz <= 1
    assert np.all(g.values[inside][:, inside] == 0.0)
    assert g.values.max() == pytest.approx(math.log(2 * math.sqrt(2)))


def test_sample_henon_green_functional_equation():
    f = models.HenonMap()
    G = models.henon_green(f, 1)
    g = grid(G, half=1.5, h=0.5)
    z, w = g.slab_coords(2)
    fz, fw = f.forward(z, w)
    assert np.max(np.abs(G(fz, fw) - f.d * g.values[2])) <= 1e-6


def test_sample_rejects_infinite_values():
    with pytest.raises(pot.GridError):
        with np.errstate(divide="ignore"):
            grid(lambda z, w: np.log(np.abs(z)))


def test_staggered_grid_avoids_lattice():
    lo, counts = pot.staggered_grid((1.0,) * 4, 0.25)
    ax = lo[0] + 0.25 * np.arange(counts[0])
    assert np.all(np.abs(ax / 0.125 - np.round(ax / 0.125)) < 1e-12)
    assert np.all(np.round(ax / 0.125).astype(int) % 2 == 1)
    assert ax[0] <= -1 and ax[-1] >= 1 and ax[0] == -ax[-1]


def test_mollify_constant_and_pluriharmonic():
    c = grid(lambda z, w: np.full(np.shape(z), 3.25), half=1.0, h=0.125)
    m = pot.mollify(c, 0.125)
    assert np.max(np.abs(m.values - 3.25)) < 1e-12
    r = grid(lambda z, w: np.real(z) + 0.3 * np.imag(w), half=1.0, h=0.125)
    m = pot.mollify(r, 0.125)
    x = m.axis(0)[:, None, None, None]
    t = m.axis(3)[None, None, None, :]
    assert np.max(np.abs(m.values - (x + 0.3 * t))) < 1e-10


def _on_common(a, b):
    # values of a on the nodes of the smaller grid b
    k = int(round((b.lo[0] - a.lo[0]) / a.h))
    n = b.shape[0]
    return a.values[k:k + n, k:k + n, k:k + n, k:k + n]


def test_mollify_maxlog_decreases_with_sigma():
    h = 0.1
    u = grid(maxlog, half=1.6, h=h)
    fine = pot.mollify(u, h)
    coarse = pot.mollify(u, 2 * h)
    rng = np.random.default_rng(0)
    idx = tuple(rng.integers(0, coarse.shape[0], 100) for _ in range(4))
    raw = _on_common(u, coarse)[idx]
    f1 = _on_common(fine, coarse)[idx]
    f2 = coarse.values[idx]
    assert np.all(f2 >= f1 - 1e-12)
    assert np.all(f1 >= raw - 1e-12)


def test_mollify_rejects_small_sigma():
    with pytest.raises(pot.GridError):
        pot.mollify(grid(quad), 0.1)


@pytest.mark.parametrize("f, expected", [
    (quad, (1.0, 1.0, 0j)),
    (lambda z, w: np.real(z * z), (0.0, 0.0, 0j)),
    (lambda z, w: np.real(z * np.conj(w)), (0.0, 0.0, 0.5 + 0j)),
])
def test_complex_hessian_closed_forms(f, expected):
    g = grid(f, h=0.25)
    rng = np.random.default_rng(1)
    for _ in range(5):
        node = tuple(rng.integers(2, 7, 4))
        got = pot.complex_hessian(g, node)
        assert got == pytest.approx(expected, abs=1e-12)


def test_complex_hessian_exact_on_random_quadratics():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(4, 4))
    A = A + A.T

    def f(z, w):
        v = np.stack([z.real, z.imag, w.real, w.imag])
        return 0.5 * np.einsum("i...,ij,j...->...", v, A, v)
    uzz = 0.25 * (A[0, 0] + A[1, 1])
    uww = 0.25 * (A[2, 2] + A[3, 3])
    uzw = 0.25 * ((A[0, 2] + A[1, 3]) + 1j * (A[0, 3] - A[1, 2]))
    got = pot.complex_hessian(grid(f), (4, 4, 4, 4))
    assert got == pytest.approx((uzz, uww, uzw), abs=1e-10)


def test_complex_hessian_boundary_error():
    with pytest.raises(pot.GridError):
        pot.complex_hessian(grid(quad), (1, 4, 4, 4))


@pytest.mark.parametrize("fu, fv, value", [
    (quad, quad, 2 * MA),
    (lambda z, w: np.abs(z) ** 2, lambda z, w: np.abs(w) ** 2, MA),
    (lambda z, w: np.real(z * z), quad, 0.0),
])
def test_mixed_density_constants(fu, fv, value):
    d = pot.mixed_ma_density(grid(fu), grid(fv))
    assert np.max(np.abs(d.values - value)) < 1e-10


def test_mixed_density_requires_same_grid():
    with pytest.raises(pot.GridError):
        pot.mixed_ma_density(grid(quad), grid(quad, h=0.5))


def test_wedge_quadratic_one_bin_within_two_percent():
    h = 0.1
    m = 5 * h
    lo, counts = pot.box_grid((1 + m,) * 4, h)
    g = pot.sample_potential(quad, lo, counts, h)
    one_bin = geo.CubeGrid(geo.Z_PROJ, geo.W_PROJ, geo.make_subdivision((-2, 2, -2, 2), 4.0, Z=-2 - 2j),
                           geo.make_subdivision((-2, 2, -2, 2), 4.0, Z=-2 - 2j, base_projection="w"))
    bm = pot.wedge_by_potentials(g, g, [h], one_bin, weights=lambda d: pot.polydisk_weights(d, 1.0))
    assert len(bm.masses) == 1
    assert abs(bm.total - 8.0) / 8.0 < 0.02


def test_wedge_pluriharmonic_is_zero():
    h = 0.2
    u = grid(lambda z, w: np.real(z * w) + np.imag(z), half=1.2, h=h)
    v = grid(maxlog, half=1.2, h=h)
    bm = pot.wedge_by_potentials(u, v, [h], geo.coordinate_grid(0.5, 1.0))
    assert max(abs(x) for x in bm.masses.values()) < 1e-10


def test_wedge_symmetry_and_sigma_validation():
    h = 0.2
    u = grid(maxlog, half=1.6, h=h)
    v = grid(lambda z, w: quad(z, w) + 0.3 * np.abs(z) ** 4, half=1.6, h=h)
    bins = geo.coordinate_grid(0.5, 1.0)
    a = pot.wedge_by_potentials(u, v, [1.5 * h, h], bins)
    b = pot.wedge_by_potentials(v, u, [1.5 * h, h], bins)
    assert geo.masses_distance(a.masses, b.masses) <= 10 * h * h * abs(a.total)
    assert len(a.history) == 2
    with pytest.raises(ValueError):
        pot.wedge_by_potentials(u, v, [h, 1.5 * h], bins)


def test_polydisk_weights_volume():
    g = grid(quad, half=1.2, h=0.1)
    wts = pot.polydisk_weights(g, 1.0)
    assert math.fsum(wts.ravel()) * 0.1 ** 4 == pytest.approx(math.pi ** 2, rel=1e-9)


def test_grid_roundtrip_and_window(tmp_path):
    g = grid(quad)
    g.save(tmp_path / "g.bin")
    back = pot.GridPotential.load(tmp_path / "g.bin")
    assert back.compatible(g) and np.array_equal(back.values, g.values)
    win = g.window((-0.5,) * 4, (0.5,) * 4)
    assert win.shape == (5, 5, 5, 5) and win.lo == (-0.5,) * 4


def _unit_cube(r):
    s1 = geo.AffineSquare(0j, r)
    s2 = geo.AffineSquare(0j, r, base_projection="w")
    return geo.FourCube(geo.Z_PROJ, geo.W_PROJ, s1, s2)


def test_plateau_center_and_sandwich():
    cube = _unit_cube(1.0)
    chi = pot.plateau_function(cube, 0.8)
    c = cube.center
    assert chi(np.array([c[0]]), np.array([c[1]]))[0] == 1.0
    rng = np.random.default_rng(3)
    p = rng.uniform(-0.2, 1.2, (20000, 4))
    z, w = p[:, 0] + 1j * p[:, 1], p[:, 2] + 1j * p[:, 3]
    v = chi(z, w)
    inner = geo.shrink(cube, 0.8).contains(z, w)
    outer = cube.contains(z, w)
    assert np.all(v[inner] == 1.0)
    assert np.all(v[~outer] == 0.0)
    assert np.all((v >= 0) & (v <= 1))


def test_plateau_hessian_scales_like_inverse_square():
    vals = [pot.plateau_function(_unit_cube(r), 0.8).hessian_bound * r * r for r in (1.0, 0.5, 0.25)]
    assert max(vals) / min(vals) <= 1.5


def test_plateau_hessian_blows_up_as_lambda_to_one():
    lams = (0.5, 0.75, 0.875)
    bounds = [pot.plateau_function(_unit_cube(1.0), lam).hessian_bound for lam in lams]
    slope = -np.polyfit(np.log([1 - lam for lam in lams]), np.log(bounds), 1)[0]
    assert slope >= 1.8


def test_modulus_of_continuity_examples():
    h = 0.05
    const = grid(lambda z, w: np.full(np.shape(z), 2.0), half=0.5, h=h)
    assert pot.modulus_of_continuity(const, 0.2) == 0.0
    rez = grid(lambda z, w: np.real(z), half=0.5, h=h)
    assert pot.modulus_of_continuity(rez, 0.2) == pytest.approx(0.2, abs=h)
    q = grid(quad, half=1.0, h=h)
    r = 0.2
    assert pot.modulus_of_continuity(q, r) <= 2 * math.sqrt(2) * r + 2 * r * r
    with pytest.raises(pot.GridError):
        pot.modulus_of_continuity(q, 0.01)
