import functools
import math

import numpy as np
import pytest

from laminaire import geometry as geo
from laminaire import laminar as lam
from laminaire import models
from laminaire import potentials as pot
from laminaire.laminar import Polynomial


def test_henon_inverse_roundtrip():
    f = models.HenonMap()
    rng = np.random.default_rng(0)
    z = rng.normal(size=50) + 1j * rng.normal(size=50)
    w = rng.normal(size=50) + 1j * rng.normal(size=50)
    bz, bw = f.inverse(*f.forward(z, w))
    assert np.max(np.abs(bz - z) + np.abs(bw - w)) < 1e-12
    iz, iw = f.iterate(*f.iterate(z, w, 3), -3)
    assert np.max(np.abs(iz - z) + np.abs(iw - w)) < 1e-8
    assert f.d == 2 and f.escape_radius == pytest.approx(2 + 0.3 + 1.2 + 1)


def test_green_asymptotics_for_z_squared():
    f = models.HenonMap(Polynomial((0, 0, 1)), 1.0)
    G = models.henon_green(f, 1)
    z = np.array([1e6, 1e6j, -1e6 + 0j])
    w = np.array([0.3, -1.0, 0.5j])
    assert np.max(np.abs(G(z, w) - np.log(np.abs(z)))) <= 1e-3


def _attracting_fixed_point(f):
    # z = w and p(z) - (a + 1) z = 0; keep the root where Df has spectral radius < 1
    c = np.array(f.p.coeffs, dtype=complex)
    c[1] -= f.a + 1
    for z in np.roots(c[::-1]):
        lam = np.roots([1, -complex(f.dp(z)), f.a])
        if np.max(np.abs(lam)) < 1:
            return z
    raise AssertionError("no attracting fixed point")


def test_green_vanishes_on_bounded_orbit_and_is_nonnegative():
    f = models.HenonMap()
    Gp, Gm = models.henon_green(f, 1), models.henon_green(f, -1)
    p = _attracting_fixed_point(f)
    assert p.real == pytest.approx(-0.6237, abs=1e-4)
    near = p + 1e-3 * np.exp(2j * np.pi * np.arange(8) / 8)
    assert np.all(Gp(near, near) == 0.0)
    rng = np.random.default_rng(1)
    z = 3 * (rng.normal(size=500) + 1j * rng.normal(size=500))
    w = 3 * (rng.normal(size=500) + 1j * rng.normal(size=500))
    assert np.all(Gp(z, w) >= 0) and np.all(Gm(z, w) >= 0)
    assert np.all(Gp(z, w) + Gm(z, w) > 0)


@pytest.mark.parametrize("sign", [1, -1])
def test_green_functional_equation(sign):
    f = models.HenonMap()
    G = models.henon_green(f, sign)
    R = f.escape_radius
    rng = np.random.default_rng(2)
    r = R * np.sqrt(rng.uniform(0, 1, (2, 1000)))
    th = rng.uniform(0, 2 * np.pi, (2, 1000))
    z, w = r[0] * np.exp(1j * th[0]), r[1] * np.exp(1j * th[1])
    fz, fw = f.forward(z, w) if sign > 0 else f.inverse(z, w)
    assert np.max(np.abs(G(fz, fw) - f.d * G(z, w))) <= 1e-6


def test_iterated_line_measure_small_n():
    f = models.HenonMap()
    m0 = models.iterated_line_measure(f, n=0)
    L, Lp = models.DEFAULT_L, models.DEFAULT_LPRIME
    assert len(m0) == 1 and m0.mass == 1.0
    assert abs(Lp(m0.z[0], m0.w[0])) < 1e-12
    m1 = models.iterated_line_measure(f, n=1)
    assert len(m1) == 4 and m1.mass == 1.0
    m2 = models.iterated_line_measure(f, n=2)
    assert len(m2) == 16 and m2.mass == 1.0
    R = f.escape_radius
    assert np.all(np.maximum(np.abs(m2.z), np.abs(m2.w)) <= R)


def test_demailly_potential_values():
    pd, fams = models.demailly_current(8)
    assert pd(np.array([0j]), np.array([0j]))[0] == 0.0
    assert pd(np.array([2 + 0j]), np.array([0j]))[0] == pytest.approx(math.log(2))
    assert lam.geometric_wedge(fams, fams).mass == 0.0


def test_demailly_cones_are_holomorphic_graphs():
    _, (_, _, cones) = models.demailly_current(8)
    assert len(cones.disks) == 8
    for _, d in cones:
        assert d.cr_residual() <= 1e-8
        assert isinstance(d.base, lam.AnnulusBase) and d.base.inner == 1.0


def test_cantor_product_examples():
    X = [0.25 + 0.25j, -0.5j, 0.6]
    mu = [0.5, 0.3, 0.2]
    cp = models.cantor_product_currents(X, mu)
    target = models.product_measure(X, mu)
    bins = geo.coordinate_grid(0.5, 1.0)
    g = lam.geometric_wedge(cp.horizontal, cp.vertical)
    assert geo.binned_distance(g, target, bins) == 0.0
    assert lam.geometric_wedge(cp.alt_horizontal, cp.alt_vertical).mass == 0.0
    both = [cp.horizontal, cp.vertical]
    assert geo.binned_distance(lam.geometric_wedge(both, both), target.scaled(2.0), bins) == 0.0


def test_cantor_product_validation():
    with pytest.raises(ValueError):
        models.cantor_product_currents([0.1, 0.2], [0.5, 0.4])
    with pytest.raises(ValueError):
        models.cantor_product_currents([1.5], [1.0])


def test_cantor_stages():
    assert models.cantor_stage(0) == [(0.0, 1.0)]
    st2 = models.cantor_stage(2)
    assert len(st2) == 4 and st2[1] == pytest.approx((2 / 9, 1 / 3))
    with pytest.raises(ValueError):
        models.cantor_stage(7)


def test_one_dim_green_interval():
    GK = models.OneDimGreen(models.cantor_stage(0))
    assert GK.capacity == pytest.approx(0.25, abs=5e-4)
    z = np.array([2.0 + 0j, -1 + 1j, 0.5 + 2j, 3j])
    assert np.max(np.abs(GK(z) - models.interval_green_exact(z))) < 1e-3
    assert np.all(GK(np.array([0.2, 0.5, 0.8]) + 0j) < 0.03)


def test_max_green_symmetric():
    G = models.max_green_current(models.OneDimGreen(models.cantor_stage(1)))
    rng = np.random.default_rng(3)
    z = rng.normal(size=30) + 1j * rng.normal(size=30)
    w = rng.normal(size=30) + 1j * rng.normal(size=30)
    assert np.array_equal(G(z, w), G(w, z))


@functools.lru_cache(maxsize=None)
def _max_green_wedge(h=0.1):
    G = models.max_green_current(models.OneDimGreen(models.cantor_stage(0)))
    m = 5 * h
    lo, counts = pot.box_grid((1 + m, 0.5 + m, 1 + m, 0.5 + m), h, center=(0.5, 0, 0.5, 0))
    mass = pot.wedge_masses(*(2 * [pot.sample_potential(G, lo, counts, h)]), h)
    x, y, s, t = (mass.axis(k) for k in range(4))
    dz = np.hypot(np.clip(x, 0, 1)[:, None] - x[:, None], y[None, :])
    dw = np.hypot(np.clip(s, 0, 1)[:, None] - s[:, None], t[None, :])
    near = np.maximum(dz[:, :, None, None], dw[None, None]) <= 0.1
    total = math.fsum(mass.values.ravel())
    return total, math.fsum(mass.values[~near]) / total


def test_max_green_interval_mass_is_one():
    total, _ = _max_green_wedge()
    assert abs(total - 1) <= 0.05


def test_max_green_mass_carried_near_KxK():
    _, outside = _max_green_wedge()
    assert outside < 0.1


def test_pencils_fixture():
    v, h = models.pencils()
    assert len(v.disks) == 3 and len(h.disks) == 3
    assert lam.check_disjoint(v) == [] and lam.check_disjoint(h) == []
    assert set(models.FIXTURES) >= {"demailly", "cantor_product", "henon", "max_green"}
