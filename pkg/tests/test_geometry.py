import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laminaire import geometry as geo


def _corners(sub):
    return sorted((sq.corner.real, sq.corner.imag) for _, _, sq in sub.squares)


def test_unit_disk_r1_has_four_squares():
    bounds, pred = geo.disk_region(1.0)
    sub = geo.make_subdivision(bounds, 1.0, contains=pred)
    assert _corners(sub) == [(-1.0, -1.0), (-1.0, 0.0), (0.0, -1.0), (0.0, 0.0)]


def test_lattice_translation_gives_same_squares():
    bounds, pred = geo.disk_region(1.0)
    a = geo.make_subdivision(bounds, 0.5, contains=pred)
    b = geo.make_subdivision(bounds, 0.5, Z=0.5 + 0j, contains=pred)
    c = geo.make_subdivision(bounds, 0.5, Z=-1.5 + 2.0j, contains=pred)
    assert _corners(a) == _corners(b) == _corners(c)


@pytest.mark.parametrize("r, count", [(1.0, 4), (0.5, 16), (0.25, 64)])
def test_tiling_count_of_area_four_square(r, count):
    # brute force oracle: [-1, 1]^2 has area 4, tiled by (2/r)^2 squares
    sub = geo.make_subdivision((-1, 1, -1, 1), r)
    assert len(sub) == count
    assert len(sub) * r * r == 4.0


def test_tiling_area_converges_for_disk():
    rad = 2 / math.sqrt(math.pi)  # area 4
    bounds, pred = geo.disk_region(rad)
    errs = []
    for r in (0.5, 0.25, 0.125):
        sub = geo.make_subdivision(bounds, r, contains=pred)
        errs.append(abs(len(sub) * r * r - 4.0))
    assert errs[0] > errs[1] > errs[2]


def test_squares_half_open_partition():
    sub = geo.make_subdivision((-1, 1, -1, 1), 0.5)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, 2000) + 1j * rng.uniform(-1, 1, 2000)
    pts = np.concatenate([pts, [0j, 0.5 + 0.5j, -1 - 1j]])
    hits = sum(sq.contains(pts).astype(int) for _, _, sq in sub.squares)
    assert np.all(hits == 1)


def test_rotated_square_contains_center():
    iso = geo.Isometry(np.exp(0.3j), 0.2 - 0.1j)
    sq = geo.AffineSquare(0j, 1.0, iso)
    assert sq.contains(sq.center)
    assert np.allclose(np.abs(np.diff(np.r_[sq.vertices(), sq.vertices()[0]])), 1.0)


def test_bad_inputs_rejected():
    with pytest.raises(ValueError):
        geo.make_subdivision((-1, 1, -1, 1), 0.0)
    with pytest.raises(ValueError):
        geo.make_subdivision((-math.inf, 1, -1, 1), 1.0)
    with pytest.raises(ValueError):
        geo.Isometry(2.0)
    with pytest.raises(ValueError):
        geo.FourCube(geo.Z_PROJ, geo.LinearForm(2.0, 0.0), geo.AffineSquare(0j, 1), geo.AffineSquare(0j, 1))


def test_shrink_identity_and_volume_ratio():
    sq = geo.AffineSquare(0j, 1.0)
    assert geo.shrink(sq, 1.0) == sq
    cube = geo.FourCube(geo.Z_PROJ, geo.W_PROJ, sq, geo.AffineSquare(1j, 1.0, base_projection="w"))
    assert geo.shrink(cube, 0.5).volume() / cube.volume() == 1 / 16


def test_shrink_square_area_monte_carlo():
    sq = geo.AffineSquare(0j, 1.0)
    small = geo.shrink(sq, 0.9)
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 1, 10 ** 6) + 1j * rng.uniform(0, 1, 10 ** 6)
    assert abs(small.contains(pts).mean() - 0.81) < 1e-2


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0))
@settings(max_examples=30, deadline=None)
def test_shrink_monotone(l1, l2):
    lo, hi = sorted((l1, l2))
    sq = geo.AffineSquare(-0.3 + 0.2j, 0.7)
    pts = sq.corner + 0.7 * (np.linspace(0, 1, 41)[:, None] + 1j * np.linspace(0, 1, 41)[None, :]).ravel()
    a, b = geo.shrink(sq, lo).contains(pts), geo.shrink(sq, hi).contains(pts)
    assert np.all(b[a])


def test_restrict_measure_examples():
    nu = geo.AtomicMeasure([0j, 2 + 0j], [0j, 0j], [1.0, 1.0])
    bidisk = lambda z, w: (np.abs(z) <= 1) & (np.abs(w) <= 1)
    out = geo.restrict_measure(nu, bidisk)
    assert len(out) == 1 and out.z[0] == 0 and out.mass == 1.0
    assert geo.restrict_measure(nu, None) is nu
    assert geo.restrict_measure(geo.restrict_measure(nu, bidisk), bidisk).mass == out.mass


def test_restrict_to_shrunk_cube_monte_carlo():
    rng = np.random.default_rng(2)
    n = 100
    z = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    w = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    nu = geo.AtomicMeasure(z, w, np.full(n, 1 / n))
    cube = geo.FourCube(geo.Z_PROJ, geo.W_PROJ, geo.AffineSquare(-1 - 1j, 2.0),
                        geo.AffineSquare(-1 - 1j, 2.0, base_projection="w"))
    kept = geo.restrict_measure(nu, geo.shrink(cube, 0.5).contains).mass
    p = 1 / 16
    assert abs(kept - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_binned_distance_examples():
    grid = geo.coordinate_grid(1.0, 2.0)
    p = geo.AtomicMeasure([0.5 + 0.5j], [0.5 + 0.5j], [1.0])
    q = geo.AtomicMeasure([-0.5 + 0.5j], [0.5 + 0.5j], [1.0])
    assert geo.binned_distance(p, p, grid) == 0.0
    assert geo.binned_distance(p, q, grid) == 2.0


def test_binned_distance_two_uniform_clouds():
    rng = np.random.default_rng(3)
    grid = geo.CubeGrid(geo.Z_PROJ, geo.W_PROJ, geo.make_subdivision((0, 1, 0, 1), 0.5),
                        geo.make_subdivision((0, 1, 0, 1), 1.0, base_projection="w"))
    assert len(grid.cubes()) == 4
    n = 10 ** 4

    def cloud():
        a = rng.uniform(0, 1, (n, 4))
        return geo.AtomicMeasure(a[:, 0] + 1j * a[:, 1], a[:, 2] + 1j * a[:, 3], np.full(n, 1 / n))
    d = geo.binned_distance(cloud(), cloud(), grid)
    assert 0 <= d < 0.1


def test_outside_atoms_go_to_overflow():
    grid = geo.coordinate_grid(1.0, 1.0)
    nu = geo.AtomicMeasure([5 + 0j, 0.1 + 0j], [0j, 0j], [0.25, 0.75])
    masses = geo.bin_masses(nu, grid)
    assert masses[None] == 0.25
    assert sum(masses.values()) == 1.0


def test_atomic_measure_validation_and_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        geo.AtomicMeasure([0j], [0j], [-1.0])
    with pytest.raises(ValueError):
        geo.AtomicMeasure([0j], [0j], [math.nan])
    nu = geo.AtomicMeasure([0.1 + 0.3j, -2j], [1 + 1j, 0.7], [0.1, 0.2])
    nu.to_csv(tmp_path / "m.csv")
    back = geo.AtomicMeasure.from_csv(tmp_path / "m.csv")
    assert np.array_equal(back.z, nu.z) and np.array_equal(back.weights, nu.weights)
    assert nu.mass == math.fsum([0.1, 0.2])


def test_merged_coalesces_duplicates():
    nu = geo.AtomicMeasure([0j, 0j, 1j], [1 + 0j, 1 + 0j, 0j], [0.25, 0.25, 0.5])
    m = nu.merged()
    assert len(m) == 2 and m.mass == 1.0


def test_in_shrunk_matches_cube_shrink():
    grid = geo.coordinate_grid(1.0, 1.0)
    rng = np.random.default_rng(4)
    z = rng.uniform(-1, 1, 500) + 1j * rng.uniform(-1, 1, 500)
    w = rng.uniform(-1, 1, 500) + 1j * rng.uniform(-1, 1, 500)
    union = np.zeros(500, bool)
    for cube in grid.cubes():
        union |= geo.shrink(cube, 0.6).contains(z, w)
    assert np.array_equal(grid.in_shrunk(z, w, 0.6), union)


def test_boundary_atoms_snap_to_half_open_rule():
    grid = geo.coordinate_grid(0.5, 1.0)
    a = geo.AtomicMeasure([7e-32 - 0.5j], [0.25 + 0j], [1.0])
    b = geo.AtomicMeasure([-0.0 - 0.5j], [0.25 + 0j], [1.0])
    c = geo.AtomicMeasure([-1e-13 - 0.5j], [0.25 + 0j], [1.0])
    assert geo.binned_distance(a, b, grid) == 0.0
    assert geo.binned_distance(a, c, grid) == 0.0
    far = geo.AtomicMeasure([-1e-9 - 0.5j], [0.25 + 0j], [1.0])
    assert geo.binned_distance(a, far, grid) == 2.0
