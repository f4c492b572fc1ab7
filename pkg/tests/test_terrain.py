import numpy as np
import pytest

from legged_trainer.terrain import generate_terrain, heights_at, rough_z_scale


def test_flat_is_zero_everywhere():
    t = generate_terrain("flat", seed=3)
    for xy in [(0.0, 0.0), (3.7, -2.1), (100.0, 100.0)]:
        h, n = t.height_at(*xy)
        assert h == 0.0
        np.testing.assert_allclose(n, [0.0, 0.0, 1.0])


def test_slope_rise_matches_tangent():
    t = generate_terrain("slope", {"angle_deg": 10.0})
    h1, _ = t.height_at(1.0, 0.0)
    h0, _ = t.height_at(0.0, 0.0)
    assert h1 - h0 == pytest.approx(np.tan(np.deg2rad(10.0)), abs=1e-9)


def test_slope_normal_tilt():
    t = generate_terrain("slope", {"angle_deg": 10.0})
    _, n = t.height_at(0.3, 0.4)
    tilt = np.arccos(n[2])
    assert tilt == pytest.approx(np.deg2rad(10.0), abs=1e-9)
    assert n[2] > 0


def test_slope_azimuth():
    t = generate_terrain("slope", {"angle_deg": 5.0, "azimuth_deg": 90.0})
    h1, _ = t.height_at(0.0, 2.0)
    assert h1 == pytest.approx(2.0 * np.tan(np.deg2rad(5.0)), abs=1e-9)
    h2, _ = t.height_at(2.0, 0.0)
    assert h2 == pytest.approx(0.0, abs=1e-12)


def test_perlin_amplitude_normalized():
    t = generate_terrain("perlin", {"z_scale": 0.21}, seed=11)
    assert np.max(np.abs(t.heights)) == pytest.approx(0.21, abs=1e-9)


def test_perlin_seed_determinism():
    a = generate_terrain("perlin", {"z_scale": 0.15}, seed=42)
    b = generate_terrain("perlin", {"z_scale": 0.15}, seed=42)
    assert np.array_equal(a.heights, b.heights)
    c = generate_terrain("perlin", {"z_scale": 0.15}, seed=43)
    assert not np.array_equal(a.heights, c.heights)


def test_perlin_has_structure():
    t = generate_terrain("perlin", {"z_scale": 0.2}, seed=1)
    # not constant, not white noise: neighboring nodes are correlated
    assert t.heights.std() > 0.01
    diffs = np.abs(np.diff(t.heights, axis=1))
    assert diffs.max() < 2 * 0.2  # bounded gradient between nodes


def test_lattice_node_interpolation_identity():
    t = generate_terrain("perlin", {"z_scale": 0.1}, seed=9)
    j, i = 37, 101
    x = t.origin[0] + i * t.cell
    y = t.origin[1] + j * t.cell
    h, _ = t.height_at(x, y)
    assert h == pytest.approx(t.heights[j, i], abs=1e-12)


def test_out_of_range_clamps_to_border():
    t = generate_terrain("perlin", {"z_scale": 0.1}, seed=9)
    h_edge, _ = t.height_at(1e6, 1e6)
    assert h_edge == pytest.approx(t.heights[-1, -1], abs=1e-12)


def test_normals_unit_and_upward():
    t = generate_terrain("perlin", {"z_scale": 0.21}, seed=2)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-12, 12, size=200)
    ys = rng.uniform(-12, 12, size=200)
    _, normals = heights_at(t, xs, ys)
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-12)
    assert np.all(normals[:, 2] > 0)


def test_bad_cell_size_rejected():
    with pytest.raises(ValueError):
        generate_terrain("flat", cell=0.0)
    with pytest.raises(ValueError):
        generate_terrain("slope", {"angle_deg": 45.0})
    with pytest.raises(ValueError):
        generate_terrain("nonsense")


def test_rough_z_scale_schedule():
    assert rough_z_scale(1) == pytest.approx(0.21)
    assert rough_z_scale(0) == pytest.approx(0.21)  # clamped to t >= 1
    assert rough_z_scale(10) == pytest.approx(0.021)
    assert rough_z_scale(2) == pytest.approx(0.105)


def test_dump_csv_roundtrip(tmp_path):
    t = generate_terrain("perlin", {"z_scale": 0.05}, seed=5, size=2.0, cell=0.5)
    path = tmp_path / "grid.csv"
    t.dump_csv(path)
    back = np.loadtxt(path, delimiter=",")
    np.testing.assert_allclose(back, t.heights, atol=1e-5)
