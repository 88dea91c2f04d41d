import numpy as np
import pytest

from pylats.datagen import (GridSpec, LaserPath, laplacian, diffusion_reaction_step, gen_diffusion_reaction,
                            swe_step, gen_swe_dam_break, heat_step, gen_heat_laser, laser_source,
                            random_raster_path, augment, augment_dataset, augment_all, write_dataset, read_dataset,
                            write_split, read_split, gen_constant, generate_sample, FieldSeries, Dataset)
from pylats.container import read_header
from pylats.shared import StabilityError, NumericalError, ContainerError


# diffusion-reaction

def _hand_step(u, v, h, dt, D_u, D_v, k):
    n, m = u.shape
    un, vn = np.empty_like(u), np.empty_like(v)
    for i in range(n):
        for j in range(m):
            def lap(f):
                c = f[i, j]
                return ((f[max(i - 1, 0), j] - 2 * c + f[min(i + 1, n - 1), j]) / h[0] ** 2 +
                        (f[i, max(j - 1, 0)] - 2 * c + f[i, min(j + 1, m - 1)]) / h[1] ** 2)
            un[i, j] = u[i, j] + dt * (D_u * lap(u) + u[i, j] - u[i, j] ** 3 - k - v[i, j])
            vn[i, j] = v[i, j] + dt * (D_v * lap(v) + u[i, j] - v[i, j])
    return un, vn


def test_diffusion_reaction_step_matches_hand_oracle():
    u = np.array([[0.1, -0.4, 0.3], [0.7, 0.2, -0.9], [0.05, 0.6, -0.2]])
    v = np.array([[-0.3, 0.2, 0.1], [0.4, -0.6, 0.8], [0.0, 0.25, -0.5]])
    h, dt = (0.5, 0.25), 0.01
    got = diffusion_reaction_step(u, v, h, dt, 1e-3, 5e-3, 5e-3)
    want = _hand_step(u, v, h, dt, 1e-3, 5e-3, 5e-3)
    np.testing.assert_allclose(got[0], want[0], rtol=0, atol=1e-12)
    np.testing.assert_allclose(got[1], want[1], rtol=0, atol=1e-12)


def test_diffusion_reaction_zero_fields_one_step():
    grid = GridSpec((4, 4), (1.0, 1.0), 0.01, 2)
    u, v = gen_diffusion_reaction(grid, D_u=0., D_v=0., k=5e-3, u0=np.zeros((4, 4)), v0=np.zeros((4, 4)))
    np.testing.assert_allclose(u.values[1], -5e-3 * 0.01, rtol=1e-6)
    np.testing.assert_array_equal(v.values[1], 0.)


def test_diffusion_reaction_stability_bound():
    grid = GridSpec((32, 32), (1.0, 1.0), 1.0, 2)
    with pytest.raises(StabilityError) as e:
        gen_diffusion_reaction(grid)
    assert e.value.number > 0.25


def test_diffusion_reaction_seeded(small_grid):
    a = gen_diffusion_reaction(small_grid, seed=5)[0].values
    b = gen_diffusion_reaction(small_grid, seed=5)[0].values
    c = gen_diffusion_reaction(small_grid, seed=6)[0].values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (8, 16, 16) and np.all(np.isfinite(a))


def test_laplacian_sums_to_zero(rng):
    f = rng.standard_normal((6, 7))
    assert abs(laplacian(f, (0.1, 0.2)).sum()) < 1e-8


# shallow water

def test_swe_initial_condition():
    grid = GridSpec((32, 32), (2.0, 2.0), 0.01, 3)
    h, r_c = gen_swe_dam_break(grid, r_c=0.5)
    assert r_c == 0.5
    assert h.values[0, 16, 16] == 2.0
    assert h.values[0, 0, 0] == 1.0
    assert h.values[0, 31, 31] == 1.0


def test_swe_still_water_is_fixed_point():
    grid = GridSpec((16, 16), (2.0, 2.0), 0.01, 20)
    h, _ = gen_swe_dam_break(grid, r_c=1e-3)
    np.testing.assert_array_equal(h.values, 1.0)


def test_swe_mass_conservation():
    grid = GridSpec((32, 32), (2.0, 2.0), 0.01, 2)
    x, y = grid.cell_centers(centered=True)
    Q = np.zeros((3, 32, 32))
    Q[0] = np.where(np.hypot(x[:, None], y[None, :]) < 0.5, 2.0, 1.0)
    mass0 = Q[0].sum()
    for _ in range(200):
        Q = swe_step(Q, grid.spacing, grid.dt)
    assert abs(Q[0].sum() - mass0) / mass0 < 1e-10


def test_swe_seeded_radius():
    grid = GridSpec((16, 16), (2.0, 2.0), 0.01, 2)
    r1 = gen_swe_dam_break(grid, seed=11)[1]
    r2 = gen_swe_dam_break(grid, seed=11)[1]
    r3 = gen_swe_dam_break(grid, seed=12)[1]
    assert r1 == r2 != r3
    assert 0.3 <= r1 <= 0.7


def test_swe_cfl():
    grid = GridSpec((32, 32), (2.0, 2.0), 0.2, 3)
    with pytest.raises(StabilityError):
        gen_swe_dam_break(grid, r_c=0.5)


def test_swe_rejects_bad_radius():
    grid = GridSpec((16, 16), (2.0, 2.0), 0.01, 2)
    with pytest.raises(ValueError):
        gen_swe_dam_break(grid, r_c=1.5)


# laser heat

def test_heat_energy_conservation_without_source(rng):
    T = rng.standard_normal((5, 6, 4))
    e0 = T.sum()
    for _ in range(50):
        T = heat_step(T, np.zeros_like(T), (0.1, 0.1, 0.1), 1e-3, 1.0, 1.0)
    assert abs(T.sum() - e0) / abs(e0) < 1e-10


def test_heat_point_source_one_step():
    T = np.zeros((3, 3, 3))
    Q = np.zeros((3, 3, 3))
    Q[1, 1, 2] = 1.0
    dt, alpha, rho_c = 0.01, 2.0, 4.0
    got = heat_step(T, Q, (1.0, 1.0, 1.0), dt, alpha, rho_c)
    want = np.zeros((3, 3, 3))
    want[1, 1, 2] = dt / rho_c
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)
    got2 = heat_step(got, np.zeros_like(Q), (1.0, 1.0, 1.0), dt, alpha, rho_c)
    c = dt / rho_c
    assert got2[1, 1, 2] == pytest.approx(c - dt * alpha * 5 * c, abs=1e-15)
    assert got2[0, 1, 2] == pytest.approx(dt * alpha * c, abs=1e-15)
    assert got2[1, 1, 1] == pytest.approx(dt * alpha * c, abs=1e-15)


def test_heat_no_power_stays_uniform():
    grid = GridSpec((8, 8, 4), (1.0, 1.0, 0.5), 0.001, 5)
    path = LaserPath([(0, 0.2, 0.2), (4, 0.8, 0.8)], q0=0.0, sigma=0.1)
    T, Q = gen_heat_laser(grid, path, T0=3.0)
    np.testing.assert_array_equal(T.values, 3.0)
    np.testing.assert_array_equal(Q.values, 0.)


def test_stationary_laser_peak_under_spot():
    grid = GridSpec((9, 9, 4), (1.0, 1.0, 0.5), 0.001, 6, 2)
    path = LaserPath([(0, 0.5, 0.5)], q0=50.0, sigma=0.1)
    T, Q = gen_heat_laser(grid, path)
    assert T.role == 'solution' and Q.role == 'condition'
    for t in range(1, grid.n_steps):
        top = T.values[t, :, :, -1]
        assert np.unravel_index(np.argmax(top), top.shape) == (4, 4)
    assert np.all(Q.values[:, :, :, :-1] == 0)


def test_laser_path_outside_domain():
    grid = GridSpec((8, 8, 4), (1.0, 1.0, 0.5), 0.001, 5)
    path = LaserPath([(0, 0.5, 0.5), (2, 1.5, 0.5)])
    with pytest.raises(ValueError, match='segment 1'):
        gen_heat_laser(grid, path)


def test_heat_stability_bound():
    grid = GridSpec((8, 8, 4), (1.0, 1.0, 0.5), 0.1, 5)
    with pytest.raises(StabilityError):
        gen_heat_laser(grid, LaserPath([(0, 0.5, 0.5)]))


def test_random_raster_path_inside(rng):
    grid = GridSpec((16, 16, 4), (2.0, 2.0, 0.5), 0.001, 10)
    path = random_raster_path(grid, rng, sigma=0.2)
    path.check_inside(grid.lengths)
    assert path.waypoints[0][0] == 0.0
    assert path.waypoints[-1][0] == pytest.approx(grid.n_steps - 1)


# augmentation

def _series(rng, shape=(3, 8, 8, 4)):
    return {'T': FieldSeries('T', 'solution', rng.standard_normal(shape)),
            'Q': FieldSeries('Q', 'condition', rng.standard_normal(shape))}


@pytest.mark.parametrize('op', ['reflect_xz', 'reflect_yz'])
def test_reflection_is_involution(rng, op):
    s = _series(rng)
    twice = augment(augment(s, op), op)
    for name in s:
        np.testing.assert_array_equal(twice[name].values, s[name].values)


def test_rotation_order_four(rng):
    s = _series(rng)
    r = s
    for _ in range(4):
        r = augment(r, 'rotate90_z')
    for name in s:
        np.testing.assert_array_equal(r[name].values, s[name].values)
    assert not np.array_equal(augment(s, 'rotate90_z')['T'].values, s['T'].values)


def test_rotation_needs_square(rng):
    with pytest.raises(ValueError):
        augment(_series(rng, (2, 8, 4, 4)), 'rotate90_z')


def test_augment_all_multiplies_by_four():
    grid = GridSpec((8, 8, 4), (1.0, 1.0, 0.5), 0.001, 3)
    samples = [generate_sample('heat_laser', grid, {'sigma': 0.15}, seed=s) for s in range(12)]
    out = augment_all(samples)
    assert len(out) == 48
    assert out[1].config['augmentations'] == ['reflect_xz']


def test_augmented_path_follows_field():
    grid = GridSpec((9, 9, 4), (1.0, 1.0, 0.5), 0.001, 3)
    path = LaserPath([(0, 0.5, 0.2)], q0=50.0, sigma=0.1)
    T, Q = gen_heat_laser(grid, path)
    ds = Dataset(grid, {'T': T, 'Q': Q}, {'laser_path': path.to_dict()})
    for op in ('reflect_xz', 'reflect_yz', 'rotate90_z'):
        moved = augment_dataset(ds, op)
        new_path = LaserPath.from_dict(moved.config['laser_path'])
        np.testing.assert_allclose(laser_source(grid, new_path, 1.0), moved.series['Q'].values[1], atol=1e-4)


# containers

def test_dataset_round_trip(tmp_path, dr_sample):
    path = tmp_path / 's.cmls'
    write_dataset(dr_sample, path)
    again = read_dataset(path)
    assert again.grid == dr_sample.grid
    for name in dr_sample.series:
        np.testing.assert_array_equal(again.series[name].values, dr_sample.series[name].values)
    header = read_header(path)
    assert header['grid']['n_steps'] == dr_sample.grid.n_steps
    assert header['grid']['extents'] == list(dr_sample.grid.extents)


def test_dataset_corrupt_magic(tmp_path, dr_sample):
    path = tmp_path / 's.cmls'
    write_dataset(dr_sample, path)
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ContainerError):
        read_dataset(path)


def test_split_manifest(tmp_path, dr_sample):
    manifest = write_split([dr_sample, dr_sample], tmp_path / 'train')
    assert list(manifest.file) == ['sample_0000.cmls', 'sample_0001.cmls']
    assert len(read_split(tmp_path / 'train')) == 2


# misc

def test_constant_generator_is_constant(small_grid):
    u = gen_constant(small_grid, seed=2)
    assert np.all(u.values == u.values[0])
    assert np.ptp(u.values[0]) > 0


def test_field_series_rejects_nan():
    with pytest.raises(NumericalError):
        FieldSeries('u', 'solution', np.array([[np.nan]]))


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec((2, 8), (1.0, 1.0), 0.1, 4)
    with pytest.raises(ValueError):
        GridSpec((8, 8), (1.0,), 0.1, 4)


def test_generate_sample_unknown():
    with pytest.raises(ValueError):
        generate_sample('burgers', GridSpec((8, 8), (1., 1.), 0.1, 3), {}, 0)
