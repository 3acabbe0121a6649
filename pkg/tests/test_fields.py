import numpy as np
import pytest

from seqtunnel.exceptions import JointSingularity, OutsideDomain
from seqtunnel.fields import (
    CAVITY_COLUMNS,
    GROUND_COLUMNS,
    Profile,
    cavity_profile,
    field_at_points,
    ground_profile,
    incremental_at,
    initial_curvilinear_at,
    to_rectangular,
    total_at,
)
from seqtunnel.geometry import Arc, GroundSplit, Material, benchmark_stage, initial_stress_at
from seqtunnel.pipeline import SolverOptions, solve_stage

from conftest import BENCH_ZC


def corner_mask(st, z, reach=1.5):
    centres = [s.center for s in st.boundary.segments if isinstance(s, Arc) and s.radius < 1.0]
    mask = np.zeros(z.shape, dtype=bool)
    for c in centres:
        mask |= np.abs(z - c) < reach
    return mask


def high_band(values, M):
    """Part of a periodic sample set carried by modes M/2 < |k| <= M + 1."""
    n = values.size
    k = np.fft.fftfreq(n, 1.0 / n)
    band = (np.abs(k) > M // 2) & (np.abs(k) <= M + 1)
    return np.fft.ifft(np.where(band, np.fft.fft(values), 0))


class TestProfiles:
    def test_columns(self, small_solution):
        st = small_solution
        p = cavity_profile(st.series, st.bmap, st.material, 64)
        assert p.columns == CAVITY_COLUMNS
        assert p.data.shape == (64, len(CAVITY_COLUMNS))
        g = ground_profile(st.series, st.bmap, st.material, [-30.0, 0.0, 30.0])
        assert g.columns == GROUND_COLUMNS

    def test_csv_format(self, tmp_path):
        p = Profile(("a", "b"), np.array([[1.0, -0.1], [1e-300, 3.0]]))
        path = tmp_path / "p.csv"
        p.to_csv(path)
        raw = path.read_bytes()
        assert raw == b"a,b\n1.00000000000000000e+00,-1.00000000000000006e-01\n1.00000000000000003e-300,3.00000000000000000e+00\n"
        back = np.loadtxt(path, delimiter=",", skiprows=1)
        np.testing.assert_array_equal(back, p.data)

    def test_cavity_points_on_wall(self, bench_solutions):
        st = bench_solutions[2]
        p = cavity_profile(st.series, st.bmap, st.material, 360)
        z = p.column("x") + 1j * p.column("y")
        # every sample lies within the mapping error of the true contour
        s = np.linspace(0, st.boundary.perimeter, 20000, endpoint=False)
        wall, _ = st.boundary.point_at(s)
        dist = np.min(np.abs(z[:, None] - wall[None, :]), axis=1)
        assert dist.max() < 2e-3

    def test_ground_displacement_decays(self, bench_solutions):
        st = bench_solutions[2]
        g = ground_profile(st.series, st.bmap, st.material, [-2000.0, 2000.0])
        assert np.all(np.hypot(g.column("u_m"), g.column("v_m")) < 1e-6)


class TestRectangular:
    def test_trace_and_invariants(self, small_solution):
        st = small_solution
        s = incremental_at(st.series, st.bmap, st.material, 0.7, np.linspace(0, 6, 25))
        np.testing.assert_allclose(s.sigma_x + s.sigma_y, s.sigma_rho + s.sigma_theta, atol=1e-9)
        det_c = s.sigma_rho * s.sigma_theta - s.tau_rhotheta ** 2
        det_r = s.sigma_x * s.sigma_y - s.tau_xy ** 2
        np.testing.assert_allclose(det_c, det_r, rtol=1e-9, atol=1e-9)

    def test_initial_field_round_trip(self, small_solution):
        st = small_solution
        ini = initial_curvilinear_at(st.bmap, st.material, 0.6, np.linspace(0, 6, 9))
        rect = to_rectangular(ini, st.bmap)
        sx, sy, txy = initial_stress_at(rect.z, st.material)
        np.testing.assert_allclose(rect.sigma_x, sx, atol=1e-9)
        np.testing.assert_allclose(rect.sigma_y, sy, atol=1e-9)
        np.testing.assert_allclose(rect.tau_xy, txy, atol=1e-9)


class TestPointEvaluation:
    def test_matches_circle_evaluation(self, small_solution):
        st = small_solution
        theta = np.array([0.3, 2.0, 4.5])
        ref = total_at(st.series, st.bmap, st.material, 0.55, theta)
        s = field_at_points(st.series, st.bmap, st.material, ref.z)
        # the forward and backward maps agree to the mapping error only
        np.testing.assert_allclose(s.sigma_x, ref.sigma_x, rtol=1e-4)
        np.testing.assert_allclose(s.u, ref.u, rtol=1e-4, atol=1e-9)

    def test_outside(self, small_solution):
        st = small_solution
        with pytest.raises(OutsideDomain):
            field_at_points(st.series, st.bmap, st.material, [1.0 + 1.0j])
        with pytest.raises(OutsideDomain):
            field_at_points(st.series, st.bmap, st.material, [-7.5j])

    def test_joint_guard(self, small_solution):
        st = small_solution
        with pytest.raises(JointSingularity):
            incremental_at(st.series, st.bmap, st.material, 1.0, [np.angle(st.bmap.t1)])


class TestNullLoad:
    def test_zero_gravity_gives_zero_fields(self, split):
        st = solve_stage(benchmark_stage(2), split, Material(gamma=0.0), None, SolverOptions(M=30, sample_count=4096))
        assert not np.any(st.series.f)
        s = incremental_at(st.series, st.bmap, st.material, 0.5, np.linspace(0, 6, 11))
        for name in ("sigma_rho", "sigma_theta", "tau_rhotheta", "u", "v"):
            assert not np.any(getattr(s, name))


class TestLanczos:
    def test_filter_damps_free_surface_ripple_near_joints(self, bench_solutions):
        st = bench_solutions[2]
        x0 = st.split.x0
        x = np.concatenate([np.linspace(-x0 + 0.5, -x0 + 2.0, 200), np.linspace(x0 - 2.0, x0 - 0.5, 200)])
        amp = {}
        for lz in (True, False):
            g = ground_profile(st.series, st.bmap, st.material, x, lanczos=lz)
            amp[lz] = np.hypot(g.column("sigma_y_kpa"), g.column("tau_xy_kpa")).max()
        assert amp[False] / amp[True] > 1.0

    def test_unfiltered_residual_oscillates_more_at_corners(self, bench_solutions):
        st = bench_solutions[2]
        amp = {}
        for lz in (True, False):
            p = cavity_profile(st.series, st.bmap, st.material, 4096, lanczos=lz)
            z = p.column("x") + 1j * p.column("y")
            res = p.column("sigma_rho_kpa") + 1j * p.column("tau_rhotheta_kpa")
            amp[lz] = np.abs(high_band(res, st.series.M)[corner_mask(st, z)]).max()
        print(f"corner residual ripple: filtered {amp[True]:.4g} kPa, unfiltered {amp[False]:.4g} kPa")
        assert amp[False] / amp[True] > 1.0
