import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import factorial, poch

from seqtunnel.exceptions import DecayFailure, NonConvergence
from seqtunnel.rh_solver import (
    BoundaryFourier,
    _check_decay,
    binomial_series,
    boundary_fourier,
    branch_data,
    coefficient_matrices,
    default_sample_count,
    kolosov_lambda,
    lanczos_factors,
    solve_coeffs,
    x_direct,
)

KAPPA = 1.8
T1 = complex(np.exp(1.1j))
T2 = complex(np.exp(-1.5j))  # free arc: angles in (-1.5, 1.1)


@pytest.fixture(scope="module")
def branch():
    return branch_data(KAPPA, T1, T2, 800)


class TestBinomial:
    @settings(max_examples=50, deadline=None)
    @given(a=st.floats(-3, 3), n=st.integers(0, 30))
    def test_real_exponent_matches_scipy(self, a, n):
        c = binomial_series(complex(a), n)
        k = np.arange(n + 1)
        ref = (-1.0) ** k * poch(-a, k) / factorial(k)
        np.testing.assert_allclose(c.real, ref, rtol=1e-9, atol=1e-12)

    def test_series_reproduces_power(self):
        a = complex(-0.5, -0.2)
        c = binomial_series(a, 400)
        x = 0.3 - 0.4j
        assert np.polyval(c[::-1], x) == pytest.approx((1 + x) ** a, rel=1e-13)


class TestBranchFunction:
    def test_lambda(self):
        assert kolosov_lambda(1.8) == pytest.approx(math.log(1.8) / (2 * math.pi))
        assert kolosov_lambda(1.8) == pytest.approx(0.0935492, abs=1e-7)

    def test_inside_series_matches_direct(self, branch):
        rng = np.random.default_rng(3)
        z = 0.9 * np.sqrt(rng.uniform(size=60)) * np.exp(2j * np.pi * rng.uniform(size=60))
        ref = x_direct(z, branch)
        assert np.max(np.abs(branch.x_inside(z) - ref) / np.abs(ref)) < 1e-8

    def test_outside_series_matches_direct(self, branch):
        ang = np.linspace(-1.4, 1.0, 25)
        z = np.concatenate([1.15 * np.exp(1j * ang), 3.0 * np.exp(1j * ang)])
        ref = x_direct(z, branch)
        assert np.max(np.abs(branch.x_outside(z) - ref) / np.abs(ref)) < 1e-8

    def test_far_field(self, branch):
        assert branch.x_outside(1e7) * 1e7 == pytest.approx(1.0, rel=1e-6)

    def test_jumps(self):
        b = branch_data(KAPPA, T1, T2, 8000)
        r = 0.998
        free = np.exp(-0.2j)
        fixed = np.exp(2.94j)
        assert b.x_inside(r * free) / b.x_outside(free / r) == pytest.approx(1.0, abs=5e-3)
        assert b.x_inside(r * fixed) / b.x_outside(fixed / r) == pytest.approx(-1 / KAPPA, abs=5e-3)

    def test_rejects_bad_joints(self):
        with pytest.raises(ValueError):
            branch_data(KAPPA, 0.5, T2, 10)
        with pytest.raises(ValueError):
            branch_data(KAPPA, T1, T1, 10)
        with pytest.raises(ValueError):
            branch_data(1.0, T1, T2, 10)


class TestCoefficientMaps:
    M = 8

    def test_against_sampled_products(self, branch, rng):
        """A_k, B_k are the Laurent coefficients of X f inside and outside."""
        M = self.M
        f = (rng.normal(size=2 * M + 1) + 1j * rng.normal(size=2 * M + 1)) * 0.3 ** np.abs(np.arange(-M, M + 1))
        amat, bmat = coefficient_matrices(branch, M)
        A, B = amat @ f, bmat @ f
        ks = np.arange(-M - 1, M + 2)
        ns = np.arange(-M, M + 1)
        n = 4096
        sig = np.exp(2j * np.pi * np.arange(n) / n)
        for r, coeffs, xfun in ((0.6, A, branch.x_inside), (1.6, B, branch.x_outside)):
            zeta = r * sig
            xval = x_direct(zeta, branch)
            if r > 1:
                # rays through the fixed arc pick up the jump of the cut
                ang = np.angle(zeta)
                on_fixed = (ang >= 1.1) | (ang <= -1.5)
                xval = np.where(on_fixed, -KAPPA * xval, xval)
            prod = xval * (zeta[:, None] ** ns[None, :] @ f)
            c = np.fft.fft(prod) / n
            sampled = c[ks % n] / r ** ks
            np.testing.assert_allclose(coeffs, sampled, rtol=0, atol=1e-8 * np.abs(sampled).max())
            np.testing.assert_allclose(xfun(zeta), xval, rtol=1e-10)

    def test_tail_too_short(self):
        b = branch_data(KAPPA, T1, T2, 5)
        with pytest.raises(ValueError):
            coefficient_matrices(b, 4)


class TestLanczos:
    def test_shape_and_ends(self):
        L = lanczos_factors(10)
        assert L.size == 21
        assert L[10] == 1.0
        assert L[0] == pytest.approx(0.0, abs=1e-16) and L[-1] == pytest.approx(0.0, abs=1e-16)
        np.testing.assert_allclose(L, L[::-1])

    @given(M=st.integers(1, 300))
    def test_bounded(self, M):
        L = lanczos_factors(M)
        assert np.all(L >= -1e-15) and np.all(L <= 1.0)


class TestDecay:
    def test_slow_tail_raises(self):
        k = np.fft.fftfreq(256, 1 / 256)
        coeffs = 1.0 / (1 + np.abs(k)) ** 2
        with pytest.raises(DecayFailure):
            _check_decay(coeffs.astype(complex), "test")

    def test_fast_tail_passes(self):
        k = np.fft.fftfreq(256, 1 / 256)
        _check_decay(np.exp(-np.abs(k)).astype(complex), "test")

    def test_default_sample_count(self):
        assert default_sample_count(250) == 2048
        assert default_sample_count(10) == 1024


class TestBoundaryFourier:
    def test_I_indices(self):
        h = np.arange(8, dtype=complex)
        bf = BoundaryFourier(np.zeros(8, complex), h, 2.0, 8, 0.5)
        assert bf.I0 == -2.0 * h[-1]
        np.testing.assert_allclose(bf.I(np.array([2, -3])), [-2.0 * h[1] / 2, -2.0 * h[-4] / -3])

    def test_sample_count_power_of_two(self, bench_maps, material):
        with pytest.raises(ValueError):
            boundary_fourier(bench_maps[2], material, 1000)

    def test_equilibrium_from_samples(self, bench_maps, material):
        from seqtunnel.geometry import benchmark_stage, region_area

        bf = boundary_fourier(bench_maps[2], material, 16384)
        target = -1j * material.gamma * region_area(benchmark_stage(2)) / (2 * np.pi)
        assert abs(bf.I0 - target) / abs(target) < 1e-3


class TestSolve:
    def test_structure(self, small_solution):
        sol = small_solution.series
        M = sol.M
        assert sol.f.size == 2 * M + 1
        assert sol.A.size == sol.B.size == 2 * M + 3
        assert sol.single_valuedness_residual() < 1e-10 * abs(sol.I0)
        target = -1j * small_solution.material.gamma * small_solution.area / (2 * np.pi)
        assert abs(sol.A_at(-1) - sol.B_at(-1) - target) / abs(target) < 1e-3

    def test_direct_matches_fixed_point(self, small_solution):
        st_ = small_solution
        sol = st_.series
        other = solve_coeffs(st_.branch, st_.fourier, st_.bmap.alpha, sol.M, method="direct")
        assert sol.method == "fixed-point"
        np.testing.assert_allclose(other.f, sol.f, rtol=0, atol=1e-8 * np.abs(sol.f).max())

    def test_iteration_cap(self, small_solution):
        st_ = small_solution
        with pytest.raises(NonConvergence) as info:
            solve_coeffs(st_.branch, st_.fourier, st_.bmap.alpha, st_.series.M, max_iter=2, method="fixed-point")
        assert len(info.value.history) == 2

    def test_bad_arguments(self, small_solution):
        st_ = small_solution
        with pytest.raises(ValueError):
            solve_coeffs(st_.branch, st_.fourier, 1.5, 10)
        with pytest.raises(ValueError):
            solve_coeffs(st_.branch, st_.fourier, st_.bmap.alpha, 10, method="newton")

    def test_dump_csv(self, small_solution, tmp_path):
        p = tmp_path / "c.csv"
        small_solution.series.dump_csv(p, small_solution.fourier)
        lines = p.read_bytes().split(b"\n")
        assert lines[0] == b"k,f_re,f_im,A_re,A_im,B_re,B_im,I_re,I_im"
        assert len(lines) == 2 * small_solution.series.M + 3 + 2
        assert b"\r" not in p.read_bytes()
