"""Shared fixtures: solved benchmark stages are built once per session."""
import numpy as np
import pytest

from seqtunnel.conformal import MapOptions, build_map
from seqtunnel.geometry import GroundSplit, Material, benchmark_stage
from seqtunnel.pipeline import SolverOptions, solve_stage

BENCH_ZC = complex(-2.5, -7.5)


@pytest.fixture(scope="session")
def material():
    return Material()


@pytest.fixture(scope="session")
def split():
    return GroundSplit(10.0)


@pytest.fixture(scope="session")
def map_options():
    return MapOptions(z_c=BENCH_ZC)


@pytest.fixture(scope="session")
def bench_maps(split, map_options):
    return {j: build_map(benchmark_stage(j), split, map_options) for j in (1, 2, 3, 4)}


@pytest.fixture(scope="session")
def bench_solutions(bench_maps, split, material):
    return {
        j: solve_stage(benchmark_stage(j), split, material, SolverOptions(), bmap=bench_maps[j])
        for j in (1, 2, 3, 4)
    }


@pytest.fixture(scope="session")
def small_solution(split, material):
    """A cheap stage-2 solve for structural tests."""
    opts = SolverOptions(M=40, sample_count=4096)
    return solve_stage(benchmark_stage(2), split, material, MapOptions(z_c=BENCH_ZC), opts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
