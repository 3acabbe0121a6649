"""End-to-end solve of one excavation stage."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conformal import BidirectionalMap, MapOptions, build_map
from .exceptions import DecayFailure
from .geometry import GroundSplit, Material, StageBoundary, region_area
from .rh_solver import (
    BoundaryFourier,
    BranchData,
    SeriesSolution,
    boundary_fourier,
    branch_data,
    default_sample_count,
    solve_coeffs,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Series truncation and iteration settings.

    ``sample_count = None`` starts from the smallest power of two at least
    ``max(1024, 8M)`` and doubles while the boundary expansions fail the
    decay test, up to ``max_sample_count``. With ``strict_decay`` the last
    failure is raised; otherwise it is logged and recorded.
    """

    M: int = 250
    tol: float = 1e-12
    max_iter: int = 200
    sample_count: Optional[int] = None
    max_sample_count: int = 16384
    strict_decay: bool = False
    lanczos: bool = True
    method: str = "auto"

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")
        if self.sample_count is not None:
            n = int(self.sample_count)
            if n < 4 * self.M + 4 or n & (n - 1):
                raise ValueError("sample_count must be a power of two >= 4M+4")
        if self.method not in ("auto", "fixed-point", "direct"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class StageSolution:
    """Everything produced for one stage."""

    boundary: StageBoundary
    split: GroundSplit
    material: Material
    bmap: BidirectionalMap
    branch: BranchData
    fourier: BoundaryFourier
    series: SeriesSolution
    options: SolverOptions
    decay_ok: bool = True
    notes: list = field(default_factory=list)

    @property
    def sample_count(self) -> int:
        return self.fourier.sample_count

    @property
    def area(self) -> float:
        return region_area(self.boundary)

    @property
    def equilibrium_rel_err(self) -> float:
        """Relative gap between ``I_0`` and ``-i gamma Area / (2 pi)``."""
        target = -1j * self.material.gamma * self.area / (2 * np.pi)
        if target == 0:
            return float(abs(self.fourier.I0))
        return float(abs(self.fourier.I0 - target) / abs(target))


def _fourier_with_decay(bmap, mat, opts: SolverOptions, notes: list):
    n = opts.sample_count or default_sample_count(opts.M)
    while True:
        try:
            return boundary_fourier(bmap, mat, n, check=True), True
        except DecayFailure as exc:
            if opts.sample_count is not None or 2 * n > opts.max_sample_count:
                if opts.strict_decay:
                    raise
                msg = f"{exc}; continuing with {n} samples"
                log.warning(msg)
                notes.append(msg)
                return boundary_fourier(bmap, mat, n, check=False), False
            n *= 2


def solve_stage(
    boundary: StageBoundary,
    split: GroundSplit,
    mat: Material,
    map_options: Optional[MapOptions] = None,
    solver_options: Optional[SolverOptions] = None,
    bmap: Optional[BidirectionalMap] = None,
) -> StageSolution:
    """Map, expand and solve one stage."""
    opts = solver_options or SolverOptions()
    split.check_spans(boundary)
    if bmap is None:
        bmap = build_map(boundary, split, map_options)
    notes: list = []
    branch = branch_data(mat.kappa, bmap.t1, bmap.t2, 2 * opts.M + 4)
    bf, decay_ok = _fourier_with_decay(bmap, mat, opts, notes)
    series = solve_coeffs(branch, bf, bmap.alpha, opts.M, tol=opts.tol, max_iter=opts.max_iter, method=opts.method)
    if series.method != "fixed-point":
        notes.append("fixed-point iteration did not contract; direct real-linear solve used")
    return StageSolution(boundary, split, mat, bmap, branch, bf, series, opts, decay_ok, notes)
