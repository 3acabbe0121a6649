"""Machine-checkable verification of solved stages and parametric sweeps."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .conformal import MapOptions
from .exceptions import SeqTunnelError
from .fields import cavity_profile, ground_profile, incremental_at, total_at
from .geometry import Arc, GroundSplit, Material, StageBoundary, benchmark_stage
from .pipeline import SolverOptions, StageSolution, solve_stage

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Thresholds:
    """Pass limits. Stress limits are fractions of ``gamma * crown depth``;
    the displacement limit is a fraction of the largest cavity displacement."""

    epsilon_m: float = 1e-3
    equilibrium_rel: float = 1e-3
    identity_rel: float = 1e-3
    residual_fraction: float = 0.01
    displacement_fraction: float = 0.01
    resultant_rel: float = 0.05
    joint_band_fraction: float = 0.05
    decay_fraction: float = 1e-3
    absolute_floor: float = 1e-9
    concave_is_warning: bool = True


def is_concave(boundary: StageBoundary) -> bool:
    """True when some arc turns clockwise on the counterclockwise contour."""
    return any(isinstance(s, Arc) and s.sweep < 0 for s in boundary.segments)


@dataclass
class StageReport:
    stage: int
    epsilon_m: float = math.nan
    residual_traction_max_kpa: float = math.nan
    free_surface_traction_max_kpa: float = math.nan
    constrained_displacement_max_m: float = math.nan
    cavity_displacement_max_m: float = math.nan
    equilibrium_rel_err: float = math.nan
    identity_rel_err: float = math.nan
    single_valuedness_abs: float = math.nan
    resultant_rel_err: float = math.nan
    far_field_stress_max_kpa: float = math.nan
    lsq_residual: float = math.nan
    iterations_used: int = 0
    solve_method: str = ""
    sample_count: int = 0
    decay_ok: bool = True
    concavity_flag: bool = False
    stress_scale_kpa: float = math.nan
    checks: dict = field(default_factory=dict)
    status: str = "PASS"
    error: str = ""

    def passed(self) -> bool:
        return self.status in ("PASS", "WARN")


@dataclass
class VerificationReport:
    stages: list = field(default_factory=list)
    thresholds: Thresholds = field(default_factory=Thresholds)

    @property
    def passed(self) -> bool:
        return all(s.passed() for s in self.stages)

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, list):
                return [clean(x) for x in v]
            return v

        payload = {
            "thresholds": asdict(self.thresholds),
            "stages": [clean(asdict(s)) for s in self.stages],
            "passed": self.passed,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def summary(self) -> str:
        lines = []
        for s in self.stages:
            if s.error:
                lines.append(f"stage {s.stage}: FAIL ({s.error})")
                continue
            lines.append(
                f"stage {s.stage}: {s.status}  eps={s.epsilon_m:.2e} m  "
                f"cavity residual={s.residual_traction_max_kpa:.3g} kPa  "
                f"free surface={s.free_surface_traction_max_kpa:.3g} kPa  "
                f"fixed surface={s.constrained_displacement_max_m:.3g} m  "
                f"equilibrium={s.equilibrium_rel_err:.2e}"
            )
            for name, (ok, value, limit) in sorted(s.checks.items()):
                mark = "ok " if ok else "BAD"
                lines.append(f"    [{mark}] {name}: {value:.4g} (limit {limit:.4g})")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _ground_samples(x0: float, band: float, n: int = 400, reach: float = 100.0):
    """Free-segment and constrained-segment abscissae outside the joint bands."""
    free = np.linspace(-x0 + band, x0 - band, n)
    out = np.geomspace(x0 + band, reach * x0, n)
    return free, np.concatenate([-out[::-1], out])


def constrained_resultant(
    st: StageSolution, reach: float = 100.0, n: int = 1000, min_gap: Optional[float] = None,
    end_corrections: bool = True,
) -> complex:
    """Integral of the surface traction ``tau_xy + i sigma_y`` over the fixed part
    ``x0 <= |x| <= reach * x0``.

    The integrable square-root singularity at the joints is handled by
    substituting ``x = x0 + s^2``; the first ``min_gap`` metres next to each
    joint (default ``0.01 x0``), where the series cannot be evaluated, are
    replaced by the leading-order singular estimate, and the part beyond
    ``reach * x0`` by the leading-order decay estimate.
    """
    x0 = st.split.x0
    total = 0j
    smax = math.sqrt((reach - 1.0) * x0)
    s_nodes, s_w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * smax * (s_nodes + 1.0)
    w = 0.5 * smax * s_w
    gap = 0.01 * x0 if min_gap is None else min_gap
    keep = s > gap ** 0.5
    s, w = s[keep], w[keep]
    ends = np.array([x0 + gap, reach * x0])
    for sign in (-1.0, 1.0):
        x = sign * np.concatenate([x0 + s * s, ends])
        prof = ground_profile(st.series, st.bmap, st.material, x, lanczos=st.options.lanczos)
        trac = prof.column("tau_xy_kpa") + 1j * prof.column("sigma_y_kpa")
        total += np.sum(trac[:-2] * 2.0 * s * w)
        if end_corrections:
            # square-root singularity inside the gap, 1/x^2 decay beyond the reach
            total += 2.0 * gap * trac[-2] + reach * x0 * trac[-1]
    return complex(total)


def verify_stage(st: StageSolution, thresholds: Optional[Thresholds] = None, n_cavity: int = 1440) -> StageReport:
    """Residuals, identities and mapping accuracy for a solved stage."""
    th = thresholds or Thresholds()
    rep = StageReport(stage=st.boundary.stage_index)
    mat = st.material
    sol = st.series
    rep.epsilon_m = st.bmap.epsilon
    rep.concavity_flag = is_concave(st.boundary)
    rep.lsq_residual = sol.lsq_residual
    rep.iterations_used = sol.iterations
    rep.solve_method = sol.method
    rep.sample_count = st.sample_count
    rep.decay_ok = st.decay_ok
    scale = mat.gamma * st.boundary.crown_depth
    rep.stress_scale_kpa = scale

    cav = cavity_profile(sol, st.bmap, mat, n_cavity, lanczos=st.options.lanczos)
    res = np.hypot(cav.column("sigma_rho_kpa"), cav.column("tau_rhotheta_kpa"))
    rep.residual_traction_max_kpa = float(res.max())
    disp = np.hypot(cav.column("u_m"), cav.column("v_m"))
    rep.cavity_displacement_max_m = float(disp.max())

    x0 = st.split.x0
    band = th.joint_band_fraction * x0
    xf, xc = _ground_samples(x0, band)
    gf = ground_profile(sol, st.bmap, mat, xf, lanczos=st.options.lanczos)
    rep.free_surface_traction_max_kpa = float(
        np.hypot(gf.column("sigma_y_kpa"), gf.column("tau_xy_kpa")).max()
    )
    gc = ground_profile(sol, st.bmap, mat, xc, lanczos=st.options.lanczos)
    rep.constrained_displacement_max_m = float(np.hypot(gc.column("u_m"), gc.column("v_m")).max())

    far = np.concatenate([-np.geomspace(100 * x0, 1000 * x0, 50), np.geomspace(100 * x0, 1000 * x0, 50)])
    theta = np.angle(st.bmap.zeta_of_z(far + 0j))
    inc = incremental_at(sol, st.bmap, mat, 1.0, theta, lanczos=st.options.lanczos)
    rep.far_field_stress_max_kpa = float(
        np.max(np.abs(np.stack([inc.sigma_x, inc.sigma_y, inc.tau_xy])))
    )

    rep.equilibrium_rel_err = st.equilibrium_rel_err
    ry = mat.gamma * st.area
    target = -1j * ry / (2 * np.pi)
    a_m1, b_m1 = sol.A_at(-1), sol.B_at(-1)
    rep.identity_rel_err = float(abs((a_m1 - b_m1) - target) / abs(target)) if ry else float(abs(a_m1 - b_m1))
    rep.single_valuedness_abs = sol.single_valuedness_residual()
    if ry:
        rr = constrained_resultant(st)
        rep.resultant_rel_err = float(abs(rr - (-1j * ry)) / ry)
    else:
        rep.resultant_rel_err = abs(constrained_resultant(st))

    # absolute floors keep the limits meaningful when the load vanishes
    stress_tol = max(th.residual_fraction * scale, th.absolute_floor)
    decay_tol = max(th.decay_fraction * scale, th.absolute_floor)
    disp_tol = max(th.displacement_fraction * rep.cavity_displacement_max_m, th.absolute_floor)
    checks = {
        "mapping accuracy": (rep.epsilon_m <= th.epsilon_m, rep.epsilon_m, th.epsilon_m),
        "equilibrium identity": (rep.equilibrium_rel_err <= th.equilibrium_rel, rep.equilibrium_rel_err, th.equilibrium_rel),
        "resultant identity": (rep.identity_rel_err <= th.identity_rel, rep.identity_rel_err, th.identity_rel),
        "cavity residual traction": (rep.residual_traction_max_kpa <= stress_tol, rep.residual_traction_max_kpa, stress_tol),
        "free surface traction": (rep.free_surface_traction_max_kpa <= stress_tol, rep.free_surface_traction_max_kpa, stress_tol),
        "fixed surface displacement": (rep.constrained_displacement_max_m <= disp_tol, rep.constrained_displacement_max_m, disp_tol),
        "fixed surface resultant": (rep.resultant_rel_err <= th.resultant_rel, rep.resultant_rel_err, th.resultant_rel),
        "far field decay": (rep.far_field_stress_max_kpa <= decay_tol, rep.far_field_stress_max_kpa, decay_tol),
    }
    rep.checks = checks
    failed = [k for k, (ok, _, _) in checks.items() if not ok]
    if not failed:
        rep.status = "PASS"
    elif rep.concavity_flag and th.concave_is_warning:
        rep.status = "WARN"
    else:
        rep.status = "FAIL"
    return rep


def safe_verify(factory: Callable[[], StageSolution], stage: int, thresholds=None) -> StageReport:
    """Run ``factory`` and verify; solver errors become a failed entry."""
    try:
        return verify_stage(factory(), thresholds)
    except SeqTunnelError as exc:
        log.error("stage %d failed: %s", stage, exc)
        return StageReport(stage=stage, status="FAIL", error=f"{type(exc).__name__}: {exc}")


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    """Scalar outputs per parameter value, plus the cavity profiles."""

    parameter: str
    values: list
    peak_mises_kpa: list = field(default_factory=list)
    max_deformation_m: list = field(default_factory=list)
    profiles: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        v = list(self.values)
        if any(b <= a for a, b in zip(v[:-1], v[1:])):
            raise ValueError("sweep values must be strictly increasing")

    def rows(self):
        for i, v in enumerate(self.values):
            yield v, self.peak_mises_kpa[i], self.max_deformation_m[i]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write(f"{self.parameter},peak_mises_kpa,max_deformation_m\n")
            for v, p, d in self.rows():
                fh.write(f"{v:.17e},{p:.17e},{d:.17e}\n")


def _profile_stats(st: StageSolution, n_points: int):
    prof = cavity_profile(st.series, st.bmap, st.material, n_points, lanczos=st.options.lanczos)
    disp = prof.column("u_m") + 1j * prof.column("v_m")
    return prof, float(prof.column("mises_kpa").max()), float(np.abs(disp).max()), disp


def _run_sweep(name, values, make: Callable[[float], StageSolution], n_points: int) -> SweepResult:
    out = SweepResult(name, list(values))
    for v in out.values:
        try:
            st = make(v)
            prof, peak, dmax, _ = _profile_stats(st, n_points)
        except SeqTunnelError as exc:
            log.error("%s = %s failed: %s", name, v, exc)
            out.errors[v] = f"{type(exc).__name__}: {exc}"
            prof, peak, dmax = None, math.nan, math.nan
        out.profiles.append(prof)
        out.peak_mises_kpa.append(peak)
        out.max_deformation_m.append(dmax)
    return out


def x0_convergence(
    boundary: StageBoundary,
    mat: Material,
    x0_list: Sequence[float],
    map_options: Optional[MapOptions] = None,
    solver_options: Optional[SolverOptions] = None,
    n_points: int = 720,
) -> SweepResult:
    """Cavity deformation for growing free-segment half-widths.

    ``deltas[i]`` is the max-norm change of the cavity displacement between
    ``x0_list[i]`` and ``x0_list[i+1]`` relative to the larger run's maximum.
    """
    def make(x0):
        return solve_stage(boundary, GroundSplit(x0), mat, map_options, solver_options)

    res = _run_sweep("x0", x0_list, make, n_points)
    disp = [None if p is None else p.column("u_m") + 1j * p.column("v_m") for p in res.profiles]
    for a, b in zip(disp[:-1], disp[1:]):
        if a is None or b is None:
            res.deltas.append(math.nan)
        else:
            res.deltas.append(float(np.abs(a - b).max() / np.abs(b).max()))
    return res


def kx_sweep(
    boundary: StageBoundary,
    split: GroundSplit,
    mat: Material,
    kx_list: Sequence[float],
    map_options: Optional[MapOptions] = None,
    solver_options: Optional[SolverOptions] = None,
    n_points: int = 1440,
) -> SweepResult:
    from dataclasses import replace

    bmap_cache = {}

    def make(kx):
        m = replace(mat, kx=kx)
        bmap = bmap_cache.get("map")
        st = solve_stage(boundary, split, m, map_options, solver_options, bmap=bmap)
        bmap_cache["map"] = st.bmap
        return st

    return _run_sweep("kx", kx_list, make, n_points)


def corner_sweep(
    split: GroundSplit,
    mat: Material,
    radius_list: Sequence[float],
    map_options: Optional[MapOptions] = None,
    solver_options: Optional[SolverOptions] = None,
    n_points: int = 2880,
    builder: Callable[[float], StageBoundary] = lambda r: benchmark_stage(3, corner_radius=r),
) -> SweepResult:
    """Peak cavity Mises stress as the drift corner radius grows."""
    def make(r):
        return solve_stage(builder(r), split, mat, map_options, solver_options)

    return _run_sweep("corner_radius", radius_list, make, n_points)
