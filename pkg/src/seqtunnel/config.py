"""YAML run configuration.

Every block is optional; missing keys take the defaults below and unknown
keys are rejected. ``stages`` is either the string ``"paper-4stage"`` or a
list of stage entries, each one of

* ``{benchmark: 3, corner_radius: 0.4}`` for a built-in contour, or
* ``{index: 5, segments: [...], fillet: 0.5}`` with segments written as
  ``{line: [[x0, y0], [x1, y1]]}`` or
  ``{arc: {center: [x, y], radius: r, start_angle: a, sweep: s}}``.
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import yaml

from .conformal import MapOptions
from .exceptions import ConfigError, SeqTunnelError
from .geometry import Arc, DensitySpec, GroundSplit, Line, Material, StageBoundary, benchmark_stage, fillet_corners
from .pipeline import SolverOptions
from .verify import Thresholds

BENCHMARK_NAME = "paper-4stage"
BENCHMARK_Z_C = (-2.5, -7.5)

DEFAULTS: dict = {
    "material": {"gamma": 20.0, "kx": 0.8, "E": 20e3, "nu": 0.3},
    "ground": {"x0": 10.0},
    "mapping": {
        "beta": 5.0,
        "z_c": None,
        "w_c": None,
        "w0_factor": 0.9,
        "K0": 2.2,
        "K1": 1.5,
        "k0": 2.2,
        "k1": 1.5,
        "n_ground": 360,
        "density": {"small_arc": 30, "large_arc": 90, "line": 60, "small_arc_radius": 1.0},
    },
    "solver": {
        "M": 250,
        "tol": 1e-12,
        "max_iter": 200,
        "sample_count": None,
        "max_sample_count": 16384,
        "strict_decay": False,
        "lanczos": True,
        "method": "auto",
    },
    "stages": BENCHMARK_NAME,
    "outputs": {
        "directory": "out",
        "cavity_profile": True,
        "ground_profile": True,
        "coefficients": True,
        "cavity_points": 720,
        "ground_x": {"min": -50.0, "max": 50.0, "count": 1001},
        "grid": {"rho_lines": 10, "theta_lines": 36, "samples_per_line": 200},
    },
    "thresholds": {f.name: f.default for f in fields(Thresholds)},
    "sweeps": {
        "x0": [10.0, 100.0, 1000.0, 10000.0],
        "kx": [0.6, 0.8, 1.0, 1.2, 1.4, 1.6],
        "corner_radius": [0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
    },
}


def _merge(defaults: dict, given: Any, where: str) -> dict:
    if given is None:
        return copy.deepcopy(defaults)
    if not isinstance(given, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(map(str, unknown)))}")
    out = {}
    for key, dv in defaults.items():
        gv = given.get(key, dv)
        if isinstance(dv, dict):
            out[key] = _merge(dv, gv, f"{where}.{key}")
        else:
            out[key] = copy.deepcopy(gv)
    return out


def _complex(v, where: str) -> Optional[complex]:
    if v is None:
        return None
    if isinstance(v, (list, tuple)) and len(v) == 2:
        try:
            return complex(float(v[0]), float(v[1]))
        except (TypeError, ValueError):
            pass
    raise ConfigError(f"{where} must be [real, imag] or null")


def _point(v, where: str) -> complex:
    c = _complex(v, where)
    if c is None:
        raise ConfigError(f"{where} must be a point [x, y]")
    return c


def _number(v, where: str, lo=-math.inf, hi=math.inf, integer=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number")
    if integer and int(v) != v:
        raise ConfigError(f"{where} must be an integer")
    if not (lo <= v <= hi) or not math.isfinite(v):
        raise ConfigError(f"{where} = {v} is outside [{lo}, {hi}]")
    return int(v) if integer else float(v)


@dataclass(frozen=True)
class StageSpec:
    """One stage as written in the config (kept for echoing)."""

    index: int
    benchmark: Optional[int] = None
    corner_radius: Optional[float] = None
    segments: tuple = ()
    fillet: Any = None

    def build(self) -> StageBoundary:
        if self.benchmark is not None:
            return benchmark_stage(self.benchmark, self.corner_radius)
        if self.fillet is None:
            return StageBoundary(self.segments, self.index)
        return fillet_corners(self.segments, self.fillet, stage_index=self.index)

    def with_corner_radius(self, r: float) -> "StageSpec":
        return StageSpec(self.index, self.benchmark, r, self.segments, self.fillet)


def _segment(entry, where: str):
    if not isinstance(entry, dict) or len(entry) != 1:
        raise ConfigError(f"{where} must be {{line: ...}} or {{arc: ...}}")
    kind, body = next(iter(entry.items()))
    if kind == "line":
        if not isinstance(body, (list, tuple)) or len(body) != 2:
            raise ConfigError(f"{where}.line must hold two points")
        return Line(_point(body[0], where), _point(body[1], where))
    if kind == "arc":
        body = _merge({"center": None, "radius": None, "start_angle": None, "sweep": None}, body, f"{where}.arc")
        return Arc(
            _point(body["center"], f"{where}.arc.center"),
            _number(body["radius"], f"{where}.arc.radius", lo=0.0),
            _number(body["start_angle"], f"{where}.arc.start_angle"),
            _number(body["sweep"], f"{where}.arc.sweep"),
        )
    raise ConfigError(f"{where}: unknown segment kind {kind!r}")


def _stage(entry, pos: int) -> StageSpec:
    where = f"stages[{pos}]"
    if not isinstance(entry, dict):
        raise ConfigError(f"{where} must be a mapping")
    if "benchmark" in entry:
        body = _merge({"benchmark": None, "corner_radius": None}, entry, where)
        b = _number(body["benchmark"], f"{where}.benchmark", 1, 4, integer=True)
        r = _number(body["corner_radius"], f"{where}.corner_radius", lo=0.0, allow_none=True)
        return StageSpec(b, benchmark=b, corner_radius=r)
    body = _merge({"index": pos + 1, "segments": None, "fillet": None}, entry, where)
    segs = body["segments"]
    if not isinstance(segs, list) or len(segs) < 2:
        raise ConfigError(f"{where}.segments must list at least two segments")
    parsed = tuple(_segment(s, f"{where}.segments[{i}]") for i, s in enumerate(segs))
    fil = body["fillet"]
    if isinstance(fil, list):
        fil = tuple(_number(r, f"{where}.fillet", lo=0.0) for r in fil)
    elif fil is not None:
        fil = _number(fil, f"{where}.fillet", lo=0.0)
    idx = _number(body["index"], f"{where}.index", lo=1, integer=True)
    return StageSpec(idx, segments=parsed, fillet=fil)


@dataclass
class RunConfig:
    """Validated configuration plus the effective (defaulted) raw mapping."""

    material: Material
    split: GroundSplit
    map_options: MapOptions
    solver: SolverOptions
    stages: list
    thresholds: Thresholds
    outputs: dict
    sweeps: dict
    raw: dict = field(repr=False, default_factory=dict)

    def stage(self, index: int) -> StageSpec:
        for s in self.stages:
            if s.index == index:
                return s
        raise ConfigError(f"no stage with index {index}")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=True, default_flow_style=None)


def from_dict(data: Optional[dict]) -> RunConfig:
    """Validate a parsed config mapping."""
    raw = _merge(DEFAULTS, data or {}, "config")
    try:
        m = raw["material"]
        mat = Material(
            gamma=_number(m["gamma"], "material.gamma", lo=0.0),
            kx=_number(m["kx"], "material.kx", lo=0.0),
            E=_number(m["E"], "material.E", lo=0.0),
            nu=_number(m["nu"], "material.nu", 0.0, 0.5),
        )
        split = GroundSplit(_number(raw["ground"]["x0"], "ground.x0", lo=0.0))
        mp = raw["mapping"]
        dens = mp["density"]
        density = DensitySpec(
            small_arc=_number(dens["small_arc"], "mapping.density.small_arc", lo=1, integer=True),
            large_arc=_number(dens["large_arc"], "mapping.density.large_arc", lo=1, integer=True),
            line=_number(dens["line"], "mapping.density.line", lo=1, integer=True),
            small_arc_radius=_number(dens["small_arc_radius"], "mapping.density.small_arc_radius", lo=0.0),
        )
        map_options = MapOptions(
            beta=_number(mp["beta"], "mapping.beta", lo=0.0),
            z_c=_complex(mp["z_c"], "mapping.z_c"),
            w_c=_complex(mp["w_c"], "mapping.w_c"),
            w0_factor=_number(mp["w0_factor"], "mapping.w0_factor", 0.0, 1.0),
            K0=_number(mp["K0"], "mapping.K0", lo=0.0),
            K1=_number(mp["K1"], "mapping.K1", lo=0.0),
            k0=_number(mp["k0"], "mapping.k0", lo=0.0),
            k1=_number(mp["k1"], "mapping.k1", lo=0.0),
            n_ground=_number(mp["n_ground"], "mapping.n_ground", lo=3, integer=True),
            density=density,
        )
        sv = raw["solver"]
        if not isinstance(sv["lanczos"], bool) or not isinstance(sv["strict_decay"], bool):
            raise ConfigError("solver.lanczos and solver.strict_decay must be true/false")
        solver = SolverOptions(
            M=_number(sv["M"], "solver.M", lo=1, integer=True),
            tol=_number(sv["tol"], "solver.tol", lo=0.0),
            max_iter=_number(sv["max_iter"], "solver.max_iter", lo=1, integer=True),
            sample_count=_number(sv["sample_count"], "solver.sample_count", lo=8, integer=True, allow_none=True),
            max_sample_count=_number(sv["max_sample_count"], "solver.max_sample_count", lo=8, integer=True),
            strict_decay=sv["strict_decay"],
            lanczos=sv["lanczos"],
            method=str(sv["method"]),
        )
        st = raw["stages"]
        if st == BENCHMARK_NAME:
            stages = [StageSpec(j, benchmark=j) for j in (1, 2, 3, 4)]
            if map_options.z_c is None:
                map_options = MapOptions(**{**_options_dict(map_options), "z_c": complex(*BENCHMARK_Z_C)})
                raw["mapping"]["z_c"] = list(BENCHMARK_Z_C)
        elif isinstance(st, list):
            stages = [_stage(e, i) for i, e in enumerate(st)]
        else:
            raise ConfigError(f"stages must be {BENCHMARK_NAME!r} or a list")
        if not stages:
            raise ConfigError("stage list is empty")
        idx = [s.index for s in stages]
        if len(set(idx)) != len(idx):
            raise ConfigError("stage indices must be unique")
        for s in stages:
            split.check_spans(s.build())
        thresholds = Thresholds(**{k: v for k, v in raw["thresholds"].items()})
        for k, v in asdict(thresholds).items():
            if not isinstance(v, bool):
                _number(v, f"thresholds.{k}", lo=0.0)
        out = raw["outputs"]
        _number(out["cavity_points"], "outputs.cavity_points", lo=8, integer=True)
        _number(out["ground_x"]["count"], "outputs.ground_x.count", lo=2, integer=True)
        for k in ("rho_lines", "theta_lines", "samples_per_line"):
            _number(out["grid"][k], f"outputs.grid.{k}", lo=2, integer=True)
        sweeps = raw["sweeps"]
        for name, vals in sweeps.items():
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"sweeps.{name} must be a non-empty list")
            nums = [_number(v, f"sweeps.{name}", lo=0.0) for v in vals]
            if any(b <= a for a, b in zip(nums[:-1], nums[1:])):
                raise ConfigError(f"sweeps.{name} must be strictly increasing")
    except ConfigError:
        raise
    except (SeqTunnelError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(mat, split, map_options, solver, stages, thresholds, out, sweeps, raw)


def _options_dict(opt: MapOptions) -> dict:
    return {f.name: getattr(opt, f.name) for f in fields(MapOptions)}


def load_config(path) -> RunConfig:
    """Read and validate a YAML config file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return from_dict(data)


def benchmark_config() -> RunConfig:
    """The built-in four-stage benchmark with default parameters."""
    return from_dict({"stages": BENCHMARK_NAME})
