"""Command line entry point.

``seqtunnel <solve|map-only|verify|sweep> --config PATH [--stage N] [--out DIR]``

Exit status: 0 success, 1 verification failure, 2 configuration error,
3 solver error. ``SEQTUNNEL_THREADS`` sets how many stages run at once.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig, load_config
from .conformal import build_map, curvilinear_grid
from .exceptions import ConfigError, SeqTunnelError
from .fields import cavity_profile, ground_profile
from .pipeline import StageSolution, solve_stage
from .verify import VerificationReport, corner_sweep, kx_sweep, safe_verify, x0_convergence

log = logging.getLogger("seqtunnel")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVE = 0, 1, 2, 3
THREADS_ENV = "SEQTUNNEL_THREADS"
EFFECTIVE_CONFIG = "effective_config.yaml"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


def _fan_out(fn, items):
    """Map ``fn`` over ``items`` preserving order."""
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _selected(cfg: RunConfig, stage: Optional[int]):
    return [cfg.stage(stage)] if stage is not None else list(cfg.stages)


def _solve(cfg: RunConfig, spec) -> StageSolution:
    return solve_stage(spec.build(), cfg.split, cfg.material, cfg.map_options, cfg.solver)


def ground_samples(cfg: RunConfig) -> np.ndarray:
    """Configured ground abscissae minus a small band around each joint."""
    g = cfg.outputs["ground_x"]
    x = np.linspace(float(g["min"]), float(g["max"]), int(g["count"]))
    x0 = cfg.split.x0
    return x[np.abs(np.abs(x) - x0) > 0.01 * x0]


def _stage_dir(out: Path, index: int) -> Path:
    d = out / f"stage_{index}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17e}" for v in row])


def cmd_solve(cfg: RunConfig, out: Path, stage: Optional[int]) -> int:
    specs = _selected(cfg, stage)
    sols = _fan_out(lambda s: _solve(cfg, s), specs)
    o = cfg.outputs
    for spec, st in zip(specs, sols):
        d = _stage_dir(out, spec.index)
        lz = cfg.solver.lanczos
        if o["cavity_profile"]:
            cavity_profile(st.series, st.bmap, st.material, int(o["cavity_points"]), lanczos=lz).to_csv(
                d / "cavity_profile.csv"
            )
        if o["ground_profile"]:
            ground_profile(st.series, st.bmap, st.material, ground_samples(cfg), lanczos=lz).to_csv(
                d / "ground_profile.csv"
            )
        if o["coefficients"]:
            st.series.dump_csv(d / "coefficients.csv", st.fourier)
        log.info(
            "stage %d: alpha=%.6f eps=%.3e m iterations=%d (%s)",
            spec.index, st.bmap.alpha, st.bmap.epsilon, st.series.iterations, st.series.method,
        )
    return EXIT_OK


def cmd_map_only(cfg: RunConfig, out: Path, stage: Optional[int]) -> int:
    specs = _selected(cfg, stage)
    maps = _fan_out(lambda s: build_map(s.build(), cfg.split, cfg.map_options), specs)
    g = cfg.outputs["grid"]
    for spec, bmap in zip(specs, maps):
        rows = curvilinear_grid(bmap, int(g["rho_lines"]), int(g["theta_lines"]), int(g["samples_per_line"]))
        _write_rows(_stage_dir(out, spec.index) / "grid.csv", ("family", "value", "param", "x", "y"), rows)
        log.info("stage %d: alpha=%.6f eps=%.3e m", spec.index, bmap.alpha, bmap.epsilon)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path, stage: Optional[int]) -> int:
    specs = _selected(cfg, stage)
    entries = _fan_out(lambda s: safe_verify(lambda: _solve(cfg, s), s.index, cfg.thresholds), specs)
    report = VerificationReport(entries, cfg.thresholds)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="ascii", newline="\n")
    summary = report.summary()
    (out / "report.txt").write_text(summary + "\n", encoding="ascii", newline="\n")
    print(summary)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_sweep(cfg: RunConfig, out: Path, stage: Optional[int], which: Sequence[str]) -> int:
    spec = cfg.stage(stage) if stage is not None else cfg.stages[-1]
    sw = cfg.sweeps
    results = []
    if "x0" in which:
        results.append(x0_convergence(spec.build(), cfg.material, sw["x0"], cfg.map_options, cfg.solver))
    if "kx" in which:
        results.append(kx_sweep(spec.build(), cfg.split, cfg.material, sw["kx"], cfg.map_options, cfg.solver))
    if "corner" in which:
        drift = [s for s in cfg.stages if s.benchmark == 3]
        if drift:
            d = drift[0]
            results.append(
                corner_sweep(
                    cfg.split, cfg.material, sw["corner_radius"], cfg.map_options, cfg.solver,
                    builder=lambda r: d.with_corner_radius(r).build(),
                )
            )
        else:
            log.warning("corner sweep skipped: the config has no benchmark stage 3")
    failed = False
    for res in results:
        res.to_csv(out / f"sweep_{res.parameter}.csv")
        if res.deltas:
            _write_rows(out / f"sweep_{res.parameter}_deltas.csv", ("from", "to", "rel_delta"),
                        [(a, b, d) for a, b, d in zip(res.values[:-1], res.values[1:], res.deltas)])
        for v, err in res.errors.items():
            log.error("%s = %s: %s", res.parameter, v, err)
            failed = True
        for v, p, dm in res.rows():
            print(f"{res.parameter}={v:g}  peak_mises={p:.6g} kPa  max_deformation={dm:.6g} m")
        if res.parameter == "corner_radius" and len(res.values) > 1:
            a, b = res.peak_mises_kpa[0], res.peak_mises_kpa[-1]
            print(f"corner_radius: peak Mises change {100 * (b - a) / a:+.2f}%")
        for a, b, d in zip(res.values[:-1], res.values[1:], res.deltas):
            print(f"x0 {a:g} -> {b:g}: relative deformation change {d:.4g}")
    return EXIT_SOLVE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqtunnel", description="Sequential shallow tunnelling stress solver.")
    p.add_argument("command", choices=("solve", "map-only", "verify", "sweep"))
    p.add_argument("--config", required=True, help="YAML configuration file")
    p.add_argument("--stage", type=int, default=None, help="only this stage index")
    p.add_argument("--out", default=None, help="output directory (overrides outputs.directory)")
    p.add_argument("--sweep", choices=("x0", "kx", "corner", "all"), default="all", help="which sweep to run")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        thread_count()
        if args.stage is not None:
            cfg.stage(args.stage)
        out = Path(args.out if args.out is not None else cfg.outputs["directory"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create {out}: {exc}") from exc
        (out / EFFECTIVE_CONFIG).write_text(cfg.to_yaml(), encoding="utf-8", newline="\n")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "solve":
            return cmd_solve(cfg, out, args.stage)
        if args.command == "map-only":
            return cmd_map_only(cfg, out, args.stage)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.stage)
        which = ("x0", "kx", "corner") if args.sweep == "all" else (args.sweep,)
        return cmd_sweep(cfg, out, args.stage, which)
    except SeqTunnelError as exc:
        print(f"solve error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
