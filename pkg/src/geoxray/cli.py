"""Batch command line: scene files in, CSV and report artifacts out.

Commands: ``forward``, ``limit-check``, ``reconstruct``, ``spectrum``.
Outputs use fixed 17-significant-digit float formatting, UTF-8 and LF line
endings, and are written atomically (temp file + rename), so identical
scenes produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import GeoxrayError, SceneValidationError, exit_code_for
from .geometry import boundary_tangent, trace_geodesic
from .recovery import (
    RecordedOracle,
    SyntheticOracle,
    assemble_operator,
    reconstruct,
    singular_spectrum,
    spectral_summary,
)
from .scene import Scene, load_scene, scene_chord_descriptors
from .transform import forward, limit_scan


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    """Atomic CSV write: header + rows, LF endings, 17 significant digits."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([c if isinstance(c, str) else fmt(c) for c in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _complex_header(prefix, m):
    cols = []
    for i in range(m):
        cols += [f"{prefix}{i}_re", f"{prefix}{i}_im"]
    return cols


def _complex_cells(vec):
    cells = []
    for z in vec:
        cells += [z.real, z.imag]
    return cells


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_forward(scene: Scene, out_dir: str, threads: int = 1) -> str:
    """One CSV row per planned geodesic with its transform value."""
    descriptors = scene_chord_descriptors(scene)

    def run(desc):
        path = trace_geodesic(scene.metric, boundary_tangent(scene.metric, desc[0], desc[1]),
                              step=scene.step)
        return forward(scene.metric, scene.weight, scene.tiling, scene.field, path)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(run, descriptors))
    else:
        values = [run(d) for d in descriptors]
    rows = [[d[0], d[1]] + _complex_cells(v) for d, v in zip(descriptors, values)]
    out = os.path.join(out_dir, "forward.csv")
    write_csv(out, ["boundary_angle", "direction_angle"] + _complex_header("value", scene.weight.m), rows)
    return out


def cmd_limit_check(scene: Scene, out_dir: str) -> str:
    """Scaled fan integrals against the frozen limit over the (v, h) plan."""
    if scene.fan_plan is None:
        raise SceneValidationError("scene.plans.fan_limit: missing (required by limit-check)")
    plan = scene.fan_plan
    rows_out = []
    scan = limit_scan(scene.metric, scene.weight, scene.tiling, scene.field,
                      plan.anchor_angle, plan.v_offsets, plan.h_values,
                      sign=plan.sign, step=scene.step)
    for row in scan:
        rows_out.append([row["h"], row["v_angle"], row["err"]]
                        + _complex_cells(row["scaled"]) + _complex_cells(row["frozen"]))
    out = os.path.join(out_dir, "limit_check.csv")
    write_csv(out, ["h", "v_angle", "err"]
              + _complex_header("scaled", scene.weight.m)
              + _complex_header("frozen", scene.weight.m), rows_out)
    return out


def read_recorded_csv(path, m) -> RecordedOracle:
    rows = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) != 2 + 2 * m:
                raise SceneValidationError(
                    f"data file {path}: expected {2 + 2 * m} columns for m={m}"
                )
            for rec in reader:
                ba, da = float(rec[0]), float(rec[1])
                value = np.array([complex(float(rec[2 + 2 * i]), float(rec[3 + 2 * i]))
                                  for i in range(m)])
                rows.append((ba, da, value))
    except FileNotFoundError:
        raise SceneValidationError(f"data file not found: {path}") from None
    return RecordedOracle.from_rows(rows, m)


def cmd_reconstruct(scene: Scene, out_dir: str, data_path=None) -> str:
    """Layer-stripping reconstruction; report plus per-triangle value CSV."""
    if scene.foliation is None:
        raise SceneValidationError("scene.foliation: missing (required by reconstruct)")
    if scene.chord_mode != "frontier" or scene.chord_plan is None:
        raise SceneValidationError("scene.plans.chords: frontier mode required by reconstruct")
    if data_path is not None:
        oracle = read_recorded_csv(data_path, scene.weight.m)
    else:
        oracle = SyntheticOracle(scene.metric, scene.weight, scene.tiling, scene.field,
                                 noise_sigma=scene.noise_sigma, rng=scene.rng())
    report = reconstruct(scene.metric, scene.weight, scene.tiling, oracle, scene.foliation,
                         plan=scene.chord_plan, step=scene.step, cond_cap=scene.cond_cap)
    report_path = os.path.join(out_dir, "reconstruction_report.txt")
    write_text(report_path, report.to_text())
    rows = []
    for i in range(len(report.values)):
        rows.append([float(i)] + _complex_cells(report.values[i]) + [report.per_triangle_residual[i]])
    values_path = os.path.join(out_dir, "reconstruction_values.csv")
    write_csv(values_path, ["triangle"] + _complex_header("value", scene.weight.k) + ["residual"], rows)
    return report_path


def cmd_spectrum(scene: Scene, out_dir: str, threads: int = 1) -> str:
    """Singular values of the assembled operator over the chord plan."""
    descriptors = scene_chord_descriptors(scene)

    def trace(desc):
        return trace_geodesic(scene.metric, boundary_tangent(scene.metric, desc[0], desc[1]),
                              step=scene.step)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            paths = list(pool.map(trace, descriptors))
    else:
        paths = [trace(d) for d in descriptors]
    operator = assemble_operator(scene.metric, scene.weight, scene.tiling, paths)
    spectrum = singular_spectrum(operator)
    out = os.path.join(out_dir, "spectrum.csv")
    write_csv(out, ["index", "sigma"], [[float(i), s] for i, s in enumerate(spectrum)])
    smin, smax, ratio = spectral_summary(spectrum)
    summary = os.path.join(out_dir, "spectrum_summary.csv")
    write_csv(summary, ["sigma_min", "sigma_max", "ratio"],
              [[smin, smax, ratio]] if len(spectrum) else [])
    return out


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="geoxray",
        description="Weighted geodesic ray transforms of piecewise constant fields on disk geometries.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_data in (("forward", False), ("limit-check", False),
                             ("reconstruct", True), ("spectrum", False)):
        p = sub.add_parser(name)
        p.add_argument("--scene", required=True, help="scene JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--step", type=float, default=None, help="override the quadrature step")
        p.add_argument("--seed", type=int, default=None, help="override the scene seed")
        p.add_argument("--threads", type=int, default=1, help="parallel tracing threads")
        if needs_data:
            p.add_argument("--data", default=None, help="recorded data CSV (default: synthetic)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scene = load_scene(args.scene, step_override=args.step, seed_override=args.seed)
        if args.command == "forward":
            out = cmd_forward(scene, args.out, threads=args.threads)
        elif args.command == "limit-check":
            out = cmd_limit_check(scene, args.out)
        elif args.command == "reconstruct":
            out = cmd_reconstruct(scene, args.out, data_path=args.data)
        else:
            out = cmd_spectrum(scene, args.out, threads=args.threads)
    except GeoxrayError as exc:
        print(f"geoxray: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
