"""Command-line front end: scenario TOML in, CSV/JSON artifacts out.

    timebin single --config scenario.toml --out results/
    timebin pair   --config scenario.toml --out results/
    timebin verify [--config scenario.toml] [--out results/]

Every run also writes resolved_config.toml (the scenario with all defaults
filled in — rerunning from it reproduces the outputs byte for byte) and
report.txt describing each artifact.  Numbers are written with a fixed
format and fixed key order so identical scenarios give identical bytes.
Exit codes: 0 success, 1 failed check or failed run, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, load_config, resolved_toml
from .histogram import build_histogram, project_antidiagonal, project_diagonal
from .interferometer import PhaseSetting
from .linalg import DataError, DimensionError, NumericalError
from .tomography_pair import (
    center_scan,
    center_visibility,
    compute_gbar,
    concurrence,
    concurrence_approx,
    peak_table_from_entries,
    reconstruct_pair,
    stokes_pair,
)
from .tomography_single import (
    integrate_peaks,
    reconstruct_from_peaks,
    visibility,
    visibility_fit,
)
from .verify import run_checks

_ENV_THREADS = "TIMEBIN_THREADS"


def _fmt(x: float) -> str:
    return "%.12e" % float(x)


def _jsonify(obj):
    """Floats stay floats (deterministic repr); complex become [re, im]."""
    if isinstance(obj, complex):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, obj):
    _write_text(path, json.dumps(_jsonify(obj), sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else _fmt(c) for c in row))
    _write_text(path, "\n".join(lines) + "\n")


def _resolve_threads(cfg: ScenarioConfig, flag) -> object:
    env = os.environ.get(_ENV_THREADS)
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{_ENV_THREADS} must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{_ENV_THREADS} must be >= 1, got {n}")
        return n
    if flag is not None:
        return flag
    return cfg.threads


def _common_outputs(cfg: ScenarioConfig, out: Path, report_lines):
    _write_text(out / "resolved_config.toml", resolved_toml(cfg))
    report_lines.append("resolved_config.toml: scenario with all defaults filled in; rerun input")
    _write_text(out / "report.txt", "\n".join(report_lines) + "\n")


# ---------------------------------------------------------------------------
# single


def cmd_single(cfg: ScenarioConfig, out: Path, threads) -> int:
    source = cfg.build_single_source()
    peaks = integrate_peaks(
        source,
        phases=cfg.phi_scan,
        points_per_bin=cfg.quad_points_per_bin,
        grid_density=cfg.grid_density,
    )
    report = ["single-photon time-bin tomography run", ""]

    if cfg.wanted("peaks.csv"):
        rows = [
            (phi, peaks.p_early, peaks.mid_at(phi), peaks.p_late)
            for phi in peaks.phases
        ]
        _write_csv(out / "peaks.csv", ("phase", "early", "middle", "late"), rows)
        report.append("peaks.csv: integrated window counts vs analyzer phase")

    if cfg.wanted("rho1q.json"):
        rho = reconstruct_from_peaks(peaks)
        _write_json(
            out / "rho1q.json",
            {
                "basis": ["E", "L"],
                "entries": [[complex(v) for v in row] for row in rho.entries],
                "stokes": rho.stokes(),
            },
        )
        report.append("rho1q.json: reconstructed 2x2 density matrix (basis E, L)")

    if cfg.wanted("visibility.json"):
        offset, amplitude, phase = visibility_fit(peaks)
        _write_json(
            out / "visibility.json",
            {
                "visibility": visibility(peaks),
                "offset": offset,
                "amplitude": amplitude,
                "fringe_phase": phase,
                "n_phases": len(peaks.phases),
            },
        )
        report.append("visibility.json: middle-peak cosine fit (V = amplitude/offset)")

    _common_outputs(cfg, out, report)
    return 0


# ---------------------------------------------------------------------------
# pair


def cmd_pair(cfg: ScenarioConfig, out: Path, threads) -> int:
    source = cfg.build_pair_source()
    gbar = compute_gbar(
        source,
        grid_density=cfg.grid_density,
        quad_points_per_bin=cfg.quad_points_per_bin,
        threads=threads,
    )
    rho = reconstruct_pair(gbar)
    basis = ("EE", "EL", "LE", "LL")
    report = ["photon-pair time-bin tomography run", ""]

    if cfg.wanted("rho2q.json"):
        _write_json(
            out / "rho2q.json",
            {
                "basis": list(basis),
                "entries": [[complex(v) for v in row] for row in rho.entries],
                "trace_raw": gbar.trace(),
                "projection_distance": rho.projection_distance,
            },
        )
        report.append("rho2q.json: reconstructed 4x4 density matrix (basis EE, EL, LE, LL)")

    if cfg.wanted("stokes.csv"):
        table = stokes_pair(rho)
        labels = ("I", "X", "Y", "Z")
        rows = [(labels[j], *table[j]) for j in range(4)]
        _write_csv(out / "stokes.csv", ("pauli", *labels), rows)
        report.append("stokes.csv: two-qubit correlation table S[j,k]")

    setting = PhaseSetting(*cfg.histogram_phases)
    if cfg.wanted("peaks3x3.csv"):
        table = peak_table_from_entries(gbar, setting)
        names = ("early", "middle", "late")
        rows = [(names[k], *table[k]) for k in range(3)]
        _write_csv(out / "peaks3x3.csv", ("b_window", *names), rows)
        report.append(
            "peaks3x3.csv: coincidence mass per window pair at the phases "
            f"({_fmt(setting.phi_b)}, {_fmt(setting.phi_x)})"
        )

    if cfg.wanted("center_scan.csv"):
        scan = center_scan(gbar, cfg.phi_b_scan, cfg.phi_x_scan)
        header = ("phi_b\\phi_x", *(_fmt(p) for p in cfg.phi_x_scan))
        rows = [(_fmt(pb), *scan[a]) for a, pb in enumerate(cfg.phi_b_scan)]
        _write_csv(out / "center_scan.csv", header, rows)
        report.append("center_scan.csv: normalized center-window counts over the phase grid")

    if cfg.wanted("concurrence.json"):
        record = {
            "concurrence": concurrence(rho),
            "concurrence_approx": concurrence_approx(rho),
        }
        try:
            v, phase = center_visibility(gbar)
            record["center_visibility"] = v
            record["center_fringe_phase"] = phase
        except (DataError, NumericalError) as err:
            record["center_visibility"] = None
            record["center_visibility_note"] = str(err)
        _write_json(out / "concurrence.json", record)
        report.append("concurrence.json: entanglement measures and center-fringe visibility")

    need_projection = cfg.wanted("projection.csv")
    if cfg.wanted("histogram.csv") or need_projection:
        hist = build_histogram(
            source,
            setting,
            resolution=cfg.resolution,
            grid_density=cfg.grid_density,
            threads=threads,
        )
        if cfg.wanted("histogram.csv"):
            header = ("t", *(_fmt(t) for t in hist.axis))
            rows = [(_fmt(t), *hist.grid[i]) for i, t in enumerate(hist.axis)]
            _write_csv(out / "histogram.csv", header, rows)
            report.append(
                "histogram.csv: two-time coincidence intensity, rows = first "
                "detection time, columns = second"
            )
        if need_projection:
            diag = project_diagonal(hist)
            anti = project_antidiagonal(hist)
            rows = list(
                zip(diag.axis, diag.intensities, anti.axis, anti.intensities)
            )
            _write_csv(
                out / "projection.csv",
                ("sum_time", "diagonal", "difference_time", "antidiagonal"),
                rows,
            )
            report.append("projection.csv: histogram rebinned along both diagonals")

    _common_outputs(cfg, out, report)
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(cfg: ScenarioConfig, out: Path, threads) -> int:
    results = run_checks(seed=cfg.seed)
    for r in results:
        line = f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} (threshold {r.threshold:.3e})"
        print(line)
    _write_json(out / "verify.json", {"checks": [r.as_record() for r in results]})
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timebin",
        description="Time-bin tomography of single photons and photon pairs "
        "from a cascaded emitter.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("single", "single-photon scenario: phase scan, reconstruction, visibility"),
        ("pair", "photon-pair scenario: window integrals, reconstruction, histogram"),
        ("verify", "run the built-in consistency checks"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="scenario TOML file")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--threads", type=int, help="worker threads for grid scans")
        p.add_argument(
            "--resolution", type=float, help="histogram cell size (overrides config)"
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.command == "verify":
            cfg = ScenarioConfig()
        else:
            print("error: --config is required", file=sys.stderr)
            return 2
        if args.resolution is not None:
            if not args.resolution > 0:
                raise ConfigError(f"--resolution must be positive, got {args.resolution}")
            cfg = dataclasses.replace(cfg, resolution=args.resolution)
        threads = _resolve_threads(cfg, args.threads)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runner = {"single": cmd_single, "pair": cmd_pair, "verify": cmd_verify}[args.command]
    try:
        return runner(cfg, out, threads)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (DataError, DimensionError, NumericalError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
