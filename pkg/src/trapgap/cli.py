"""Command-line front end.

Exit codes: 0 ok, 1 a check failed, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import oracles
from .asymptotics import UpperBoundViolation, gap_convergence_study, verify_upper_bounds
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .eigen import EigenSolverError, solve_cell
from .floquet import BandError, band_structure, detect_gaps, first_gap_endpoints
from .forms import LidCondition, assemble, dump_matrix
from .geometry import CellGeometry, GeometryError
from .mesh import MeshError, build_cell_mesh, dump_mesh, refine
from .output import (bands_csv, bands_svg, brackets_csv, convergence_csv, convergence_json, convergence_svg,
                     gap_json, spectrum_csv)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# a trap-free unit cell, used by oracle-check when no config is given
DEFAULT_ORACLE_CONFIG = "[geometry]\ntrap = none\n"


def _eps_tag(eps: float) -> str:
    return f"{eps:g}".replace(".", "p")


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _out_dir(cfg: ExperimentConfig, args) -> Path:
    return Path(args.out_dir) if getattr(args, "out_dir", None) else cfg.output_dir


def cmd_cell_spectrum(args) -> int:
    cfg = load_config(args.config)
    geom = cfg.geometry.with_epsilon(args.epsilon)
    lid = LidCondition.parse(args.lid)
    mesh = build_cell_mesh(geom, cfg.h)
    if args.dump_mesh:
        with open(args.dump_mesh, "w") as fh:
            dump_mesh(mesh, fh)
    if args.dump_matrices:
        forms = assemble(mesh, lid)
        for name, mat in (("K", forms.K), ("J", forms.J), ("M", forms.M)):
            with open(f"{args.dump_matrices}{name}.txt", "w") as fh:
                dump_matrix(mat, fh)
    spectrum = solve_cell(geom, mesh, lid, args.k, cfg.tol, **cfg.solver)
    text = spectrum_csv(spectrum.eigenvalues, spectrum.residuals, str(lid), geom.epsilon)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_band(args) -> int:
    cfg = load_config(args.config)
    geom = cfg.geometry.with_epsilon(args.epsilon)
    L = cfg.L if args.L is None else args.L
    mesh = build_cell_mesh(geom, cfg.h)
    bands = band_structure(geom, mesh, cfg.phi_count, cfg.k_max, cfg.tol, jobs=args.jobs, **cfg.solver)
    report = detect_gaps(bands, L)
    alpha_eps, beta_eps = first_gap_endpoints(bands)
    out = _out_dir(cfg, args)
    tag = _eps_tag(geom.epsilon)
    _write(out / f"bands_eps{tag}.csv", bands_csv(bands))
    _write(out / f"brackets_eps{tag}.csv", brackets_csv(bands))
    _write(out / f"gaps_eps{tag}.json", gap_json(report, alpha_eps, beta_eps))
    if args.svg:
        _write(Path(args.svg), bands_svg(bands, L, report))
    print(f"epsilon={geom.epsilon:g} alpha_eps={alpha_eps:.10g} beta_eps={beta_eps:.10g}")
    for g in report.gaps:
        print(f"gap ({g.lo:.10g}, {g.hi:.10g}) above band {g.below_band}: {g.status}")
    if not report.gaps:
        print(f"no gap in [0, {L:g}]")
    return EXIT_OK


def cmd_gap_convergence(args) -> int:
    cfg = load_config(args.config)
    report = gap_convergence_study(cfg.geometry, cfg.epsilons, cfg.h, cfg.phi_count, cfg.k_max, cfg.tol,
                                   use_richardson=cfg.richardson, jobs=args.jobs, **cfg.solver)
    out = _out_dir(cfg, args)
    _write(out / "convergence.json", convergence_json(report))
    _write(out / "convergence.csv", convergence_csv(report))
    _write(out / "convergence.svg", convergence_svg(report))
    print(f"limits alpha={report.alpha:.10g} beta={report.beta:.10g}")
    for r, ea, eb in zip(report.records, report.err_alpha, report.err_beta):
        print(f"eps={r.epsilon:g} alpha_eps={r.alpha_eps:.10g} ({ea:.3e}) beta_eps={r.beta_eps:.10g} ({eb:.3e})")
    print(f"blow-up slope {report.blowup_slope:.4f}")
    if not report.checks_ok:
        print("bracket or trial-bound check FAILED")
        return EXIT_CHECK
    return EXIT_OK


@dataclass
class CheckLine:
    name: str
    passed: bool
    detail: str


def _ratio_check(h: float) -> list[CheckLine]:
    """Trap-free Neumann cell: absolute error at ``h`` and the O(h^2) ratio under one halving."""
    geom = CellGeometry(1.0, None)
    exact = oracles.separable_eigs(1.0, 0.0, 4, lids="neumann")
    mesh = build_cell_mesh(geom, h)
    errs = []
    for m in (mesh, refine(mesh)):
        vals = solve_cell(geom, m, LidCondition.neumann(), 4).eigenvalues
        errs.append(np.abs(vals - exact))
    ratios = errs[0][1:] / errs[1][1:]
    return [
        CheckLine("neumann-abs-error", bool(errs[0].max() <= 1e-2), f"max |err| = {errs[0].max():.3e} at h={h:g}"),
        CheckLine("neumann-h2-ratio", bool(np.all((ratios >= 3) & (ratios <= 5))),
                  "error ratios " + ", ".join(f"{r:.3f}" for r in ratios)),
    ]


def run_oracle_checks(cfg: ExperimentConfig) -> list[CheckLine]:
    h = cfg.h
    lines = _ratio_check(h)

    free = CellGeometry(1.0, None)
    mesh = build_cell_mesh(free, h)
    worst = 0.0
    for phi in (0.0, math.pi / 2, math.pi):
        vals = solve_cell(free, mesh, LidCondition.floquet(phi), 4).eigenvalues
        worst = max(worst, float(oracles.relative_errors(vals, oracles.separable_eigs(1.0, phi, 4)).max()))
    lines.append(CheckLine("separable-floquet", worst <= 1e-2, f"max relative error {worst:.3e}"))

    fd = oracles.fd_chain_eigs(1.0, math.pi / 3, 4)
    kp = oracles.kp_eigs(1.0, math.pi / 3, 4)
    rel = float(np.max(np.abs(fd - kp) / kp))
    lines.append(CheckLine("kp-vs-fd-chain", rel <= 1e-3, f"max relative difference {rel:.3e}"))

    si = oracles.straight_interface_check(1.0, 1.0, h, 4)
    lines.append(CheckLine("straight-interface", si.passed, f"max relative error {si.max_error:.3e}"))

    geom = cfg.geometry
    if geom.has_trap and geom.coupling() > 0:
        for eps in cfg.epsilons:
            g = geom.with_epsilon(eps)
            chk = verify_upper_bounds(g, build_cell_mesh(g, h), cfg.tol, strict=False, **cfg.solver)
            lines.append(CheckLine(f"trial-bounds eps={eps:g}", chk.passed,
                                   f"margins D {chk.margin_D:.3e}, N {chk.margin_N:.3e}"))
    return lines


def cmd_oracle_check(args) -> int:
    cfg = load_config(args.config) if args.config else parse_config(DEFAULT_ORACLE_CONFIG, "<default>")
    lines = run_oracle_checks(cfg)
    for line in lines:
        print(f"{'PASS' if line.passed else 'FAIL'}  {line.name:28s} {line.detail}")
    ok = all(line.passed for line in lines)
    print("all oracle checks passed" if ok else "oracle checks FAILED")
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trapgap", description="Band structure of a periodic waveguide with "
                                "delta-prime traps and convergence of its first gap.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker threads for epsilon and phi sweeps (default: CPU count)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("cell-spectrum", parents=[common], help="smallest eigenvalues of one cell problem")
    s.add_argument("config")
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--lid", default="neumann", help="neumann | dirichlet | floquet:PHI")
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.add_argument("--dump-mesh", help="write the mesh in the plain-text line format")
    s.add_argument("--dump-matrices", metavar="PREFIX", help="write K, J, M as 'row col re im' triplets")
    s.set_defaults(func=cmd_cell_spectrum)

    s = sub.add_parser("band", parents=[common], help="Floquet sweep, band CSV, gap JSON")
    s.add_argument("config")
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--L", type=float, default=None, help="spectral window (default: study.L)")
    s.add_argument("--svg", help="write a band plot")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_band)

    s = sub.add_parser("gap-convergence", parents=[common], help="epsilon sweep of the first gap")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_gap_convergence)

    s = sub.add_parser("oracle-check", parents=[common], help="compare against the closed-form references")
    s.add_argument("config", nargs="?")
    s.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be positive")
    try:
        return args.func(args)
    except (ConfigError, GeometryError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # bad command-line values (lid string, k out of range)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UpperBoundViolation as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (EigenSolverError, BandError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
