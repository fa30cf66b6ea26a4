"""Batch front-end: subcommands in, deterministic CSV/JSON artifacts out.

Every run writes its artifacts plus a manifest.json (input hashes, package
versions, wall time) into --out; failures leave an error.json behind.  Exit
codes: 0 success, 2 validation error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import re
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .effective import (CellConvergenceError, CellParams, cell_problem_solve,
                        effective_grid, write_effective_csv)
from .isospectral import (bs_reconstruct, make_pair, theorem2_check, write_bs_csv)
from .potentials import load_potential, potential_extrema
from .propagation import egorov_scaling
from .spectra import (FLOAT_FMT, assemble_hamiltonian, auto_cutoff,
                      eigen_spectrum, weyl_count_report, write_report_json,
                      write_spectrum_csv)
from .symbols import bump_profile, mechanical_symbol, product_symbol

_PI_FORM = re.compile(r"^([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?$")


def _scalar(text: str) -> float:
    """Parse '1.5', 'pi', '-pi/2', '2pi' and friends."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    m = _PI_FORM.match(text)
    if not m:
        raise ValueError(f"cannot parse number {text!r}")
    coeff = m.group(1)
    num = float(coeff) if coeff not in ("", "+", "-") else (-1.0 if coeff == "-" else 1.0)
    den = float(m.group(2)) if m.group(2) else 1.0
    return num * math.pi / den


def _float_list(text: str):
    return [_scalar(tok) for tok in text.split(",") if tok.strip()]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _resolve_cutoff(spec_text, pot, hbar, energy):
    if spec_text is None or spec_text == "auto":
        if energy is None:
            energy = potential_extrema(pot, res=1024).max_value + 2.0
        return auto_cutoff(pot, hbar, energy)
    return int(spec_text)


def _write_manifest(outdir: Path, argv, inputs, outputs, seed, t0) -> None:
    manifest = {
        "command": list(argv),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {p.name: _sha256(p) for p in outputs},
        "versions": {
            "torusspec": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "seed": seed,
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_spectrum(args, outdir: Path):
    pot = load_potential(args.potential)
    results = []
    for hb in _float_list(args.hbar):
        K = _resolve_cutoff(args.K, pot, hb, args.energy)
        results.append(eigen_spectrum(assemble_hamiltonian(pot, hb, K)))
    out = outdir / "spectrum.csv"
    write_spectrum_csv(out, results)
    return [out]


def _cmd_weyl_count(args, outdir: Path):
    pot = load_potential(args.potential)
    window = _float_list(args.window)
    if len(window) != 2:
        raise ValueError("--window needs two numbers a,b")
    hbars = _float_list(args.hbar)

    def rule(hb):
        return _resolve_cutoff(args.K, pot, hb, args.energy or window[1])

    report = weyl_count_report(pot, hbars, tuple(window), rule,
                               samples=args.samples, seed=args.seed)
    out = outdir / "weyl_count.json"
    write_report_json(out, report.to_dict())
    return [out]


def _cmd_effective(args, outdir: Path):
    pot = load_potential(args.potential)
    table = effective_grid(pot, args.pmax, args.dp, args.method,
                           grid=args.grid or 0)
    out_csv = outdir / "effective.csv"
    write_effective_csv(out_csv, table)
    out_json = outdir / "certificates.json"
    write_report_json(out_json, table.certificates.to_dict())
    return [out_csv, out_json]


def _cmd_cell_solve(args, outdir: Path):
    pot = load_potential(args.potential)
    H = mechanical_symbol(pot)
    if not args.p:
        raise ValueError("give at least one --p point")
    rows = []
    for ptxt in args.p:
        P = _float_list(ptxt)
        if len(P) != pot.dim:
            raise ValueError(f"P {ptxt!r} does not match dimension {pot.dim}")
        sol = cell_problem_solve(H, P, args.grid or 256)
        rows.append((P, sol.value, sol.corrector.residual))
    out = outdir / "cell.csv"
    head = ",".join(f"P{i+1}" for i in range(pot.dim)) if pot.dim > 1 else "P"
    lines = [f"{head},Hbar,method,residual"]
    for P, val, res in rows:
        pcols = ",".join(FLOAT_FMT % v for v in P)
        lines.append(f"{pcols},{FLOAT_FMT % val},cell-problem,{FLOAT_FMT % res}")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [out]


def _cmd_egorov(args, outdir: Path):
    pot = load_potential(args.potential)
    if pot.dim != 1:
        raise ValueError("the bundled observable is one-dimensional")
    from .potentials import cosine

    a = product_symbol(cosine((1,), 1.0), bump_profile(args.plateau, args.support))
    rule = None
    if args.K not in (None, "auto"):
        fixed = int(args.K)
        rule = lambda hb: fixed  # noqa: E731
    report = egorov_scaling(a, pot, args.t, _float_list(args.hbar),
                            cutoff_rule=rule, h=args.step)
    out = outdir / "egorov.json"
    write_report_json(out, report.to_dict())
    return [out]


def _parse_pair(args):
    if args.pair:
        m = re.match(r"^(.+?):([a-z]+)(?:=(.+))?$", args.pair)
        if not m:
            raise ValueError("--pair must look like file.json:translate=pi")
        path, relation, shift_text = m.group(1), m.group(2), m.group(3)
        pot = load_potential(path)
        shift = None
        if shift_text is not None:
            shift = _float_list(shift_text)
            if len(shift) == 1 and pot.dim > 1:
                shift = shift * pot.dim
        return make_pair(pot, relation, shift), [path]
    if not args.potential:
        raise ValueError("give --pair or --potential with --relation")
    pot = load_potential(args.potential)
    shift = _float_list(args.shift) if args.shift else None
    return make_pair(pot, args.relation, shift), [args.potential]


def _cmd_isospectral(args, outdir: Path):
    pair, inputs = _parse_pair(args)
    hbars = _float_list(args.hbar)
    K = int(args.K) if args.K not in (None, "auto") else \
        _resolve_cutoff("auto", pair.left, min(hbars), args.energy)
    pvals = list(np.arange(-args.pmax, args.pmax + args.dp / 2, args.dp)) \
        if pair.left.dim == 1 else \
        [(p1, p2) for p1 in (-1.0, 0.0, 1.0) for p2 in (-1.0, 0.0, 1.0)]
    report = theorem2_check(pair, hbars, K, pvals, method=args.method,
                            grid=args.grid or 64)
    out = outdir / "theorem2.json"
    write_report_json(out, report.to_dict())
    return [out], inputs


def _cmd_bs(args, outdir: Path):
    pot = load_potential(args.potential)
    hbars = _float_list(args.hbar)
    if len(hbars) != 1:
        raise ValueError("bs-reconstruct takes a single hbar")
    K = _resolve_cutoff(args.K, pot, hbars[0], args.energy)
    spec = eigen_spectrum(assemble_hamiltonian(pot, hbars[0], K))
    rec = bs_reconstruct(spec, pot, maslov=args.mu)
    out = outdir / "bs.csv"
    write_bs_csv(out, rec)
    return [out]


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(prog="torusspec")
    parser.add_argument("--config", help="JSON file of flag defaults; flags override")
    sub = parser.add_subparsers(dest="command", required=True)
    children = []

    def add_parser(*a, **kw):
        p = sub.add_parser(*a, **kw)
        children.append(p)
        return p

    def common(p, potential=True):
        if potential:
            p.add_argument("--potential", help="potential JSON file")
        p.add_argument("--K", default=None, help="frequency cutoff, or 'auto'")
        p.add_argument("--energy", type=_scalar, default=None,
                       help="energy scale for the automatic cutoff")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--jobs", type=int, default=1,
                       help="reserved for worker fan-out; runs are serial")

    p = add_parser("spectrum", help="eigenvalues to CSV")
    common(p)
    p.add_argument("--hbar", required=True, help="comma-separated list")

    p = add_parser("weyl-count", help="counting vs phase-space volume")
    common(p)
    p.add_argument("--hbar", required=True)
    p.add_argument("--window", required=True, help="energy window a,b")
    p.add_argument("--samples", type=int, default=100_000)

    p = add_parser("effective", help="effective Hamiltonian table")
    common(p)
    p.add_argument("--method", default="closed-form",
                   choices=["closed-form", "cell-problem"])
    p.add_argument("--pmax", type=_scalar, required=True)
    p.add_argument("--dp", type=_scalar, required=True)
    p.add_argument("--grid", type=int, default=0)

    p = add_parser("cell-solve", help="cell problem at explicit momenta")
    common(p)
    p.add_argument("--p", action="append", help="momentum point, comma separated")
    p.add_argument("--grid", type=int, default=256)

    p = add_parser("egorov", help="quantized-flow residual scaling")
    common(p)
    p.add_argument("--hbar", required=True)
    p.add_argument("--t", type=_scalar, default=1.0)
    p.add_argument("--plateau", type=_scalar, default=0.9)
    p.add_argument("--support", type=_scalar, default=1.2)
    p.add_argument("--step", type=_scalar, default=1e-2)

    p = add_parser("isospectral-check", help="spectra and Hbar across a pair")
    common(p)
    p.add_argument("--pair", help="file.json:relation[=shift]")
    p.add_argument("--relation", choices=["translate", "reflect", "compose"])
    p.add_argument("--shift")
    p.add_argument("--hbar", required=True)
    p.add_argument("--pmax", type=_scalar, default=3.0)
    p.add_argument("--dp", type=_scalar, default=0.5)
    p.add_argument("--method", default="closed-form",
                   choices=["closed-form", "cell-problem"])
    p.add_argument("--grid", type=int, default=64)

    p = add_parser("bs-reconstruct", help="effective Hamiltonian from doublets")
    common(p)
    p.add_argument("--hbar", required=True)
    p.add_argument("--mu", type=int, default=0)

    return parser, children


_DISPATCH = {
    "spectrum": _cmd_spectrum,
    "weyl-count": _cmd_weyl_count,
    "effective": _cmd_effective,
    "cell-solve": _cmd_cell_solve,
    "egorov": _cmd_egorov,
    "isospectral-check": _cmd_isospectral,
    "bs-reconstruct": _cmd_bs,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, children = _build_parser()

    # config file values become defaults; explicit flags still win.  Each
    # subcommand parses into a fresh namespace, so the defaults have to be
    # rewritten on every child parser, not just the top one.
    probe, _ = parser.parse_known_args(argv) if argv and argv[0] not in ("-h", "--help") \
        else (None, None)
    if probe is not None and getattr(probe, "config", None):
        with open(probe.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        parser.set_defaults(**loaded)
        for child in children:
            child.set_defaults(**loaded)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    try:
        produced = _DISPATCH[args.command](args, outdir)
        if isinstance(produced, tuple):
            produced, inputs = produced
        else:
            inputs = [args.potential] if getattr(args, "potential", None) else []
        _write_manifest(outdir, argv, inputs, produced, args.seed, t0)
        return 0
    except (CellConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _write_error(outdir, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        _write_error(outdir, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _write_error(outdir: Path, exc: Exception) -> None:
    try:
        with open(outdir / "error.json", "w", encoding="utf-8") as fh:
            json.dump({"error": type(exc).__name__, "message": str(exc)}, fh, indent=2)
            fh.write("\n")
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
