"""Command-line driver: scan, eigen, verify, qmomentum, sheets.

Output is deterministic for a fixed configuration: grids are fixed by the
flags, every pipeline is seedless, and JSON field order is fixed by
construction.  CSV carries exactly the documented columns (see
``docs/output-schema.md``); JSON mirrors the CSV payload and adds a metadata
block (library version, canonical resolution, potential hash) plus a
``diagnostics`` array that is never silently dropped.  Exit codes: 0 success,
2 configuration problem, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError
from .monodromy import J3, monodromy_grid
from .multipliers import (
    identity_suite,
    multipliers_from_traces,
    unimodular_count,
)
from .periodic_eigen import (
    asymptotic_residuals,
    d_pm_grid,
    eigenvalues_in_window,
    recover_traces,
    table_csv_rows,
)
from .potential import Potential, is_rank_one, moments
from .quasimomentum import (
    herglotz_asymptotic,
    profile_csv_rows,
    q0_integral,
    q_profile,
)
from .spectrum import scan, scan_csv_rows, scan_json_doc, sheet_count
from .zs_oracle import reduction_check, scalar_reduction, zs_q0_integral

DEFAULT_NU = (12.0, 16.0, 20.0, 26.0, 34.0)


# ----------------------------------------------------------------------------
# configuration ingestion
# ----------------------------------------------------------------------------


def _as_complex(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x, 0.0)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    raise ConfigError(f"expected a number or [re, im] pair, got {x!r}")


def _as_pair(x) -> tuple[complex, complex]:
    if not isinstance(x, (list, tuple)) or len(x) != 2:
        raise ConfigError(f"expected a two-component value, got {x!r}")
    return _as_complex(x[0]), _as_complex(x[1])


def potential_from_doc(doc: dict, resolution: int | None = None) -> Potential:
    """Build a potential from its JSON description.

    ``kind`` selects the constructor: ``zero``, ``constant`` (``value``),
    ``fourier`` (``modes`` keyed by integer frequency index), ``piecewise``
    (``breakpoints`` + ``values``), or ``samples`` (``values`` on a uniform
    grid).  Complex scalars are numbers or ``[re, im]`` pairs.  An explicit
    ``resolution`` argument overrides the document's own.
    """
    if not isinstance(doc, dict):
        raise ConfigError("potential description must be a JSON object")
    kind = doc.get("kind")
    res = resolution if resolution is not None else doc.get("resolution")
    kw = {} if res is None else {"resolution": int(res)}
    if kind == "zero":
        return Potential.zero(**kw)
    if kind == "constant":
        return Potential.from_constant(_as_pair(doc.get("value")), **kw)
    if kind == "fourier":
        modes = doc.get("modes")
        if not isinstance(modes, dict):
            raise ConfigError("fourier potential needs a 'modes' object")
        try:
            clean = {int(k): _as_pair(v) for k, v in modes.items()}
        except ValueError as exc:
            raise ConfigError(f"mode keys must be integers: {exc}") from exc
        return Potential.from_fourier(clean, **kw)
    if kind == "piecewise":
        values = [_as_pair(v) for v in doc.get("values", [])]
        return Potential.from_piecewise(doc.get("breakpoints", []), values, **kw)
    if kind == "samples":
        values = [_as_pair(v) for v in doc.get("values", [])]
        return Potential.from_samples(values)
    raise ConfigError(f"unknown potential kind {kind!r}")


def load_potential(spec: str, resolution: int | None = None) -> Potential:
    """Accept inline JSON (leading ``{``) or a path to a JSON file."""
    text = spec
    if not spec.lstrip().startswith("{"):
        try:
            with open(spec, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read potential file {spec!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed potential JSON: {exc}") from exc
    return potential_from_doc(doc, resolution)


def potential_hash(p: Potential) -> str:
    grid = p.canonical()
    payload = np.ascontiguousarray(grid.values, dtype=np.complex128).tobytes()
    return hashlib.sha256(payload).hexdigest()[:16]


def _metadata(p: Potential) -> dict:
    return {
        "version": __version__,
        "potential_kind": p.kind,
        "resolution": p.resolution,
        "potential_hash": potential_hash(p),
    }


# ----------------------------------------------------------------------------
# output plumbing
# ----------------------------------------------------------------------------


def _check_finite(node, path="$"):
    if isinstance(node, dict):
        for k, v in node.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(node, (list, tuple)):
        for i, v in enumerate(node):
            _check_finite(v, f"{path}[{i}]")
    elif isinstance(node, float) and not math.isfinite(node):
        raise NumericalError(f"non-finite value at {path}")


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _json_text(doc: dict) -> str:
    _check_finite(doc)
    return json.dumps(doc, indent=2) + "\n"


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _print_diagnostics(items) -> None:
    for item in items:
        print(f"diagnostic: {item}", file=sys.stderr)


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_scan(args) -> int:
    p = load_potential(args.potential, args.resolution)
    lo, hi = args.interval
    sc = scan(p, lo, hi, step=args.step)
    diagnostics = list(sc.warnings) + list(sc.notes)
    if sc.conflicts:
        diagnostics.append(f"{sc.conflicts} classification conflict(s)")
    if args.format == "csv":
        _write(_csv_text(scan_csv_rows(sc)), args.out)
        _print_diagnostics(diagnostics)
        return 0
    doc = {
        "command": "scan",
        "metadata": _metadata(p),
        **scan_json_doc(sc),
        "samples": {
            "lam": [float(x) for x in sc.lam],
            "disc": [float(x) for x in sc.disc],
            "phi": [float(x) for x in sc.phi],
            "multiplicity": [int(x) for x in sc.multiplicity],
        },
        "diagnostics": diagnostics,
    }
    _write(_json_text(doc), args.out)
    return 0


def cmd_eigen(args) -> int:
    p = load_potential(args.potential, args.resolution)
    n_min, n_max = args.window
    table = eigenvalues_in_window(p, n_min, n_max)
    res = asymptotic_residuals(table, p)
    devs = res["deviations"]

    def dev_of(e):
        arr = devs.get(e.n)
        return float(arr[e.j - 1]) if arr is not None else None

    diagnostics = list(table.failures) + list(table.notes)
    if args.format == "csv":
        rows = []
        base = table_csv_rows(table)
        rows.append(next(base) + ["dev_first_order"])
        for e, row in zip(table.entries, base):
            d = dev_of(e)
            rows.append(row + ["" if d is None else f"{d:.12g}"])
        _write(_csv_text(rows), args.out)
        _print_diagnostics(diagnostics)
        return 0
    doc = {
        "command": "eigen",
        "metadata": _metadata(p),
        "window": [n_min, n_max],
        "entries": [
            {
                "n": e.n,
                "j": e.j,
                "z": [e.z.real, e.z.imag],
                "parity": e.parity,
                "residual": e.residual,
                "dev_first_order": dev_of(e),
            }
            for e in table.entries
        ],
        "asymptotics": {
            "deviations": {str(n): [float(x) for x in arr] for n, arr in devs.items()},
            "partial_sums": [float(x) for x in res["partial_sums"]],
            "summability_exponent": res["delta"],
            "decay_exponent": res["decay_exponent"],
        },
        "diagnostics": diagnostics,
    }
    _write(_json_text(doc), args.out)
    return 0


def _verify_checks(p: Potential, corrupt: bool) -> list[dict]:
    lam_re = np.linspace(-12.0, 12.0, 241)
    lam_cx = np.array([1.3 + 0.8j, -2.2 + 1.7j, 0.4 - 1.1j, 3.7 + 2.5j])
    lam = np.concatenate([lam_re.astype(np.complex128), lam_cx])
    g = monodromy_grid(p, lam, want_psi=True)
    gc = monodromy_grid(p, np.conj(lam), want_psi=True)
    psi = g["psi"]
    psi_c = gc["psi"]
    if corrupt:
        psi = psi.copy()
        psi[..., 0, 0] *= 1.0 + 2e-6
        from .algebra import adj3, det3

        t = np.trace(psi, axis1=-2, axis2=-1)
        s = np.trace(adj3(psi), axis1=-2, axis2=-1) / det3(psi)
        det = det3(psi)
    else:
        t, s, det = g["trace"], g["trace_conj"], g["det"]

    grow = np.exp(np.abs(lam.imag))
    checks = []

    resid = np.abs(det - np.exp(1j * lam)) / grow
    checks.append(("determinant", float(resid.max()), 1e-10))

    w = np.conj(np.swapaxes(psi_c, -1, -2)) @ J3 @ psi - J3
    wres = np.abs(w).max(axis=(-2, -1)) / grow**2
    checks.append(("wronskian", float(wres.max()), 1e-10))

    taus = multipliers_from_traces(t, s, lam)
    ep = np.exp(1j * lam)
    scale = np.maximum(1.0, np.abs(t))
    e_sum = np.abs(taus.sum(axis=-1) - t) / scale
    pairs = (
        taus[:, 0] * taus[:, 1] + taus[:, 0] * taus[:, 2] + taus[:, 1] * taus[:, 2]
    )
    e_pair = np.abs(pairs - ep * s) / np.maximum(1.0, np.abs(ep * s))
    e_prod = np.abs(taus.prod(axis=-1) - ep) / np.abs(ep)
    checks.append(
        ("multiplier-symmetric-functions", float(max(e_sum.max(), e_pair.max(), e_prod.max())), 1e-9)
    )

    ids = identity_suite(t, s, lam)
    checks.append(
        ("derived-identities", float(max(np.max(ids["dd1"]), np.max(ids["dd2"]))), 1e-8)
    )

    dp = d_pm_grid(p, lam, +1)
    dm = d_pm_grid(p, lam, -1)
    t_r, s_r = recover_traces(dp, dm, lam)
    e_rec = np.maximum(np.abs(t_r - t), np.abs(s_r - s)) / grow
    checks.append(("trace-recovery", float(e_rec.max()), 1e-10))

    counts = unimodular_count(multipliers_from_traces(g["trace"], g["trace_conj"], lam)[: len(lam_re)])
    ok_counts = np.all((counts == 1) | (counts == 3))
    checks.append(("unimodular-pattern", 0.0 if ok_counts else 1.0, 0.5))

    out = [
        {"name": name, "worst": worst, "tol": tol, "status": "PASS" if worst <= tol else "FAIL"}
        for name, worst, tol in checks
    ]
    if is_rank_one(p):
        rep = reduction_check(p, lam_re)
        worst = float(
            max(
                rep.err_multiplier.max(),
                rep.err_average.max(),
                rep.err_disc.max(),
                rep.err_dplus.max(),
                rep.err_dminus.max(),
            )
        )
        out.append(
            {
                "name": "rank-one-reduction",
                "worst": worst,
                "tol": rep.tol,
                "status": "PASS" if rep.ok else "FAIL",
            }
        )
    else:
        out.append({"name": "rank-one-reduction", "worst": None, "tol": None, "status": "SKIP"})
    return out


def cmd_verify(args) -> int:
    p = load_potential(args.potential, args.resolution)
    rows = _verify_checks(p, corrupt=args.corrupt)
    if args.format == "json":
        ok = all(r["status"] != "FAIL" for r in rows)
        doc = {
            "command": "verify",
            "metadata": _metadata(p),
            "checks": rows,
            "ok": ok,
        }
        _write(_json_text(doc), args.out)
    else:
        lines = []
        for r in rows:
            if r["status"] == "SKIP":
                lines.append(f"SKIP {r['name']}")
            else:
                lines.append(
                    f"{r['status']} {r['name']}  worst={r['worst']:.3g}  tol={r['tol']:.3g}"
                )
        ok = all(r["status"] != "FAIL" for r in rows)
        lines.append("all checks passed" if ok else "FAILURES present")
        _write("\n".join(lines) + "\n", args.out)
    return 0 if all(r["status"] != "FAIL" for r in rows) else 3


def cmd_qmomentum(args) -> int:
    p = load_potential(args.potential, args.resolution)
    lo, hi = args.interval
    sc = scan(p, lo, hi, step=args.step)
    prof = q_profile(p, sc)
    mass = q0_integral(prof)
    norm_sq = moments(p).b3
    fit = None
    fit_error = None
    try:
        fit = herglotz_asymptotic(p, list(args.nu))
    except NumericalError as exc:
        fit_error = str(exc)
    report = {
        "integral": mass.value,
        "tail_estimate": mass.tail_estimate,
        "per_gap": mass.per_gap,
        "herglotz_fit": None if fit is None else fit.q0,
        "fit_residual_rms": None if fit is None else fit.residual_rms,
        "fit_error": fit_error,
        "norm_sq": norm_sq,
        "ratio_to_norm_sq": (mass.value / norm_sq) if norm_sq > 0 else None,
    }
    if is_rank_one(p) and norm_sq > 0:
        u, _ = scalar_reduction(p)
        qzs = zs_q0_integral(u, lo, hi)
        report["zs_reference"] = {
            "gap_mass_2x2": qzs,
            "two_thirds_2x2": 2.0 * qzs / 3.0,
            "ratio": (mass.value / (2.0 * qzs / 3.0)) if qzs > 0 else None,
        }
    diagnostics = list(sc.warnings) + list(sc.notes) + list(mass.notes)
    if args.format == "csv":
        _write(_csv_text(profile_csv_rows(prof)), args.out)
        _print_diagnostics(diagnostics)
        for k, v in report.items():
            print(f"report: {k} = {v}", file=sys.stderr)
        return 0
    doc = {
        "command": "qmomentum",
        "metadata": _metadata(p),
        "interval": [lo, hi],
        "grid_step": args.step,
        "profile": {
            "lam": [float(x) for x in prof.grid],
            "q1": [float(x) for x in prof.q_branches[:, 0]],
            "q2": [float(x) for x in prof.q_branches[:, 1]],
            "q3": [float(x) for x in prof.q_branches[:, 2]],
            "q_avg": [float(x) for x in prof.q_avg],
            "gap_attribution": [int(x) for x in prof.gap_attribution],
        },
        "report": report,
        "diagnostics": diagnostics,
    }
    _write(_json_text(doc), args.out)
    return 0


def cmd_sheets(args) -> int:
    p = load_potential(args.potential, args.resolution)
    lo, hi = args.interval
    sc = scan(p, lo, hi, step=args.step)
    verdict = sheet_count(p, sc)
    m = moments(p)
    doc = {
        "command": "sheets",
        "metadata": _metadata(p),
        "interval": [lo, hi],
        "sheets": verdict.sheets,
        "evidence": verdict.evidence,
        "moments": {"b1": m.b1, "b2": m.b2, "b3": m.b3},
        "phi_sup": float(np.max(np.abs(sc.phi))),
        "gaps": [[a, b] for a, b in sc.gaps],
    }
    if args.format == "csv":
        rows = [["key", "value"]]
        rows.append(["sheets", str(verdict.sheets)])
        rows.append(["b1", f"{m.b1:.12g}"])
        rows.append(["b3", f"{m.b3:.12g}"])
        rows.append(["phi_sup", f"{doc['phi_sup']:.12g}"])
        rows.append(["n_gaps", str(len(sc.gaps))])
        _write(_csv_text(rows), args.out)
        return 0
    _write(_json_text(doc), args.out)
    return 0


# ----------------------------------------------------------------------------
# argument parsing and dispatch
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="manakov-spectra",
        description="Floquet spectral pipelines for the periodic two-component transfer problem",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--potential", required=True, help="inline JSON or path to a JSON file")
        sp.add_argument("--resolution", type=int, default=None, help="override canonical step count")
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="json")

    sp = sub.add_parser("scan", help="band/gap scan of a real interval")
    common(sp)
    sp.add_argument("--interval", type=float, nargs=2, default=(-10.0, 10.0), metavar=("LO", "HI"))
    sp.add_argument("--step", type=float, default=0.01)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("eigen", help="period-2 eigenvalue clusters in an index window")
    common(sp)
    sp.add_argument("--window", type=int, nargs=2, default=(5, 10), metavar=("NMIN", "NMAX"))
    sp.set_defaults(func=cmd_eigen)

    sp = sub.add_parser("verify", help="identity suite with a pass/fail matrix")
    common(sp)
    sp.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("qmomentum", help="gap magnitude profile and its integral")
    common(sp)
    sp.add_argument("--interval", type=float, nargs=2, default=(-10.0, 10.0), metavar=("LO", "HI"))
    sp.add_argument("--step", type=float, default=0.01)
    sp.add_argument("--nu", type=float, nargs="+", default=list(DEFAULT_NU))
    sp.set_defaults(func=cmd_qmomentum)

    sp = sub.add_parser("sheets", help="covering-sheet verdict with evidence")
    common(sp)
    sp.add_argument("--interval", type=float, nargs=2, default=(-10.0, 10.0), metavar=("LO", "HI"))
    sp.add_argument("--step", type=float, default=0.01)
    sp.set_defaults(func=cmd_sheets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
