"""Band/gap structure of the real spectral line and the sheet-count verdict.

The real line splits into closed *bands* (three unimodular multipliers,
multiplicity 3) and open *gaps* (exactly one unimodular multiplier,
multiplicity 1); multiplicity 2 never occurs.  The classifier keys on the
sign of the modified discriminant: negative inside gaps, nonnegative on
bands.  A scan refines every sign change by bisection and reports the gap
list; the sheet verdict combines the flatness of the trace asymmetry with
the rank test on the potential's moment matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClassificationConflictWarning,
    ConfigError,
    SheetConflictError,
)
from .monodromy import monodromy_grid
from .multipliers import (
    UNIMODULAR_TOL,
    derived_grid,
    multipliers_from_traces,
    unimodular_count,
)
from .potential import Potential, is_rank_one, moments

__all__ = [
    "Classification",
    "SpectralScan",
    "SheetVerdict",
    "classify",
    "scan",
    "sheet_count",
    "scan_csv_rows",
    "scan_json_doc",
]

DISC_REL_TOL = 1e-12
ENDPOINT_ACCURACY = 1e-9
ZERO_POTENTIAL_TOL = 1e-14
MAX_SCAN_STEP = 0.05
_NEIGHBOR_H = 1e-4


def _line_data(p: Potential, lam: np.ndarray) -> dict:
    """Discriminant, trace asymmetry, traces and unimodular counts on real lam."""
    g = monodromy_grid(p, lam)
    d = derived_grid(g["trace"], g["trace_conj"], g["lam"])
    taus = multipliers_from_traces(g["trace"], g["trace_conj"], g["lam"])
    return {
        "disc": np.real(d["disc"]),
        "phi": np.real(d["phi"]),
        "trace": g["trace"],
        "counts": unimodular_count(taus),
        "taus": taus,
    }


def _disc_only(p: Potential, lam: np.ndarray) -> np.ndarray:
    g = monodromy_grid(p, lam)
    return np.real(derived_grid(g["trace"], g["trace_conj"], g["lam"])["disc"])


def _local_tol(disc: np.ndarray) -> np.ndarray:
    """Boundary band around zero, relative to the discriminant's local scale.

    The discriminant vanishes quadratically at band edges, so an absolute
    cutoff would swallow entire neighborhoods; a windowed maximum keeps the
    band proportional to nearby magnitudes instead.
    """
    a = np.abs(disc)
    s = a.copy()
    for k in (1, 2):
        s[k:] = np.maximum(s[k:], a[:-k])
        s[:-k] = np.maximum(s[:-k], a[k:])
    return DISC_REL_TOL * s


@dataclass
class Classification:
    lam: float
    disc: float
    multiplicity: int
    boundary: bool
    unimodular: int
    conflict: bool


def classify(p: Potential, lam: float) -> Classification:
    """Multiplicity (1 or 3) of one real spectral parameter.

    Points inside the relative boundary band around a discriminant zero are
    resolved by the signs at two flanking offsets; an unresolved boundary
    point counts as multiplicity 3 (band boundaries belong to the closed
    band set).  The unimodular-multiplier count provides the cross-check.
    """
    lam = float(lam)
    if moments(p).b3 < ZERO_POTENTIAL_TOL:
        return Classification(lam, 0.0, 3, True, 3, False)
    grid = np.array([lam - _NEIGHBOR_H, lam, lam + _NEIGHBOR_H])
    data = _line_data(p, grid)
    disc = data["disc"]
    tol = DISC_REL_TOL * max(float(np.max(np.abs(disc))), 1e-300)
    d = float(disc[1])
    boundary = abs(d) <= tol
    if not boundary:
        mult = 3 if d > 0.0 else 1
    elif disc[0] < -tol and disc[2] < -tol:
        mult = 1
    else:
        mult = 3
    count = int(data["counts"][1])
    conflict = (not boundary) and count != mult
    if conflict:
        warnings.warn(
            f"classification-conflict at lam={lam:.9g}: discriminant sign gives "
            f"multiplicity {mult} but {count} unimodular multipliers",
            ClassificationConflictWarning,
            stacklevel=2,
        )
    return Classification(lam, d, mult, boundary, count, conflict)


@dataclass
class SpectralScan:
    interval: tuple[float, float]
    grid_step: float
    lam: np.ndarray
    disc: np.ndarray
    phi: np.ndarray
    multiplicity: np.ndarray
    unimodular: np.ndarray
    trace: np.ndarray
    gaps: list[tuple[float, float]]
    kissing_points: list[float] = field(default_factory=list)
    conflicts: int = 0
    warnings: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _resolve_boundary(cls: np.ndarray) -> np.ndarray:
    """Assign boundary points (label 0) to the nearer strict class; ties to 3."""
    n = cls.size
    nz = np.flatnonzero(cls)
    if nz.size == 0:
        return np.full(n, 3, dtype=np.int64)
    pos = np.arange(n)
    right_idx = np.searchsorted(nz, pos, side="left")
    left_idx = np.clip(right_idx - 1, 0, nz.size - 1)
    right_idx = np.clip(right_idx, 0, nz.size - 1)
    dl = np.abs(pos - nz[left_idx])
    dr = np.abs(nz[right_idx] - pos)
    out = np.where(dl < dr, cls[nz[left_idx]], cls[nz[right_idx]])
    tie = dl == dr
    out[tie] = np.maximum(cls[nz[left_idx]][tie], cls[nz[right_idx]][tie])
    out[nz] = cls[nz]
    return out


def _refine_sign_changes(
    p: Potential, lo: np.ndarray, hi: np.ndarray, disc_lo: np.ndarray
) -> np.ndarray:
    """Bisect every bracketed sign change of the discriminant in parallel."""
    lo = np.asarray(lo, dtype=np.float64).copy()
    hi = np.asarray(hi, dtype=np.float64).copy()
    sign_lo = np.sign(disc_lo)
    while float(np.max(hi - lo)) > ENDPOINT_ACCURACY:
        mid = 0.5 * (lo + hi)
        dm = _disc_only(p, mid)
        go_right = np.sign(dm) == sign_lo
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    return 0.5 * (lo + hi)


def scan(p: Potential, a: float, b: float, step: float = 0.01) -> SpectralScan:
    """Classify [a, b], refine gap endpoints, and collect diagnostics.

    Endpoints of every gap are bisected to within ``ENDPOINT_ACCURACY``.
    Boundary-band points are merged into the neighboring classes; a touching
    zero of the discriminant flanked by bands on both sides is reported as a
    kissing point rather than a gap.
    """
    a, b, step = float(a), float(b), float(step)
    if not b > a:
        raise ConfigError(f"empty scan interval [{a}, {b}]")
    if not 0.0 < step <= MAX_SCAN_STEP:
        raise ConfigError(f"scan step must lie in (0, {MAX_SCAN_STEP}], got {step}")

    if moments(p).b3 < ZERO_POTENTIAL_TOL:
        n = max(2, int(np.ceil((b - a) / step)) + 1)
        lam = np.linspace(a, b, n)
        zeros = np.zeros(n)
        return SpectralScan(
            interval=(a, b),
            grid_step=(b - a) / (n - 1),
            lam=lam,
            disc=zeros,
            phi=zeros.copy(),
            multiplicity=np.full(n, 3, dtype=np.int64),
            unimodular=np.full(n, 3, dtype=np.int64),
            trace=np.exp(-1j * lam) + 2.0 * np.exp(1j * lam),
            gaps=[],
            notes=["zero potential: the whole line is the multiplicity-3 band"],
        )

    n = max(2, int(np.ceil((b - a) / step)) + 1)
    eff_step = (b - a) / (n - 1)
    lam = np.linspace(a, b, n)
    data = _line_data(p, lam)
    disc = data["disc"]
    tol = _local_tol(disc)
    cls = np.where(disc > tol, 3, np.where(disc < -tol, 1, 0)).astype(np.int64)
    resolved = _resolve_boundary(cls)

    notes: list[str] = []
    warn_list: list[str] = []
    if not np.any(cls):
        notes.append("discriminant at boundary scale on the whole grid; treated as band")

    counts = data["counts"]
    strict = cls != 0
    conflict_mask = strict & (counts != cls)
    conflicts = int(np.count_nonzero(conflict_mask))
    if conflicts:
        where = lam[conflict_mask][:5]
        msg = (
            f"classification-conflict at {conflicts} grid points "
            f"(first few: {np.array2string(where, precision=6)})"
        )
        warn_list.append(msg)
        warnings.warn(msg, ClassificationConflictWarning, stacklevel=2)

    # --- bracketed sign changes between consecutive strict points -----------
    snz = np.flatnonzero(strict)
    open_br: list[tuple[float, float, float]] = []  # band -> gap
    close_br: list[tuple[float, float, float]] = []  # gap -> band
    order: list[tuple[int, int]] = []  # (kind, index into its list), kind 0=open
    for k in range(snz.size - 1):
        i, j = int(snz[k]), int(snz[k + 1])
        if cls[i] == cls[j]:
            continue
        if cls[i] == 3:
            order.append((0, len(open_br)))
            open_br.append((lam[i], lam[j], disc[i]))
        else:
            order.append((1, len(close_br)))
            close_br.append((lam[i], lam[j], disc[i]))

    refined_open = (
        _refine_sign_changes(
            p,
            np.array([x[0] for x in open_br]),
            np.array([x[1] for x in open_br]),
            np.array([x[2] for x in open_br]),
        )
        if open_br
        else np.empty(0)
    )
    refined_close = (
        _refine_sign_changes(
            p,
            np.array([x[0] for x in close_br]),
            np.array([x[1] for x in close_br]),
            np.array([x[2] for x in close_br]),
        )
        if close_br
        else np.empty(0)
    )

    gaps: list[tuple[float, float]] = []
    pending_left: float | None = None
    if snz.size and cls[snz[0]] == 1:
        pending_left = a
        notes.append("gap continues past the left end of the scan interval")
    for kind, idx in order:
        if kind == 0:
            pending_left = float(refined_open[idx])
        else:
            left = pending_left if pending_left is not None else a
            gaps.append((left, float(refined_close[idx])))
            pending_left = None
    if pending_left is not None:
        gaps.append((pending_left, b))
        notes.append("gap continues past the right end of the scan interval")

    # --- kissing points: boundary runs flanked by bands on both sides -------
    kissing: list[float] = []
    run_start = None
    for i in range(n):
        if cls[i] == 0:
            if run_start is None:
                run_start = i
            continue
        if run_start is not None:
            _maybe_kiss(lam, disc, cls, run_start, i - 1, kissing)
            run_start = None
    # a trailing boundary run has no right flank and cannot qualify

    widths = [hi - lo for lo, hi in gaps]
    if widths and min(widths) < 4.0 * eff_step:
        suggested = max(min(widths) / 8.0, ENDPOINT_ACCURACY)
        msg = (
            f"resolution-warning: narrowest gap ({min(widths):.3e}) is under four "
            f"grid steps; rerun with step <= {suggested:.3e}"
        )
        warn_list.append(msg)
        warnings.warn(msg, UserWarning, stacklevel=2)

    return SpectralScan(
        interval=(a, b),
        grid_step=eff_step,
        lam=lam,
        disc=disc,
        phi=data["phi"],
        multiplicity=resolved,
        unimodular=counts,
        trace=data["trace"],
        gaps=gaps,
        kissing_points=kissing,
        conflicts=conflicts,
        warnings=warn_list,
        notes=notes,
    )


def _maybe_kiss(lam, disc, cls, i0, i1, out: list[float]) -> None:
    """Record a kissing point for the boundary run [i0, i1] if both flanks are bands."""
    left_ok = i0 > 0 and cls[i0 - 1] == 3
    right_ok = cls[i1 + 1] == 3
    if not (left_ok and right_ok):
        return
    seg = slice(max(i0 - 1, 0), i1 + 2)
    k = int(np.argmin(disc[seg])) + seg.start
    if 0 < k < lam.size - 1:
        dm, d0, dp = disc[k - 1], disc[k], disc[k + 1]
        denom = dp - 2.0 * d0 + dm
        if denom > 0:
            h = lam[1] - lam[0]
            out.append(float(lam[k] - 0.5 * h * (dp - dm) / denom))
            return
    out.append(float(lam[k]))


@dataclass
class SheetVerdict:
    sheets: int
    evidence: dict


def sheet_count(p: Potential, sc: SpectralScan) -> SheetVerdict:
    """Riemann-surface sheet count (2 or 3) with recorded evidence.

    Two-sheetedness requires both a flat trace asymmetry over the scanned
    grid and a rank-one moment matrix; either signal alone is contradictory
    and raises.  Per-gap reality of the middle-branch Lyapunov value is
    logged as evidence but does not enter the verdict.
    """
    sup_phi = float(np.max(np.abs(sc.phi))) if sc.phi.size else 0.0
    sup_t = float(np.max(np.abs(sc.trace))) if sc.trace.size else 0.0
    threshold = 1e-8 * (1.0 + sup_t)
    phi_flat = sup_phi <= threshold
    mom = moments(p)
    rank_one = is_rank_one(p)

    if phi_flat and mom.b1 > 1e-6 * max(1.0, mom.b3):
        raise SheetConflictError(
            f"flat trace asymmetry (sup={sup_phi:.3e}) but moment defect "
            f"b1={mom.b1:.3e} is far from rank one"
        )
    if rank_one and not phi_flat:
        raise SheetConflictError(
            f"rank-one moments (b1={mom.b1:.3e}) but trace asymmetry "
            f"sup={sup_phi:.3e} exceeds {threshold:.3e}"
        )

    gap_mid_real: list[bool] = []
    if sc.gaps:
        mids = np.array([0.5 * (lo + hi) for lo, hi in sc.gaps])
        g = monodromy_grid(p, mids + 1e-6j)
        taus = multipliers_from_traces(g["trace"], g["trace_conj"], g["lam"])
        for row in taus:
            mags = np.sort(np.abs(row))
            # middle branch unimodular <=> its Lyapunov average stays real on the gap
            gap_mid_real.append(bool(abs(mags[1] - 1.0) <= 10.0 * UNIMODULAR_TOL))

    sheets = 2 if (phi_flat and rank_one) else 3
    return SheetVerdict(
        sheets=sheets,
        evidence={
            "sup_phi": sup_phi,
            "phi_threshold": threshold,
            "b1": mom.b1,
            "is_rank_one": rank_one,
            "gap_middle_branch_real": gap_mid_real,
        },
    )


# ----------------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------------


def scan_csv_rows(sc: SpectralScan):
    """Yield CSV rows (header first): lam, disc, phi, multiplicity."""
    yield ["lam", "disc", "phi", "multiplicity"]
    for x, d, f, m in zip(sc.lam, sc.disc, sc.phi, sc.multiplicity):
        yield [f"{x:.12g}", f"{d:.12g}", f"{f:.12g}", str(int(m))]


def scan_json_doc(sc: SpectralScan) -> dict:
    return {
        "interval": [sc.interval[0], sc.interval[1]],
        "grid_step": sc.grid_step,
        "gaps": [[lo, hi] for lo, hi in sc.gaps],
        "kissing_points": list(sc.kissing_points),
        "conflicts": sc.conflicts,
        "warnings": list(sc.warnings),
        "notes": list(sc.notes),
    }
