"""Inverse-design orchestration: candidate evaluation, baselines, reports,
canonical targets, and multi-cavity composition.

A design run produces a report directory:

    report.json       reproducibility header, summary, baseline rows
    target.csv        the target curve (freq_hz,stl_db)
    candidates.csv    one row per candidate: status, MSE, peak, 50 STL bins
    images/NNN.pgm    the binarized candidate cross-sections

Nothing in these files depends on wall-clock time, so two runs with the
same seed and inputs are byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import acoustics, fdfd, raster
from .acoustics import FrequencyGrid, StlCurve, VarGeometry
from .apnn import Apnn
from .arvae import ArVae
from .dataset import FORMAT_VERSION as DATASET_VERSION
from .dataset import TABLE_BOUNDS, Dataset
from .raster import CrossSection

REPORT_VERSION = 1
FORMAT_VERSIONS = {"dataset": DATASET_VERSION, "checkpoint": "ARVAE-CKPT-v1",
                   "report": REPORT_VERSION}
CANONICAL_PEAKS_HZ = (601.0, 801.0, 1001.0, 1201.0, 1401.0, 1601.0)
BIN_HZ = 40.0  # default grid spacing


def mse(target: np.ndarray, predicted: np.ndarray) -> float:
    """(1/50) sum of squared per-bin differences."""
    a = np.asarray(target, dtype=np.float64)
    b = np.asarray(predicted, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"curve shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def stl_error(target: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Per-bin absolute difference curve."""
    return np.abs(np.asarray(target, np.float64) - np.asarray(predicted, np.float64))


def config_hash(config: dict) -> str:
    """Stable short hash of a JSON-serializable config."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def reproducibility_header(seed: int, config: dict) -> dict:
    return {"seed": int(seed), "config_hash": config_hash(config),
            "format_versions": dict(FORMAT_VERSIONS)}


@dataclass
class CandidateResult:
    index: int
    image_name: str
    section: CrossSection
    curve: StlCurve | None = None
    mse: float | None = None
    peak_hz: float | None = None
    error: str | None = None
    # filled by parameterized_variant
    param_geometry: VarGeometry | None = None
    param_mse: float | None = None
    param_peak_hz: float | None = None
    param_error: str | None = None


@dataclass
class DesignReport:
    target_label: str
    target: StlCurve
    candidates: list[CandidateResult]
    best_index: int
    summary: dict
    baselines: dict
    header: dict

    def best(self) -> CandidateResult:
        return self.candidates[self.best_index]


def _peak_variances(peaks: list[float]) -> dict:
    if not peaks:
        return {"peak_variance_hz2": None, "peak_variance_bin2": None}
    var = float(np.var(np.asarray(peaks)))
    return {"peak_variance_hz2": var, "peak_variance_bin2": var / BIN_HZ**2}


def invert(model: ArVae, data: Dataset, target: StlCurve, n: int = 100,
           seed: int = 0, target_label: str = "target") -> DesignReport:
    """Generate n candidates for the target curve and rank them by FDFD MSE.

    The target is a raw dB curve on the default grid; the stored
    train-split statistics standardize it for the response encoder.
    Candidates whose field solve fails are kept in the report with the
    error message and excluded from ranking; all failing is an error.
    """
    y_std = data.standardize_response(target.values)
    sections = model.generate_candidates(y_std, n=n, seed=seed)
    candidates: list[CandidateResult] = []
    for i, section in enumerate(sections):
        row = CandidateResult(index=i, image_name=f"images/{i:03d}.pgm", section=section)
        try:
            curve, _ = fdfd.stl_curve(section, target.grid)
            row.curve = curve
            row.mse = mse(target.values, curve.values)
            row.peak_hz = curve.peak_frequency()
        except (ValueError, ArithmeticError) as err:
            row.error = str(err)
        candidates.append(row)

    evaluated = [c for c in candidates if c.error is None]
    if not evaluated:
        raise RuntimeError(
            f"all {len(candidates)} candidates failed field evaluation; "
            f"first error: {candidates[0].error if candidates else 'none generated'}")
    best = min(evaluated, key=lambda c: (c.mse, c.index))
    summary = {
        "n_requested": n,
        "n_evaluated": len(evaluated),
        "n_excluded": len(candidates) - len(evaluated),
        "best_mse": best.mse,
        "mean_mse": float(np.mean([c.mse for c in evaluated])),
        "best_peak_hz": best.peak_hz,
        "target_peak_hz": target.peak_frequency(),
    }
    summary.update(_peak_variances([c.peak_hz for c in evaluated]))
    config = {"op": "invert", "n": n, "seed": seed, "target_label": target_label,
              "target_sha": hashlib.sha256(
                  np.asarray(target.values, "<f8").tobytes()).hexdigest()[:16]}
    return DesignReport(target_label=target_label, target=target,
                        candidates=candidates, best_index=best.index,
                        summary=summary, baselines={},
                        header=reproducibility_header(seed, config))


def nearest_training_candidate(data: Dataset, target: StlCurve) -> tuple[int, float]:
    """Exhaustive MSE argmin over the train split; ties go to the lowest id."""
    train_ids, _ = data.split()
    if train_ids.size == 0:
        raise ValueError("train split is empty")
    responses = np.asarray(data.responses()[train_ids], dtype=np.float64)
    errs = np.mean((responses - target.values) ** 2, axis=1)
    pos = int(np.argmin(errs))  # train_ids ascending, argmin takes the first
    return int(train_ids[pos]), float(errs[pos])


def apnn_baseline(model: Apnn, data: Dataset, target: StlCurve) -> dict:
    """Predict parameters for the target and score their analytical curve."""
    y = data.standardize_response(target.values) if model.standardize else target.values
    geom = model.predict_parameters(y)
    curve = acoustics.unit_stl(geom, target.grid)
    return {"parameters": {k: float(v) for k, v in
                           zip(acoustics.PARAM_NAMES, geom.as_array())},
            "mse": mse(target.values, curve.values),
            "peak_hz": curve.peak_frequency()}


def add_baselines(report: DesignReport, data: Dataset,
                  apnn_model: Apnn | None = None) -> DesignReport:
    """Attach nearest-training and (optionally) APNN rows to a report."""
    sample_id, train_mse = nearest_training_candidate(data, report.target)
    curve = StlCurve(report.target.grid,
                     np.asarray(data.responses()[sample_id], dtype=np.float64))
    report.baselines["nearest_training"] = {
        "sample_id": sample_id, "mse": train_mse,
        "peak_hz": curve.peak_frequency()}
    if apnn_model is not None:
        report.baselines["apnn"] = apnn_baseline(apnn_model, data, report.target)
    return report


def parameterized_variant(report: DesignReport) -> DesignReport:
    """Parameterize every candidate image and re-score analytically.

    Adds per-candidate detected geometry, analytical MSE, and peak, and a
    parameterized summary row with both peak-variance columns so the
    non-parameterized and parameterized populations can be compared.
    Detection failures are recorded and excluded from the variance.
    """
    peaks = []
    for row in report.candidates:
        try:
            geom = raster.detect_parameters(row.section)
            curve = acoustics.unit_stl(geom, report.target.grid)
        except (ValueError, ArithmeticError) as err:
            row.param_error = str(err)
            continue
        row.param_geometry = geom
        row.param_mse = mse(report.target.values, curve.values)
        row.param_peak_hz = curve.peak_frequency()
        peaks.append(row.param_peak_hz)
    detected = [c for c in report.candidates if c.param_error is None and
                c.param_geometry is not None]
    entry = {"n_detected": len(detected),
             "n_failed": sum(1 for c in report.candidates if c.param_error),
             "mean_mse": float(np.mean([c.param_mse for c in detected]))
             if detected else None,
             "best_mse": min((c.param_mse for c in detected), default=None)}
    entry.update(_peak_variances(peaks))
    report.baselines["parameterized"] = entry
    report.summary["parameterized_peak_variance_hz2"] = entry["peak_variance_hz2"]
    report.summary["parameterized_peak_variance_bin2"] = entry["peak_variance_bin2"]
    return report


# -- persistence --------------------------------------------------------------


def write_report(report: DesignReport, out_dir: str | Path) -> Path:
    """Persist a report directory; contents are deterministic."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    acoustics.write_stl_csv(report.target, out / "target.csv")
    for row in report.candidates:
        raster.write_pgm(row.section, out / row.image_name)

    with open(out / "candidates.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        stl_cols = [f"stl_{i}" for i in range(len(report.target.grid))]
        writer.writerow(["index", "image", "status", "mse", "peak_hz",
                         "param_mse", "param_peak_hz"] + stl_cols)
        for row in report.candidates:
            if row.error is None:
                values = [f"{v:.9g}" for v in row.curve.values]
                fields = [row.index, row.image_name, "ok", f"{row.mse:.9g}",
                          f"{row.peak_hz:.9g}"]
            else:
                values = [""] * len(stl_cols)
                fields = [row.index, row.image_name, f"error: {row.error}", "", ""]
            fields += ([f"{row.param_mse:.9g}", f"{row.param_peak_hz:.9g}"]
                       if row.param_mse is not None else ["", ""])
            writer.writerow(fields + values)

    payload = {
        "header": report.header,
        "report_version": REPORT_VERSION,
        "target_label": report.target_label,
        "target_csv": "target.csv",
        "best_index": report.best_index,
        "summary": report.summary,
        "baselines": report.baselines,
        "candidates": [
            {"index": row.index, "image": row.image_name, "mse": row.mse,
             "peak_hz": row.peak_hz, "error": row.error,
             "param_geometry": (None if row.param_geometry is None else
                                {k: float(v) for k, v in zip(
                                    acoustics.PARAM_NAMES,
                                    row.param_geometry.as_array())}),
             "param_mse": row.param_mse, "param_peak_hz": row.param_peak_hz,
             "param_error": row.param_error}
            for row in report.candidates],
    }
    (out / "report.json").write_text(json.dumps(payload, indent=1, sort_keys=True))
    return out


def load_report(run_dir: str | Path) -> DesignReport:
    """Rebuild a DesignReport from a run directory, curves included."""
    run = Path(run_dir)
    payload = json.loads((run / "report.json").read_text())
    target = acoustics.read_stl_csv(run / payload["target_csv"])
    curves: dict[int, StlCurve] = {}
    with open(run / "candidates.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        first_stl = header.index("stl_0")
        for fields in reader:
            if fields[2] == "ok":
                values = np.array([float(v) for v in fields[first_stl:]])
                curves[int(fields[0])] = StlCurve(target.grid, values)
    candidates = []
    for entry in payload["candidates"]:
        section = raster.read_pgm(run / entry["image"])
        row = CandidateResult(index=entry["index"], image_name=entry["image"],
                              section=section, curve=curves.get(entry["index"]),
                              mse=entry["mse"], peak_hz=entry["peak_hz"],
                              error=entry["error"],
                              param_mse=entry.get("param_mse"),
                              param_peak_hz=entry.get("param_peak_hz"),
                              param_error=entry.get("param_error"))
        geo = entry.get("param_geometry")
        if geo:
            row.param_geometry = VarGeometry(**geo)
        candidates.append(row)
    return DesignReport(target_label=payload["target_label"], target=target,
                        candidates=candidates, best_index=payload["best_index"],
                        summary=payload["summary"], baselines=payload["baselines"],
                        header=payload["header"])


# -- canonical targets and unit search ---------------------------------------


def _sample_geometry(rng: np.random.Generator, fixed_R: float | None = None) -> VarGeometry:
    """One rejection draw from the design table, optionally with R pinned."""
    for _ in range(10000):
        r = fixed_R if fixed_R is not None else rng.uniform(*TABLE_BOUNDS["R"])
        l_a = rng.uniform(*TABLE_BOUNDS["l_a"])
        l_b = rng.uniform(TABLE_BOUNDS["l_b"][0], l_a - 1.0)
        # the lower R_c bound keeps a non-empty R_n interval below
        r_c = rng.uniform(max((r + 6.0) / 2.0, r + 2.0, 3.0 * r - 36.0, 8.0),
                          TABLE_BOUNDS["R_c"][1])
        r_n = rng.uniform(max(7.0, r + 1.0), min((r_c - r + 38.0) / 2.0, r_c - 1.0))
        if r_n <= r + 1.0 or r_n >= r_c - 1.0:
            continue
        geom = VarGeometry(R=r, l_a=l_a, l_b=l_b, R_n=r_n, R_c=r_c)
        if geom.in_design_bounds():
            return geom
    raise RuntimeError("geometry sampling failed to find a valid draw")


def search_unit_for_peak(peak_hz: float, seed: int = 0,
                         fixed_R: float | None = None,
                         grid: FrequencyGrid | None = None,
                         max_draws: int = 200000) -> tuple[VarGeometry, StlCurve]:
    """Find a sampled geometry whose analytical peak bin equals peak_hz."""
    grid = grid or FrequencyGrid.default()
    if not np.any(np.isclose(grid.freqs, peak_hz)):
        raise ValueError(f"{peak_hz} Hz is not a grid bin")
    rng = np.random.default_rng(np.random.SeedSequence((seed, int(round(peak_hz)))))
    for _ in range(max_draws):
        geom = _sample_geometry(rng, fixed_R)
        curve = acoustics.unit_stl(geom, grid)
        if curve.peak_frequency() == peak_hz:
            return geom, curve
    raise RuntimeError(f"no sampled geometry peaked at {peak_hz} Hz "
                       f"within {max_draws} draws")


def canonical_targets(seed: int = 0) -> list[dict]:
    """The six standard inverse-design targets (peaks 601..1601 Hz)."""
    targets = []
    for peak in CANONICAL_PEAKS_HZ:
        geom, curve = search_unit_for_peak(peak, seed=seed)
        targets.append({"peak_hz": peak, "geometry": geom, "curve": curve})
    return targets


# -- multi-cavity composition -------------------------------------------------


def compose_units(units: list[VarGeometry], grid: FrequencyGrid | None = None,
                  strategy: str = "strict") -> dict:
    """Serialize units on a shared duct and check solo-peak preservation.

    strategy 'strict' requires equal duct radii; 'common' rebuilds every
    unit on the first unit's radius before composing (their solo peaks
    shift accordingly).  Returns the combined curve, solo curves, and a
    per-unit record of solo peak bin and whether the combined curve has
    a local maximum within one bin of it.
    """
    if not units:
        raise ValueError("at least one unit is required")
    if strategy not in ("strict", "common"):
        raise ValueError(f"unknown strategy {strategy!r}")
    grid = grid or FrequencyGrid.default()
    if strategy == "common":
        shared = units[0].R
        units = [dataclasses.replace(u, R=shared) for u in units]
    else:
        radii = np.array([u.R for u in units])
        bad = np.nonzero(np.abs(radii - radii[0]) > 1e-9)[0]
        if bad.size:
            raise ValueError(
                f"duct radius mismatch at unit indices {bad.tolist()}; "
                f"use strategy='common' to rebuild on a shared radius")
    combined = acoustics.multi_cavity_stl(units, grid)
    solos = [acoustics.unit_stl(u, grid) for u in units]
    records = []
    for unit, solo in zip(units, solos):
        bin_idx = int(np.argmax(solo.values))
        lo, hi = max(0, bin_idx - 1), min(len(grid) - 1, bin_idx + 1)
        preserved = False
        for j in range(lo, hi + 1):
            left = combined.values[j - 1] if j > 0 else -np.inf
            right = combined.values[j + 1] if j < len(grid) - 1 else -np.inf
            if combined.values[j] >= left and combined.values[j] >= right:
                preserved = True
                break
        records.append({"unit": unit, "solo_peak_hz": solo.peak_frequency(),
                        "solo_peak_bin": bin_idx, "preserved": preserved})
    return {"combined": combined, "solos": solos, "units": units,
            "records": records}


def broadband_design(peaks_hz: list[float], seed: int = 0,
                     grid: FrequencyGrid | None = None) -> dict:
    """Find one unit per requested peak on a shared duct and compose them.

    The first unit fixes the duct radius; the rest are searched with that
    radius pinned, so strict composition applies.
    """
    if not peaks_hz:
        raise ValueError("at least one peak is required")
    grid = grid or FrequencyGrid.default()
    units = []
    for i, peak in enumerate(peaks_hz):
        fixed = units[0].R if units else None
        geom, _ = search_unit_for_peak(float(peak), seed=seed, fixed_R=fixed, grid=grid)
        units.append(geom)
    result = compose_units(units, grid, strategy="strict")
    result["requested_peaks_hz"] = [float(p) for p in peaks_hz]
    return result
