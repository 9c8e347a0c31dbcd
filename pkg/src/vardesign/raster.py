"""Raster cross-sections of resonator units and parameter recovery.

A unit is drawn on a half-plane raster of the axisymmetric cross
section: rows index radius (row 0 on the symmetry axis), columns index
the axial coordinate, 0.4 mm per pixel on both axes.  The standard
frame is 128 rows by 64 columns (51.2 mm by 25.6 mm); the duct channel
occupies a fixed 50-column span centred in the frame.  Pixel value 1
is air, 0 is solid.

Parameter detection inverts the drawing: duct radius from full-length
channel rows, axial widths from a two-cluster split of the remaining
row runs, neck radius from the narrow-cluster row count, and cavity
radius from the count of rows holding any air.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acoustics import UNIT_LENGTH_MM, VarGeometry

PITCH_MM = 0.4
FRAME_ROWS = 128
FRAME_COLS = 64
CHANNEL_COLS = int(round(UNIT_LENGTH_MM / PITCH_MM))  # 50
CHANNEL_COL_LO = (FRAME_COLS - CHANNEL_COLS) // 2  # 7
CHANNEL_COL_HI = CHANNEL_COL_LO + CHANNEL_COLS - 1  # 56
Z_MID_MM = PITCH_MM * (CHANNEL_COL_LO + CHANNEL_COL_HI) / 2.0  # 12.6

MIN_CHANNEL_RADIUS_MM = 5.0  # smallest duct radius in the design table


@dataclass
class CrossSection:
    """Binary raster of one unit's half cross-section.

    pixels: uint8 array, rows x FRAME_COLS, 1 = air.  The standard
    frame has FRAME_ROWS rows; validation geometries too tall for it
    may carry more rows.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[1] != FRAME_COLS:
            raise ValueError(f"cross-section must have {FRAME_COLS} columns, got {px.shape}")
        if not np.isin(px, (0, 1)).all():
            raise ValueError("cross-section pixels must be binary")
        self.pixels = px.astype(np.uint8)

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    def is_standard_frame(self) -> bool:
        return self.pixels.shape == (FRAME_ROWS, FRAME_COLS)


def _draw(geom: VarGeometry, rows: int, cols: int, pitch_mm: float) -> np.ndarray:
    if geom.R_c > rows * pitch_mm:
        raise ValueError(
            f"R_c = {geom.R_c} mm exceeds the {rows * pitch_mm} mm radial frame capacity"
        )
    r = np.arange(rows)[:, None] * pitch_mm
    z = np.arange(cols)[None, :] * pitch_mm
    dz = np.abs(z - Z_MID_MM)
    channel = (r < geom.R) & (dz < UNIT_LENGTH_MM / 2.0)
    neck = (geom.R <= r) & (r < geom.R_n) & (dz < geom.l_b / 2.0)
    cavity = (geom.R_n <= r) & (r < geom.R_c) & (dz < geom.l_a / 2.0)
    return (channel | neck | cavity).astype(np.uint8)


def rasterize(geom: VarGeometry, rows: int = FRAME_ROWS) -> CrossSection:
    """Draw a unit on the raster grid.

    A pixel at (row i, col j) has centre (r, z) = (i, j) * PITCH_MM and
    is air when the centre lies in the channel (r < R over the channel
    span), the neck slit (R <= r < R_n, |z - z_mid| < l_b/2), or the
    cavity (R_n <= r < R_c, |z - z_mid| < l_a/2).

    Raises ValueError when the cavity does not fit the frame; pass a
    larger `rows` for validation geometries taller than the standard
    51.2 mm radial capacity.
    """
    return CrossSection(_draw(geom, rows, FRAME_COLS, PITCH_MM))


def solver_image(geom: VarGeometry, pitch_mm: float = PITCH_MM) -> np.ndarray:
    """Draw a unit at an arbitrary pitch for mesh-refined field solves.

    Same centre-sampling predicates as `rasterize` over the same
    physical extent, but returned as a plain array: only the standard
    0.4 mm frame is a dataset image.
    """
    if pitch_mm <= 0:
        raise ValueError("pitch must be positive")
    rows = int(np.ceil(geom.R_c / pitch_mm)) + 2
    cols = int(round(FRAME_COLS * PITCH_MM / pitch_mm))
    return _draw(geom, rows, cols, pitch_mm)


def sample_geometries(count: int, seed: int) -> list[VarGeometry]:
    """Draw units uniformly from the design table by rejection.

    Each parameter is uniform over its table range (l_b and the radii
    ranges depend on earlier draws); draws violating the ordering
    margins R + 1 <= R_n <= R_c - 1 are rejected and redrawn.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng(seed)
    out: list[VarGeometry] = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 100 * (count + 10):
            raise RuntimeError("geometry sampling rejection rate unexpectedly high")
        l_a = rng.uniform(4.0, 18.0)
        l_b = rng.uniform(2.0, l_a - 1.0)
        radius = rng.uniform(5.0, 20.0)
        r_c = rng.uniform((radius + 6.0) / 2.0, 48.5)
        r_n = rng.uniform(7.0, (r_c - radius + 38.0) / 2.0)
        if not (radius + 1.0 <= r_n <= r_c - 1.0):
            continue
        out.append(VarGeometry(R=radius, l_a=l_a, l_b=l_b, R_n=r_n, R_c=r_c))
    return out


def _row_runs(row: np.ndarray) -> list[int]:
    """Lengths of maximal runs of ones."""
    padded = np.concatenate([[0], row, [0]])
    edges = np.diff(padded)
    starts = np.nonzero(edges == 1)[0]
    ends = np.nonzero(edges == -1)[0]
    return list((ends - starts).astype(int))


def kmeans_two(values: np.ndarray, iters: int = 100) -> tuple[float, float]:
    """Two-cluster 1-D k-means, centroids seeded at min and max.

    Lloyd iterations on sorted thresholding; deterministic.  Raises
    ValueError when the data cannot support two clusters.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2 or v.min() == v.max():
        raise ValueError("need at least two distinct values for a two-cluster split")
    lo, hi = float(v.min()), float(v.max())
    for _ in range(iters):
        assign_hi = np.abs(v - hi) < np.abs(v - lo)
        new_lo = v[~assign_hi].mean()
        new_hi = v[assign_hi].mean()
        if new_lo == lo and new_hi == hi:
            break
        lo, hi = float(new_lo), float(new_hi)
    return lo, hi


def detect_parameters(section: CrossSection) -> VarGeometry:
    """Recover unit lengths from a raster, all in mm.

    The drawing structure fixes the read-out: rows below the duct radius
    run the full channel length, rows between R and R_n carry the narrow
    neck run, rows between R_n and R_c the wider cavity run, and no air
    exists above R_c.  So the duct radius is the count of full-length
    rows, the two widths come from a two-cluster split of the remaining
    row runs, the neck radius from the count of rows in the narrow
    cluster, and the cavity radius from the count of rows holding any
    air at all.

    Raises ValueError when no full-length channel exists or the run
    statistics degenerate (failures are reported, never guessed).
    """
    img = section.pixels
    run_lengths = np.array([max(_row_runs(row), default=0) for row in img])
    channel = run_lengths == CHANNEL_COLS
    if not channel.any():
        raise ValueError("detection failed: no full-length channel row")
    n_channel = int(channel.sum())
    radius = n_channel * PITCH_MM

    other = ~channel & (run_lengths > 0)
    other_runs = run_lengths[other].astype(float)
    if other_runs.size < 2:
        raise ValueError("detection failed: too few rows outside the channel")
    try:
        small, large = kmeans_two(other_runs)
    except ValueError as exc:
        raise ValueError(f"detection failed: {exc}") from exc
    l_b = small * PITCH_MM
    l_a = large * PITCH_MM

    # nearest-centroid assignment; clean drawings have exact-width runs
    n_neck = int(np.sum(np.abs(other_runs - small) < np.abs(other_runs - large)))
    if n_neck == 0 or n_neck == other_runs.size:
        raise ValueError("detection failed: neck and cavity rows do not separate")
    r_n = radius + n_neck * PITCH_MM
    r_c = int((run_lengths > 0).sum()) * PITCH_MM

    return VarGeometry(R=radius, l_a=l_a, l_b=l_b, R_n=r_n, R_c=r_c)


def binarize(soft: np.ndarray, threshold: float = 0.5) -> CrossSection:
    """Threshold a soft image and repair it into a usable cross-section.

    Pixels at or above the threshold become air.  Columns outside the
    channel span are cleared (the frame is solid there), the minimal
    duct channel (radius MIN_CHANNEL_RADIUS_MM) is forced open so the
    waveguide always exists, and air not 4-connected to the channel is
    removed.  Idempotent on its own output.
    """
    arr = np.asarray(soft, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != FRAME_COLS:
        raise ValueError(f"soft image must have {FRAME_COLS} columns, got {arr.shape}")
    if not (np.isfinite(arr).all() and arr.min() >= 0.0 and arr.max() <= 1.0):
        raise ValueError("soft image values must lie in [0, 1]")
    img = (arr >= threshold).astype(np.uint8)
    img[:, :CHANNEL_COL_LO] = 0
    img[:, CHANNEL_COL_HI + 1:] = 0
    forced_rows = int(np.ceil(MIN_CHANNEL_RADIUS_MM / PITCH_MM))
    img[:forced_rows, CHANNEL_COL_LO:CHANNEL_COL_HI + 1] = 1

    from scipy import ndimage

    labels, _ = ndimage.label(img, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    keep = np.unique(labels[:forced_rows, CHANNEL_COL_LO:CHANNEL_COL_HI + 1])
    img = np.where(np.isin(labels, keep[keep > 0]), img, 0).astype(np.uint8)
    return CrossSection(img)


def write_pgm(section: CrossSection, path) -> None:
    """Write a binary (P5) PGM, air = 255, solid = 0."""
    px = section.pixels
    header = f"P5\n{px.shape[1]} {px.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write((px * np.uint8(255)).tobytes())


def read_pgm(path) -> CrossSection:
    """Read a P5 PGM written by write_pgm; values >= 128 map to air."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path} is not a binary PGM file")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    width, height, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}")
    pos += 1
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    px = (raw.reshape(height, width) >= 128).astype(np.uint8)
    return CrossSection(px)
