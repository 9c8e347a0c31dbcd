"""Generation, persistence, splitting, and loading of the training corpus.

A dataset is one directory:

    manifest.json    metadata, split, train-set standardization stats
    params.csv       id + the five geometry parameters, mm
    responses.f32    flat little-endian float32, row-major id x 50
    images/ID.pgm    binary cross-sections, P5, air = 255

manifest.json is written last, so its presence marks a complete dataset;
a crashed generation leaves no manifest and the directory is rejected.
Generation streams sample by sample (O(1) memory), so large counts are
just slow, not memory-bound.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import acoustics, raster
from .acoustics import PARAM_NAMES, FrequencyGrid, VarGeometry

FORMAT_VERSION = 1
DEFAULT_COUNT = 4000          # desk-scale corpus
DEFAULT_TRAIN_FRACTION = 0.7
RESPONSE_BINS = 50

# static parameter ranges used for min-max normalization elsewhere;
# the coupled upper/lower bounds are widened to their extreme values
TABLE_BOUNDS = {
    "R": (5.0, 20.0),
    "l_a": (4.0, 18.0),
    "l_b": (2.0, 17.0),       # l_b <= l_a - 1 <= 17
    "R_n": (7.0, 40.75),      # (R_c - R + 38)/2 at R_c=48.5, R=5
    "R_c": (5.5, 48.5),       # (R + 6)/2 at R=5
}


@dataclass(frozen=True)
class SamplerConfig:
    count: int = DEFAULT_COUNT
    seed: int = 0
    train_fraction: float = DEFAULT_TRAIN_FRACTION

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("count must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train fraction must lie in (0, 1)")


def split_ids(count: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic disjoint (train, test) id partition, each sorted."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(count)
    n_train = int(round(fraction * count))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def generate(out_dir: str | Path, cfg: SamplerConfig = SamplerConfig()) -> dict:
    """Sample geometries, compute responses and images, write the dataset.

    Returns the manifest dict.  Deterministic for a given config; the
    manifest lands last as the completion marker.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "images").mkdir(exist_ok=True)
    grid = FrequencyGrid.default()
    geometries = raster.sample_geometries(cfg.count, seed=cfg.seed)

    responses = np.empty((cfg.count, RESPONSE_BINS), dtype="<f4")
    with open(out / "params.csv", "w", newline="") as pf, \
         open(out / "responses.f32", "wb") as rf:
        writer = csv.writer(pf)
        writer.writerow(("id",) + PARAM_NAMES)
        for i, geom in enumerate(geometries):
            writer.writerow([i] + [f"{v:.17g}" for v in geom.as_array()])
            stl = acoustics.unit_stl(geom, grid).values.astype("<f4")
            responses[i] = stl
            rf.write(stl.tobytes())
            raster.write_pgm(raster.rasterize(geom), out / "images" / f"{i}.pgm")

    train_ids, test_ids = split_ids(cfg.count, cfg.train_fraction, cfg.seed)
    train = responses[train_ids].astype(np.float64)
    mean = train.mean(axis=0)
    std = np.maximum(train.std(axis=0), 1e-12)

    manifest = {
        "version": FORMAT_VERSION,
        "seed": cfg.seed,
        "count": cfg.count,
        "split": {
            "fraction": cfg.train_fraction,
            "train_count": int(train_ids.size),
            "test_count": int(test_ids.size),
        },
        "bounds": {k: list(v) for k, v in TABLE_BOUNDS.items()},
        "files": {
            "params": "params.csv",
            "responses": {"file": "responses.f32", "dtype": "<f4",
                          "stride_bytes": RESPONSE_BINS * 4},
            "images": "images/{id}.pgm",
        },
        "standardization": {"mean": mean.tolist(), "std": std.tolist()},
    }
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    tmp.replace(out / "manifest.json")
    return manifest


class Dataset:
    """Read-only view over a generated dataset directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(
                f"{self.root} has no manifest.json; generation incomplete or wrong path")
        self.manifest = json.loads(manifest_path.read_text())
        self.count = int(self.manifest["count"])
        self._responses = None

    # -- raw tables ------------------------------------------------------

    def parameters(self) -> np.ndarray:
        """(count, 5) float64 array in PARAM_NAMES order, indexed by id."""
        out = np.empty((self.count, len(PARAM_NAMES)))
        with open(self.root / "params.csv", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != ("id",) + PARAM_NAMES:
                raise ValueError(f"unexpected params.csv header {header}")
            for row in reader:
                out[int(row[0])] = [float(v) for v in row[1:]]
        return out

    def geometry(self, sample_id: int) -> VarGeometry:
        row = self.parameters()[self._check_ids([sample_id])[0]]
        return VarGeometry(*row)

    def responses(self) -> np.ndarray:
        """(count, 50) float32 response matrix, memory-mapped once."""
        if self._responses is None:
            self._responses = np.memmap(self.root / "responses.f32", dtype="<f4",
                                        mode="r", shape=(self.count, RESPONSE_BINS))
        return self._responses

    def image(self, sample_id: int) -> np.ndarray:
        """(128, 64) uint8 array in {0, 1} for one sample."""
        self._check_ids([sample_id])
        return raster.read_pgm(self.root / "images" / f"{sample_id}.pgm").pixels

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        return split_ids(self.count, self.manifest["split"]["fraction"],
                         self.manifest["seed"])

    def standardization(self) -> tuple[np.ndarray, np.ndarray]:
        stats = self.manifest["standardization"]
        return np.asarray(stats["mean"]), np.asarray(stats["std"])

    # -- batching ---------------------------------------------------------

    def _check_ids(self, ids) -> np.ndarray:
        arr = np.asarray(ids, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.count):
            bad = arr[(arr < 0) | (arr >= self.count)]
            raise KeyError(f"sample ids {bad.tolist()} not in dataset of {self.count}")
        return arr

    def load_batch(self, ids, standardize: bool = True,
                   dtype=np.float64) -> tuple[np.ndarray, np.ndarray]:
        """(images (N,1,128,64) in {0,1}, responses (N,50)) for the given ids.

        Responses are standardized by the train-split statistics when
        `standardize` (the network-input convention); raw dB otherwise.
        """
        arr = self._check_ids(ids)
        images = np.zeros((arr.size, 1, raster.FRAME_ROWS, raster.FRAME_COLS), dtype=dtype)
        for n, sample_id in enumerate(arr):
            images[n, 0] = self.image(int(sample_id))
        responses = np.asarray(self.responses()[arr], dtype=np.float64)
        if standardize:
            mean, std = self.standardization()
            responses = (responses - mean) / std
        return images, responses.astype(dtype)

    def standardize_response(self, response: np.ndarray) -> np.ndarray:
        """Apply the stored train-split standardization to one raw curve."""
        mean, std = self.standardization()
        return (np.asarray(response, dtype=np.float64) - mean) / std
