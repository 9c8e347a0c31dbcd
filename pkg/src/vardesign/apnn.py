"""Dense baseline: regress the five geometry parameters from a response.

Targets are min-max normalized to [0, 1] by the static table ranges, so a
raw network output of 0 de-normalizes to each parameter's lower bound.
Predictions are de-normalized and then clamped into the table ranges plus
the ordering margins (R+1 <= R_n <= R_c-1, l_b <= l_a-1), so the returned
geometry is always constructible and inside the design bounds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acoustics import PARAM_NAMES, VarGeometry
from .dataset import TABLE_BOUNDS, Dataset
from .nn import tensor as T
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import Net
from .nn.optim import Adam

RESPONSE_BINS = 50
DEFAULT_HIDDEN = (256, 256, 128)

_Lows = np.array([TABLE_BOUNDS[name][0] for name in PARAM_NAMES])
_Highs = np.array([TABLE_BOUNDS[name][1] for name in PARAM_NAMES])


@dataclass(frozen=True)
class ApnnConfig:
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    batch_size: int = 512
    learning_rate: float = 1e-5
    epochs: int = 500
    seed: int = 0
    dtype: str = "float64"
    standardize: bool = True

    def __post_init__(self):
        if not self.hidden or any(h <= 0 for h in self.hidden):
            raise ValueError("hidden sizes must be positive")
        if self.batch_size <= 0 or self.epochs <= 0 or self.learning_rate <= 0:
            raise ValueError("batch size, epochs, and learning rate must be positive")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be float64 or float32, got {self.dtype!r}")


def apnn_spec(hidden: tuple[int, ...] = DEFAULT_HIDDEN) -> list[dict]:
    spec: list[dict] = []
    widths = (RESPONSE_BINS,) + tuple(hidden)
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        spec.append({"kind": "dense", "in": n_in, "out": n_out})
        spec.append({"kind": "relu"})
    spec.append({"kind": "dense", "in": widths[-1], "out": len(PARAM_NAMES)})
    return spec


def normalize_parameters(params: np.ndarray) -> np.ndarray:
    """Map physical mm values onto [0, 1] by the static table ranges."""
    return (np.asarray(params, dtype=np.float64) - _Lows) / (_Highs - _Lows)


def denormalize_parameters(values: np.ndarray) -> np.ndarray:
    return _Lows + np.asarray(values, dtype=np.float64) * (_Highs - _Lows)


def clamp_to_bounds(raw: np.ndarray) -> VarGeometry:
    """Project five raw mm values onto the design table, orderings included.

    Clamp order matters: R and l_a first, then the parameters whose
    ranges depend on them.  R_c's lower bound is raised to keep a valid
    R_n interval available (R_n >= max(7, R+1) and R_n <= min((R_c-R+38)/2,
    R_c-1) must intersect), so the result is always constructible.
    """
    r, l_a, l_b, r_n, r_c = (float(v) for v in raw)
    r = np.clip(r, *TABLE_BOUNDS["R"])
    l_a = np.clip(l_a, *TABLE_BOUNDS["l_a"])
    l_b = np.clip(l_b, 2.0, l_a - 1.0)
    rc_lo = max((r + 6.0) / 2.0, r + 2.0, 3.0 * r - 36.0, 8.0)
    r_c = np.clip(r_c, rc_lo, TABLE_BOUNDS["R_c"][1])
    r_n = np.clip(r_n, max(7.0, r + 1.0), min((r_c - r + 38.0) / 2.0, r_c - 1.0))
    return VarGeometry(R=float(r), l_a=float(l_a), l_b=float(l_b),
                       R_n=float(r_n), R_c=float(r_c))


class Apnn:
    """Trained parameter-prediction network."""

    def __init__(self, net: Net, standardize: bool = True):
        self.net = net
        self.standardize = bool(standardize)
        self.dtype = net.dtype

    @classmethod
    def initialize(cls, cfg: ApnnConfig) -> "Apnn":
        seed = int(np.random.SeedSequence(cfg.seed).generate_state(1)[0])
        return cls(Net(apnn_spec(cfg.hidden), seed, np.dtype(cfg.dtype)),
                   standardize=cfg.standardize)

    def forward_normalized(self, responses: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(np.asarray(responses, dtype=self.dtype))
        if y.shape[1] != RESPONSE_BINS:
            raise ValueError(f"expected (N, {RESPONSE_BINS}) responses, got {y.shape}")
        return self.net(T.Tensor(y)).data.copy()

    def predict_parameters(self, response: np.ndarray) -> VarGeometry:
        """One response (model-input representation) -> valid geometry."""
        normalized = self.forward_normalized(np.asarray(response).reshape(1, -1))[0]
        return clamp_to_bounds(denormalize_parameters(normalized))

    def save(self, path, seed: int, step: int, extra: dict | None = None) -> None:
        meta = {"standardize": self.standardize}
        meta.update(extra or {})
        save_checkpoint(path, {"apnn": self.net}, seed=seed, step=step, extra=meta)

    @classmethod
    def load(cls, path) -> "Apnn":
        nets, header = load_checkpoint(path)
        return cls(nets["apnn"], standardize=header["extra"].get("standardize", True))


def train_apnn(data: Dataset, cfg: ApnnConfig, out_dir: str | Path) -> dict:
    """MSE regression on the train split; writes loss CSV and checkpoint.

    Deterministic per (dataset, config); the checkpoint holds the best
    epoch-mean loss.  Returns a summary dict with paths and numbers.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dt = np.dtype(cfg.dtype)
    model = Apnn.initialize(cfg)
    opt = Adam(model.net.params(), lr=cfg.learning_rate)

    train_ids, _ = data.split()
    responses = np.asarray(data.responses()[train_ids], dtype=np.float64)
    if cfg.standardize:
        mean, std = data.standardization()
        responses = (responses - mean) / std
    responses = responses.astype(dt)
    targets = normalize_parameters(data.parameters()[train_ids]).astype(dt)

    loop_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
    n_train = train_ids.size
    n_out = len(PARAM_NAMES)
    csv_path = out / "loss_apnn.csv"
    ckpt_path = out / "apnn.ckpt"
    best = (np.inf, 0)
    step = 0
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mse"])
        for epoch in range(1, cfg.epochs + 1):
            order = loop_rng.permutation(n_train)
            total = 0.0
            for lo in range(0, n_train, cfg.batch_size):
                idx = order[lo:lo + cfg.batch_size]
                opt.zero_grad()
                pred = model.net(T.Tensor(responses[idx]))
                diff = T.add(pred, T.Tensor(-targets[idx]))
                mse = T.mul(T.sum_all(T.mul(diff, diff)), 1.0 / (idx.size * n_out))
                value = mse.item()
                if not np.isfinite(value):
                    raise ArithmeticError(f"non-finite loss at epoch {epoch}, step {step}")
                mse.backward()
                opt.step()
                step += 1
                total += value * idx.size
            epoch_mse = total / n_train
            writer.writerow([epoch, f"{epoch_mse:.9g}"])
            if epoch_mse < best[0]:
                best = (epoch_mse, epoch)
                model.save(ckpt_path, seed=cfg.seed, step=step,
                           extra={"epoch": epoch, "mse": float(epoch_mse)})
    return {"checkpoint": str(ckpt_path), "loss_csv": str(csv_path),
            "best_mse": float(best[0]), "best_epoch": int(best[1]),
            "epochs": cfg.epochs, "steps": step}
