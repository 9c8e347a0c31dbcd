"""Response-conditioned variational autoencoder over cross-section images.

Three networks share a 24-unit bottleneck: a residual conv feature
extractor maps a 128x64 image to (mu, logvar, z_d) of 8 dims each, a 1-D
conv response encoder maps a 50-bin curve to z_r (8 dims), and a
transposed-conv decoder maps z_p (+) z_r (16 dims) back to a soft image.
The training loss is

    total = w0 * recon + w1 * kl + w2 * latent

with recon the pixel-summed Bernoulli NLL of the binary image under the
decoded probabilities, kl the closed-form Gaussian KL of (mu, logvar)
against N(0, I) over the 8 probabilistic dims, latent = ||z_r - z_d||^2
tying the response code to the deterministic image code; all three are
batch means.  Conditioned generation samples z_p ~ U(-1, 1)^8 around a
fixed z_r and binarizes the decoded images.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import raster
from .dataset import Dataset
from .nn import tensor as T
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import Net
from .nn.optim import Adam
from .raster import FRAME_COLS, FRAME_ROWS, CrossSection

LATENT_DIM = 8
BOTTLENECK = 3 * LATENT_DIM
RESPONSE_BINS = 50
DEFAULT_CHANNELS = (8, 16, 32, 48)
DEFAULT_THRESHOLD = 0.5


def feature_extractor_spec(channels: tuple[int, ...] = DEFAULT_CHANNELS) -> list[dict]:
    """Residual conv encoder: (N,1,128,64) -> (N,24)."""
    c1, c2, c3, c4 = channels
    res = lambda c: {"kind": "residual", "body": [
        {"kind": "conv2d", "in": c, "out": c, "kernel": 3, "stride": 1, "pad": 1},
        {"kind": "lrelu"},
        {"kind": "conv2d", "in": c, "out": c, "kernel": 3, "stride": 1, "pad": 1}]}
    return [
        {"kind": "conv2d", "in": 1, "out": c1, "kernel": 3, "stride": 2, "pad": 1},
        {"kind": "lrelu"},
        res(c1), {"kind": "lrelu"},
        {"kind": "conv2d", "in": c1, "out": c2, "kernel": 3, "stride": 2, "pad": 1},
        {"kind": "lrelu"},
        res(c2), {"kind": "lrelu"},
        {"kind": "conv2d", "in": c2, "out": c3, "kernel": 3, "stride": 2, "pad": 1},
        {"kind": "lrelu"},
        {"kind": "conv2d", "in": c3, "out": c4, "kernel": 3, "stride": 2, "pad": 1},
        {"kind": "lrelu"},
        {"kind": "flatten"},
        {"kind": "dense", "in": c4 * (FRAME_ROWS // 16) * (FRAME_COLS // 16),
         "out": BOTTLENECK},
    ]


def decoder_spec(channels: tuple[int, ...] = DEFAULT_CHANNELS) -> list[dict]:
    """Transposed-conv decoder: (N,16) -> (N,1,128,64) logits."""
    c1, c2, c3, c4 = channels
    h, w = FRAME_ROWS // 16, FRAME_COLS // 16
    up = lambda ci, co: {"kind": "conv_transpose2d", "in": ci, "out": co,
                         "kernel": 4, "stride": 2, "pad": 1}
    return [
        {"kind": "dense", "in": 2 * LATENT_DIM, "out": c4 * h * w},
        {"kind": "lrelu"},
        {"kind": "reshape", "shape": [c4, h, w]},
        up(c4, c3), {"kind": "lrelu"},
        up(c3, c2), {"kind": "lrelu"},
        up(c2, c1), {"kind": "lrelu"},
        up(c1, 1),
    ]


def response_encoder_spec() -> list[dict]:
    """1-D conv response encoder: (N,1,50) -> (N,8)."""
    return [
        {"kind": "conv1d", "in": 1, "out": 8, "kernel": 5, "stride": 2, "pad": 0},
        {"kind": "lrelu"},
        {"kind": "conv1d", "in": 8, "out": 16, "kernel": 3, "stride": 2, "pad": 0},
        {"kind": "lrelu"},
        {"kind": "flatten"},
        {"kind": "dense", "in": 16 * 11, "out": 32},
        {"kind": "lrelu"},
        {"kind": "dense", "in": 32, "out": LATENT_DIM},
    ]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-5
    epochs: int = 200
    seed: int = 0
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    threshold: float = DEFAULT_THRESHOLD
    dtype: str = "float64"
    channels: tuple[int, ...] = DEFAULT_CHANNELS
    standardize: bool = True

    def __post_init__(self):
        if self.batch_size <= 0 or self.epochs <= 0 or self.learning_rate <= 0:
            raise ValueError("batch size, epochs, and learning rate must be positive")
        if len(self.loss_weights) != 3 or any(w < 0 for w in self.loss_weights):
            raise ValueError("loss weights must be three non-negative reals")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be float64 or float32, got {self.dtype!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("binarization threshold must lie in (0, 1)")


def reparameterize(mu: np.ndarray, logvar: np.ndarray, seed: int) -> np.ndarray:
    """z_p = mu + eps * exp(logvar / 2) with eps ~ N(0, I) from the seed."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    eps = np.random.default_rng(seed).standard_normal(mu.shape)
    return mu + eps * np.exp(0.5 * logvar)


def _as_image_batch(images, dtype) -> np.ndarray:
    arr = np.asarray(images, dtype=dtype)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim == 3:
        arr = arr[:, None]
    if arr.shape[1:] != (1, FRAME_ROWS, FRAME_COLS):
        raise ValueError(f"expected (N, {FRAME_ROWS}, {FRAME_COLS}) images, got {arr.shape}")
    return arr


def _as_response_batch(responses, dtype) -> np.ndarray:
    arr = np.asarray(responses, dtype=dtype)
    if arr.ndim == 1:
        arr = arr[None]
    if arr.ndim == 2:
        arr = arr[:, None, :]
    if arr.shape[1:] != (1, RESPONSE_BINS):
        raise ValueError(f"expected (N, {RESPONSE_BINS}) responses, got {arr.shape}")
    return arr


class ArVae:
    """The three networks plus the operations the workflows need."""

    NET_NAMES = ("feature_extractor", "response_encoder", "decoder")

    def __init__(self, nets: dict[str, "Net"], threshold: float = DEFAULT_THRESHOLD):
        missing = [n for n in self.NET_NAMES if n not in nets]
        if missing:
            raise ValueError(f"missing networks: {missing}")
        self.nets = nets
        self.threshold = float(threshold)
        self.dtype = nets["feature_extractor"].dtype

    @classmethod
    def initialize(cls, seed: int = 0, dtype: str = "float64",
                   channels: tuple[int, ...] = DEFAULT_CHANNELS,
                   threshold: float = DEFAULT_THRESHOLD) -> "ArVae":
        fe_seed, ftau_seed, dec_seed = (int(s.generate_state(1)[0])
                                        for s in np.random.SeedSequence(seed).spawn(3))
        dt = np.dtype(dtype)
        return cls({
            "feature_extractor": Net(feature_extractor_spec(channels), fe_seed, dt),
            "response_encoder": Net(response_encoder_spec(), ftau_seed, dt),
            "decoder": Net(decoder_spec(channels), dec_seed, dt),
        }, threshold=threshold)

    # -- inference --------------------------------------------------------

    def encode(self, images) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Image batch -> (mu, logvar, z_d), each (N, 8)."""
        x = _as_image_batch(images, self.dtype)
        out = self.nets["feature_extractor"](T.Tensor(x)).data
        return out[:, :8].copy(), out[:, 8:16].copy(), out[:, 16:24].copy()

    def encode_response(self, responses) -> np.ndarray:
        """Response batch (model-input representation) -> z_r (N, 8)."""
        y = _as_response_batch(responses, self.dtype)
        return self.nets["response_encoder"](T.Tensor(y)).data.copy()

    def decode(self, z_p, z_r) -> np.ndarray:
        """Latent pair -> soft images (N, 128, 64), values in (0, 1)."""
        z_p = np.atleast_2d(np.asarray(z_p, dtype=self.dtype))
        z_r = np.atleast_2d(np.asarray(z_r, dtype=self.dtype))
        if z_p.shape[1] != LATENT_DIM or z_r.shape[1] != LATENT_DIM:
            raise ValueError(f"latents must be (N, {LATENT_DIM}) each, "
                             f"got {z_p.shape} and {z_r.shape}")
        z = np.concatenate([z_p, z_r], axis=1)
        logits = self.nets["decoder"](T.Tensor(z))
        return T.sigmoid(logits).data[:, 0]

    def reconstruct(self, images, responses,
                    threshold: float | None = None) -> list[CrossSection]:
        """Binary reconstructions decode(mu(x), f_tau(y)) of paired data."""
        mu, _, _ = self.encode(images)
        z_r = self.encode_response(responses)
        soft = self.decode(mu, z_r)
        thr = self.threshold if threshold is None else threshold
        return [raster.binarize(s, thr) for s in soft]

    def generate_candidates(self, y_target, n: int = 100, seed: int = 0,
                            threshold: float | None = None) -> list[CrossSection]:
        """n binarized decodes of z_p ~ U(-1,1)^8 conditioned on y_target."""
        if n < 0:
            raise ValueError("candidate count must be non-negative")
        if n == 0:
            return []
        z_r = self.encode_response(np.asarray(y_target, dtype=np.float64).reshape(1, -1))
        z_p = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, LATENT_DIM))
        soft = self.decode(z_p.astype(self.dtype), np.repeat(z_r, n, axis=0))
        thr = self.threshold if threshold is None else threshold
        return [raster.binarize(s, thr) for s in soft]

    # -- persistence -------------------------------------------------------

    def save(self, path, seed: int, step: int, extra: dict | None = None) -> None:
        meta = {"threshold": self.threshold}
        meta.update(extra or {})
        save_checkpoint(path, self.nets, seed=seed, step=step, extra=meta)

    @classmethod
    def load(cls, path) -> "ArVae":
        nets, header = load_checkpoint(path)
        return cls(nets, threshold=header["extra"].get("threshold", DEFAULT_THRESHOLD))


# -- loss -----------------------------------------------------------------


def _loss_graph(model: ArVae, x: np.ndarray, y: np.ndarray, eps: np.ndarray,
                weights: tuple[float, float, float]):
    """Build the loss tape for one batch; returns (total, recon, kl, latent) Tensors."""
    n = x.shape[0]
    out = model.nets["feature_extractor"](T.Tensor(x))
    mu = T.narrow(out, 1, 0, LATENT_DIM)
    lv = T.narrow(out, 1, LATENT_DIM, LATENT_DIM)
    z_d = T.narrow(out, 1, 2 * LATENT_DIM, LATENT_DIM)
    z_p = T.add(mu, T.mul(T.Tensor(eps.astype(x.dtype)), T.exp(T.mul(lv, 0.5))))
    z_r = model.nets["response_encoder"](T.Tensor(y))
    logits = model.nets["decoder"](T.concat([z_p, z_r], axis=1))

    recon = T.mul(T.sum_all(T.bce_with_logits(logits, x)), 1.0 / n)
    # 1/2 sum(mu^2 + e^lv - 1 - lv), batch-meaned
    kl_terms = T.add(T.add(T.mul(mu, mu), T.exp(lv)), T.mul(T.add(lv, 1.0), -1.0))
    kl = T.mul(T.sum_all(kl_terms), 0.5 / n)
    diff = T.add(z_r, T.mul(z_d, -1.0))
    latent = T.mul(T.sum_all(T.mul(diff, diff)), 1.0 / n)

    w0, w1, w2 = weights
    total = T.add(T.add(T.mul(recon, w0), T.mul(kl, w1)), T.mul(latent, w2))
    return total, recon, kl, latent


def arvae_loss(model: ArVae, images, responses, seed: int = 0,
               weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
               ) -> tuple[float, float, float, float]:
    """Loss components on one batch with a seeded reparameterization draw."""
    x = _as_image_batch(images, model.dtype)
    y = _as_response_batch(responses, model.dtype)
    eps = np.random.default_rng(seed).standard_normal((x.shape[0], LATENT_DIM))
    total, recon, kl, latent = _loss_graph(model, x, y, eps, weights)
    values = (total.item(), recon.item(), kl.item(), latent.item())
    if not all(np.isfinite(values)):
        raise ArithmeticError(
            f"non-finite loss: total={values[0]}, recon={values[1]}, "
            f"kl={values[2]}, latent={values[3]}")
    return values


# -- training ---------------------------------------------------------------


def train_arvae(data: Dataset, cfg: TrainConfig, out_dir: str | Path) -> dict:
    """Train on the dataset's train split; write loss CSV and checkpoint.

    The checkpoint holds the networks at the best epoch-mean total loss.
    Deterministic for a given (dataset, config): initialization, batch
    order, and reparameterization draws all derive from cfg.seed.

    Returns a summary dict with file paths and best-epoch numbers.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dt = np.dtype(cfg.dtype)
    model = ArVae.initialize(cfg.seed, cfg.dtype, cfg.channels, cfg.threshold)
    params = []
    for name in ArVae.NET_NAMES:
        params.extend((f"{name}.{p_name}", p) for p_name, p in model.nets[name].params())
    opt = Adam(params, lr=cfg.learning_rate)

    train_ids, _ = data.split()
    images = np.stack([data.image(int(i)) for i in train_ids])  # uint8 (n,128,64)
    mean, std = data.standardization()
    responses = np.asarray(data.responses()[train_ids], dtype=np.float64)
    if cfg.standardize:
        responses = (responses - mean) / std
    responses = responses[:, None, :].astype(dt)

    loop_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
    n_train = train_ids.size
    csv_path = out / "loss_arvae.csv"
    ckpt_path = out / "arvae.ckpt"
    best = (np.inf, 0)
    step = 0
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "total", "recon", "kl", "latent"])
        for epoch in range(1, cfg.epochs + 1):
            order = loop_rng.permutation(n_train)
            sums = np.zeros(4)
            for lo in range(0, n_train, cfg.batch_size):
                idx = order[lo:lo + cfg.batch_size]
                x = images[idx][:, None].astype(dt)
                eps = loop_rng.standard_normal((idx.size, LATENT_DIM))
                opt.zero_grad()
                total, recon, kl, latent = _loss_graph(
                    model, x, responses[idx], eps, cfg.loss_weights)
                values = np.array([total.item(), recon.item(), kl.item(), latent.item()])
                if not np.all(np.isfinite(values)):
                    raise ArithmeticError(
                        f"non-finite loss at epoch {epoch}, step {step}: "
                        f"total={values[0]}, recon={values[1]}, kl={values[2]}, "
                        f"latent={values[3]}")
                total.backward()
                opt.step()
                step += 1
                sums += values * idx.size
            means = sums / n_train
            writer.writerow([epoch] + [f"{v:.9g}" for v in means])
            if means[0] < best[0]:
                best = (means[0], epoch)
                model.save(ckpt_path, seed=cfg.seed, step=step,
                           extra={"epoch": epoch, "total_loss": float(means[0]),
                                  "standardize": cfg.standardize})
    return {"checkpoint": str(ckpt_path), "loss_csv": str(csv_path),
            "best_total": float(best[0]), "best_epoch": int(best[1]),
            "epochs": cfg.epochs, "steps": step}
