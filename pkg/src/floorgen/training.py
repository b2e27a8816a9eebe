"""Pixel-wise cross-entropy training with adaptive moments and checkpoints.

Batch order is a pure function of (seed, epoch), so resuming from a
checkpoint replays exactly the batches an uninterrupted run would have seen.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .checkpoint import read_container, split_model_tensors, write_container
from .data import BatchTensors, Sample, pack_batch
from .errors import (
    ClassOutOfRange,
    ConfigError,
    DimensionMismatch,
    EmptyMaskError,
    NonFiniteLossError,
)
from .nn.model import ForwardCaches, ModelConfig, ModelParams, backward, forward_logits, init_model
from .palette import ClassPalette

log = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8

LOSS_MASK_MODES = ("all_pixels", "interior_only")
LR_SCHEDULES = ("constant", "cosine")


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    batch_size: int = 4
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    class_weights: Optional[tuple[float, ...]] = None
    loss_mask_mode: str = "all_pixels"
    seed: int = 0
    checkpoint_every: int = 100
    eval_every: int = 50
    lr_schedule: str = "constant"

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if min(self.batch_size, self.checkpoint_every, self.eval_every) < 1:
            raise ConfigError("batch_size/checkpoint_every/eval_every must be >= 1")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate and weight_decay must be >= 0")
        if self.class_weights is not None and any(w <= 0 for w in self.class_weights):
            raise ConfigError("class_weights must all be > 0")
        if self.loss_mask_mode not in LOSS_MASK_MODES:
            raise ConfigError(f"loss_mask_mode must be one of {LOSS_MASK_MODES}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ConfigError(f"lr_schedule must be one of {LR_SCHEDULES}")


@dataclass
class TrainState:
    params: ModelParams
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    step: int
    best_val: Optional[float]
    seed: int
    rng: np.random.Generator


def init_train_state(model_cfg: ModelConfig, cfg: TrainConfig) -> TrainState:
    params = init_model(model_cfg, cfg.seed)
    zeros = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    return TrainState(
        params=params,
        adam_m=zeros,
        adam_v={k: np.zeros_like(v) for k, v in params.tensors.items()},
        step=0,
        best_val=None,
        seed=cfg.seed,
        rng=np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, 0x7A31))),
    )


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------


def _ce_pieces(logits, target, weights, mask):
    b, c, h, w = logits.shape
    if target.shape != (b, h, w):
        raise DimensionMismatch(f"target {target.shape} vs logits {logits.shape}")
    if target.min() < 0 or target.max() >= c:
        raise ClassOutOfRange(f"target values outside [0, {c})")
    if mask is None:
        mask = np.ones((b, h, w), dtype=bool)
    elif mask.shape != (b, h, w):
        raise DimensionMismatch(f"mask {mask.shape} vs logits {logits.shape}")
    count = int(mask.sum())
    if count == 0:
        raise EmptyMaskError("loss mask excludes every pixel")
    zmax = logits.max(axis=1, keepdims=True)
    z = logits - zmax
    lse = np.log(np.exp(z).sum(axis=1))
    z_t = np.take_along_axis(z, target[:, None], axis=1)[:, 0]
    logp_t = z_t - lse
    if weights is not None:
        weights = np.asarray(weights, dtype=logits.dtype)
        if weights.shape != (c,):
            raise DimensionMismatch(f"class weights must have length {c}")
        w_t = weights[target]
    else:
        w_t = np.ones_like(logp_t)
    per_px = -w_t * logp_t
    loss = float(per_px[mask].sum() / count)
    return loss, (z, lse, w_t, mask, count)


def pixel_cross_entropy(logits, target, weights=None, mask=None) -> float:
    """Mean over unmasked pixels of weighted negative log-likelihood."""
    return _ce_pieces(logits, target, weights, mask)[0]


def pixel_cross_entropy_with_grad(logits, target, weights=None, mask=None):
    loss, (z, lse, w_t, mask, count) = _ce_pieces(logits, target, weights, mask)
    p = np.exp(z - lse[:, None])
    onehot = np.zeros_like(p)
    np.put_along_axis(onehot, target[:, None], 1.0, axis=1)
    scale = (w_t * mask / count)[:, None]
    return loss, ((p - onehot) * scale).astype(logits.dtype)


def loss_mask_for(batch: BatchTensors, mode: str) -> Optional[np.ndarray]:
    """all_pixels scores everything; interior_only drops exterior pixels."""
    if mode == "all_pixels":
        return None
    return batch.boundaries[:, 1] == 1.0


# ---------------------------------------------------------------------------
# Optimizer step
# ---------------------------------------------------------------------------


def _decayed(name: str) -> bool:
    # decoupled decay applies to conv/linear weights, not norms or biases
    return name.endswith(".w")


def _schedule_lr(cfg: TrainConfig, step: int) -> float:
    if cfg.lr_schedule == "cosine" and cfg.steps > 0:
        return cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * step / cfg.steps))
    return cfg.learning_rate


def train_step(state: TrainState, batch: BatchTensors, cfg: TrainConfig) -> tuple[TrainState, float]:
    """One forward/backward pass and one adaptive-moment update, in place."""
    params = state.params
    caches = ForwardCaches()
    logits = forward_logits(params, batch, caches)
    mask = loss_mask_for(batch, cfg.loss_mask_mode)
    weights = np.asarray(cfg.class_weights, dtype=np.float32) if cfg.class_weights else None
    loss, dlogits = pixel_cross_entropy_with_grad(logits, batch.targets, weights, mask)
    if not np.isfinite(loss):
        raise NonFiniteLossError(_diagnose_nonfinite(params, {"logits": logits}))
    grads = backward(params, batch, caches, dlogits)
    bad = next((k for k, g in grads.items() if not np.isfinite(g).all()), None)
    if bad is not None:
        raise NonFiniteLossError(f"non-finite gradient in tensor {bad!r} at step {state.step}")

    t = state.step + 1
    lr = _schedule_lr(cfg, state.step)
    bc1 = 1.0 - BETA1**t
    bc2 = 1.0 - BETA2**t
    for name, p in params.tensors.items():
        g = grads[name]
        m = state.adam_m[name]
        v = state.adam_v[name]
        m *= BETA1
        m += (1 - BETA1) * g
        v *= BETA2
        v += (1 - BETA2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        if cfg.weight_decay and _decayed(name):
            update = update + cfg.weight_decay * p
        p -= (lr * update).astype(p.dtype)
    state.step = t
    return state, loss


def _diagnose_nonfinite(params: ModelParams, extra: dict) -> str:
    for name, t in list(params.tensors.items()) + list(extra.items()):
        if not np.isfinite(t).all():
            return f"non-finite values first seen in tensor {name!r}"
    return "loss is non-finite but all tensors are finite (overflow in reduction)"


# ---------------------------------------------------------------------------
# Checkpoint round trip
# ---------------------------------------------------------------------------


def save_checkpoint(state: TrainState, path: Path) -> None:
    tensors: dict[str, np.ndarray] = dict(state.params.tensors)
    for k, v in state.adam_m.items():
        tensors[f"adam_m.{k}"] = v
    for k, v in state.adam_v.items():
        tensors[f"adam_v.{k}"] = v
    meta = {
        "model_config": state.params.config.to_dict(),
        "model_version": state.params.version,
        "train_seed": state.seed,
        "step": state.step,
        "best_val": state.best_val,
        "rng_state": json.loads(json.dumps(state.rng.bit_generator.state)),
    }
    write_container(path, tensors, meta)


def load_checkpoint(path: Path) -> TrainState:
    header, tensors = read_container(path)
    params, m, v = split_model_tensors(header, tensors)
    if set(m) != set(params.tensors) or set(v) != set(params.tensors):
        # a bare-params container still loads, with fresh moments
        m = {k: np.zeros_like(t) for k, t in params.tensors.items()}
        v = {k: np.zeros_like(t) for k, t in params.tensors.items()}
    rng = np.random.default_rng()
    rng.bit_generator.state = header["rng_state"]
    return TrainState(
        params=params,
        adam_m=m,
        adam_v=v,
        step=int(header["step"]),
        best_val=header.get("best_val"),
        seed=int(header["train_seed"]),
        rng=rng,
    )


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xE90C, epoch))).permutation(n)


def batch_indices_for_step(seed: int, step: int, n: int, batch_size: int) -> np.ndarray:
    """Deterministic batch composition for a global step (stateless)."""
    steps_per_epoch = math.ceil(n / batch_size)
    epoch, offset = divmod(step, steps_per_epoch)
    perm = _epoch_permutation(seed, epoch, n)
    return perm[offset * batch_size : (offset + 1) * batch_size]


@dataclass
class TrainResult:
    state: TrainState
    history: list[dict] = field(default_factory=list)
    history_path: Optional[Path] = None


def train_loop(
    train_samples: Sequence[Sample],
    cfg: TrainConfig,
    model_cfg: ModelConfig,
    palette: ClassPalette,
    out_dir: Path,
    val_samples: Optional[Sequence[Sample]] = None,
    target_hw: Optional[tuple[int, int]] = None,
    resume_from: Optional[Path] = None,
) -> TrainResult:
    """Seed-shuffled epochs over the training set with periodic validation.

    Checkpoints land in out_dir every `checkpoint_every` steps, on every new
    best validation mIoU, and at the end; metrics history is JSON-lines.
    """
    from .evaluation import challenge_metrics, confusion_from_samples

    if not train_samples:
        raise ConfigError("training set is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if val_samples is None:
        val_samples = train_samples
    if target_hw is None:
        target_hw = (train_samples[0].boundary.height, train_samples[0].boundary.width)

    state = load_checkpoint(resume_from) if resume_from else init_train_state(model_cfg, cfg)
    n = len(train_samples)
    history: list[dict] = []
    history_path = out / "history.jsonl"
    loss_window: list[float] = []

    def evaluate_now() -> dict:
        cm = confusion_from_samples(state.params, val_samples, palette)
        report = challenge_metrics(cm, palette)
        return {
            "val_miou_with_bg": report.iou_with_bg,
            "val_miou_without_bg": report.iou_without_bg,
            "val_iou_structure": report.iou_structure,
        }

    with history_path.open("w", encoding="utf-8") as hist_fh:
        while state.step < cfg.steps:
            idx = batch_indices_for_step(cfg.seed, state.step, n, cfg.batch_size)
            batch = pack_batch([train_samples[i] for i in idx], target_hw, palette)
            state, loss = train_step(state, batch, cfg)
            loss_window.append(loss)
            if state.step % cfg.eval_every == 0 or state.step == cfg.steps:
                record = {"step": state.step, "train_loss": float(np.mean(loss_window))}
                record.update(evaluate_now())
                loss_window.clear()
                history.append(record)
                hist_fh.write(json.dumps(record) + "\n")
                hist_fh.flush()
                log.info(
                    "step %d loss %.4f val mIoU(w/bg) %.4f",
                    record["step"],
                    record["train_loss"],
                    record["val_miou_with_bg"],
                )
                miou = record["val_miou_with_bg"]
                if miou is not None and (state.best_val is None or miou > state.best_val):
                    state.best_val = miou
                    save_checkpoint(state, out / "checkpoint-best.ckpt")
            if state.step % cfg.checkpoint_every == 0:
                save_checkpoint(state, out / f"checkpoint-{state.step:06d}.ckpt")
    save_checkpoint(state, out / "checkpoint-final.ckpt")
    return TrainResult(state=state, history=history, history_path=history_path)
