"""Training loops for the step-1 (box) and step-2 (endpoint) models."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..data import AugmentationConfig
from ..errors import ConfigError, TrainingDiverged
from ..geometry import dice
from ..losses import (LossWeights, cons1_loss, cons2_loss, heatmap_loss,
                      regression_loss, seg_loss, total_loss)
from ..model import MeasurementNet, ModelConfig
from ..numcore import Adam, AdamConfig, no_grad
from ..numcore import tensor as T
from .supervision import build_step1_sample, build_step2_sample


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 8
    lr: float = 1e-3
    lr_drop_fracs: tuple = (0.5, 0.75)   # x0.1 at these fractions of `steps`
    lr_drop_factor: float = 0.1
    seed: int = 0
    sigma: float = 5.0
    weights: LossWeights = field(default_factory=LossWeights)
    augmentation: AugmentationConfig | None = field(default_factory=AugmentationConfig)
    use_consistency: bool | None = None  # None: step2 yes, step1 no
    val_every: int = 200
    val_size: int = 8

    def __post_init__(self):
        if any(f >= 1.0 for f in self.lr_drop_fracs):
            raise ConfigError("lr drops must fall before the end of training")

    def lr_at(self, step):
        lr = self.lr
        for f in self.lr_drop_fracs:
            if step >= int(f * self.steps):
                lr *= self.lr_drop_factor
        return lr


def _build_batch(variant, phantoms, idxs, input_size, rng, aug_cfg, sigma):
    build = build_step2_sample if variant == "step2" else build_step1_sample
    inputs, sups = [], []
    for i in idxs:
        inp, sup = build(phantoms[i], input_size, rng, aug_cfg, sigma)
        inputs.append(inp)
        sups.append(sup)
    x = np.stack(inputs)
    gt_masks = np.stack([s.gt_mask for s in sups])[:, None]
    gt_heat = np.stack([s.gt_heatmaps for s in sups])
    gt_kp = np.stack([s.gt_keypoints for s in sups])
    return x, gt_masks, gt_heat, gt_kp


def training_losses(model, x, gt_masks, gt_heat, gt_kp, weights,
                    use_consistency, train_seg=True):
    head, kp_layers = model(x)
    parts = {
        "heatmap": heatmap_loss(head.heatmaps, gt_heat),
        "regression": regression_loss(kp_layers, gt_kp),
    }
    parts["seg"] = (seg_loss(head.seg, gt_masks) if train_seg
                    else T.Tensor(np.zeros((), dtype=np.float32)))
    flags = []
    if use_consistency:
        parts["cons_heatmap"] = cons1_loss(head.heatmaps, kp_layers[-1])
        c2, flags = cons2_loss(head.seg, kp_layers[-1])
        parts["cons_boundary"] = c2
    loss, logs = total_loss(parts, weights, include_consistency=use_consistency)
    return loss, logs, flags


def validate(model, variant, phantoms, input_size, sigma, seed):
    """Dice + mean endpoint error (px) on clean (non-augmented) samples."""
    build = build_step2_sample if variant == "step2" else build_step1_sample
    dices, kp_errs = [], []
    model.eval()
    for i, p in enumerate(phantoms):
        rng = np.random.default_rng((seed, i))
        inp, sup = build(p, input_size, rng, None, sigma)
        with no_grad():
            head, kps = model(inp)
        pred_mask = head.seg.data[0, 0] >= 0.5
        dices.append(dice(pred_mask, sup.gt_mask >= 0.5))
        err = np.abs(kps[-1].data[0] - sup.gt_keypoints) * (input_size - 1)
        kp_errs.append(float(np.linalg.norm(err, axis=-1).mean()))
    model.train()
    return float(np.mean(dices)), float(np.mean(kp_errs))


def train(variant, phantoms, cfg: TrainConfig, model_cfg: ModelConfig | None = None,
          log_fh=None):
    """Returns (model, log_records).  `variant` is "step1" or "step2".

    Raises TrainingDiverged on a non-finite loss.  With a fixed seed the
    whole run, including the log records, is reproducible.
    """
    if variant not in ("step1", "step2"):
        raise ConfigError(f"unknown variant {variant!r}")
    if not phantoms:
        raise ConfigError("training needs a non-empty dataset")
    if model_cfg is None:
        model_cfg = ModelConfig.desk(n_queries=4 if variant == "step2" else 2,
                                     seed=cfg.seed)
    model = MeasurementNet(model_cfg)
    model.reseed(cfg.seed + 0x5eed)
    model.train()
    use_cons = cfg.use_consistency
    if use_cons is None:
        use_cons = variant == "step2"
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.parameters(), AdamConfig(lr=cfg.lr))
    records = []

    def emit(rec):
        records.append(rec)
        if log_fh is not None:
            log_fh.write(json.dumps(rec, sort_keys=True) + "\n")

    for step in range(cfg.steps):
        opt.set_lr(cfg.lr_at(step))
        idxs = rng.integers(0, len(phantoms), cfg.batch_size)
        x, gm, gh, gk = _build_batch(variant, phantoms, idxs,
                                     model_cfg.input_size, rng,
                                     cfg.augmentation, cfg.sigma)
        loss, logs, flags = training_losses(
            model, x, gm, gh, gk, cfg.weights, use_cons,
            train_seg=model_cfg.train_seg_head)
        if not math.isfinite(logs["total"]):
            raise TrainingDiverged(f"non-finite loss at step {step}: {logs}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        rec = {"step": step, "lr": opt.lr, **{f"loss_{k}": v for k, v in logs.items()}}
        if flags:
            rec["flags"] = sorted(set(flags))
        emit(rec)
        if cfg.val_every and (step + 1) % cfg.val_every == 0:
            vd, ve = validate(model, variant, phantoms[:cfg.val_size],
                              model_cfg.input_size, cfg.sigma, cfg.seed)
            emit({"step": step, "val_dice": vd, "val_kp_err_px": ve})

    model.eval()
    return model, records
