"""Training loop for the line recognizer.

Batches are padded to the widest line (with the ~0 post-normalization
background), each sample keeps its own frame count for the CTC loss, and
the learning rate follows the WER-plateau schedule.  Everything is
deterministic given the config seed (single-threaded).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..corpus import Charset
from ..lineproc import LineCrop, augment_line, normalize_line, resize_to_height
from .ctc import ctc_loss
from .model import Model, ModelSpec, build_fiducial_model, frames_for_width
from .optim import AdamW, PlateauScheduler
from .tensorio import ModelWeights


class TrainingDiverged(Exception):
    pass


@dataclass
class TrainConfig:
    lr0: float = 1e-3
    weight_decay: float = 1e-2
    plateau_patience: int = 10
    lr_factor: float = 1.0 / 3.0
    lr_min: float = 1e-5
    max_epochs: int = 250
    batch_size: int = 16
    seed: int = 0
    val_fraction: float = 0.1
    augment: bool = True

    def __post_init__(self) -> None:
        if self.lr_min > self.lr0:
            raise ValueError("lr_min must not exceed lr0")
        if self.plateau_patience < 1:
            raise ValueError("plateau_patience must be >= 1")


@dataclass
class TrainSample:
    """A pre-normalization line crop with its ground-truth text."""

    crop: LineCrop
    text: str


@dataclass
class EpochStats:
    epoch: int
    loss: float
    cer: float
    wer: float
    lr: float


def history_csv(history: list[EpochStats]) -> str:
    rows = ["epoch,loss,cer,wer,lr"]
    rows += [f"{h.epoch},{h.loss:.6f},{h.cer:.3f},{h.wer:.3f},{h.lr:.8f}" for h in history]
    return "\n".join(rows) + "\n"


def _prepare(sample: TrainSample, spec: ModelSpec, augment_seed: int | None) -> np.ndarray:
    crop = sample.crop
    if augment_seed is not None:
        crop = augment_line(crop, augment_seed)
    line = normalize_line(crop)
    return resize_to_height(line, spec.input_height).pixels


def _micro_rates(model: Model, spec: ModelSpec, samples: list[TrainSample], charset: Charset) -> tuple[float, float]:
    from ..decode import greedy_decode
    from ..evaluate import edit_distance

    char_edits = char_len = word_edits = word_len = 0
    for sample in samples:
        pixels = _prepare(sample, spec, augment_seed=None)
        logits = model.forward(pixels[None, None], train=False)[0]
        hyp = greedy_decode(logits, charset)
        ref = sample.text
        char_edits += edit_distance(ref, hyp)
        char_len += len(ref)
        word_edits += edit_distance(ref.split(), hyp.split())
        word_len += len(ref.split())
    cer = 100.0 * char_edits / max(char_len, 1)
    wer = 100.0 * word_edits / max(word_len, 1)
    return cer, wer


def train(
    samples: list[TrainSample],
    charset: Charset,
    config: TrainConfig,
    spec: ModelSpec | None = None,
    epoch_callback=None,
) -> tuple[ModelWeights, list[EpochStats]]:
    """Train a recognizer; returns the final weights and per-epoch history.

    A seed-determined fraction of the samples is held out as the validation
    split that drives the plateau schedule (never the test set); with
    ``val_fraction=0`` the schedule and history metrics are computed on the
    training lines themselves.
    """
    if not samples:
        raise ValueError("no training samples")
    spec = spec or build_fiducial_model(charset.num_classes - 1)
    if spec.n_char != len(charset.chars):
        raise ValueError(f"spec built for {spec.n_char} characters, charset has {len(charset.chars)}")

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(samples))
    n_val = int(round(config.val_fraction * len(samples)))
    val_set = [samples[i] for i in order[:n_val]]
    train_set = [samples[i] for i in order[n_val:]]
    if not train_set:
        raise ValueError("val_fraction leaves no training samples")
    metric_set = val_set if val_set else train_set

    model = Model(spec, seed=config.seed)
    optimizer = AdamW(model.params(), lr=config.lr0, weight_decay=config.weight_decay)
    scheduler = PlateauScheduler(
        config.lr0, factor=config.lr_factor, patience=config.plateau_patience, min_lr=config.lr_min
    )

    targets = [charset.encode(s.text) for s in train_set]
    history: list[EpochStats] = []
    warned_infeasible = False

    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(len(train_set))
        epoch_loss = 0.0
        n_losses = 0
        for batch_no, start in enumerate(range(0, len(perm), config.batch_size)):
            idxs = perm[start:start + config.batch_size]
            pixels = []
            for i in idxs:
                aug_seed = None
                if config.augment:
                    aug_seed = (config.seed * 1_000_003 + epoch) * 1_000_003 + int(i)
                pixels.append(_prepare(train_set[i], spec, aug_seed))
            widths = [p.shape[1] for p in pixels]
            w_max = max(widths)
            batch = np.zeros((len(idxs), 1, spec.input_height, w_max), dtype=np.float32)
            for b, p in enumerate(pixels):
                batch[b, 0, :, : p.shape[1]] = p

            logits = model.forward(batch, train=True)
            dlogits = np.zeros_like(logits)
            batch_losses = []
            for b, i in enumerate(idxs):
                n_frames = frames_for_width(spec, widths[b])
                result = ctc_loss(logits[b, :n_frames], targets[i], grad=True)
                if result.infeasible:
                    if not warned_infeasible:
                        warnings.warn("skipping sample(s) with more labels than frames")
                        warned_infeasible = True
                    continue
                batch_losses.append(result.loss)
                dlogits[b, :n_frames] = result.grad
            if not batch_losses:
                continue
            dlogits /= len(batch_losses)
            batch_loss = float(np.mean(batch_losses))
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {batch_no}")
            epoch_loss += batch_loss * len(batch_losses)
            n_losses += len(batch_losses)

            model.zero_grads()
            model.backward(dlogits)
            optimizer.lr = scheduler.lr
            optimizer.step(model.grads())

        cer, wer = _micro_rates(model, spec, metric_set, charset)
        lr_after = scheduler.step(wer)
        stats = EpochStats(
            epoch=epoch,
            loss=epoch_loss / max(n_losses, 1),
            cer=cer,
            wer=wer,
            lr=lr_after,
        )
        history.append(stats)
        if epoch_callback is not None:
            epoch_callback(stats)

    weights = ModelWeights(tensors={k: v.copy() for k, v in model.state().items()},
                           spec=spec, charset=charset)
    return weights, history
