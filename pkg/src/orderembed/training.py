"""Training loop: epochs of Adam over a fixed triplet corpus.

Determinism contract: the batch gradient is always accumulated over
fixed 16-triplet chunks summed in chunk order, so running with one
worker thread or many produces bit-identical parameters. Per-epoch
shuffles are derived from (seed, epoch), which makes resuming from a
checkpoint reproduce the uninterrupted trajectory exactly.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .encoder import EncoderConfig, EncoderParams, init_params, \
    triplet_batch_grads
from .features import FeatureSet, NormalizationStats
from .optim import AdamConfig, AdamState, adam_step

GRAD_CHUNK = 16          # fixed reduction granularity; do not tune per run
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0
    dtype: str = "float32"     # training precision ("float32" | "float64")
    threads: int = 1
    checkpoint_every: int = 0  # epochs between mid-run checkpoints; 0 = off

    def validate(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")
        self.adam.validate()

    def to_dict(self) -> dict:
        # threads is an execution detail, not part of the model: leaving
        # it out keeps checkpoints byte-identical across --threads.
        return {"epochs": self.epochs, "batch_size": self.batch_size,
                "adam": self.adam.to_dict(), "seed": self.seed,
                "dtype": self.dtype,
                "checkpoint_every": self.checkpoint_every}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d.pop("threads", None)
        d["adam"] = AdamConfig.from_dict(d["adam"])
        return cls(**d)


@dataclass
class Checkpoint:
    """Everything needed to evaluate or resume a training run."""

    encoder_config: EncoderConfig
    params: EncoderParams
    adam_state: AdamState
    train_config: TrainConfig
    norm: NormalizationStats | None
    epoch: int                  # epochs completed so far
    loss_history: list[float]
    version: int = CHECKPOINT_VERSION

    @property
    def feature_set(self) -> FeatureSet | None:
        return self.norm.feature_set if self.norm is not None else None

    def save(self, path) -> None:
        """JSON container; text, so identical runs give identical bytes."""
        doc = {
            "version": self.version,
            "encoder_config": self.encoder_config.to_dict(),
            "train_config": self.train_config.to_dict(),
            "epoch": self.epoch,
            "loss_history": self.loss_history,
            "params": [a.ravel().tolist() for a in self.params.arrays],
            "adam_m": [a.ravel().tolist() for a in self.adam_state.m],
            "adam_v": [a.ravel().tolist() for a in self.adam_state.v],
            "adam_t": self.adam_state.t,
            "norm": self.norm.to_dict() if self.norm is not None else None,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version "
                             f"{doc.get('version')}")
        enc = EncoderConfig.from_dict(doc["encoder_config"])
        tc = TrainConfig.from_dict(doc["train_config"])
        dtype = np.dtype(tc.dtype)
        shapes = _param_shapes(enc)
        params = EncoderParams.from_arrays(
            [np.asarray(flat, dtype=np.float64).astype(dtype).reshape(shape)
             for flat, shape in zip(doc["params"], shapes)])
        state = AdamState(
            m=[np.asarray(flat, np.float64).astype(dtype).reshape(shape)
               for flat, shape in zip(doc["adam_m"], shapes)],
            v=[np.asarray(flat, np.float64).astype(dtype).reshape(shape)
               for flat, shape in zip(doc["adam_v"], shapes)],
            t=int(doc["adam_t"]))
        norm = (NormalizationStats.from_dict(doc["norm"])
                if doc["norm"] is not None else None)
        return cls(encoder_config=enc, params=params, adam_state=state,
                   train_config=tc, norm=norm, epoch=int(doc["epoch"]),
                   loss_history=[float(x) for x in doc["loss_history"]])


def _param_shapes(config: EncoderConfig) -> list[tuple]:
    shapes = []
    for width_in, h in ((config.input_width, config.hidden1),
                        (config.hidden1, config.hidden2)):
        shapes.extend([(4 * h, width_in), (4 * h, h), (4 * h,)])
    return shapes


def _epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, epoch, n])))
    return rng.permutation(n)


def _batch_gradient(params, fa, fp, fn, margin, pool):
    """Chunked loss/gradient over one batch, reduced in fixed order."""
    spans = [slice(lo, min(lo + GRAD_CHUNK, len(fa)))
             for lo in range(0, len(fa), GRAD_CHUNK)]

    def work(span):
        return triplet_batch_grads(params, fa[span], fp[span], fn[span],
                                   margin)

    if pool is None:
        results = [work(s) for s in spans]
    else:
        results = list(pool.map(work, spans))
    losses = np.concatenate([r[0] for r in results])
    grads = [np.copy(g) for g in results[0][1]]
    for _, chunk_grads in results[1:]:
        for total, g in zip(grads, chunk_grads):
            total += g
    return losses, grads


def train(features: np.ndarray, triplets: np.ndarray,
          encoder_config: EncoderConfig, train_config: TrainConfig,
          norm: NormalizationStats | None = None,
          checkpoint_path=None, resume: Checkpoint | None = None,
          log=None) -> Checkpoint:
    """Train the encoder on a fixed triplet corpus.

    ``features`` is the (n_windows, 50, p) array the triplet indices
    point into. Returns the final checkpoint; per-epoch mean loss is in
    its loss_history. Aborts on non-finite loss.
    """
    train_config.validate()
    encoder_config.validate()
    triplets = np.asarray(triplets, dtype=np.int64)
    if triplets.ndim != 2 or triplets.shape[1] != 3:
        raise ValueError("triplets must be an (n, 3) index array")
    if features.ndim != 3 or features.shape[2] != encoder_config.input_width:
        raise ValueError("feature array does not match encoder input width")
    dtype = np.dtype(train_config.dtype)
    feat = np.ascontiguousarray(features, dtype=dtype)

    if resume is not None:
        params = resume.params
        state = resume.adam_state
        history = list(resume.loss_history)
        start_epoch = resume.epoch
        if resume.encoder_config != encoder_config:
            raise ValueError("resume checkpoint has a different encoder config")
    else:
        params = init_params(encoder_config, train_config.seed, dtype=dtype)
        state = AdamState.zeros_like(params.arrays)
        history = []
        start_epoch = 0

    pool = (ThreadPoolExecutor(max_workers=train_config.threads)
            if train_config.threads > 1 else None)
    margin = encoder_config.margin
    try:
        for epoch in range(start_epoch, train_config.epochs):
            order = _epoch_order(train_config.seed, epoch, len(triplets))
            epoch_losses = []
            for lo in range(0, len(order), train_config.batch_size):
                tb = triplets[order[lo:lo + train_config.batch_size]]
                fa, fp, fn = feat[tb[:, 0]], feat[tb[:, 1]], feat[tb[:, 2]]
                losses, grads = _batch_gradient(params, fa, fp, fn, margin,
                                                pool)
                if not np.all(np.isfinite(losses)):
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch}, batch {lo}")
                scale = dtype.type(1.0 / len(tb))
                adam_step(params.arrays, [g * scale for g in grads], state,
                          train_config.adam)
                epoch_losses.append(losses)
            mean_loss = float(np.mean(np.concatenate(epoch_losses)))
            history.append(mean_loss)
            if log is not None:
                log(f"epoch {epoch + 1}/{train_config.epochs} "
                    f"mean_loss={mean_loss:.6f}")
            done = epoch + 1
            if checkpoint_path and train_config.checkpoint_every and \
                    done % train_config.checkpoint_every == 0 and \
                    done < train_config.epochs:
                _mid_checkpoint(encoder_config, params, state, train_config,
                                norm, done, history, checkpoint_path)
    finally:
        if pool is not None:
            pool.shutdown()

    ckpt = Checkpoint(encoder_config=encoder_config, params=params,
                      adam_state=state, train_config=train_config, norm=norm,
                      epoch=train_config.epochs, loss_history=history)
    if checkpoint_path:
        ckpt.save(checkpoint_path)
    return ckpt


def _mid_checkpoint(enc, params, state, tc, norm, epoch, history, path):
    p = Path(path)
    mid = p.with_name(f"{p.stem}.epoch{epoch}{p.suffix}")
    Checkpoint(encoder_config=enc,
               params=EncoderParams.from_arrays(
                   [a.copy() for a in params.arrays]),
               adam_state=AdamState(m=[a.copy() for a in state.m],
                                    v=[a.copy() for a in state.v], t=state.t),
               train_config=tc, norm=norm, epoch=epoch,
               loss_history=list(history)).save(mid)


def save_loss_history(path, history: list[float]) -> None:
    pd.DataFrame({"epoch": np.arange(1, len(history) + 1),
                  "mean_loss": history}).to_csv(path, index=False)
