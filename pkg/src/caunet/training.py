"""Mini-batch training loop with dual optimizer routing.

Non-negative tensors (CAN's U and V) take multiplicative updates; everything
else takes Adam. Both learning rates decay together, x0.95 every 500
updates. Sample order is an epoch-wise shuffle without replacement, drawn
from a dedicated RNG substream so data order is independent of the
weight-init draws. Deterministic: the same seed reproduces checkpoints bit
for bit, and resuming from a checkpoint continues the uninterrupted
trajectory exactly.
"""

import os
from dataclasses import asdict, dataclass

import numpy as np

from . import optim
from .checkpoint import load_checkpoint, save_checkpoint
from .data import get_task, read_rlds
from .layers import mse_loss
from .linalg import substream
from .model import ModelConfig, build_model

_SHUFFLE_TAG = 0x5F
_INIT_TAG = 0x11


class TrainingAborted(RuntimeError):
    """Loss went non-finite; the last good checkpoint is retained."""


@dataclass
class TrainConfig:
    task: str
    model_kind: str
    dataset: str
    batch_size: int = 100
    total_updates: int = 200_000
    alpha0: float = 0.005
    eta0: float = 0.005
    decay_factor: float = 0.95
    decay_every: int = 500
    eps_mul: float = 1e-20
    seed: int = 0
    checkpoint_every: int = 5000
    precision: str = "single"
    projected: bool = False  # ablation: projected Adam instead of mul update
    relation_units: int = 1200
    pooled_units: int = 300
    hidden: tuple = (100, 100)

    def __post_init__(self):
        if self.precision not in ("single", "double"):
            raise ValueError(f"precision must be single|double, got {self.precision!r}")
        self.hidden = tuple(int(h) for h in self.hidden)

    @property
    def dtype(self):
        return np.float32 if self.precision == "single" else np.float64

    def model_config(self):
        return ModelConfig(
            kind=self.model_kind,
            zdim=get_task(self.task).zdim,
            relation_units=self.relation_units,
            pooled_units=self.pooled_units,
            hidden=self.hidden,
        )


class Trainer:
    def __init__(self, config):
        self.config = config
        task, x, y, z = read_rlds(config.dataset)
        if task.name != get_task(config.task).name:
            raise ValueError(
                f"dataset task {task.name} does not match configured {config.task}"
            )
        dt = config.dtype
        self.x = np.ascontiguousarray(x, dtype=dt)
        self.y = np.ascontiguousarray(y, dtype=dt)
        self.z = np.ascontiguousarray(z, dtype=dt)
        self.model, self.registry = build_model(
            config.model_config(), substream(config.seed, _INIT_TAG), dtype=dt
        )
        self.step = 0
        self.alpha = config.alpha0
        self.eta = config.eta0
        self.sched = optim.LrSchedule(config.decay_factor, config.decay_every)
        self.shuffle_rng = substream(config.seed, _SHUFFLE_TAG)
        self.perm = self.shuffle_rng.permutation(self.x.shape[0])
        self.cursor = 0
        self.adam = {
            e.name: optim.AdamState(alpha=self.alpha)
            for e in self.registry.entries
            if e.constraint == "free" or config.projected
        }

    # -- batching ----------------------------------------------------------

    def _next_batch(self):
        b = self.config.batch_size
        if self.cursor + b > self.perm.size:
            self.perm = self.shuffle_rng.permutation(self.x.shape[0])
            self.cursor = 0
        idx = self.perm[self.cursor : self.cursor + b]
        self.cursor += b
        return self.x[idx], self.y[idx], self.z[idx]

    # -- one update --------------------------------------------------------

    def train_step(self):
        xb, yb, zb = self._next_batch()
        zhat, trace = self.model.forward(xb, yb)
        loss, grad = mse_loss(zhat, zb)
        grads = self.model.backward(trace, grad)
        mul_state = optim.MulUpdateState(eta=self.eta, eps=self.config.eps_mul)
        for entry in self.registry.entries:
            g = grads[entry.name]
            if entry.constraint == "nonneg" and not self.config.projected:
                entry.tensor[...] = optim.mul_step(entry.tensor, g, mul_state)
            else:
                st = self.adam[entry.name]
                st.alpha = self.alpha
                new = optim.adam_step(entry.tensor, g, st)
                if entry.constraint == "nonneg":
                    new = np.maximum(new, 0.0)
                entry.tensor[...] = new
        self.step += 1
        self.alpha, self.eta = optim.schedule_tick(
            self.step, self.sched, self.alpha, self.eta
        )
        return loss

    # -- run ---------------------------------------------------------------

    def run(self, checkpoint_path=None, log_path=None, log_every=100,
            progress=None):
        """Train until ``total_updates``; returns the final loss.

        Writes a loss CSV (step,loss,alpha,eta) and periodic checkpoints. On
        a non-finite loss the last good checkpoint is kept and
        :class:`TrainingAborted` is raised.
        """
        log_f = None
        if log_path:
            fresh = not os.path.exists(log_path) or self.step == 0
            log_f = open(log_path, "w" if fresh else "a")
            if fresh:
                log_f.write("step,loss,alpha,eta\n")
        loss = float("nan")
        try:
            while self.step < self.config.total_updates:
                loss = self.train_step()
                if not np.isfinite(loss):
                    raise TrainingAborted(
                        f"non-finite loss at update {self.step}; last checkpoint retained"
                    )
                if log_f and self.step % log_every == 0:
                    log_f.write(f"{self.step},{loss:.8g},{self.alpha:.8g},{self.eta:.8g}\n")
                if progress and self.step % 1000 == 0:
                    progress(self.step, loss)
                if (
                    checkpoint_path
                    and self.config.checkpoint_every
                    and self.step % self.config.checkpoint_every == 0
                ):
                    self.save(checkpoint_path)
            if checkpoint_path:
                self.save(checkpoint_path)
        finally:
            if log_f:
                log_f.close()
        return loss

    # -- checkpointing -----------------------------------------------------

    def save(self, path):
        cfg = asdict(self.config)
        cfg["hidden"] = list(cfg["hidden"])
        header = {
            "train_config": cfg,
            "model_config": self.model.config.to_dict(),
            "step": self.step,
            "alpha": self.alpha,
            "eta": self.eta,
            "cursor": int(self.cursor),
            "rng_state": self.shuffle_rng.bit_generator.state,
            "adam_t": {k: st.t for k, st in self.adam.items()},
        }
        tensors = {}
        for e in self.registry.entries:
            tensors[f"param.{e.name}"] = e.tensor
        for name, st in self.adam.items():
            if st.m is not None:
                tensors[f"adam.m.{name}"] = st.m
                tensors[f"adam.v.{name}"] = st.v
        tensors["perm"] = self.perm.astype(np.int64)
        save_checkpoint(path, header, tensors)

    @classmethod
    def resume(cls, path):
        header, tensors = load_checkpoint(path)
        cfg_d = dict(header["train_config"])
        cfg_d["hidden"] = tuple(cfg_d["hidden"])
        trainer = cls(TrainConfig(**cfg_d))
        trainer.restore(header, tensors)
        return trainer

    def restore(self, header, tensors):
        self.step = header["step"]
        self.alpha = header["alpha"]
        self.eta = header["eta"]
        self.cursor = header["cursor"]
        self.shuffle_rng.bit_generator.state = header["rng_state"]
        self.perm = tensors["perm"].astype(np.intp)
        for e in self.registry.entries:
            e.tensor[...] = tensors[f"param.{e.name}"]
        for name, st in self.adam.items():
            st.t = header["adam_t"][name]
            if f"adam.m.{name}" in tensors:
                st.m = tensors[f"adam.m.{name}"]
                st.v = tensors[f"adam.v.{name}"]


def load_model_from_checkpoint(path):
    """Rebuild just the model (for evaluation) from a checkpoint file."""
    header, tensors = load_checkpoint(path)
    mcfg = ModelConfig.from_dict(header["model_config"])
    precision = header["train_config"].get("precision", "single")
    dt = np.float32 if precision == "single" else np.float64
    model, registry = build_model(mcfg, substream(0, _INIT_TAG), dtype=dt)
    for e in registry.entries:
        e.tensor[...] = tensors[f"param.{e.name}"]
    return model, header
