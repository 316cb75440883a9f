"""Self-supervised pretraining loop with JSON-lines logging."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .errors import ConfigError
from .model import LossBundle, ModelConfig, SSLModel
from .preprocess import StagedRecording


def stack_dataset(recordings: list[StagedRecording]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate all epochs; returns (epochs, labels, subject index)."""
    if not recordings:
        raise ConfigError("empty dataset")
    epochs = np.concatenate([r.epochs for r in recordings])
    labels = np.concatenate([r.labels for r in recordings])
    subject_idx = np.concatenate(
        [np.full(r.n_epochs, i, dtype=np.int64) for i, r in enumerate(recordings)]
    )
    return epochs, labels, subject_idx


def pretrain(
    recordings: list[StagedRecording],
    cfg: ModelConfig,
    out_dir: str | Path | None = None,
    deterministic: bool = False,
    max_steps: int | None = None,
    log_every: int = 1,
) -> tuple[SSLModel, list[LossBundle]]:
    """Run SSL pretraining and optionally save a checkpoint bundle.

    With ``deterministic=True`` the loss trajectory depends only on
    ``cfg.seed`` and the data: parameter init, batch order and mask plans all
    derive from it.
    """
    if deterministic:
        torch.manual_seed(cfg.seed)
        torch.use_deterministic_algorithms(True)
    else:
        torch.manual_seed(cfg.seed)
    model = SSLModel(cfg)
    model.train()
    optim = torch.optim.AdamW(
        model.parameters(),
        lr=cfg.optim.lr,
        betas=cfg.optim.betas,
        weight_decay=cfg.optim.weight_decay,
    )
    epochs_arr, _, _ = stack_dataset(recordings)
    data = torch.from_numpy(epochs_arr.astype(np.float32))
    n = data.shape[0]
    if n < 2:
        raise ConfigError("need at least 2 epochs to pretrain")
    batch_size = min(cfg.optim.batch_size, n)
    order_rng = np.random.default_rng(cfg.seed)

    log_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "train_log.jsonl"
        log_path.write_text("")

    history: list[LossBundle] = []
    step = 0
    done = False
    for _ in range(cfg.optim.epochs):
        order = order_rng.permutation(n)
        for start in range(0, n - 1, batch_size):
            idx = order[start : start + batch_size]
            if idx.size < 2:
                continue
            t0 = time.perf_counter()
            total, bundle = model.ssl_losses(
                data[idx], sample_ids=[int(i) for i in idx]
            )
            optim.zero_grad()
            total.backward()
            optim.step()
            if not bundle.check_identity(cfg.alpha):
                raise ConfigError("combined-loss identity violated")
            history.append(bundle)
            step += 1
            if log_path is not None and step % log_every == 0:
                with open(log_path, "a") as fh:
                    fh.write(json.dumps({
                        "step": step,
                        "l_rec1": bundle.l_rec1,
                        "l_rec2": bundle.l_rec2,
                        "l_contra": bundle.l_contra,
                        "l_total": bundle.l_total,
                        "lr": cfg.optim.lr,
                        "wall_ms": (time.perf_counter() - t0) * 1e3,
                    }) + "\n")
            if max_steps is not None and step >= max_steps:
                done = True
                break
        if done:
            break
    if out_dir is not None:
        save_checkpoint(dict(model.state_dict()), out_dir / "checkpoint",
                        config=cfg.to_dict())
    return model, history


def load_pretrained(directory: str | Path) -> SSLModel:
    """Rebuild an SSLModel from a checkpoint bundle."""
    from .checkpoint import load_checkpoint

    state, config = load_checkpoint(directory)
    if config is None:
        raise ConfigError("checkpoint bundle lacks config.json")
    model = SSLModel(ModelConfig.from_dict(config))
    model.load_state_dict(state)
    model.eval()
    return model
