"""Downstream evaluation scenarios, ensembling, and report artifacts.

Scenario 1 trains a linear probe on frozen embeddings; scenario 2 fine-tunes
the last encoder layer together with the temporal context module on windows
of consecutive epochs; scenario 3 soft-votes fold models on a foreign,
z-normalised dataset.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, IoError
from .metrics import NUM_STAGES, MetricsReport, compute_metrics
from .model import SSLModel
from .preprocess import StagedRecording, z_normalize
from .splits import FoldSplit
from .tcm import TCMConfig, TemporalContextClassifier, window_sequences


@dataclass
class DownstreamConfig:
    lr: float = 1e-5
    epochs: int = 300
    batch_size: int = 512
    class_weights: bool = False
    seed: int = 0


def embed_recording(
    model: SSLModel, recording: StagedRecording, batch_size: int = 256
) -> torch.Tensor:
    """Frozen class-token embeddings for every epoch of one recording."""
    chunks = []
    data = torch.from_numpy(recording.epochs.astype(np.float32))
    for start in range(0, data.shape[0], batch_size):
        chunks.append(model.embed_epochs(data[start : start + batch_size]))
    return torch.cat(chunks) if chunks else torch.empty(0, model.cfg.encoder.dim)


def _select(recordings: list[StagedRecording], subjects) -> list[StagedRecording]:
    wanted = set(subjects)
    picked = [r for r in recordings if r.subject_id in wanted]
    missing = wanted - {r.subject_id for r in picked}
    if missing:
        raise ConfigError(f"subjects missing from dataset: {sorted(missing)}")
    return picked


def _param_snapshot(module: nn.Module) -> dict[str, torch.Tensor]:
    return {k: v.detach().clone() for k, v in module.state_dict().items()}


def _assert_unchanged(module: nn.Module, snapshot: dict[str, torch.Tensor],
                      skip_prefixes: tuple[str, ...] = ()):
    for name, tensor in module.state_dict().items():
        if any(name.startswith(p) for p in skip_prefixes):
            continue
        if not torch.equal(tensor, snapshot[name]):
            raise ConfigError(f"frozen parameter {name} changed during training")


def _class_weights(labels: np.ndarray) -> torch.Tensor:
    counts = np.bincount(labels, minlength=NUM_STAGES).astype(np.float64)
    weights = 1.0 / np.maximum(counts, 1.0)
    return torch.as_tensor(weights / weights.sum() * NUM_STAGES, dtype=torch.float32)


class LinearProbeClassifier:
    """Frozen backbone + trained linear layer over class tokens."""

    def __init__(self, model: SSLModel, linear: nn.Linear):
        self.model = model
        self.linear = linear

    def predict_proba(self, recording: StagedRecording) -> np.ndarray:
        with torch.no_grad():
            features = embed_recording(self.model, recording)
            return F.softmax(self.linear(features), dim=-1).numpy()


class SequenceClassifier:
    """Fine-tuned backbone + temporal context module over token windows."""

    def __init__(self, model: SSLModel, tcm: TemporalContextClassifier):
        self.model = model
        self.tcm = tcm

    def predict_proba(self, recording: StagedRecording) -> np.ndarray:
        with torch.no_grad():
            tokens = embed_recording(self.model, recording)
            seqs, windows = window_sequences(tokens, self.tcm.cfg.context_length)
            logits = self.tcm(seqs)
            probs = np.zeros((recording.n_epochs, NUM_STAGES), dtype=np.float64)
            offset = self.tcm.cfg.context_length - recording.n_epochs
            for w, (start, kept) in enumerate(windows):
                window_probs = F.softmax(logits[w], dim=-1).numpy()
                for pos in kept:
                    epoch_idx = (
                        pos - max(0, offset) if recording.n_epochs < self.tcm.cfg.context_length
                        else start + pos
                    )
                    probs[epoch_idx] = window_probs[pos]
            return probs


def run_scenario1(
    model: SSLModel,
    recordings: list[StagedRecording],
    split: FoldSplit,
    cfg: DownstreamConfig,
) -> tuple[MetricsReport, LinearProbeClassifier]:
    """Linear evaluation: the backbone is entirely frozen."""
    snapshot = _param_snapshot(model)
    train_recs = _select(recordings, split.validation)
    test_recs = _select(recordings, split.test)
    features = torch.cat([embed_recording(model, r) for r in train_recs])
    labels = torch.as_tensor(
        np.concatenate([r.labels for r in train_recs]).astype(np.int64)
    )
    torch.manual_seed(cfg.seed)
    linear = nn.Linear(features.shape[1], NUM_STAGES)
    weights = _class_weights(labels.numpy()) if cfg.class_weights else None
    if cfg.epochs > 0:
        optim = torch.optim.AdamW(linear.parameters(), lr=cfg.lr)
        n = features.shape[0]
        rng = np.random.default_rng(cfg.seed)
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                loss = F.cross_entropy(
                    linear(features[idx]), labels[idx], weight=weights
                )
                optim.zero_grad()
                loss.backward()
                optim.step()
    _assert_unchanged(model, snapshot)
    classifier = LinearProbeClassifier(model, linear)
    preds, truth = _collect_predictions(classifier, test_recs)
    return compute_metrics(preds, truth), classifier


def _collect_predictions(classifier, recordings: list[StagedRecording]):
    preds, truth = [], []
    for rec in recordings:
        probs = classifier.predict_proba(rec)
        preds.append(probs.argmax(axis=1))
        truth.append(rec.labels.astype(np.int64))
    return np.concatenate(preds), np.concatenate(truth)


def run_scenario2(
    model: SSLModel,
    recordings: list[StagedRecording],
    split: FoldSplit,
    cfg: DownstreamConfig,
    tcm_cfg: TCMConfig | None = None,
) -> tuple[MetricsReport, SequenceClassifier]:
    """Fine-tune the last encoder layer plus the TCM on epoch windows.

    The passed model is left untouched; training happens on a copy.
    """
    model = copy.deepcopy(model)
    if tcm_cfg is None:
        tcm_cfg = TCMConfig(d_model=model.cfg.encoder.dim)
    if tcm_cfg.d_model != model.cfg.encoder.dim:
        raise ConfigError("TCM d_model must match the encoder dim")
    depth = len(model.encoder.blocks)
    snapshot = _param_snapshot(model)
    torch.manual_seed(cfg.seed)
    tcm = TemporalContextClassifier(tcm_cfg)

    train_recs = _select(recordings, split.validation)
    test_recs = _select(recordings, split.test)

    # The backbone below the last transformer layer is frozen, so its token
    # sequences can be computed once per training epoch window.
    model.eval()
    mid_tokens, window_labels = [], []
    with torch.no_grad():
        for rec in train_recs:
            data = torch.from_numpy(rec.epochs.astype(np.float32))
            z = model.frame_embeddings(data)
            positions = torch.arange(z.shape[1])
            pre = model.encoder.embed_tokens(z, positions)
            mid = model.encoder.run_blocks(
                pre, 0, max(depth - 1, 0), final_norm=False
            )
            seqs, windows = window_sequences(mid, tcm_cfg.context_length)
            labels = rec.labels.astype(np.int64)
            for w, (start, _) in enumerate(windows):
                mid_tokens.append(seqs[w])
                if rec.n_epochs < tcm_cfg.context_length:
                    pad = tcm_cfg.context_length - rec.n_epochs
                    window_labels.append(
                        np.concatenate([np.full(pad, labels[0]), labels])
                    )
                else:
                    window_labels.append(labels[start : start + tcm_cfg.context_length])
    mid_batch = torch.stack(mid_tokens)  # (W, L, M+1, dim)
    label_batch = torch.as_tensor(np.stack(window_labels))

    trainable = list(tcm.parameters())
    last_block_params: list[torch.Tensor] = []
    if depth > 0:
        last_block_params = list(model.encoder.blocks[-1].parameters())
        for p in last_block_params:
            p.requires_grad_(True)
    weights = _class_weights(label_batch.numpy().ravel()) if cfg.class_weights else None
    optim = torch.optim.AdamW(trainable + last_block_params, lr=cfg.lr)
    n = mid_batch.shape[0]
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = mid_batch[idx]  # (b, L, M+1, dim)
            b, length, tokens_len, dim = batch.shape
            flat = batch.reshape(b * length, tokens_len, dim)
            out = model.encoder.run_blocks(
                flat, max(depth - 1, 0), depth, final_norm=True
            )
            cls = out[:, 0].reshape(b, length, dim)
            logits = tcm(cls)
            loss = F.cross_entropy(
                logits.reshape(-1, NUM_STAGES),
                label_batch[idx].reshape(-1),
                weight=weights,
            )
            optim.zero_grad()
            loss.backward()
            optim.step()

    skip = (f"encoder.blocks.{depth - 1}.",) if depth > 0 else ()
    _assert_unchanged(model, snapshot, skip_prefixes=skip)
    classifier = SequenceClassifier(model, tcm)
    preds, truth = _collect_predictions(classifier, test_recs)
    return compute_metrics(preds, truth), classifier


def run_scenario3(
    classifiers: list,
    recordings: list[StagedRecording],
    normalize: bool = True,
) -> MetricsReport:
    """Soft-voting ensemble of fold models on a foreign dataset."""
    if len(classifiers) < 2:
        raise ConfigError("need at least 2 fold models to ensemble")
    preds, truth = [], []
    for rec in recordings:
        target = z_normalize(rec) if normalize else rec
        probs = [clf.predict_proba(target) for clf in classifiers]
        shapes = {p.shape for p in probs}
        if len(shapes) != 1:
            raise ConfigError("fold models produce incompatible output shapes")
        mean = np.mean(probs, axis=0)
        preds.append(mean.argmax(axis=1))
        truth.append(rec.labels.astype(np.int64))
    return compute_metrics(np.concatenate(preds), np.concatenate(truth))


# ---------------------------------------------------------------------------
# Hypnogram export
# ---------------------------------------------------------------------------

#: Top-to-bottom display order of stages on the hypnogram y-axis.
HYPNOGRAM_ORDER = (0, 4, 1, 2, 3)  # Wake, REM, N1, N2, N3
HYPNOGRAM_NAMES = ("W", "REM", "N1", "N2", "N3")


def export_hypnogram(preds, truth, path_base: str | Path) -> tuple[Path, Path]:
    """Write ``<base>.csv`` (epoch_idx,truth,pred) and ``<base>.svg``.

    The SVG is a step plot of predicted stages over time with red dots at
    epochs where prediction and truth disagree.
    """
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape:
        raise ConfigError("preds and truth must have equal length")
    base = Path(path_base)
    try:
        base.parent.mkdir(parents=True, exist_ok=True)
        csv_path = base.with_suffix(".csv")
        with open(csv_path, "w") as fh:
            fh.write("epoch_idx,truth,pred\n")
            for i, (t, p) in enumerate(zip(truth, preds)):
                fh.write(f"{i},{int(t)},{int(p)}\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc

    row_of = {stage: row for row, stage in enumerate(HYPNOGRAM_ORDER)}
    width, height = 900, 240
    pad_l, pad_t = 50, 20
    plot_w, plot_h = width - pad_l - 20, height - pad_t - 30
    n = max(len(preds), 1)

    def x(i):
        return pad_l + plot_w * i / n

    def y(stage):
        return pad_t + plot_h * row_of[int(stage)] / 4

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for row, name in enumerate(HYPNOGRAM_NAMES):
        yy = pad_t + plot_h * row / 4
        parts.append(
            f'<text x="8" y="{yy + 4:.1f}" font-size="12">{name}</text>'
        )
    for series, color, width_px in ((truth, "#bbbbbb", 1.0), (preds, "#1f77b4", 1.5)):
        points = []
        for i, stage in enumerate(series):
            points.append(f"{x(i):.1f},{y(stage):.1f}")
            points.append(f"{x(i + 1):.1f},{y(stage):.1f}")
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="{width_px}" '
            f'points="{" ".join(points)}"/>'
        )
    for i, (t, p) in enumerate(zip(truth, preds)):
        if t != p:
            parts.append(
                f'<circle cx="{x(i + 0.5):.1f}" cy="{y(p):.1f}" r="2.5" '
                f'fill="red" class="error-marker"/>'
            )
    parts.append("</svg>")
    svg_path = base.with_suffix(".svg")
    try:
        svg_path.write_text("\n".join(parts))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return svg_path, csv_path
