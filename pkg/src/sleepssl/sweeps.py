"""Ablation sweep harnesses emitting CSV reports.

Each knob value runs a small synthetic experiment (pretrain + downstream
evaluation) and contributes one CSV row. These are structural reproductions
of the ablation studies; no numeric targets are implied.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .framing import FrameConfig
from .mae import DecoderConfig
from .model import preset_config
from .preprocess import TARGET_RATE
from .scenarios import DownstreamConfig, run_scenario1, run_scenario2
from .splits import split_subject_kfold
from .synth import default_iid_spec, markov_spec, generate
from .tcm import TCMConfig
from .train import pretrain

#: Frame-geometry rows of the published ablation (seconds), approximated to
#: integer samples at 100 Hz; 0.375 s rounds down to 37 samples.
FRAME_SETTINGS = (
    (3.0, 0.375), (3.0, 0.75), (3.0, 1.5),
    (4.0, 0.5), (4.0, 1.0), (4.0, 2.0),
    (5.0, 0.625), (5.0, 1.25), (5.0, 2.5),
    (6.0, 0.75), (6.0, 1.5), (6.0, 3.0),
)

DECODER_SETTINGS = ((192, 1), (256, 3), (512, 1))


@dataclass
class SweepBudget:
    """Compute budget for one sweep point; defaults suit CPU smoke runs."""

    subjects: int = 8
    epochs_per_subject: int = 30
    ssl_steps: int = 30
    downstream_epochs: int = 60
    downstream_lr: float = 1e-2
    seed: int = 0


def _evaluate_point(model_overrides: dict, budget: SweepBudget,
                    scenario: int = 1,
                    tcm_cfg: TCMConfig | None = None) -> tuple[float, float]:
    spec_fn = markov_spec if scenario == 2 else default_iid_spec
    spec = spec_fn(
        subjects=budget.subjects,
        epochs_per_subject=budget.epochs_per_subject,
        seed=budget.seed,
    )
    recordings = generate(spec)
    cfg = preset_config("desk", seed=budget.seed, **model_overrides)
    model, _ = pretrain(recordings, cfg, max_steps=budget.ssl_steps)
    model.eval()
    val_count = 2 if budget.subjects >= 6 else 1
    split = split_subject_kfold(
        [r.subject_id for r in recordings], k=2, val_count=val_count,
        seed=budget.seed,
    )[0]
    ds_cfg = DownstreamConfig(
        lr=budget.downstream_lr, epochs=budget.downstream_epochs,
        batch_size=512, seed=budget.seed,
    )
    if scenario == 1:
        report, _ = run_scenario1(model, recordings, split, ds_cfg)
    else:
        report, _ = run_scenario2(model, recordings, split, ds_cfg, tcm_cfg)
    return report.accuracy, report.macro_f1


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def sweep_mask_ratio(values, out_csv: str | Path,
                     budget: SweepBudget | None = None) -> Path:
    budget = budget or SweepBudget()
    rows = []
    for ratio in values:
        acc, mf1 = _evaluate_point({"mask_ratio": float(ratio)}, budget)
        rows.append([ratio, f"{acc:.4f}", f"{mf1:.4f}"])
    return _write_csv(Path(out_csv), ["mask_ratio", "acc", "mf1"], rows)


def sweep_frame(settings, out_csv: str | Path,
                budget: SweepBudget | None = None) -> Path:
    budget = budget or SweepBudget()
    rows = []
    for size_s, step_s in settings:
        frame = FrameConfig(
            frame_len=int(round(size_s * TARGET_RATE)),
            step=max(1, int(step_s * TARGET_RATE)),
        )
        acc, mf1 = _evaluate_point({"frame": frame}, budget)
        rows.append([size_s, step_s, frame.frame_len, frame.step,
                     f"{acc:.4f}", f"{mf1:.4f}"])
    return _write_csv(
        Path(out_csv),
        ["frame_size_s", "overlap_step_s", "frame_len", "step", "acc", "mf1"],
        rows,
    )


def sweep_decoder(settings, out_csv: str | Path,
                  budget: SweepBudget | None = None) -> Path:
    budget = budget or SweepBudget()
    rows = []
    for dim, depth in settings:
        decoder = DecoderConfig(dim=int(dim), depth=int(depth), heads=4)
        acc, mf1 = _evaluate_point({"decoder": decoder}, budget)
        rows.append([dim, depth, f"{acc:.4f}", f"{mf1:.4f}"])
    return _write_csv(
        Path(out_csv), ["decoder_dim", "decoder_depth", "acc", "mf1"], rows
    )


def sweep_alpha(values, out_csv: str | Path,
                budget: SweepBudget | None = None) -> Path:
    budget = budget or SweepBudget()
    rows = []
    for alpha in values:
        acc, mf1 = _evaluate_point({"alpha": float(alpha)}, budget)
        rows.append([alpha, f"{acc:.4f}", f"{mf1:.4f}"])
    return _write_csv(Path(out_csv), ["alpha", "acc", "mf1"], rows)


def sweep_context(values, out_csv: str | Path,
                  budget: SweepBudget | None = None,
                  variants: tuple[str, ...] = ("mamba",)) -> Path:
    """Context-length (and TCM variant) comparison; emits table7-style CSV."""
    budget = budget or SweepBudget()
    rows = []
    for variant in variants:
        for length in values:
            length = int(length)
            if length < 1:
                raise ConfigError("context length must be >= 1")
            tcm_cfg = TCMConfig(
                d_model=64, context_length=length, variant=variant
            )
            acc, mf1 = _evaluate_point({}, budget, scenario=2, tcm_cfg=tcm_cfg)
            rows.append([variant, length, f"{acc:.4f}", f"{mf1:.4f}"])
    return _write_csv(
        Path(out_csv), ["model", "context_length", "acc", "mf1"], rows
    )
