"""Batch command-line entry point.

Subcommands: ingest, synth, pretrain, probe, finetune, crosseval, sweep,
report. Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from . import edf as edfmod
from .checkpoint import load_checkpoint, save_checkpoint
from .config import load_run_config, model_config_from_run, write_snapshot
from .errors import ConfigError, ShapeError, SleepSSLError
from .metrics import NUM_STAGES
from .model import ModelConfig, SSLModel
from .preprocess import (
    EPOCH_SECONDS,
    build_recording,
    load_dataset,
    save_recording,
)
from .scenarios import (
    DownstreamConfig,
    LinearProbeClassifier,
    SequenceClassifier,
    export_hypnogram,
    run_scenario1,
    run_scenario2,
    run_scenario3,
)
from .splits import split_subject_kfold
from .sweeps import (
    DECODER_SETTINGS,
    FRAME_SETTINGS,
    SweepBudget,
    sweep_alpha,
    sweep_context,
    sweep_decoder,
    sweep_frame,
    sweep_mask_ratio,
)
from .synth import default_iid_spec, export_edf, generate, markov_spec
from .tcm import TCMConfig, TemporalContextClassifier
from .train import load_pretrained, pretrain


def _cache_root(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get("NEURONET_CACHE")
    if env:
        return Path(env)
    raise ConfigError("no cache directory: pass --out or set NEURONET_CACHE")


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    out = _cache_root(args.out)
    edf_dir = Path(args.edf_dir)
    edf_files = sorted(edf_dir.glob("*.edf"))
    if not edf_files:
        raise ConfigError(f"no .edf files under {edf_dir}")
    for edf_path in edf_files:
        data = edf_path.read_bytes()
        header, signals = edfmod.parse_edf(data)
        wanted = args.channel.strip().lower()
        index = next(
            (i for i, s in enumerate(header.signals)
             if s.label.strip().lower() == wanted),
            None,
        )
        if index is None:
            raise ConfigError(
                f"{edf_path.name}: channel {args.channel!r} not found; "
                f"available: {[s.label for s in header.signals]}"
            )
        rate = header.signals[index].samples_per_record / header.record_duration
        total_seconds = header.num_data_records * header.record_duration

        csv_path = edf_path.with_suffix(".csv")
        ann_index = next(
            (i for i, s in enumerate(header.signals)
             if s.label == edfmod.ANNOTATION_LABEL),
            None,
        )
        if csv_path.exists():
            events = edfmod.events_from_csv(csv_path.read_text())
        elif ann_index is not None:
            digital = edfmod.parse_edf_digital(data, header)[ann_index]
            events = edfmod.parse_tal_events(
                edfmod.annotation_payload_from_signal(digital)
            )
        else:
            raise ConfigError(
                f"{edf_path.name}: no stage annotations (CSV or EDF+ signal)"
            )
        tokens = edfmod.parse_stage_annotations(events, total_seconds)
        recording = build_recording(
            edf_path.stem, signals[index], rate, tokens
        )
        save_recording(recording, out)
        print(f"ingested {edf_path.name}: {recording.n_epochs} epochs")
    return 0


def cmd_synth(args) -> int:
    spec_fn = {"default": default_iid_spec, "iid": default_iid_spec,
               "markov": markov_spec}.get(args.spec)
    if spec_fn is None:
        raise ConfigError(f"unknown synthetic spec {args.spec!r}")
    spec = spec_fn(subjects=args.subjects, epochs_per_subject=args.epochs,
                   seed=args.seed)
    out = Path(args.out)
    for recording in generate(spec):
        save_recording(recording, out)
        if args.edf:
            export_edf(recording, out / "edf")
    print(f"wrote {args.subjects} synthetic subjects to {out}")
    return 0


def cmd_pretrain(args) -> int:
    run = load_run_config(args.config) if args.config else None
    if run is not None:
        cfg = model_config_from_run(run)
        deterministic = run["deterministic"] or args.deterministic
    else:
        from .model import preset_config

        cfg = preset_config(args.preset)
        deterministic = args.deterministic
    if args.seed is not None:
        cfg.seed = args.seed
    recordings = load_dataset(args.data)
    out = Path(args.out)
    model, history = pretrain(
        recordings, cfg, out_dir=out,
        deterministic=deterministic, max_steps=args.max_steps,
    )
    if run is not None:
        write_snapshot(run, out)
    else:
        write_snapshot({"model": cfg.to_dict(), "seed": cfg.seed,
                        "deterministic": deterministic}, out)
    final = history[-1] if history else None
    if final:
        print(f"pretrained {len(history)} steps; final l_total={final.l_total:.4f}")
    return 0


def _downstream_cfg(args, defaults: DownstreamConfig) -> DownstreamConfig:
    return DownstreamConfig(
        lr=args.lr if args.lr is not None else defaults.lr,
        epochs=args.epochs if args.epochs is not None else defaults.epochs,
        batch_size=args.batch_size or defaults.batch_size,
        class_weights=args.class_weights,
        seed=args.seed if args.seed is not None else defaults.seed,
    )


def _run_downstream(args, scenario: int) -> int:
    model = load_pretrained(Path(args.checkpoint))
    recordings = load_dataset(args.data)
    subjects = [r.subject_id for r in recordings]
    splits = split_subject_kfold(subjects, args.folds, args.val_count,
                                 args.seed or 0)
    defaults = (
        DownstreamConfig(lr=1e-5, epochs=300, batch_size=512)
        if scenario == 1
        else DownstreamConfig(lr=5e-3, epochs=100, batch_size=128)
    )
    cfg = _downstream_cfg(args, defaults)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for split in splits:
        fold_dir = out / f"fold{split.fold}"
        if scenario == 1:
            report, classifier = run_scenario1(model, recordings, split, cfg)
            save_checkpoint(
                dict(classifier.linear.state_dict()), fold_dir / "head",
                config={"kind": "probe", "model": model.cfg.to_dict()},
            )
        else:
            tcm_cfg = TCMConfig(
                d_model=model.cfg.encoder.dim,
                context_length=args.context_length,
            )
            report, classifier = run_scenario2(
                model, recordings, split, cfg, tcm_cfg
            )
            state = {f"model.{k}": v for k, v in classifier.model.state_dict().items()}
            state.update({f"tcm.{k}": v for k, v in classifier.tcm.state_dict().items()})
            save_checkpoint(
                state, fold_dir / "head",
                config={
                    "kind": "finetune",
                    "model": classifier.model.cfg.to_dict(),
                    "tcm": {
                        "d_model": tcm_cfg.d_model,
                        "d_state": tcm_cfg.d_state,
                        "d_conv": tcm_cfg.d_conv,
                        "expand": tcm_cfg.expand,
                        "num_blocks": tcm_cfg.num_blocks,
                        "context_length": tcm_cfg.context_length,
                        "variant": tcm_cfg.variant,
                    },
                },
            )
        reports.append(report)
        _export_fold_artifacts(fold_dir, report, classifier, recordings, split)
        print(
            f"fold {split.fold}: ACC={report.accuracy:.4f} "
            f"MF1={report.macro_f1:.4f}"
        )
    _write_metrics(out, reports)
    return 0


def _export_fold_artifacts(fold_dir, report, classifier, recordings, split):
    fold_dir.mkdir(parents=True, exist_ok=True)
    np.savetxt(fold_dir / "confusion.csv", report.confusion,
               fmt="%d", delimiter=",")
    # One hypnogram per fold keeps artifact volume manageable.
    subject = split.test[0]
    rec = next(r for r in recordings if r.subject_id == subject)
    probs = classifier.predict_proba(rec)
    export_hypnogram(
        probs.argmax(axis=1), rec.labels.astype(np.int64),
        fold_dir / f"hypnogram_{subject}",
    )


def _write_metrics(out: Path, reports) -> None:
    accs = [r.accuracy for r in reports]
    mf1s = [r.macro_f1 for r in reports]
    payload = {
        "folds": [r.to_dict() for r in reports],
        "mean": {"accuracy": float(np.mean(accs)), "macro_f1": float(np.mean(mf1s))},
        "std": {"accuracy": float(np.std(accs)), "macro_f1": float(np.std(mf1s))},
    }
    (out / "metrics.json").write_text(json.dumps(payload, indent=2))


def cmd_probe(args) -> int:
    return _run_downstream(args, scenario=1)


def cmd_finetune(args) -> int:
    return _run_downstream(args, scenario=2)


def _load_fold_classifier(head_dir: Path):
    state, config = load_checkpoint(head_dir)
    if config is None:
        raise ConfigError(f"{head_dir}: head bundle lacks config.json")
    if config["kind"] == "probe":
        model_cfg = ModelConfig.from_dict(config["model"])
        model = SSLModel(model_cfg)
        linear = nn.Linear(model_cfg.encoder.dim, NUM_STAGES)
        linear.load_state_dict(state)
        return LinearProbeClassifier(model, linear), model_cfg
    if config["kind"] == "finetune":
        model_cfg = ModelConfig.from_dict(config["model"])
        model = SSLModel(model_cfg)
        model.load_state_dict(
            {k[len("model."):]: v for k, v in state.items()
             if k.startswith("model.")}
        )
        tcm = TemporalContextClassifier(TCMConfig(**config["tcm"]))
        tcm.load_state_dict(
            {k[len("tcm."):]: v for k, v in state.items() if k.startswith("tcm.")}
        )
        return SequenceClassifier(model, tcm), model_cfg
    raise ConfigError(f"unknown head kind {config['kind']!r}")


def cmd_crosseval(args) -> int:
    run_dir = Path(args.train_run)
    head_dirs = sorted(run_dir.glob("fold*/head"))
    if len(head_dirs) < 2:
        raise ConfigError(f"need >= 2 fold heads under {run_dir}")
    classifiers = []
    backbone = None
    for head_dir in head_dirs:
        classifier, model_cfg = _load_fold_classifier(head_dir)
        if isinstance(classifier, LinearProbeClassifier):
            # Probe heads share the pretrained backbone of the run.
            if backbone is None:
                backbone = load_pretrained(run_dir.parent / "checkpoint") \
                    if (run_dir.parent / "checkpoint").exists() \
                    else load_pretrained(Path(args.backbone)) if args.backbone \
                    else None
            if backbone is None:
                raise ConfigError("probe ensemble needs --backbone checkpoint")
            classifier.model = backbone
        classifiers.append(classifier)
    target = load_dataset(args.target)
    report = run_scenario3(classifiers, target)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2))
    np.savetxt(out / "confusion.csv", report.confusion, fmt="%d", delimiter=",")
    print(f"crosseval: ACC={report.accuracy:.4f} MF1={report.macro_f1:.4f}")
    return 0


def cmd_sweep(args) -> int:
    budget = SweepBudget(
        subjects=args.subjects, epochs_per_subject=args.epochs,
        ssl_steps=args.ssl_steps, downstream_epochs=args.downstream_epochs,
        seed=args.seed or 0,
    )
    out = Path(args.out)
    values = args.values.split(",") if args.values else None
    if args.knob == "mask_ratio":
        vals = [float(v) for v in values] if values else [0.5, 0.6, 0.7, 0.75, 0.8, 0.9]
        path = sweep_mask_ratio(vals, out / "mask_ratio.csv", budget)
    elif args.knob == "frame":
        if values:
            settings = []
            for v in values:
                size_s, step_s = v.split("x")
                settings.append((float(size_s), float(step_s)))
        else:
            settings = FRAME_SETTINGS
        path = sweep_frame(settings, out / "frame.csv", budget)
    elif args.knob == "decoder":
        if values:
            settings = []
            for v in values:
                dim, _, depth = v.partition(":")
                settings.append((int(dim), int(depth) if depth else 1))
        else:
            settings = DECODER_SETTINGS
        path = sweep_decoder(settings, out / "decoder.csv", budget)
    elif args.knob == "context":
        vals = [int(v) for v in values] if values else [10, 20, 30]
        path = sweep_context(vals, out / "table7.csv", budget)
    elif args.knob == "alpha":
        vals = [float(v) for v in values] if values else [0.0, 0.1, 0.5, 1.0, 2.0]
        path = sweep_alpha(vals, out / "alpha.csv", budget)
    else:
        raise ConfigError(f"unknown sweep knob {args.knob!r}")
    print(f"wrote {path}")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    metrics_path = run_dir / "metrics.json"
    if not metrics_path.exists():
        raise ConfigError(f"no metrics.json under {run_dir}")
    payload = json.loads(metrics_path.read_text())
    if "folds" in payload:
        for i, fold in enumerate(payload["folds"]):
            print(f"fold {i}: ACC={fold['accuracy']:.4f} MF1={fold['macro_f1']:.4f}")
        mean, std = payload["mean"], payload["std"]
        print(
            f"mean: ACC={mean['accuracy']:.4f}±{std['accuracy']:.4f} "
            f"MF1={mean['macro_f1']:.4f}±{std['macro_f1']:.4f}"
        )
    else:
        print(f"ACC={payload['accuracy']:.4f} MF1={payload['macro_f1']:.4f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sleepssl",
        description="Self-supervised sleep staging toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build epoch caches from EDF files")
    p.add_argument("--edf-dir", required=True)
    p.add_argument("--channel", required=True)
    p.add_argument("--out", default=None,
                   help="cache dir (default: $NEURONET_CACHE)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", default="default", choices=["default", "iid", "markov"])
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=20)
    p.add_argument("--epochs", type=int, default=120)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--edf", action="store_true", help="also export EDF files")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="run self-supervised pretraining")
    p.add_argument("--config", default=None, help="JSON run config")
    p.add_argument("--preset", default="desk", choices=["T", "B", "desk"])
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--max-steps", type=int, default=None)
    p.set_defaults(func=cmd_pretrain)

    for name, func, extra in (
        ("probe", cmd_probe, 1), ("finetune", cmd_finetune, 2),
    ):
        p = sub.add_parser(name, help=f"evaluation scenario {extra}")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--folds", type=int, default=5)
        p.add_argument("--val-count", type=int, default=2)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--class-weights", action="store_true")
        if extra == 2:
            p.add_argument("--context-length", type=int, default=20)
        p.set_defaults(func=func)

    p = sub.add_parser("crosseval", help="evaluation scenario 3 (soft voting)")
    p.add_argument("--train-run", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backbone", default=None)
    p.set_defaults(func=cmd_crosseval)

    p = sub.add_parser("sweep", help="ablation sweep harnesses")
    p.add_argument("--knob", required=True,
                   choices=["mask_ratio", "frame", "decoder", "context", "alpha"])
    p.add_argument("--values", default=None,
                   help="comma-separated values (frame: SIZExSTEP pairs)")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--ssl-steps", type=int, default=30)
    p.add_argument("--downstream-epochs", type=int, default=60)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarise a run directory")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SleepSSLError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
