import argparse
import os
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError
from rich.table import Table

from Cli.RunConfig import RunConfig, load_run_config
from DataIO.Container import read_container, write_container
from DataIO.CsvImport import import_csv
from DataIO.Decimate import decimate_to
from DataIO.TrialSet import TrialSet
from FilterBank.FilterDesign import frequency_response, probe_frequencies
from Metrics.ConfusionMatrix import accuracy, confusion, confusion_frame, kappa
from Model.Checkpoint import load_checkpoint, save_checkpoint
from Model.FAConformer import FAConformer, param_count, prepare_eeg
from Model.ModelConfig import ALL_SWITCHES, ModelConfig, parse_variant
from Training.CrossValidation import CVResult, check_dataset, cross_validate, subject_frame
from Training.Synthetic import SynthConfig, make_synthetic
from Training.TrainConfig import TrainConfig
from faconf_logging import logger, rich_console
from util.FAConfException import FAConfException, MetricException, UsageException
from util.FileUtil import ensure_parent_dir

# Disabled modules per row of the published ablation table, full model last.
ABLATION_TABLE: List[List[str]] = [
    ["band_attention", "icscm"],
    ["multiscale"],
    ["band_attention"],
    ["icscm"],
    ["emg"],
    [],
]


def _train_default(name: str):
    return TrainConfig.model_fields[name].default


def _variant(text: str) -> List[str]:
    names = parse_variant(text)
    unknown = [name for name in names if name not in ALL_SWITCHES]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown module {unknown}, expected names from {list(ALL_SWITCHES)}")
    return names


def _key_value(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got '{text}'")
    return key.strip(), value.strip()


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Appends defaults to help lines, except unset (None) and empty list defaults."""

    def _get_help_string(self, action: argparse.Action) -> str:
        if action.default is None or action.default == []:
            return action.help or ""
        return super()._get_help_string(action)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="KEY=value config file (CLI flags override it)")
    parser.add_argument("--profile", choices=["published", "desk"], help="base settings (default published)")
    parser.add_argument("--seed", type=int, help=f"seed for init, splits, shuffling and dropout (default {_train_default('seed')})")
    parser.add_argument("--jobs", type=int, help="folds trained in parallel (default 1)")
    parser.add_argument("--lr", type=float, help=f"Adam learning rate (default {_train_default('learning_rate')})")
    parser.add_argument("--epochs", type=int, help=f"epochs per fold (default {_train_default('epochs')})")
    parser.add_argument("--batch-size", type=int, help=f"trials per batch (default {_train_default('batch_size')})")
    parser.add_argument("--folds", type=int, help=f"cross-validation folds (default {_train_default('folds')})")
    parser.add_argument("--set", dest="settings", type=_key_value, action="append", default=[], metavar="KEY=VALUE",
                        help="any config key, e.g. --set kernel_sizes=3,5,7,9")


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, object] = dict(args.settings)
    overrides.update(profile=args.profile, seed=args.seed, jobs=args.jobs, learning_rate=args.lr,
                     epochs=args.epochs, batch_size=args.batch_size, folds=args.folds)
    return load_run_config(args.config, overrides)


def _load_dataset(path: str, fs_hz: float) -> TrialSet:
    """Read a container and bring it to the filter bank's sampling rate."""
    data = read_container(path)
    if data.subject_id is None:
        data = data.model_copy(update={"subject_id": os.path.splitext(os.path.basename(path))[0]})
    if abs(data.fs_hz - fs_hz) > 1e-9:
        logger.info(f"decimating {path} from {data.fs_hz:g} Hz to {fs_hz:g} Hz")
        data = decimate_to(data, fs_hz)
    rich_console.print(f"[green]{path}: {data.summary()}[/green]")
    return data


def _write_csv(frame: pd.DataFrame, path: str, index: bool = False) -> None:
    frame.to_csv(ensure_parent_dir(path), index=index)


def write_cv_outputs(result: CVResult, out_dir: str, model_config: ModelConfig, run: RunConfig,
                     class_names: Optional[List[str]] = None) -> None:
    for fold, frame in result.history_frames().items():
        _write_csv(frame, os.path.join(out_dir, f"history_fold{fold}.csv"))
    for fold_result in result.folds:
        if fold_result.params is not None:
            save_checkpoint(os.path.join(out_dir, f"checkpoint_fold{fold_result.fold}.fack"), model_config,
                            fold_result.params, run.filter_bank)
    _write_csv(result.fold_frame(), os.path.join(out_dir, "folds.csv"))
    _write_csv(pd.DataFrame({"trial": np.arange(len(result.split.assignments)), "fold": result.split.assignments}),
               os.path.join(out_dir, "split.csv"))
    _write_csv(confusion_frame(result.total_confusion(), class_names), os.path.join(out_dir, "confusion.csv"),
               index=True)


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig(n_trials=args.trials, n_classes=args.classes, eeg_channels=args.eeg_channels,
                      emg_channels=args.emg_channels, time_points=args.time_points, fs_hz=args.fs,
                      seed=args.seed, snr=args.snr)
    data = make_synthetic(cfg)
    write_container(data, args.output)
    rich_console.print(f"[green]wrote {args.output}: {data.summary()}[/green]")
    return 0


def cmd_import(args: argparse.Namespace) -> int:
    names = [name.strip() for name in args.class_names.split(",")] if args.class_names else None
    data = import_csv(args.eeg, args.emg, args.labels, fs=args.fs, class_names=names, subject_id=args.subject,
                      eeg_channels=args.eeg_channels, emg_channels=args.emg_channels)
    if args.decimate_to is not None:
        data = decimate_to(data, args.decimate_to)
    write_container(data, args.output)
    rich_console.print(f"[green]wrote {args.output}: {data.summary()}[/green]")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    run = _run_config(args)
    bank = run.build_bank()
    results: Dict[str, CVResult] = {}
    for path in args.datasets:
        data = _load_dataset(path, run.filter_bank.fs_hz)
        model_config = run.fit_to(data)
        out_dir = args.output if len(args.datasets) == 1 else os.path.join(args.output, data.subject_id)
        result = cross_validate(data, model_config, run.train, bank, jobs=run.jobs,
                                error_dir=os.path.join(out_dir, "errors"))
        write_cv_outputs(result, out_dir, model_config, run, data.class_names)
        results[data.subject_id] = result
        print(f"{data.subject_id}: {result.summary_line()}" if len(args.datasets) > 1 else result.summary_line())
    if len(results) > 1:
        frame = subject_frame(results)
        _write_csv(frame, os.path.join(args.output, "subjects.csv"))
        grand = frame.iloc[-1]
        print(f"mean_acc={grand['mean_acc']:.6f} mean_kappa={grand['mean_kappa']:.6f}")
    return 0


def _select_trials(data: TrialSet, args: argparse.Namespace) -> TrialSet:
    if args.split is None:
        return data
    if args.fold is None:
        raise UsageException("--split needs --fold")
    split = pd.read_csv(args.split)
    assignments = split.sort_values("trial")["fold"].to_numpy()
    if assignments.shape[0] != data.n_trials:
        raise UsageException(f"split lists {assignments.shape[0]} trials, dataset has {data.n_trials}")
    mask = assignments == args.fold if args.part == "test" else assignments != args.fold
    return data.subset(np.flatnonzero(mask))


def cmd_eval(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    bank = checkpoint.bank_config.build()
    data = _select_trials(_load_dataset(args.dataset, bank.fs_hz), args)
    check_dataset(data, checkpoint.config, bank)

    model = FAConformer(checkpoint.config, checkpoint.params, bank)
    logits, pooled = model.evaluate(prepare_eeg(data.eeg, bank), data.emg)
    predicted = np.argmax(logits, axis=1)
    cm = confusion(predicted, data.labels, checkpoint.config.n_classes)
    acc = accuracy(cm)
    try:
        kap = kappa(cm)
    except MetricException as e:
        logger.warning(str(e))
        kap = float("nan")

    out = args.output
    _write_csv(confusion_frame(cm, data.class_names), os.path.join(out, "confusion.csv"), index=True)
    _write_csv(confusion_frame(cm, data.class_names, percent=True), os.path.join(out, "confusion_percent.csv"),
               index=True)
    predictions = pd.DataFrame({"trial": np.arange(data.n_trials), "label": data.labels, "predicted": predicted})
    for c in range(logits.shape[1]):
        predictions[f"logit_{c}"] = logits[:, c]
    _write_csv(predictions, os.path.join(out, "predictions.csv"))
    features = pd.DataFrame(pooled, columns=[f"f{i}" for i in range(pooled.shape[1])])
    features.insert(0, "label", data.labels)
    features.insert(0, "trial", np.arange(data.n_trials))
    _write_csv(features, os.path.join(out, "features.csv"))
    print(f"accuracy={acc:.6f} kappa={kap:.6f}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    run = _run_config(args)
    bank = run.build_bank()
    data = _load_dataset(args.dataset, run.filter_bank.fs_hz)
    variants: List[List[str]] = [[]]
    if args.preset == "table":
        variants += [row for row in ABLATION_TABLE if row]
    for names in args.disable:
        if names not in variants:
            variants.append(names)

    base = run.model_copy(update={"disable": []})
    rows = []
    for names in variants:
        model_config = base.model_copy(update={"disable": names}).fit_to(data)
        variant = model_config.variant_name()
        rich_console.print(f"[red]Ablation variant '{variant}' ---------------------------------[/red]")
        result = cross_validate(data, model_config, run.train, bank, jobs=run.jobs)
        rows.append({"variant": variant, "param_count": param_count(model_config),
                     "mean_acc": result.mean_accuracy, "mean_kappa": result.mean_kappa})
        if args.output:
            write_cv_outputs(result, os.path.join(args.output, variant), model_config, run, data.class_names)

    frame = pd.DataFrame(rows, columns=["variant", "param_count", "mean_acc", "mean_kappa"])
    if args.output:
        _write_csv(frame, os.path.join(args.output, "ablation.csv"))
    table = Table(title="Ablation")
    for column in frame.columns:
        table.add_column(column)
    for row in frame.itertuples(index=False):
        table.add_row(row.variant, str(row.param_count), f"{row.mean_acc:.4f}", f"{row.mean_kappa:.4f}")
    rich_console.print(table)
    return 0


def cmd_filter_probe(args: argparse.Namespace) -> int:
    run = load_run_config(args.config, dict(dict(args.settings), profile=args.profile, fs_hz=args.fs))
    bank = run.build_bank()
    freqs = probe_frequencies(bank.fs_hz, args.resolution)
    for n, band in enumerate(bank.bands):
        magnitude = frequency_response(band.cascade, freqs)
        path = os.path.join(args.output, f"band{n}_{band.spec.label()}.csv")
        _write_csv(pd.DataFrame({"freq_hz": freqs, "magnitude_db": magnitude}), path)
        center = float(frequency_response(band.cascade, [band.spec.center_hz])[0])
        rich_console.print(f"   [green]band {n} {band.spec.label()}: {band.cascade.n_sections} sections, "
                           f"center {center:+.3f} dB -> {path}[/green]")
    print(f"bands={bank.n_bands} fs_hz={bank.fs_hz:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faconformer", description="EEG-EMG FAConformer motor-pattern decoder")
    commands = parser.add_subparsers(dest="command", required=True)
    formatter = _HelpFormatter

    synth = commands.add_parser("synth", help="write a synthetic trial container", formatter_class=formatter)
    synth.add_argument("--trials", type=int, default=300)
    synth.add_argument("--classes", type=int, default=3)
    synth.add_argument("--eeg-channels", type=int, default=8)
    synth.add_argument("--emg-channels", type=int, default=2)
    synth.add_argument("--time-points", type=int, default=1000)
    synth.add_argument("--fs", type=float, default=250.0)
    synth.add_argument("--snr", type=float, default=10.0, help="tone power over noise power; inf for no noise")
    synth.add_argument("--seed", type=int, default=7)
    synth.add_argument("-o", "--output", required=True, help="container path")
    synth.set_defaults(handler=cmd_synth)

    importer = commands.add_parser("import-csv", help="convert three CSV files into a trial container",
                                   formatter_class=formatter)
    importer.add_argument("eeg", help="EEG CSV, one row per (trial, channel)")
    importer.add_argument("emg", help="EMG CSV, one row per (trial, channel)")
    importer.add_argument("labels", help="one class id per line")
    importer.add_argument("--fs", type=float, required=True, help="sampling rate of the CSV samples in Hz")
    importer.add_argument("--eeg-channels", type=int, help="expected EEG channels per trial")
    importer.add_argument("--emg-channels", type=int, help="expected EMG channels per trial")
    importer.add_argument("--class-names", help="comma separated, in class id order")
    importer.add_argument("--subject", help="subject id stored in the container")
    importer.add_argument("--decimate-to", type=float, help="target rate, an integer divisor of --fs")
    importer.add_argument("-o", "--output", required=True, help="container path")
    importer.set_defaults(handler=cmd_import)

    train = commands.add_parser("train", help="cross-validate on one or more datasets", formatter_class=formatter)
    train.add_argument("datasets", nargs="+", help="trial containers, one per subject")
    train.add_argument("-o", "--output", default="runs/train", help="output directory")
    _add_run_flags(train)
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("eval", help="score a checkpoint on a dataset", formatter_class=formatter)
    evaluate.add_argument("dataset", help="trial container")
    evaluate.add_argument("--checkpoint", required=True, help="checkpoint written by train")
    evaluate.add_argument("--split", help="split.csv written by train")
    evaluate.add_argument("--fold", type=int, help="fold of --split to evaluate")
    evaluate.add_argument("--part", choices=["train", "test"], default="test", help="which side of --fold")
    evaluate.add_argument("-o", "--output", default="runs/eval", help="output directory")
    evaluate.set_defaults(handler=cmd_eval)

    ablation = commands.add_parser("ablate", help="cross-validate the full model and ablated variants",
                                   formatter_class=formatter)
    ablation.add_argument("dataset", help="trial container")
    ablation.add_argument("--disable", type=_variant, action="append", default=[], metavar="MODULE[+MODULE]",
                          help=f"variant to add; modules from {', '.join(ALL_SWITCHES)}")
    ablation.add_argument("--preset", choices=["table"], help="table: the rows of the published ablation table")
    ablation.add_argument("-o", "--output", help="output directory for ablation.csv and per-variant results")
    _add_run_flags(ablation)
    ablation.set_defaults(handler=cmd_ablate)

    probe = commands.add_parser("filter-probe", help="write the magnitude response of every band",
                                formatter_class=formatter)
    probe.add_argument("--config", help="KEY=value config file")
    probe.add_argument("--profile", choices=["published", "desk"], default="published")
    probe.add_argument("--fs", type=float, help="design rate in Hz (default 250)")
    probe.add_argument("--resolution", type=float, default=0.1, help="frequency step in Hz")
    probe.add_argument("--set", dest="settings", type=_key_value, action="append", default=[], metavar="KEY=VALUE",
                       help="any filter-bank key, e.g. --set bands=8-12,12-16")
    probe.add_argument("-o", "--output", default="runs/filter_probe", help="output directory")
    probe.set_defaults(handler=cmd_filter_probe)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Exit codes: 0 success, 1 a pipeline error (data, shape, design, NaN, I/O),
    2 a usage error (bad flag, unknown config key, invalid value).
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.handler(args)
    except (UsageException, ValidationError) as e:
        rich_console.print(f"[red][USAGE] {e}[/red]")
        return 2
    except FAConfException as e:
        rich_console.print(f"[red][ERROR] {type(e).__name__}: {e}[/red]")
        return 1
    except OSError as e:
        rich_console.print(f"[red][ERROR] {e}[/red]")
        return 1
