"""Command-line orchestrator: gen | train | attribute | evaluate | report.

Each stage reads and writes fixed filenames inside a run directory and appends
one entry to that directory's manifest. Exit codes: 0 success, 1 runtime
failure (any BenchError or OSError), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from constants import (
    CHECKPOINT_DIR, DIAG_FILE, EPOCHS, HISTORY_FILE, LR0, MAPS_DIR, MODEL_FILE,
    N_EVAL, N_TEST, N_TRAIN, REPORT_FILE, SCENARIO_FILE, SNAPSHOT_DIR, SNAPSHOT_EVERY,
    TEST_FILE, TITLE, TRAIN_FILE, VERSION, WEIGHT_DECAY, BATCH_SIZE,
)
from engine.exceptions import BenchError, ConfigurationError, ParameterError, UndefinedMassError
from engine.save_load import atomic_write_bytes
from agop.diagonal import AgopDiagonal, load_diag, save_diag
from agop.hook import AgopTrainingHook
from attribution.registry import attribute, get_method, method_names, resolve_methods, sample_seed
from attribution.saliency import pgm_filename, write_pgm
from bench.manifest import RunManifest, verify
from metrics.localization import energy_gt, miou, pointing_game
from metrics.suite import (
    evaluate_suite, format_report, format_series, list_snapshots, read_report, snapshot_series,
    write_report,
)
from model.cnn import build_cnn8by8, load_model, save_model
from model.train import TrainConfig, train, write_history
from tris.dataset_io import read_dataset, write_dataset
from tris.scenarios import (
    Background, Sample, Scenario, ScenarioSpec, Split, generate_dataset, pixel_mean,
)
from ui.table import render_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------

def _bool_arg(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {value!r}")


def _methods_arg(value: str) -> str:
    try:
        resolve_methods(value)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return value


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from None
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {number}")
    return number


def derive_test_seed(seed: int) -> int:
    """Seed of the test split, derived from the --seed given to gen."""
    return int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agop-tris", description=f"{TITLE}: AGOP attribution benchmark on 8x8 images")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--quiet", action="store_true", help="disable progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate train/test datasets for one scenario")
    gen.add_argument("--scenario", required=True, choices=[s.value for s in Scenario])
    gen.add_argument("--background", required=True, choices=[b.value for b in Background])
    gen.add_argument("--n-train", type=_positive_int, default=N_TRAIN)
    gen.add_argument("--n-test", type=_positive_int, default=N_TEST)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--mixing", choices=["energy", "raw"], default=None)
    gen.add_argument("--out", required=True)
    gen.add_argument("--force", action="store_true", help="overwrite an existing run directory")
    gen.set_defaults(func=cmd_gen)

    tr = sub.add_parser("train", help="train CNN8by8 with the AGOP hook")
    tr.add_argument("--data", required=True, help="run directory holding train/test files")
    tr.add_argument("--epochs", type=_positive_int, default=EPOCHS)
    tr.add_argument("--lr", type=float, default=LR0)
    tr.add_argument("--wd", type=float, default=WEIGHT_DECAY)
    tr.add_argument("--batch", type=_positive_int, default=BATCH_SIZE)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--snapshot-every", type=_positive_int, default=SNAPSHOT_EVERY)
    tr.add_argument("--only-correct", type=_bool_arg, default=True, metavar="true|false")
    tr.add_argument("--no-agop-hook", action="store_true")
    tr.add_argument("--checkpoint-every", type=int, default=0, help="epochs; 0 disables")
    tr.add_argument("--out", default=None, help="defaults to --data")
    tr.set_defaults(func=cmd_train)

    at = sub.add_parser("attribute", help="one saliency map for one sample")
    at.add_argument("--model", required=True)
    at.add_argument("--diag", default=None)
    at.add_argument("--data", required=True, help="dataset file or run directory (test split)")
    at.add_argument("--method", required=True, choices=method_names())
    at.add_argument("--index", type=int, default=0)
    at.add_argument("--seed", type=int, default=0)
    at.add_argument("--out", default=None, help="PGM path")
    at.set_defaults(func=cmd_attribute)

    ev = sub.add_parser("evaluate", help="all metrics for a set of methods")
    ev.add_argument("--model", required=True)
    ev.add_argument("--diag", default=None)
    ev.add_argument("--data", required=True, help="run directory holding train/test files")
    ev.add_argument("--methods", type=_methods_arg, default="all")
    ev.add_argument("--n-eval", type=_positive_int, default=N_EVAL)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--workers", type=_positive_int, default=1)
    ev.add_argument("--out", default=None, help=f"defaults to {REPORT_FILE} next to --model")
    ev.add_argument("--dump-dir", default=None)
    ev.set_defaults(func=cmd_evaluate)

    rp = sub.add_parser("report", help="render a report CSV or a snapshot convergence series")
    rp.add_argument("--in", dest="in_csv", default=None)
    rp.add_argument("--format", choices=["table", "csv"], default="table")
    rp.add_argument("--snapshots", default=None, help="directory of agop_step<k>.diag files")
    rp.add_argument("--data", default=None, help="run directory (masks for --snapshots)")
    rp.add_argument("--n-eval", type=_positive_int, default=N_EVAL)
    rp.set_defaults(func=cmd_report)
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _dataset_path(data: str, filename: str = TEST_FILE) -> str:
    return os.path.join(data, filename) if os.path.isdir(data) else data


def _load_pinned(path: str) -> List[Sample]:
    verify(path)
    return read_dataset(path)


def _load_diag(path: Optional[str]) -> Optional[AgopDiagonal]:
    if path is None:
        return None
    verify(path)
    return load_diag(path)


def _scenario_labels(run_dir: str) -> Dict[str, str]:
    path = os.path.join(run_dir, SCENARIO_FILE)
    if not os.path.exists(path):
        return {"scenario": "", "background": ""}
    with open(path) as f:
        data = json.load(f)
    return {"scenario": data.get("scenario", ""), "background": data.get("background", "")}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen(args: argparse.Namespace, argv: Sequence[str]) -> int:
    out = args.out
    if os.path.isdir(out) and os.listdir(out) and not args.force:
        raise ConfigurationError(f"{out} already exists and is not empty (use --force)")
    os.makedirs(out, exist_ok=True)

    extra = {"mixing": args.mixing} if args.mixing else {}
    train_spec = ScenarioSpec(args.scenario, args.background, args.n_train, args.seed,
                              split=Split.TRAIN, **extra)
    test_spec = ScenarioSpec(args.scenario, args.background, args.n_test,
                             derive_test_seed(args.seed), split=Split.TEST, **extra)

    manifest = RunManifest(out, "gen", argv, seeds={"train": train_spec.seed,
                                                    "test": test_spec.seed})
    for spec, filename in ((train_spec, TRAIN_FILE), (test_spec, TEST_FILE)):
        path = os.path.join(out, filename)
        write_dataset(path, generate_dataset(spec))
        manifest.record(path)

    spec_path = os.path.join(out, SCENARIO_FILE)
    payload = {**train_spec.to_dict(), "test_seed": test_spec.seed, "n_test": test_spec.n}
    atomic_write_bytes(spec_path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())
    manifest.record(spec_path)
    manifest.commit()
    logger.info("wrote %s and %s to %s", TRAIN_FILE, TEST_FILE, out)
    return EXIT_OK


def cmd_train(args: argparse.Namespace, argv: Sequence[str]) -> int:
    out = args.out or args.data
    train_set = _load_pinned(_dataset_path(args.data, TRAIN_FILE))
    test_set = _load_pinned(_dataset_path(args.data, TEST_FILE))

    config = TrainConfig(epochs=args.epochs, lr0=args.lr, weight_decay=args.wd,
                         batch_size=args.batch, seed=args.seed,
                         snapshot_every=args.snapshot_every, only_correct=args.only_correct,
                         checkpoint_every=args.checkpoint_every)
    model = build_cnn8by8(args.seed)
    hook = None
    if not args.no_agop_hook:
        hook = AgopTrainingHook(d=train_set[0].image.size, only_correct=args.only_correct,
                                snapshot_dir=os.path.join(out, SNAPSHOT_DIR),
                                snapshot_every=args.snapshot_every)

    logger.info("training %r for %d epochs on %d samples", model, config.epochs, len(train_set))
    result = train(model, train_set, test_set, config, hook=hook,
                   checkpoint_dir=os.path.join(out, CHECKPOINT_DIR),
                   progress=not args.quiet)

    manifest = RunManifest(out, "train", argv, seeds={"train": args.seed})
    model_path = os.path.join(out, MODEL_FILE)
    save_model(model_path, model)
    manifest.record(model_path)
    if hook is not None:
        diag_path = os.path.join(out, DIAG_FILE)
        save_diag(diag_path, hook.finalize(result.steps))
        manifest.record(diag_path)
        for _, path in hook.snapshots:
            manifest.record(path)
    for _, path in result.checkpoints:
        manifest.record(path)
    history_path = os.path.join(out, HISTORY_FILE)
    write_history(history_path, result.history)
    manifest.record(history_path)
    manifest.commit()

    final = result.history[-1]
    logger.info("done after %d steps: train_acc=%.3f test_acc=%.3f", result.steps,
                final.train_acc, final.test_acc)
    return EXIT_OK


def cmd_attribute(args: argparse.Namespace, argv: Sequence[str]) -> int:
    method = get_method(args.method)
    verify(args.model)
    model = load_model(args.model)
    diag = _load_diag(args.diag)
    if method.needs_diag and diag is None:
        raise ConfigurationError(f"method {method.name} needs --diag")
    dataset = _load_pinned(_dataset_path(args.data))
    if not 0 <= args.index < len(dataset):
        raise ParameterError(f"--index {args.index} outside [0, {len(dataset)})")
    sample = dataset[args.index]

    seed = sample_seed(args.seed, args.index) if method.seeded else args.seed
    saliency = attribute(method.name, model, sample.image, diag=diag, seed=seed)
    out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.model)), MAPS_DIR,
                                   pgm_filename(method.name, args.index))
    write_pgm(out, saliency)

    try:
        energy = f"{energy_gt(saliency.values, sample.mask):.6g}"
    except UndefinedMassError:
        energy = "nan"
    print(f"pg={pointing_game(saliency.values, sample.mask)} "
          f"miou={miou(saliency.values, sample.mask):.6g} energy_gt={energy}")
    logger.info("%s map for sample %d written to %s", method.label, args.index, out)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    model_dir = os.path.dirname(os.path.abspath(args.model))
    verify(args.model)
    model = load_model(args.model)
    diag = _load_diag(args.diag)
    test_set = _load_pinned(_dataset_path(args.data, TEST_FILE))[:args.n_eval]
    baseline = None
    if os.path.isdir(args.data):
        baseline = pixel_mean(_load_pinned(os.path.join(args.data, TRAIN_FILE)))
    else:
        logger.warning("--data is a single file; deletion/insertion use a zero baseline")

    labels = _scenario_labels(args.data if os.path.isdir(args.data) else model_dir)
    records = evaluate_suite(model, diag, test_set, methods=args.methods, seed=args.seed,
                             scenario=labels["scenario"], background=labels["background"],
                             baseline=baseline, workers=args.workers,
                             dump_dir=args.dump_dir, progress=not args.quiet)

    out = args.out or os.path.join(model_dir, REPORT_FILE)
    write_report(out, records)
    manifest = RunManifest(os.path.dirname(os.path.abspath(out)), "evaluate", argv,
                           seeds={"evaluate": args.seed})
    manifest.record(out)
    manifest.commit()
    logger.info("report with %d methods written to %s", len(records), out)
    return EXIT_OK


def cmd_report(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if args.snapshots:
        if not args.data:
            raise ConfigurationError("--snapshots needs --data for the ground-truth masks")
        dataset = _load_pinned(_dataset_path(args.data))[:args.n_eval]
        for _, path in list_snapshots(args.snapshots):
            verify(path)
        sys.stdout.write(format_series(snapshot_series(args.snapshots, dataset)))
        return EXIT_OK
    if not args.in_csv:
        raise ConfigurationError("report needs --in or --snapshots")
    verify(args.in_csv)
    records = read_report(args.in_csv)
    if args.format == "csv":
        sys.stdout.write(format_report(records))
    else:
        sys.stdout.write(render_table(records))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry
# ---------------------------------------------------------------------------

def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version and 2 for usage errors.
        return int(exc.code or 0)
    configure_logging(args.log_level)
    try:
        return args.func(args, argv)
    except (BenchError, OSError) as exc:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
