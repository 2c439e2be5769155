"""Per-method evaluation over a dataset, and the report CSV format."""

from __future__ import annotations

import csv
import io
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from constants import CSV_SIG_DIGITS, DUMP_SAMPLES, IMAGE_SIZE, SMOOTHING_WINDOW
from engine.exceptions import ConfigurationError, ParameterError, ReportParseError
from engine.save_load import atomic_write_bytes
from model.base import Classifier
from agop.diagonal import AgopDiagonal, load_diag
from attribution.registry import MethodDef, attribute, resolve_methods, sample_seed
from attribution.saliency import pgm_filename, write_pgm
from metrics.faithfulness import deletion_auc, insertion_auc
from metrics.localization import (
    energy_gt, expected_random_energy, expected_random_miou, miou, pointing_game,
)
from tris.scenarios import Sample

logger = logging.getLogger(__name__)

REPORT_HEADER = ["method", "scenario", "background", "pg", "miou", "energy_gt", "deletion",
                 "insertion", "ms_per_sample", "n", "seed", "miou_centered",
                 "energy_gt_centered"]


@dataclass
class EvalRecord:
    method: str
    scenario: str
    background: str
    pg: float
    miou: float
    energy_gt: float
    deletion_auc: float
    insertion_auc: float
    ms_per_sample: float
    n: int
    seed: int
    miou_centered: float = 0.0
    energy_gt_centered: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SampleScores:
    pg: int
    miou: float
    energy_gt: float
    deletion_auc: float
    insertion_auc: float
    ms: float
    miou_centered: float
    energy_gt_centered: float


def score_sample(model: Classifier, method: MethodDef, sample: Sample, index: int,
                 diag: Optional[AgopDiagonal], seed: int,
                 baseline: Optional[np.ndarray]) -> SampleScores:
    run_seed = sample_seed(seed, index) if method.seeded else seed
    saliency = attribute(method.name, model, sample.image, diag=diag, seed=run_seed)
    k = sample.mask_size
    values = saliency.values
    if values.sum() > 0:
        energy = energy_gt(values, sample.mask)
    else:
        # An empty map ranks like a uniform one; score its mass the same way.
        energy = expected_random_energy(k, sample.mask.size)
    iou = miou(values, sample.mask)
    return SampleScores(
        pg=pointing_game(values, sample.mask),
        miou=iou,
        energy_gt=energy,
        deletion_auc=deletion_auc(model, sample.image, values, baseline),
        insertion_auc=insertion_auc(model, sample.image, values, baseline),
        ms=saliency.ms_elapsed,
        miou_centered=iou - expected_random_miou(k, sample.mask.size),
        energy_gt_centered=energy - expected_random_energy(k, sample.mask.size),
    )


def evaluate_suite(model: Classifier, diag: Optional[AgopDiagonal],
                   dataset: Sequence[Sample], methods: str | Sequence[str] = "all",
                   seed: int = 0, scenario: str = "", background: str = "",
                   baseline: Optional[np.ndarray] = None, workers: int = 1,
                   dump_dir: Optional[str] = None, progress: bool = False) -> List[EvalRecord]:
    """One EvalRecord per method: metric means and mean ms/sample over the dataset."""
    if not dataset:
        raise ParameterError("evaluate_suite needs a non-empty dataset")
    resolved = resolve_methods(methods if isinstance(methods, str) else list(methods))
    missing = [m.name for m in resolved if m.needs_diag and diag is None]
    if missing:
        raise ConfigurationError(f"methods {', '.join(missing)} need an AGOP diagonal")

    records: List[EvalRecord] = []
    for method in resolved:
        def job(index: int, method: MethodDef = method) -> SampleScores:
            return score_sample(model, method, dataset[index], index, diag, seed, baseline)

        indices = range(len(dataset))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                # map() yields in submission order, keeping the reduction deterministic.
                scores = list(pool.map(job, indices))
        else:
            scores = [job(i) for i in tqdm(indices, desc=method.name, disable=not progress)]

        if dump_dir:
            _dump_maps(model, method, dataset, diag, seed, dump_dir)

        records.append(_aggregate(method.name, scenario, background, seed, scores))
        logger.info("%s: pg=%.3f miou=%.3f energy=%.3f del=%.3f ins=%.3f %.2f ms/sample",
                    method.name, records[-1].pg, records[-1].miou, records[-1].energy_gt,
                    records[-1].deletion_auc, records[-1].insertion_auc,
                    records[-1].ms_per_sample)
    return records


def _aggregate(method: str, scenario: str, background: str, seed: int,
               scores: Sequence[SampleScores]) -> EvalRecord:
    def mean(attr: str) -> float:
        return float(np.mean([getattr(s, attr) for s in scores]))

    return EvalRecord(
        method=method, scenario=scenario, background=background,
        pg=mean("pg"), miou=mean("miou"), energy_gt=mean("energy_gt"),
        deletion_auc=mean("deletion_auc"), insertion_auc=mean("insertion_auc"),
        ms_per_sample=mean("ms"), n=len(scores), seed=seed,
        miou_centered=mean("miou_centered"), energy_gt_centered=mean("energy_gt_centered"),
    )


def _dump_maps(model: Classifier, method: MethodDef, dataset: Sequence[Sample],
               diag: Optional[AgopDiagonal], seed: int, directory: str) -> None:
    for index in range(min(DUMP_SAMPLES, len(dataset))):
        run_seed = sample_seed(seed, index) if method.seeded else seed
        saliency = attribute(method.name, model, dataset[index].image, diag=diag, seed=run_seed)
        write_pgm(os.path.join(directory, pgm_filename(method.name, index)), saliency)


# ---------------------------------------------------------------------------
# Report CSV
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.{CSV_SIG_DIGITS}g}"


def _row(record: EvalRecord) -> List[str]:
    return [record.method, record.scenario, record.background, _fmt(record.pg),
            _fmt(record.miou), _fmt(record.energy_gt), _fmt(record.deletion_auc),
            _fmt(record.insertion_auc), _fmt(record.ms_per_sample), str(record.n),
            str(record.seed), _fmt(record.miou_centered), _fmt(record.energy_gt_centered)]


def format_report(records: Sequence[EvalRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for record in records:
        writer.writerow(_row(record))
    return buffer.getvalue()


def write_report(path: str, records: Sequence[EvalRecord]) -> None:
    atomic_write_bytes(path, format_report(records).encode("utf-8"))


_FLOAT_COLUMNS = {"pg", "miou", "energy_gt", "deletion", "insertion", "ms_per_sample",
                  "miou_centered", "energy_gt_centered"}
_COLUMN_TO_FIELD = {"deletion": "deletion_auc", "insertion": "insertion_auc"}


def parse_report(text: str) -> List[EvalRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ReportParseError("report is empty", 1)
    header = rows[0]
    required = REPORT_HEADER[:11]
    if header[:len(required)] != required:
        raise ReportParseError(f"unexpected header {header}", 1)

    field_names = {f.name for f in fields(EvalRecord)}
    records: List[EvalRecord] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ReportParseError(f"expected {len(header)} fields, got {len(row)}", line_no)
        values: Dict[str, object] = {}
        for column, raw in zip(header, row):
            name = _COLUMN_TO_FIELD.get(column, column)
            if name not in field_names:
                continue
            try:
                if column in _FLOAT_COLUMNS:
                    values[name] = float(raw)
                elif column in ("n", "seed"):
                    values[name] = int(raw)
                else:
                    values[name] = raw
            except ValueError:
                raise ReportParseError(f"column {column}: cannot parse {raw!r}", line_no) from None
        records.append(EvalRecord(**values))  # type: ignore[arg-type]
    if not records:
        raise ReportParseError("report has a header but no rows", 2)
    return records


def read_report(path: str) -> List[EvalRecord]:
    with open(path, "r", newline="") as f:
        return parse_report(f.read())


# ---------------------------------------------------------------------------
# AGOP-Global convergence over training snapshots
# ---------------------------------------------------------------------------

_SNAPSHOT_RE = re.compile(r"^agop_step(\d+)\.diag$")


def list_snapshots(directory: str) -> List[Tuple[int, str]]:
    """(step, path) for every agop_step<k>.diag in directory, ascending by step."""
    found = []
    for name in os.listdir(directory):
        match = _SNAPSHOT_RE.match(name)
        if match:
            found.append((int(match.group(1)), os.path.join(directory, name)))
    return sorted(found)


def global_miou(diag: AgopDiagonal, dataset: Sequence[Sample]) -> float:
    """Mean mIoU of the (input-independent) AGOP-Global map over dataset masks."""
    values = diag.as_map(IMAGE_SIZE)
    return float(np.mean([miou(values, s.mask) for s in dataset]))


def snapshot_series(directory: str, dataset: Sequence[Sample]) -> List[Tuple[int, float]]:
    snapshots = list_snapshots(directory)
    if not snapshots:
        raise ParameterError(f"no agop_step<k>.diag snapshots in {directory}")
    return [(step, global_miou(load_diag(path), dataset)) for step, path in snapshots]


def moving_average(values: Sequence[float], window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Trailing mean over the last `window` points; the first points average what exists."""
    if window < 1:
        raise ParameterError(f"window must be >= 1, got {window}")
    values = np.asarray(values, dtype=np.float64)
    sums = np.cumsum(np.concatenate([[0.0], values]))
    ends = np.arange(1, values.size + 1)
    starts = np.maximum(ends - window, 0)
    return (sums[ends] - sums[starts]) / (ends - starts)


def format_series(series: Sequence[Tuple[int, float]],
                  window: int = SMOOTHING_WINDOW) -> str:
    smoothed = moving_average([v for _, v in series], window)
    lines = ["step,agop_global_miou,smoothed"]
    for (step, value), smooth in zip(series, smoothed):
        lines.append(f"{step},{_fmt(value)},{_fmt(float(smooth))}")
    return "\n".join(lines) + "\n"
