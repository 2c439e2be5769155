"""Plain-text rendering of evaluation reports for the console."""

from __future__ import annotations

from typing import List, Sequence, Tuple

from attribution.registry import METHODS
from metrics.suite import EvalRecord

# (header, EvalRecord attribute) per column, left to right.
COLUMNS: List[Tuple[str, str]] = [
    ("Method", "label"),
    ("PG", "pg"),
    ("mIoU", "miou"),
    ("Energy-GT", "energy_gt"),
    ("Del. AUC", "deletion_auc"),
    ("Ins. AUC", "insertion_auc"),
    ("ms/s.", "ms_per_sample"),
    ("mIoU-c", "miou_centered"),
]


def method_label(name: str) -> str:
    method = METHODS.get(name)
    return method.label if method else name


def sort_by_miou(records: Sequence[EvalRecord]) -> List[EvalRecord]:
    """mIoU descending; equal mIoU keeps file order."""
    return sorted(records, key=lambda r: -r.miou)


def _cell(record: EvalRecord, attr: str) -> str:
    if attr == "label":
        return method_label(record.method)
    value = getattr(record, attr)
    if attr == "ms_per_sample":
        return f"{value:.2f}"
    return f"{value:.3f}"


def render_table(records: Sequence[EvalRecord]) -> str:
    rows = [[header for header, _ in COLUMNS]]
    for record in sort_by_miou(records):
        rows.append([_cell(record, attr) for _, attr in COLUMNS])

    widths = [max(len(row[i]) for row in rows) for i in range(len(COLUMNS))]
    lines = []
    for index, row in enumerate(rows):
        # Method names left-aligned, numbers right-aligned.
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if index == 0:
            lines.append("  ".join("-" * w for w in widths))

    if records:
        first = records[0]
        title = f"{first.scenario or '?'} / {first.background or '?'}  (n={first.n}, seed={first.seed})"
        lines.insert(0, title)
    return "\n".join(lines) + "\n"
