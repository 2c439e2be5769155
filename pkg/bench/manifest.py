"""Run manifest: an append-only manifest.jsonl recording how each artifact was made.

One JSON object per command invocation: the subcommand, argv, seeds, version,
UTC timestamps and the sha256 of every file it wrote. ``verify`` re-hashes a
file against the latest entry that recorded it.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Optional

from constants import MANIFEST_FILE, VERSION
from engine.exceptions import ManifestError
from engine.save_load import sha256_file

logger = logging.getLogger(__name__)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class ManifestEntry:
    command: str
    argv: List[str]
    seeds: Dict[str, int] = field(default_factory=dict)
    files: Dict[str, str] = field(default_factory=dict)
    version: str = VERSION
    started: str = field(default_factory=_utc_now)
    finished: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestEntry":
        try:
            return cls(
                command=data["command"],
                argv=list(data.get("argv", [])),
                seeds={k: int(v) for k, v in data.get("seeds", {}).items()},
                files=dict(data.get("files", {})),
                version=data.get("version", ""),
                started=data.get("started", ""),
                finished=data.get("finished", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"malformed manifest entry: {exc}") from exc


class RunManifest:
    """Collects the files one command writes, then appends a single entry."""

    def __init__(self, run_dir: str, command: str, argv: List[str],
                 seeds: Optional[Dict[str, int]] = None) -> None:
        self.run_dir = run_dir
        self.entry = ManifestEntry(command=command, argv=list(argv), seeds=dict(seeds or {}))

    @property
    def path(self) -> str:
        return os.path.join(self.run_dir, MANIFEST_FILE)

    def record(self, path: str) -> None:
        rel = os.path.relpath(os.path.abspath(path), os.path.abspath(self.run_dir))
        self.entry.files[rel] = sha256_file(path)

    def commit(self) -> ManifestEntry:
        self.entry.finished = _utc_now()
        os.makedirs(self.run_dir, exist_ok=True)
        with open(self.path, "a") as f:
            f.write(json.dumps(self.entry.to_dict(), sort_keys=True) + "\n")
        logger.debug("manifest: %s recorded %d files", self.entry.command, len(self.entry.files))
        return self.entry


def load_entries(run_dir: str) -> List[ManifestEntry]:
    path = os.path.join(run_dir, MANIFEST_FILE)
    if not os.path.exists(path):
        return []
    entries = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{line_no}: {exc}") from exc
            entries.append(ManifestEntry.from_dict(data))
    return entries


def verify(path: str) -> bool:
    """True if path matches its latest recorded hash, False if it was never recorded.

    Raises ManifestError when the recorded hash differs from the file on disk.
    """
    run_dir = os.path.dirname(os.path.abspath(path))
    rel = os.path.basename(path)
    # Artifacts in a subdirectory (snapshots/) are recorded against the parent run dir.
    if not os.path.exists(os.path.join(run_dir, MANIFEST_FILE)):
        parent = os.path.dirname(run_dir)
        rel = os.path.join(os.path.basename(run_dir), rel)
        run_dir = parent
    recorded = None
    for entry in load_entries(run_dir):
        if rel in entry.files:
            recorded = entry.files[rel]
    if recorded is None:
        logger.warning("%s is not recorded in any manifest", path)
        return False
    actual = sha256_file(path)
    if actual != recorded:
        logger.error("%s changed since it was recorded", path)
        raise ManifestError(f"{path}: sha256 {actual[:12]}... does not match "
                            f"manifest {recorded[:12]}...")
    return True
