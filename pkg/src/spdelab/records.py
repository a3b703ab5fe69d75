"""Seed streams, batch summaries and CSV/JSON emission."""

from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

SCHEMA_VERSION = "spdelab/1"


class NumericalAbort(RuntimeError):
    """Raised when a simulation produces non-finite or exploding values."""


def stream(root_seed: int, name: str, run_id: int = 0) -> np.random.Generator:
    """Independent generator for the named stream ``name:run_id``.

    Streams are keyed by content, so adding replicas never perturbs the
    draws of existing ones.
    """
    key = (zlib.crc32(name.encode()), int(run_id))
    ss = np.random.SeedSequence(int(root_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def stream_seed(root_seed: int, name: str, run_id: int = 0) -> int:
    """A 63-bit integer identifying the stream, recorded alongside each run."""
    key = (zlib.crc32(name.encode()), int(run_id))
    ss = np.random.SeedSequence(int(root_seed), spawn_key=key)
    return int(ss.generate_state(2, np.uint64)[0] >> np.uint64(1))


@dataclass
class HitRecord:
    run_id: int
    seed: int
    hit_time: float
    timed_out: bool


@dataclass
class BatchSummary:
    """Aggregate of replica hitting times; timeouts are never averaged in."""

    records: list[HitRecord]
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.hit_time for r in self.records if not r.timed_out])

    @property
    def n_timeouts(self) -> int:
        return sum(r.timed_out for r in self.records)

    @property
    def mean(self) -> float:
        t = self.times
        return float(t.mean()) if t.size else float("nan")

    @property
    def stderr(self) -> float:
        t = self.times
        return float(t.std(ddof=1) / np.sqrt(t.size)) if t.size > 1 else float("nan")

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "mean": self.mean,
            "stderr": self.stderr,
            "n_runs": len(self.records),
            "n_hits": int(self.times.size),
            "n_timeouts": self.n_timeouts,
            "config": self.config,
        }


def hits_csv(records: Iterable[HitRecord]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_id", "seed", "hit_time", "timed_out"])
    for r in records:
        w.writerow([r.run_id, r.seed, repr(float(r.hit_time)), int(r.timed_out)])
    return buf.getvalue()


def table_csv(header: list[str], rows: Iterable[Iterable[Any]]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def dump_json(obj: dict[str, Any]) -> str:
    payload = {"schema_version": SCHEMA_VERSION, **obj}
    return json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)!r}")


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
