"""Machine-readable run reports: versioned JSON envelopes and CSV
trajectories.

Serialization is deterministic: keys are sorted, floats use repr, and
the wall-clock field is the only nondeterministic entry, so runs asking
for reproducible output simply omit it.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

SCHEMA_VERSION = 1


def _plain(obj):
    """Recursively convert numpy scalars/arrays and report objects to
    JSON-friendly builtins."""
    if hasattr(obj, "as_dict"):
        return _plain(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


@dataclass
class RunConfig:
    """Echo of the options a run actually used."""

    command: str
    geometry: str | None = None
    params: dict = dc_field(default_factory=dict)
    tolerances: dict = dc_field(default_factory=dict)
    count: int = 100
    order: int = 16
    grid: dict = dc_field(default_factory=dict)
    seed: int | None = None
    out: str | None = None

    def as_dict(self) -> dict:
        return {"command": self.command, "geometry": self.geometry,
                "params": _plain(self.params),
                "tolerances": _plain(self.tolerances),
                "count": self.count, "order": self.order,
                "grid": _plain(self.grid), "seed": self.seed,
                "out": self.out}


@dataclass
class ReportEnvelope:
    """Top-level report: config echo, records, and overall verdict.

    The verdict is "pass" exactly when every record with a ``passed``
    field passed; informational records (no such field) do not vote.
    """

    command: str
    config: dict
    records: list
    version: str
    wall_clock_s: float | None = None
    schema: int = SCHEMA_VERSION

    @property
    def verdict(self) -> str:
        for rec in self.records:
            rec = rec.as_dict() if hasattr(rec, "as_dict") else rec
            if rec.get("passed") is False:
                return "fail"
        return "pass"

    def as_dict(self) -> dict:
        out = {"schema": self.schema, "version": self.version,
               "command": self.command, "config": _plain(self.config),
               "records": [_plain(r) for r in self.records],
               "verdict": self.verdict}
        # Absent, not null, in reproducible runs: the key set itself is
        # part of the byte-level contract.
        if self.wall_clock_s is not None:
            out["wall_clock_s"] = self.wall_clock_s
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"


TRAJECTORY_COLUMNS = ("t", "node", "x1", "A", "W")


def trajectory_csv(run) -> str:
    """CSV of flow snapshots; columns t,node,x1,A,W,phi_1..phi_n.

    ``run`` is a FlowRun; every snapshot contributes one row per grid
    node. W is the full fiber coefficient g_ii(x1), map components
    follow in order.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    n = run.snapshots[0].phi.shape[1]
    writer.writerow(list(TRAJECTORY_COLUMNS)
                    + [f"phi_{g + 1}" for g in range(n)])
    for state in run.snapshots:
        for i in range(state.x.size):
            writer.writerow([repr(float(state.t)), i,
                             repr(float(state.x[i])),
                             repr(float(state.A[i])),
                             repr(float(state.W[i]))]
                            + [repr(float(v)) for v in state.phi[i]])
    return buf.getvalue()


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
