"""Run records and their CSV / JSON serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ParseError

CSV_FIELDS = ["algorithm", "problem", "seed", "best_f", "evaluations", "iterations", "wall_seconds", "best_x"]


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one optimizer run on one problem instance."""

    algorithm: str
    problem: str
    seed: int
    best_x: tuple[int, ...]
    best_f: float
    evaluations: int
    wall_seconds: float
    iterations: int


def record_key(r: RunRecord) -> tuple:
    """Deterministic payload of a record (wall time carries scheduling noise)."""
    return (r.algorithm, r.problem, r.seed, r.best_x, r.best_f, r.evaluations, r.iterations)


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def str_to_bits(s: str) -> tuple[int, ...]:
    if any(c not in "01" for c in s):
        raise ParseError(f"bit string must contain only 0/1, got {s!r}")
    return tuple(int(c) for c in s)


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for r in records:
            writer.writerow(
                [r.algorithm, r.problem, r.seed, repr(r.best_f), r.evaluations, r.iterations,
                 repr(r.wall_seconds), bits_to_str(r.best_x)]
            )


def read_records_csv(path) -> list[RunRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_FIELDS:
            raise ParseError(f"unexpected record header {header!r}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_FIELDS):
                raise ParseError(f"expected {len(CSV_FIELDS)} fields, got {len(row)}", line=lineno)
            try:
                out.append(
                    RunRecord(
                        algorithm=row[0],
                        problem=row[1],
                        seed=int(row[2]),
                        best_f=float(row[3]),
                        evaluations=int(row[4]),
                        iterations=int(row[5]),
                        wall_seconds=float(row[6]),
                        best_x=str_to_bits(row[7]),
                    )
                )
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return out


def write_records_json(records, path):
    payload = []
    for r in records:
        d = asdict(r)
        d["best_x"] = list(r.best_x)
        payload.append(d)
    Path(path).write_text(json.dumps(payload, indent=1))


def read_records_json(path) -> list[RunRecord]:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), line=exc.lineno) from exc
    out = []
    for d in payload:
        out.append(
            RunRecord(
                algorithm=d["algorithm"],
                problem=d["problem"],
                seed=int(d["seed"]),
                best_x=tuple(int(b) for b in d["best_x"]),
                best_f=float(d["best_f"]),
                evaluations=int(d["evaluations"]),
                wall_seconds=float(d["wall_seconds"]),
                iterations=int(d["iterations"]),
            )
        )
    return out


def write_records(records, path):
    """Dispatch on extension: .json for full fidelity, anything else CSV."""
    if str(path).endswith(".json"):
        write_records_json(records, path)
    else:
        write_records_csv(records, path)


def read_records(path) -> list[RunRecord]:
    if str(path).endswith(".json"):
        return read_records_json(path)
    return read_records_csv(path)
