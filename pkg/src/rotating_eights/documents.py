"""On-disk formats: orbit and family JSON documents, coefficient tables.

Floats are written with 17 significant digits, so a document read back and
written again is byte-identical and every double survives unchanged. CSV
tables use the shortest text that parses back to the same double.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .action import ActionBreakdown
from .orbit_model import BLOCKS, FourierOrbit, RotationAxis
from .solver import FamilyRecord, SolveOutcome, SolveStatus, leading_keys

SCHEMA_VERSION = 1


class DocumentError(ValueError):
    pass


# -- JSON text with fixed float precision ----------------------------------


def _float_text(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _emit(value: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _float_text(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_emit(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in value):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in value) + "]"
        items = [pad + _emit(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(obj: Any) -> str:
    return _emit(obj, 2, 0) + "\n"


# -- orbits -----------------------------------------------------------------


def orbit_to_dict(orbit: FourierOrbit) -> dict:
    blocks = [b for b in BLOCKS if orbit.masks()[b].any()]
    return {
        "axis": orbit.axis.value,
        "omega": orbit.omega,
        "n": orbit.n_bodies,
        "k_max": orbit.k_max,
        "coefficients": {b: getattr(orbit, b) for b in blocks},
    }


def orbit_from_dict(doc: dict) -> FourierOrbit:
    try:
        coeffs = doc["coefficients"]
        unknown = set(coeffs) - set(BLOCKS)
        if unknown:
            raise DocumentError(f"unknown coefficient blocks {sorted(unknown)}")
        return FourierOrbit(RotationAxis.parse(doc["axis"]), float(doc["omega"]), int(doc["n"]),
                            int(doc["k_max"]),
                            **{b: None if b not in coeffs else np.array(coeffs[b], dtype=float)
                               for b in BLOCKS})
    except KeyError as exc:
        raise DocumentError(f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise DocumentError(str(exc)) from None


def outcome_to_dict(outcome: SolveOutcome) -> dict:
    return {
        "status": outcome.status.value,
        "iterations": outcome.iterations,
        "final_step_norm": outcome.final_step_norm,
        "gradient_norm": outcome.final_gradient_norm,
        "action": None if outcome.action is None else {
            k: v for k, v in outcome.action.as_dict().items() if k != "total"},
    }


def outcome_from_dict(meta: dict, orbit: FourierOrbit) -> SolveOutcome:
    act = meta.get("action")
    return SolveOutcome(
        SolveStatus(meta["status"]), orbit, int(meta["iterations"]),
        float(meta["final_step_norm"]), float(meta["gradient_norm"]),
        None if act is None else ActionBreakdown(**{k: float(v) for k, v in act.items()}),
    )


def orbit_document(orbit: FourierOrbit, outcome: SolveOutcome | None = None,
                   config: dict | None = None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "kind": "orbit", **orbit_to_dict(orbit)}
    solver = None
    if outcome is not None:
        solver = outcome_to_dict(outcome)
        if config is not None:
            solver["config"] = config
    doc["solver"] = solver
    return doc


def family_document(record: FamilyRecord, config: dict | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "family",
        "axis": record.axis.value,
        "n": record.n_bodies,
        "boundary": record.boundary,
        "config": config,
        "entries": [
            {"omega": om, **outcome_to_dict(out), "orbit": orbit_to_dict(out.orbit)}
            for om, out in record.entries
        ],
    }


def family_from_document(doc: dict) -> FamilyRecord:
    _check_kind(doc, "family")
    record = FamilyRecord(RotationAxis.parse(doc["axis"]), int(doc["n"]), boundary=doc.get("boundary"))
    for entry in doc["entries"]:
        orbit = orbit_from_dict(entry["orbit"])
        record.entries.append((float(entry["omega"]), outcome_from_dict(entry, orbit)))
    return record


def _check_kind(doc: dict, kind: str) -> None:
    if not isinstance(doc, dict):
        raise DocumentError("document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DocumentError(f"unsupported schema_version {version!r}")
    if doc.get("kind") != kind:
        raise DocumentError(f"expected a {kind} document, got {doc.get('kind')!r}")


def save(doc: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc))
    return path


def load(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path} is not valid JSON: {exc}") from None


def load_orbit(path: str | Path) -> tuple[FourierOrbit, dict]:
    doc = load(path)
    _check_kind(doc, "orbit")
    return orbit_from_dict(doc), doc.get("solver") or {}


def load_family(path: str | Path) -> FamilyRecord:
    return family_from_document(load(path))


def load_any_orbit(path: str | Path, omega: float | None = None) -> FourierOrbit:
    """An orbit document, or the converged family member nearest ``omega``."""
    doc = load(path)
    if isinstance(doc, dict) and doc.get("kind") == "family":
        record = family_from_document(doc)
        conv = record.converged()
        if not conv:
            raise DocumentError(f"{path} has no converged orbits")
        target = conv[0][0] if omega is None else omega
        return min(conv, key=lambda item: abs(item[0] - target))[1].orbit
    _check_kind(doc, "orbit")
    return orbit_from_dict(doc)


# -- coefficient table -------------------------------------------------------


def coefficient_table(record: FamilyRecord) -> tuple[list[str], list[list[float]]]:
    """Leading three harmonics of each block, one row per converged omega, sorted by omega."""
    conv = sorted(record.converged(), key=lambda item: item[0])
    if not conv:
        return ["omega"], []
    keys = leading_keys(conv[0][1].orbit)
    rows = [[om] + [out.orbit.coefficient(k) for k in keys] for om, out in conv]
    return ["omega"] + keys, rows


def table_csv(header: list[str], rows: list[list[float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def read_table_csv(text: str) -> tuple[list[str], np.ndarray]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [[float(x) for x in row] for row in reader if row]
    return header, np.array(rows).reshape(len(rows), len(header))
