"""File ingestion and report emission.

Datasets travel as small human-readable CSVs; every loader validates fully
before any output is produced, and writes go through a temp-file rename so
failures never leave partial files behind.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .erroranalysis import AttributeSchema
from .hierarchy import ClassLabel, ClassProbabilities, parse_task
from .records import AnnotationRecord, PredictionRecord
from .synth import CohortSpec, StratumSpec

PREDICTIONS_COLUMNS = (
    "image_id",
    "patient_id",
    "fold",
    "p_normal",
    "p_classic",
    "p_indet",
    "p_other",
    "label",
    "view",
    "pcr",
)
ANNOTATIONS_COLUMNS = ("image_id", "annotator_id", "label", "duration_seconds")


class IngestionError(ValueError):
    """Raised when an input file fails validation; messages carry the row."""


def _float_field(raw: str, column: str, row: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise IngestionError(f"row {row}: column {column!r} is not a number: {raw!r}") from None


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    """Read a predictions CSV; duplicate (image_id, fold) pairs, bad enums
    and probability-sum violations are reported with their row number."""
    records = []
    seen: set[tuple[str, int | None]] = set()
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        required = [c for c in PREDICTIONS_COLUMNS if c != "fold"]
        missing = [c for c in required if c not in header]
        if missing:
            raise IngestionError(f"missing columns: {', '.join(missing)}")
        has_fold = "fold" in header
        for row_number, row in enumerate(reader, start=2):
            fold = None
            if has_fold and (row.get("fold") or "").strip():
                try:
                    fold = int(row["fold"])
                except ValueError:
                    raise IngestionError(f"row {row_number}: fold is not an integer") from None
            probs = tuple(
                _float_field(row[c], c, row_number)
                for c in ("p_normal", "p_classic", "p_indet", "p_other")
            )
            try:
                record = PredictionRecord(
                    image_id=row["image_id"],
                    patient_id=row["patient_id"],
                    probs=ClassProbabilities(probs),
                    label=ClassLabel.parse(row["label"]),
                    view=row["view"].strip().upper(),
                    pcr=row["pcr"].strip().upper(),
                    fold=fold,
                )
            except ValueError as exc:
                raise IngestionError(f"row {row_number}: {exc}") from None
            key = (record.image_id, record.fold)
            if key in seen:
                raise IngestionError(f"row {row_number}: duplicate image/fold pair {key!r}")
            seen.add(key)
            records.append(record)
    if not records:
        raise IngestionError(f"no prediction rows in {path}")
    return records


def predictions_csv(records: Sequence[PredictionRecord]) -> str:
    lines = [",".join(PREDICTIONS_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                [
                    r.image_id,
                    r.patient_id,
                    "" if r.fold is None else str(r.fold),
                    repr(r.probs.p[0]),
                    repr(r.probs.p[1]),
                    repr(r.probs.p[2]),
                    repr(r.probs.p[3]),
                    r.label.token,
                    r.view,
                    r.pcr,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    records = []
    seen: set[tuple[str, str]] = set()
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        required = [c for c in ANNOTATIONS_COLUMNS if c != "duration_seconds"]
        missing = [c for c in required if c not in header]
        if missing:
            raise IngestionError(f"missing columns: {', '.join(missing)}")
        for row_number, row in enumerate(reader, start=2):
            duration = None
            raw = (row.get("duration_seconds") or "").strip()
            if raw:
                duration = _float_field(raw, "duration_seconds", row_number)
            try:
                record = AnnotationRecord(
                    image_id=row["image_id"],
                    annotator_id=row["annotator_id"],
                    label=ClassLabel.parse(row["label"]),
                    duration=duration,
                )
            except ValueError as exc:
                raise IngestionError(f"row {row_number}: {exc}") from None
            key = (record.image_id, record.annotator_id)
            if key in seen:
                raise IngestionError(f"row {row_number}: duplicate annotation {key!r}")
            seen.add(key)
            records.append(record)
    if not records:
        raise IngestionError(f"no annotation rows in {path}")
    return records


def annotations_csv(records: Sequence[AnnotationRecord]) -> str:
    lines = [",".join(ANNOTATIONS_COLUMNS)]
    for r in records:
        duration = "" if r.duration is None else repr(r.duration)
        lines.append(",".join([r.image_id, r.annotator_id, r.label.token, duration]))
    return "\n".join(lines) + "\n"


def load_fold_assignment(path: str | Path) -> dict[str, int]:
    assignment: dict[str, int] = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != ["patient_id", "fold"]:
            raise IngestionError("fold file must have columns patient_id,fold")
        for row_number, row in enumerate(reader, start=2):
            patient = row["patient_id"]
            if patient in assignment:
                raise IngestionError(f"row {row_number}: duplicate patient {patient!r}")
            try:
                assignment[patient] = int(row["fold"])
            except ValueError:
                raise IngestionError(f"row {row_number}: fold is not an integer") from None
    return assignment


def fold_assignment_csv(assignment: dict[str, int]) -> str:
    lines = ["patient_id,fold"]
    for patient in sorted(assignment):
        lines.append(f"{patient},{assignment[patient]}")
    return "\n".join(lines) + "\n"


def load_cohort_spec(path: str | Path) -> CohortSpec:
    """Read a declarative cohort spec from JSON.

    Layout: {"seed": int, "task": str, "schema": [{"name", "values"}...]?,
    "strata": [{"attributes": {...}, "label": str, "instances": int,
    "errors": int}...]}.
    """
    with open(path) as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise IngestionError(f"invalid JSON in {path}: {exc}") from None
    try:
        kwargs = {}
        if "schema" in doc:
            kwargs["schema"] = AttributeSchema(
                tuple((a["name"], tuple(a["values"])) for a in doc["schema"])
            )
        strata = tuple(
            StratumSpec(
                attributes=dict(s["attributes"]),
                label=ClassLabel.parse(s["label"]),
                instances=int(s["instances"]),
                errors=int(s["errors"]),
            )
            for s in doc["strata"]
        )
        return CohortSpec(
            strata=strata,
            seed=int(doc["seed"]),
            task=parse_task(doc.get("task", "sugg")),
            **kwargs,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestionError(f"invalid cohort spec: {exc}") from None


def curve_csv(points: Iterable[tuple[float, float]], x_name: str, y_name: str) -> str:
    lines = [f"{x_name},{y_name}"]
    for x, y in points:
        lines.append(f"{x!r},{y!r}")
    return "\n".join(lines) + "\n"


def atomic_write(path: str | Path, text: str) -> None:
    """Write text via a temp file and rename, so failures leave no partial
    output."""
    path = Path(path)
    handle = tempfile.NamedTemporaryFile(
        "w", dir=path.parent or Path("."), prefix=f".{path.name}.", delete=False
    )
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except BaseException:
        os.unlink(handle.name)
        raise


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
