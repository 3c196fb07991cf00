# data_loader.py
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from errors import DataError
from imaging import load_image

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["id", "path", "label", "split"]
SPLITS = ("train", "test", "val", "unassigned")


@dataclass(frozen=True)
class Manifest:
    """Dataset records (id, absolute path, label, split) in file order."""
    records: pd.DataFrame
    root: Path

    def __len__(self):
        return len(self.records)

    @property
    def ids(self):
        return self.records["id"].tolist()

    @property
    def labels(self):
        return self.records["label"].tolist()

    def subset(self, split):
        return Manifest(self.records[self.records["split"] == split].reset_index(drop=True), self.root)


def _validate(df, source):
    if df.empty:
        return df
    duplicated = df.loc[df["id"].duplicated(), "id"].tolist()
    if duplicated:
        raise DataError(f"{source}: duplicate ids {duplicated[:5]}")
    bad_splits = sorted(set(df["split"]) - set(SPLITS))
    if bad_splits:
        raise DataError(f"{source}: unknown split values {bad_splits}; expected one of {SPLITS}")
    return df


def records_to_manifest(records, root, source="manifest", check_paths=True):
    """
    Builds a Manifest from dict records, resolving paths against `root`.

    Missing `label` becomes "" and missing `split` becomes "unassigned".
    """
    root = Path(root)
    rows = []
    for i, record in enumerate(records, start=1):
        if "id" not in record or "path" not in record:
            raise DataError(f"{source}: record {i} lacks 'id' or 'path'")
        path = Path(record["path"])
        rows.append({
            "id": str(record["id"]),
            "path": str(path if path.is_absolute() else (root / path)),
            "label": "" if record.get("label") is None else str(record["label"]),
            "split": record.get("split") or "unassigned",
        })
    df = _validate(pd.DataFrame(rows, columns=MANIFEST_COLUMNS), source)
    if check_paths and not df.empty:
        missing = df.loc[~df["path"].map(os.path.exists), "path"].tolist()
        if missing:
            raise DataError(f"{source}: {len(missing)} image path(s) do not exist, e.g. '{missing[0]}'")
    return Manifest(df, root)


def load_manifest(path, check_paths=True):
    """
    Loads a line-delimited JSON manifest.

    Relative image paths are resolved against the manifest's directory.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as e:
        raise DataError(f"Manifest not found: '{path}'") from e
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot read manifest '{path}': {e}") from e
    records = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}:{line_no}: invalid JSON ({e.msg})") from e
        if not isinstance(record, dict):
            raise DataError(f"{path}:{line_no}: expected a JSON object")
        records.append(record)
    manifest = records_to_manifest(records, path.parent, str(path), check_paths)
    logger.info("Loaded manifest %s with %d records", path, len(manifest))
    return manifest


def save_manifest(manifest, path):
    """Writes one JSON object per record; paths under the manifest directory are stored relative."""
    path = Path(path)
    base = path.parent.resolve()
    lines = []
    for row in manifest.records.itertuples(index=False):
        image = Path(row.path).resolve()
        try:
            stored = image.relative_to(base).as_posix()
        except ValueError:
            stored = str(image)
        lines.append(json.dumps({"id": row.id, "path": stored, "label": row.label, "split": row.split}))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot write manifest '{path}': {e}") from e


def load_record_image(record):
    """Decodes the page of one manifest row (anything with a `path` attribute)."""
    return load_image(record.path)
