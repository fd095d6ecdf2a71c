"""Dataset manifests for the ``root/<class-name>/<image>`` directory layout."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
MANIFEST_VERSION = 1

# NemaDataset classes and image counts
CANONICAL_CLASSES = {
    "Helicotylenchus dihystera": 556,
    "Heterodera glycines (J2)": 605,
    "Meloydogine incognita (J2)": 635,
    "Pratylenchus brachyurus": 635,
    "Rotylenchulus reniformis": 632,
}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    path: str
    label: int
    width: int
    height: int


@dataclass
class DatasetManifest:
    root: str
    classes: list[str]
    records: list[Record] = field(default_factory=list)
    checksum: str = ""

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> list[int]:
        return [r.label for r in self.records]

    def class_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(self.classes, 0)
        for r in self.records:
            counts[self.classes[r.label]] += 1
        return counts

    def absolute_path(self, record: Record) -> Path:
        return Path(self.root) / record.path

    def to_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "root": self.root,
            "classes": list(self.classes),
            "records": [
                {"path": r.path, "class": r.label, "width": r.width, "height": r.height} for r in self.records
            ],
            "checksum": self.checksum,
        }

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        if data.get("version") != MANIFEST_VERSION:
            raise DatasetError(f"unsupported manifest version {data.get('version')!r}")
        records = [Record(r["path"], int(r["class"]), int(r["width"]), int(r["height"])) for r in data["records"]]
        return cls(data["root"], list(data["classes"]), records, data["checksum"])

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def file_list_checksum(classes: list[str], records: list[Record], root: Path) -> str:
    h = hashlib.sha256()
    for r in records:
        size = (root / r.path).stat().st_size
        h.update(f"{r.label}\t{classes[r.label]}\t{r.path}\t{size}\n".encode("utf-8"))
    return h.hexdigest()


def scan_dataset(root: str | os.PathLike) -> DatasetManifest:
    """Index ``root/<class>/<image>``; classes and files are sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")
    classes = sorted(p.name for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))
    if not classes:
        raise DatasetError(f"dataset root {root} has no class directories")
    records = []
    for label, name in enumerate(classes):
        files = sorted(
            p for p in (root / name).iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            raise DatasetError(f"class directory {root / name} contains no images")
        for f in files:
            try:
                with Image.open(f) as img:
                    width, height = img.size
            except OSError as exc:
                raise DatasetError(f"unreadable image {f}: {exc}") from exc
            records.append(Record(f.relative_to(root).as_posix(), label, width, height))
    manifest = DatasetManifest(str(root), classes, records, file_list_checksum(classes, records, root))
    _warn_on_canonical_mismatch(manifest)
    return manifest


def _warn_on_canonical_mismatch(manifest: DatasetManifest) -> None:
    if set(manifest.classes) != set(CANONICAL_CLASSES):
        return
    for name, count in manifest.class_counts().items():
        expected = CANONICAL_CLASSES[name]
        if count != expected:
            log.warning("class %r has %d images, NemaDataset lists %d", name, count, expected)
