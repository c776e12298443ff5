"""Expert behavioral features of a process window and encryption-mode typing.

The exported vector has exactly 12 dimensions in a fixed order (the order is
part of the model contract): three operation counts, a four-way one-hot over
the shape of the extension-set change, and five fusion/ratio features.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .events import Operation, ProcessWindow, basename_of, dirname_of, extension_of

FEATURE_NAMES = (
    "n_create",
    "n_delete",
    "n_renamed",
    "type_unchanged",
    "type_grown",
    "type_shrunk",
    "type_churn",
    "rtype",
    "rtype_change",
    "max_n_file",
    "n_folder",
    "r_file",
)

N_EXPERT_FEATURES = len(FEATURE_NAMES)

DEFAULT_MIN_MODE_FILES = 5
UNIFORM_SUFFIX_SHARE = 0.80


class DegenerateLabels(ValueError):
    """Report needs at least one vector per class."""


class TypeChange(Enum):
    """Shape of the extension-set change across the window."""

    UNCHANGED = 0
    GROWN = 1
    SHRUNK = 2
    CHURN = 3


@dataclass(frozen=True, slots=True)
class FeatureVector:
    """Expert features of one window; see FEATURE_NAMES for the export order.

    ntype_before/ntype_after are kept for inspection but exported only through
    ntype_change's one-hot and the rtype ratio.
    """

    n_create: int
    n_delete: int
    n_renamed: int
    ntype_before: int
    ntype_after: int
    ntype_change: int
    type_change: TypeChange
    rtype: float
    rtype_change: float
    max_n_file: int
    n_folder: int
    r_file: float

    def as_array(self) -> np.ndarray:
        onehot = [0.0, 0.0, 0.0, 0.0]
        onehot[self.type_change.value] = 1.0
        return np.array(
            [
                float(self.n_create),
                float(self.n_delete),
                float(self.n_renamed),
                *onehot,
                self.rtype,
                self.rtype_change,
                float(self.max_n_file),
                float(self.n_folder),
                self.r_file,
            ],
            dtype=np.float64,
        )

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.as_array().tolist()))


def _old_extension(ev) -> str:
    return extension_of(ev.old_file_name) if ev.old_file_name else ""


def extract_features(window: ProcessWindow) -> FeatureVector:
    """Compute the 12-dimensional expert vector from a window's events.

    Extension-set tracking uses only window-touched files, replayed through
    an in-window shadow of the operations:

    * the "before" set holds extensions of files read or modified before the
      first Create/Delete event (renames contribute the old path's type);
    * the "after" set holds extensions existing among touched files at the
      end (creates/writes add, deletes/smashes remove, renames swap paths).

    Zero denominators use bounded sentinels: rtype = 0 when the before set is
    empty, rtype_change falls back to the deleted-type count when nothing was
    created, r_file = 0 when no file was created.
    """
    n_create = n_delete = n_renamed = 0
    before_types: set[str] = set()
    past_first_create_delete = False
    exists: dict[str, str] = {}
    removed: set[str] = set()
    del_types: set[str] = set()
    create_types: set[str] = set()
    created_name_counts: dict[str, int] = {}
    created_name_dirs: dict[str, set[str]] = {}

    for ev in window.events:
        op = ev.operation
        if op is Operation.CREATE or op is Operation.DELETE:
            past_first_create_delete = True
        elif not past_first_create_delete:
            before_types.add(_old_extension(ev) if op is Operation.RENAME else ev.file_type)

        if op is Operation.CREATE:
            n_create += 1
            create_types.add(ev.file_type)
            exists[ev.file_name] = ev.file_type
            removed.discard(ev.file_name)
            name = basename_of(ev.file_name)
            created_name_counts[name] = created_name_counts.get(name, 0) + 1
            created_name_dirs.setdefault(name, set()).add(dirname_of(ev.file_name))
        elif op is Operation.DELETE or op is Operation.SMASH:
            n_delete += 1
            del_types.add(ev.file_type)
            exists.pop(ev.file_name, None)
            removed.add(ev.file_name)
        elif op is Operation.RENAME:
            n_renamed += 1
            if ev.old_file_name:
                exists.pop(ev.old_file_name, None)
                removed.add(ev.old_file_name)
            exists[ev.file_name] = ev.file_type
            removed.discard(ev.file_name)
        elif op is Operation.WRITE or op is Operation.OVERWRITE:
            # a write implies the path exists afterwards, even post-removal
            exists[ev.file_name] = ev.file_type
            removed.discard(ev.file_name)
        else:  # READ cannot resurrect a removed path
            if ev.file_name not in removed and ev.file_name not in exists:
                exists[ev.file_name] = ev.file_type

    after_types = set(exists.values())
    ntype_before = len(before_types)
    ntype_after = len(after_types)
    ntype_change = ntype_after - ntype_before

    if ntype_change > 0:
        shape = TypeChange.GROWN
    elif ntype_change < 0:
        shape = TypeChange.SHRUNK
    elif before_types != after_types:
        shape = TypeChange.CHURN
    else:
        shape = TypeChange.UNCHANGED

    rtype = ntype_after / ntype_before if ntype_before > 0 else 0.0
    n_del_types = len(del_types)
    n_create_types = len(create_types)
    rtype_change = n_del_types / n_create_types if n_create_types > 0 else float(n_del_types)

    if created_name_counts:
        max_n_file = max(created_name_counts.values())
        n_folder = max(
            len(created_name_dirs[name])
            for name, count in created_name_counts.items()
            if count == max_n_file
        )
    else:
        max_n_file = 0
        n_folder = 0
    r_file = max_n_file / n_folder if n_folder > 0 else 0.0

    return FeatureVector(
        n_create=n_create,
        n_delete=n_delete,
        n_renamed=n_renamed,
        ntype_before=ntype_before,
        ntype_after=ntype_after,
        ntype_change=ntype_change,
        type_change=shape,
        rtype=rtype,
        rtype_change=rtype_change,
        max_n_file=max_n_file,
        n_folder=n_folder,
        r_file=r_file,
    )


class Mode(str, Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"
    M5 = "M5"
    M6 = "M6"
    NONE = "None"


class IoFamily(str, Enum):
    OVERWRITE = "Overwrite"
    CREATE_DELETE = "CreateDelete"
    CREATE_SMASH = "CreateSmash"
    NONE = "None"


class SuffixStyle(str, Enum):
    UNIFORM = "Uniform"
    RANDOM = "Random"
    NONE = "None"


_MODE_TABLE = {
    (IoFamily.OVERWRITE, SuffixStyle.UNIFORM): Mode.M1,
    (IoFamily.OVERWRITE, SuffixStyle.RANDOM): Mode.M2,
    (IoFamily.CREATE_DELETE, SuffixStyle.UNIFORM): Mode.M3,
    (IoFamily.CREATE_DELETE, SuffixStyle.RANDOM): Mode.M4,
    (IoFamily.CREATE_SMASH, SuffixStyle.UNIFORM): Mode.M5,
    (IoFamily.CREATE_SMASH, SuffixStyle.RANDOM): Mode.M6,
}


@dataclass(frozen=True, slots=True)
class EncryptionMode:
    mode: Mode
    io_family: IoFamily
    suffix_style: SuffixStyle
    transformed: int = 0


def _strip_last_ext(path: str) -> Optional[str]:
    dot = path.rfind(".")
    sep = max(path.rfind("/"), path.rfind("\\"))
    if dot <= sep + 1:
        return None
    return path[:dot]


def classify_mode(window: ProcessWindow, min_files: int = DEFAULT_MIN_MODE_FILES) -> EncryptionMode:
    """Type the window's encryption pattern against the six known modes.

    The I/O family is the dominant transformation pattern: plain overwrites,
    create+delete pairs, or create+smash pairs, where pairing matches a
    created file whose name minus its final extension equals a removed path
    (order-free). The suffix style is Uniform when at least 80% of the
    transformed files share one new extension. Fewer than ``min_files``
    transformed files yields mode None.
    """
    overwritten: set[str] = set()
    created: dict[str, str] = {}
    deleted: set[str] = set()
    smashed: set[str] = set()
    renames: list[tuple[Optional[str], str, str]] = []

    for ev in window.events:
        op = ev.operation
        if op is Operation.OVERWRITE:
            overwritten.add(ev.file_name)
        elif op is Operation.CREATE:
            created[ev.file_name] = ev.file_type
        elif op is Operation.DELETE:
            deleted.add(ev.file_name)
        elif op is Operation.SMASH:
            smashed.add(ev.file_name)
        elif op is Operation.RENAME:
            renames.append((ev.old_file_name, ev.file_name, ev.file_type))

    cd_exts: list[str] = []
    cs_exts: list[str] = []
    for path, ext in created.items():
        original = _strip_last_ext(path)
        if original is None:
            continue
        if original in deleted:
            cd_exts.append(ext)
        if original in smashed:
            cs_exts.append(ext)

    ow_exts = [new_ext for old, _new, new_ext in renames if old in overwritten]
    n_ow = len(ow_exts) if ow_exts else 0
    families = [
        (len(cd_exts), IoFamily.CREATE_DELETE, cd_exts),
        (len(cs_exts), IoFamily.CREATE_SMASH, cs_exts),
        (n_ow, IoFamily.OVERWRITE, ow_exts),
    ]
    count, family, new_exts = max(families, key=lambda item: item[0])
    if count < min_files:
        return EncryptionMode(Mode.NONE, IoFamily.NONE, SuffixStyle.NONE, count)

    shares: dict[str, int] = {}
    for ext in new_exts:
        shares[ext] = shares.get(ext, 0) + 1
    top_share = max(shares.values()) / len(new_exts)
    style = SuffixStyle.UNIFORM if top_share >= UNIFORM_SUFFIX_SHARE else SuffixStyle.RANDOM
    return EncryptionMode(_MODE_TABLE[(family, style)], family, style, count)


@dataclass(frozen=True)
class FeatureReport:
    """Class-conditional histograms for every exported feature."""

    bin_edges: dict[str, np.ndarray]
    benign_counts: dict[str, np.ndarray]
    ransom_counts: dict[str, np.ndarray]

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["feature", "bin_lo", "bin_hi", "benign_count", "ransom_count"])
        for name in FEATURE_NAMES:
            edges = self.bin_edges[name]
            benign = self.benign_counts[name]
            ransom = self.ransom_counts[name]
            for i in range(len(benign)):
                writer.writerow([name, repr(float(edges[i])), repr(float(edges[i + 1])), int(benign[i]), int(ransom[i])])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def separation(self) -> dict[str, float]:
        """1 - histogram overlap per feature; 0 means identical distributions."""
        scores = {}
        for name in FEATURE_NAMES:
            b = self.benign_counts[name].astype(np.float64)
            r = self.ransom_counts[name].astype(np.float64)
            b_sum, r_sum = b.sum(), r.sum()
            if b_sum == 0 or r_sum == 0:
                scores[name] = 0.0
                continue
            scores[name] = 1.0 - float(np.minimum(b / b_sum, r / r_sum).sum())
        return scores


def feature_report(
    vectors: Sequence[FeatureVector], labels: Sequence[int], bins: int = 16
) -> FeatureReport:
    """Histogram every feature per class; labels are 0 benign, 1 ransomware."""
    if len(vectors) != len(labels):
        raise ValueError("vectors and labels must align")
    labels_arr = np.asarray(labels)
    if len(set(labels_arr.tolist())) < 2:
        raise DegenerateLabels("need at least one vector per class")
    matrix = np.stack([vec.as_array() for vec in vectors])
    edges_by_name: dict[str, np.ndarray] = {}
    benign: dict[str, np.ndarray] = {}
    ransom: dict[str, np.ndarray] = {}
    for j, name in enumerate(FEATURE_NAMES):
        col = matrix[:, j]
        lo, hi = float(col.min()), float(col.max())
        if lo == hi:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        benign[name], _ = np.histogram(col[labels_arr == 0], bins=edges)
        ransom[name], _ = np.histogram(col[labels_arr == 1], bins=edges)
        edges_by_name[name] = edges
    return FeatureReport(edges_by_name, benign, ransom)
