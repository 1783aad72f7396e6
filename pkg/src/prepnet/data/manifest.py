"""Dataset manifests: line-delimited JSON records pointing at 8-bit
grayscale PNGs, with dataset names mapped to contiguous integer ids in
first-appearance order (those ids double as the pseudo-labels the
dataset classifier is trained on)."""

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ManifestError, ValidationError

_SPLITS = ("train", "val", "test")
_FIELDS = ("path", "label", "dataset", "split")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: object  # 0, 1, or None (unlabeled)
    dataset: str
    split: object  # "train" | "val" | "test" | None
    dataset_id: int

    @property
    def sample_id(self):
        return self.path


@dataclass(frozen=True)
class ImageSample:
    """One decoded image with its labels; pixel values in [0,1]."""

    image: np.ndarray
    task_label: object
    dataset_id: int
    split: object
    sample_id: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple
    dataset_names: tuple
    root: Path

    @property
    def domain_count(self):
        return len(self.dataset_names)

    @property
    def class_counts(self):
        counts = {}
        for e in self.entries:
            key = (e.dataset_id, e.label)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def subset(self, split=None, dataset=None):
        """Entries filtered by split and/or dataset name; ids and names kept."""
        kept = tuple(
            e
            for e in self.entries
            if (split is None or e.split == split) and (dataset is None or e.dataset == dataset)
        )
        return DatasetManifest(entries=kept, dataset_names=self.dataset_names, root=self.root)

    def resolve(self, entry):
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p


def _parse_line(line, lineno):
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise ManifestError(f"line {lineno}: invalid JSON: {e.msg}") from e
    if not isinstance(rec, dict):
        raise ManifestError(f"line {lineno}: record must be an object")
    missing = [f for f in _FIELDS if f not in rec]
    if missing:
        raise ManifestError(f"line {lineno}: missing fields {missing}")
    path, label, dataset, split = rec["path"], rec["label"], rec["dataset"], rec["split"]
    if not isinstance(path, str) or not path:
        raise ManifestError(f"line {lineno}: path must be a non-empty string")
    if label not in (0, 1, None):
        raise ManifestError(f"line {lineno}: label must be 0, 1, or null, got {label!r}")
    if not isinstance(dataset, str) or not dataset:
        raise ManifestError(f"line {lineno}: dataset must be a non-empty string")
    if split is not None and split not in _SPLITS:
        raise ManifestError(f"line {lineno}: split must be one of {_SPLITS} or null, got {split!r}")
    return path, label, dataset, split


def load_manifest(path, check_images=True):
    """Parse a manifest file and validate every referenced image decodes.

    Raises OSError if the manifest itself is missing, ManifestError (with
    the offending line number or image path) on malformed content.
    """
    path = Path(path)
    root = path.parent
    entries = []
    names = []
    name_to_id = {}
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            p, label, dataset, split = _parse_line(line, lineno)
            if p in seen:
                raise ManifestError(f"line {lineno}: duplicate sample_id {p!r}")
            seen.add(p)
            if dataset not in name_to_id:
                name_to_id[dataset] = len(names)
                names.append(dataset)
            entries.append(ManifestEntry(path=p, label=label, dataset=dataset, split=split,
                                         dataset_id=name_to_id[dataset]))
    if not entries:
        raise ManifestError("empty manifest")
    manifest = DatasetManifest(entries=tuple(entries), dataset_names=tuple(names), root=root)
    if check_images:
        for e in manifest.entries:
            img_path = manifest.resolve(e)
            try:
                with Image.open(img_path) as im:
                    im.verify()
            except (OSError, SyntaxError) as exc:
                raise ManifestError(f"image {img_path} unreadable: {exc}") from exc
    return manifest


def save_manifest(manifest, path):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest.entries:
            fh.write(json.dumps({"path": e.path, "label": e.label, "dataset": e.dataset, "split": e.split}) + "\n")


def load_image(path):
    """Decode a PNG to a 2-D float array in [0,1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return arr / 255.0


def save_png(path, image):
    """Write a [0,1] float image as 8-bit grayscale PNG."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"image must be 2-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValidationError("pixel values must lie in [0,1]")
    q = np.round(arr * 255.0).astype(np.uint8)
    Image.fromarray(q, mode="L").save(path, format="PNG")


def load_sample(manifest, entry):
    return ImageSample(image=load_image(manifest.resolve(entry)), task_label=entry.label,
                       dataset_id=entry.dataset_id, split=entry.split, sample_id=entry.sample_id)


def split_dataset(manifest, ratios, seed):
    """Assign train/val/test splits, stratified per (dataset_id, label).

    Per stratum: train gets floor(train_ratio * n); the remainder goes to
    val first (its proportional share, rounded up), the rest to test.
    Deterministic in (manifest order, seed).
    """
    r_train, r_val, r_test = (float(r) for r in ratios)
    if min(r_train, r_val, r_test) < 0:
        raise ValidationError("ratios must be nonnegative")
    if abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise ValidationError(f"ratios must sum to 1, got {r_train + r_val + r_test}")
    assigned = [e.sample_id for e in manifest.entries if e.split is not None]
    if assigned:
        raise ValidationError(f"{len(assigned)} entries already carry a split (first: {assigned[0]!r})")

    strata = {}
    for i, e in enumerate(manifest.entries):
        strata.setdefault((e.dataset_id, e.label), []).append(i)

    n_splits = sum(1 for r in (r_train, r_val, r_test) if r > 0)
    new_split = [None] * len(manifest.entries)
    for (dataset_id, label), idxs in sorted(strata.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))):
        n = len(idxs)
        if n < n_splits:
            warnings.warn(
                f"stratum (dataset={dataset_id}, label={label}) has {n} samples "
                f"for {n_splits} splits; assigning all to train"
            )
            for i in idxs:
                new_split[i] = "train"
            continue
        label_code = 2 if label is None else int(label)
        rng = np.random.default_rng([int(seed), int(dataset_id), label_code])
        order = rng.permutation(n)
        n_train = math.floor(r_train * n)
        rem = n - n_train
        n_val = math.ceil(rem * r_val / (r_val + r_test)) if (r_val + r_test) > 0 else 0
        for j, k in enumerate(order):
            i = idxs[k]
            new_split[i] = "train" if j < n_train else ("val" if j < n_train + n_val else "test")

    entries = tuple(replace(e, split=s) for e, s in zip(manifest.entries, new_split))
    return DatasetManifest(entries=entries, dataset_names=manifest.dataset_names, root=manifest.root)
