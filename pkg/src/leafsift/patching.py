"""Keypoint-guided patch extraction and the labeled dataset catalog.

Patches are square windows centered on keypoints, sized proportionally to
the keypoint scale, greedily kept in response order with a center-distance
suppression rule, and resampled to a fixed side for the classifier.  The
catalog maps a directory tree (one subdirectory per class) to a
deterministic item list, and the train/validation split is a pure function
of each item's relative path, so it never depends on enumeration order,
machine, or time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path, PurePosixPath
from typing import NamedTuple

from .errors import EmptyDataset, UnreadableEntry
from .imaging import RgbImage, resize_rgb
from .sift import Keypoint

IMAGE_SUFFIXES = {".ppm", ".png", ".jpg", ".jpeg", ".bmp"}

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass
class PatchConfig:
    """Patch geometry and selection.

    scale_multiplier: window side per unit of keypoint scale.
    patch_side: output side after resampling.
    max_patches: cap on patches per image.
    nms_factor: a candidate is dropped when its center lies closer than
        nms_factor * (its window side) to an accepted center.
    """

    scale_multiplier: float = 12.0
    patch_side: int = 64
    max_patches: int = 16
    nms_factor: float = 0.5

    def __post_init__(self) -> None:
        if min(self.scale_multiplier, self.patch_side, self.max_patches, self.nms_factor) <= 0:
            raise ValueError("all patch parameters must be positive")
        if self.patch_side < 8:
            raise ValueError("patch_side must be >= 8")


@dataclass
class Patch:
    """A resampled window plus enough provenance to re-derive it."""

    pixels: RgbImage
    source_center: tuple[float, float]
    source_side: int
    response: float


def window_origin(center: float, side: int, limit: int) -> int:
    """Left/top of a side-length window: centered, then shifted to fit."""
    origin = int(round(center - side / 2.0))
    return min(max(origin, 0), limit - side)


def extract_patches(img: RgbImage, kps: list[Keypoint], cfg: PatchConfig | None = None) -> list[Patch]:
    """Cut one patch per surviving keypoint.

    Keypoints are visited in (response desc, y, x) order.  Window side is
    round(scale_multiplier * scale) clamped to [patch_side/2, min(w, h)];
    windows are shifted (never shrunk) to stay inside the image.  With no
    keypoints at all, one centered crop of side min(w, h) is emitted.
    """
    cfg = cfg or PatchConfig()
    w, h = img.width, img.height
    min_side = min(w, h)

    if not kps:
        x0 = window_origin(w / 2.0, min_side, w)
        y0 = window_origin(h / 2.0, min_side, h)
        crop = RgbImage(img.pixels[y0 : y0 + min_side, x0 : x0 + min_side].copy())
        return [
            Patch(
                pixels=resize_rgb(crop, cfg.patch_side, cfg.patch_side),
                source_center=(w / 2.0, h / 2.0),
                source_side=min_side,
                response=0.0,
            )
        ]

    ordered = sorted(kps, key=lambda k: (-k.response, k.y, k.x))
    patches: list[Patch] = []
    accepted: list[tuple[float, float]] = []
    for kp in ordered:
        if len(patches) >= cfg.max_patches:
            break
        side = int(round(cfg.scale_multiplier * kp.scale))
        side = min(max(side, math.ceil(cfg.patch_side / 2)), min_side)
        radius = cfg.nms_factor * side
        if any(math.hypot(kp.x - ax, kp.y - ay) < radius for ax, ay in accepted):
            continue
        x0 = window_origin(kp.x, side, w)
        y0 = window_origin(kp.y, side, h)
        crop = RgbImage(img.pixels[y0 : y0 + side, x0 : x0 + side].copy())
        patches.append(
            Patch(
                pixels=resize_rgb(crop, cfg.patch_side, cfg.patch_side),
                source_center=(kp.x, kp.y),
                source_side=side,
                response=kp.response,
            )
        )
        accepted.append((kp.x, kp.y))
    return patches


# --- dataset catalog -----------------------------------------------------------

class IndexItem(NamedTuple):
    path: str  # relative to the dataset root, "/" separators
    class_id: int
    split: str  # "train" or "val"


@dataclass
class LabeledIndex:
    """Sorted class names plus a deterministic item enumeration."""

    classes: list[str]
    items: list[IndexItem]

    def __post_init__(self) -> None:
        if self.classes != sorted(self.classes) or len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be unique and sorted")
        for item in self.items:
            if not 0 <= item.class_id < len(self.classes):
                raise ValueError(f"class id {item.class_id} out of range")
            if item.split not in ("train", "val"):
                raise ValueError(f"bad split tag {item.split!r}")

    def subset(self, split: str) -> list[IndexItem]:
        return [it for it in self.items if it.split == split]


def scan_dataset(root: str | Path) -> LabeledIndex:
    """Catalog ``root`` where every immediate subdirectory is a class.

    Classes are the lexicographically sorted directory names; items are
    image files sorted by relative path.  Every item starts in the train
    split; apply :func:`split_dataset` to retag.
    """
    root = Path(root)
    try:
        entries = sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))
    except OSError as exc:
        raise UnreadableEntry(f"cannot scan {root}: {exc}") from exc
    if not entries:
        raise EmptyDataset(f"{root} has no class directories")

    classes = [p.name for p in entries]
    items: list[IndexItem] = []
    for class_id, class_dir in enumerate(entries):
        try:
            files = sorted(p for p in class_dir.iterdir() if p.is_file())
        except OSError as exc:
            raise UnreadableEntry(f"cannot scan {class_dir}: {exc}") from exc
        for f in files:
            if f.suffix.lower() in IMAGE_SUFFIXES and not f.name.startswith("."):
                rel = PurePosixPath(f.relative_to(root).as_posix())
                items.append(IndexItem(str(rel), class_id, "train"))
    if not items:
        raise EmptyDataset(f"{root} contains no image files")
    items.sort(key=lambda it: it.path)
    return LabeledIndex(classes=classes, items=items)


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def split_tag(path: str, train_ratio: float) -> str:
    """'val' when hash(path) mod 1000 falls under round(1000*(1-ratio))."""
    cutoff = round(1000.0 * (1.0 - train_ratio))
    return "val" if fnv1a64(path.encode("utf-8")) % 1000 < cutoff else "train"


def split_dataset(idx: LabeledIndex, train_ratio: float) -> LabeledIndex:
    """Retag every item by hashing its relative path.

    The assignment depends only on (path, ratio): re-scanning in any order,
    on any machine, reproduces it.
    """
    if not 0.0 < train_ratio < 1.0:
        raise ValueError(f"train_ratio must be in (0, 1), got {train_ratio}")
    items = [
        IndexItem(it.path, it.class_id, split_tag(it.path, train_ratio)) for it in idx.items
    ]
    return LabeledIndex(classes=list(idx.classes), items=items)
