"""End-to-end orchestration: classify images, train the small model, and
produce batch prediction tables.

The image path is: background removal -> grayscale -> keypoints -> patches
-> per-patch network forward -> arithmetic mean of the per-patch probability
rows -> argmax (ties broken toward the lowest class id).  Batch execution
parallelizes across images with threads; results are reassembled in input
order, so outputs are byte-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LengthMismatch
from .imaging import RgbImage, read_image, resize_rgb, to_grayscale
from .nn import (
    NetworkSpec, SplitMix64, WeightStore, backward_and_step, build_architecture,
    forward, init_weights, validate_trainable,
)
from .patching import LabeledIndex, PatchConfig, extract_patches
from .segmentation import SegmentationConfig, remove_background
from .sift import SiftParams, detect_keypoints

# Shuffle draws must not replay the init stream, so the trainer derives its
# shuffle seed from the user seed with a fixed XOR constant.
_SHUFFLE_SEED_XOR = 0xA5A5A5A5A5A5A5A5


@dataclass
class PipelineConfig:
    """Aggregated stage configuration for the classify path."""

    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    sift: SiftParams = field(default_factory=SiftParams)
    patch: PatchConfig = field(default_factory=PatchConfig)
    architecture: str = "cnn_lbp"
    weights_path: str | None = None
    aggregation: str = "mean_softmax"
    workers: int = 1
    seed: int = 42
    class_names: list[str] | None = None

    def __post_init__(self) -> None:
        if self.aggregation != "mean_softmax":
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class ClassPrediction:
    class_id: int
    class_name: str
    probabilities: np.ndarray
    patch_count: int


def image_to_tensor(img: RgbImage) -> np.ndarray:
    """(3, h, w) float32 in [0, 1], channels RGB."""
    return (img.pixels.astype(np.float32) / 255.0).transpose(2, 0, 1)


def class_name_for(class_id: int, names: list[str] | None) -> str:
    if names is not None and 0 <= class_id < len(names):
        return names[class_id]
    return f"class_{class_id}"


def classify_image(
    img: RgbImage, cfg: PipelineConfig, spec: NetworkSpec, weights: WeightStore
) -> ClassPrediction:
    """Run the full pipeline on one image."""
    masked, _ = remove_background(img, cfg.segmentation)
    keypoints = detect_keypoints(to_grayscale(masked), cfg.sift)
    patches = extract_patches(masked, keypoints, cfg.patch)

    _, in_h, in_w = spec.input_shape
    batch = np.stack(
        [image_to_tensor(resize_rgb(p.pixels, in_w, in_h)) for p in patches]
    )
    probs = forward(spec, weights, batch).astype(np.float64)
    mean_probs = probs.mean(axis=0)
    class_id = int(np.argmax(mean_probs))  # argmax takes the lowest index on ties
    return ClassPrediction(
        class_id=class_id,
        class_name=class_name_for(class_id, cfg.class_names),
        probabilities=mean_probs,
        patch_count=len(patches),
    )


# --- batch prediction ------------------------------------------------------------

@dataclass
class PredictionRow:
    path: str
    true_label: int
    predicted_label: int
    scores: np.ndarray


def classify_items(
    root: str | Path,
    items,
    cfg: PipelineConfig,
    spec: NetworkSpec,
    weights: WeightStore,
    workers: int | None = None,
) -> list[PredictionRow]:
    """Classify catalog items; row order always follows item order."""
    root = Path(root)
    workers = workers or cfg.workers

    def job(item) -> PredictionRow:
        pred = classify_image(read_image(root / item.path), cfg, spec, weights)
        return PredictionRow(item.path, item.class_id, pred.class_id, pred.probabilities)

    if workers == 1:
        return [job(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, items))


def predictions_csv(rows: list[PredictionRow], k: int) -> str:
    header = "path,true_label,predicted_label," + ",".join(f"score_{i}" for i in range(k))
    lines = [header]
    for row in rows:
        scores = ",".join(f"{s:.6f}" for s in row.scores)
        lines.append(f"{row.path},{row.true_label},{row.predicted_label},{scores}")
    return "\n".join(lines) + "\n"


def parse_predictions_csv(text: str) -> list[PredictionRow]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise LengthMismatch("predictions file is empty")
    header = lines[0].split(",")
    if header[:3] != ["path", "true_label", "predicted_label"]:
        raise LengthMismatch(f"unexpected predictions header {lines[0]!r}")
    k = len(header) - 3
    rows = []
    for ln in lines[1:]:
        fields = ln.split(",")
        if len(fields) != 3 + k:
            raise LengthMismatch(f"row has {len(fields)} fields, expected {3 + k}")
        rows.append(
            PredictionRow(
                path=fields[0],
                true_label=int(fields[1]),
                predicted_label=int(fields[2]),
                scores=np.array([float(v) for v in fields[3:]]),
            )
        )
    return rows


# --- desk-scale training ------------------------------------------------------------

def _load_split(index: LabeledIndex, root: Path, split: str, side: int) -> tuple[np.ndarray, np.ndarray]:
    tensors = []
    labels = []
    for item in index.subset(split):
        img = read_image(root / item.path)
        if (img.width, img.height) != (side, side):
            img = resize_rgb(img, side, side)
        tensors.append(image_to_tensor(img))
        labels.append(item.class_id)
    if not tensors:
        return np.zeros((0, 3, side, side), dtype=np.float32), np.zeros(0, dtype=np.int64)
    return np.stack(tensors), np.asarray(labels, dtype=np.int64)


def _batched_accuracy(spec, weights, x: np.ndarray, y: np.ndarray, batch: int = 64) -> float:
    if x.shape[0] == 0:
        return 0.0
    hits = 0
    for start in range(0, x.shape[0], batch):
        probs = forward(spec, weights, x[start : start + batch])
        hits += int((probs.argmax(axis=1) == y[start : start + batch]).sum())
    return hits / x.shape[0]


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_accuracy: float


TRAIN_LOG_HEADER = "epoch,train_loss,val_accuracy"


def train_log_csv(log: list[EpochLog]) -> str:
    lines = [TRAIN_LOG_HEADER]
    lines += [f"{e.epoch},{e.train_loss:.6f},{e.val_accuracy:.4f}" for e in log]
    return "\n".join(lines) + "\n"


def train_toy(
    index: LabeledIndex,
    root: str | Path,
    epochs: int,
    lr: float,
    seed: int,
    arch: str = "cnn_lbp",
    class_count: int | None = None,
    batch_size: int = 32,
    target_val_accuracy: float | None = None,
) -> tuple[NetworkSpec, WeightStore, list[EpochLog]]:
    """SGD training of the small model on pre-extracted patches.

    Deterministic for a given seed: weights come from the seeded init stream
    and the per-epoch shuffle is a seeded Fisher-Yates.  With ``epochs=0``
    the returned weights equal the initialization and the log is empty.
    ``target_val_accuracy`` stops early once the validation accuracy reaches
    it (the log records every epoch actually run).
    """
    spec = build_architecture(arch, class_count or len(index.classes))
    validate_trainable(spec)
    root = Path(root)
    side = spec.input_shape[1]
    train_x, train_y = _load_split(index, root, "train", side)
    val_x, val_y = _load_split(index, root, "val", side)

    weights = init_weights(spec, seed)
    shuffler = SplitMix64(seed ^ _SHUFFLE_SEED_XOR)
    log: list[EpochLog] = []
    order = list(range(train_x.shape[0]))
    for epoch in range(1, epochs + 1):
        shuffler.shuffle(order)
        losses = []
        for start in range(0, len(order), batch_size):
            chosen = order[start : start + batch_size]
            _, loss = backward_and_step(spec, weights, train_x[chosen], train_y[chosen], lr)
            losses.append(loss)
        val_acc = _batched_accuracy(spec, weights, val_x, val_y)
        log.append(EpochLog(epoch, float(np.mean(losses)) if losses else 0.0, val_acc))
        if target_val_accuracy is not None and val_acc >= target_val_accuracy:
            break
    return spec, weights, log
