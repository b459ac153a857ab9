"""leafsift: a leaf-image disease classification pipeline.

Stages, each usable on its own:

* :mod:`leafsift.imaging` -- PPM I/O, grayscale, resampling, Gaussian blur.
* :mod:`leafsift.segmentation` -- border-seeded background removal.
* :mod:`leafsift.sift` -- scale-invariant keypoints and descriptors.
* :mod:`leafsift.patching` -- keypoint patches and the dataset catalog.
* :mod:`leafsift.nn` -- NCHW runtime, six architectures, training, costs.
* :mod:`leafsift.metrics` -- confusion/ROC/AUC metrics and report rendering.
* :mod:`leafsift.pipeline` -- end-to-end classification and desk training.
* :mod:`leafsift.cli` -- the ``leafsift`` command.
"""

from .imaging import (
    BinaryMask, GrayImage, RgbImage,
    decode_ppm, downsample2, encode_ppm, gaussian_blur, read_image,
    resize_bilinear, resize_rgb, to_grayscale, write_ppm,
)
from .metrics import (
    ConfusionMatrix, MetricsReport, RocCurve,
    auc, confusion_matrix, render_report, roc_curve_ovr, summary_metrics,
)
from .patching import (
    LabeledIndex, Patch, PatchConfig,
    extract_patches, fnv1a64, scan_dataset, split_dataset,
)
from .pipeline import ClassPrediction, PipelineConfig, classify_image, train_toy
from .segmentation import (
    SegmentationConfig,
    apply_mask, compute_background_mask, estimate_background_color, remove_background,
)
from .sift import (
    DogPyramid, Keypoint, Rejection, ScaleSpace, SiftParams,
    assign_orientations, build_scale_space, compute_descriptor, compute_dog,
    detect_and_describe, detect_extrema, detect_keypoints, refine_keypoint,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask", "ClassPrediction", "ConfusionMatrix", "DogPyramid",
    "GrayImage", "Keypoint", "LabeledIndex", "MetricsReport", "Patch",
    "PatchConfig", "PipelineConfig", "Rejection", "RgbImage", "RocCurve",
    "ScaleSpace", "SegmentationConfig", "SiftParams",
    "apply_mask", "assign_orientations", "auc", "build_scale_space",
    "classify_image", "compute_background_mask", "compute_descriptor",
    "compute_dog", "confusion_matrix", "decode_ppm", "detect_and_describe",
    "detect_extrema", "detect_keypoints", "downsample2", "encode_ppm",
    "estimate_background_color", "extract_patches", "fnv1a64",
    "gaussian_blur", "read_image", "refine_keypoint", "remove_background",
    "render_report", "resize_bilinear", "resize_rgb", "roc_curve_ovr",
    "scan_dataset", "split_dataset", "summary_metrics", "to_grayscale",
    "train_toy", "write_ppm",
]
