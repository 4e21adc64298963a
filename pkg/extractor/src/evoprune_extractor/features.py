"""Convert a class-per-directory image dataset into an "EPTL" feature file.

A frozen pretrained convolutional backbone (50-layer residual network by
default) is applied with its fully-connected layers removed; the globally
average-pooled activations become the feature vectors. Labels follow the
lexicographic order of the class directory names, independent of filesystem
enumeration order, and a sidecar manifest records the index -> class mapping.

The output follows the binary feature wire format consumed by the pruning
engine: magic "EPTL", version u32=1, n u32, d u32, n_classes u32, then
n*d little-endian float32 features (row-major) and n little-endian u32
labels.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import models, transforms

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"EPTL"
FORMAT_VERSION = 1

# canonical normalization of the natural-image pretraining corpus
_NORMALIZE = transforms.Normalize(mean=[0.485, 0.456, 0.406],
                                  std=[0.229, 0.224, 0.225])

_BACKBONES = {
    "resnet50": (models.resnet50, "IMAGENET1K_V2"),
    "resnet18": (models.resnet18, "IMAGENET1K_V1"),
}


class ExtractionError(RuntimeError):
    """The input directory layout or decoding made extraction impossible."""


@dataclass(frozen=True)
class ExtractSpec:
    """What to extract: input layout, backbone, preprocessing, output path.

    ``image_size`` is the dataset-native (height, width) applied before the
    backbone's own input resize; None skips that first step. ``pretrained``
    False loads randomly initialized (seeded) backbone weights, useful for
    offline smoke tests; real feature extraction wants the pretrained zoo
    weights.
    """

    input_dir: str
    output: str
    backbone: str = "resnet50"
    image_size: tuple[int, int] | None = None
    batch_size: int = 16
    pretrained: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.backbone not in _BACKBONES:
            raise ExtractionError(f"unknown backbone {self.backbone!r}; "
                                  f"supported: {sorted(_BACKBONES)}")
        if self.batch_size < 1:
            raise ExtractionError("batch_size must be >= 1")


def _build_backbone(spec: ExtractSpec) -> tuple[torch.nn.Module, int]:
    """Backbone body without the classifier head, plus its pooled width."""
    factory, weight_tag = _BACKBONES[spec.backbone]
    if spec.pretrained:
        model = factory(weights=weight_tag)
    else:
        torch.manual_seed(spec.seed)
        model = factory(weights=None)
    width = model.fc.in_features
    body = torch.nn.Sequential(*list(model.children())[:-1])
    body.eval()
    return body, width


def _preprocess(spec: ExtractSpec) -> transforms.Compose:
    steps = []
    if spec.image_size is not None:
        steps.append(transforms.Resize(spec.image_size))
    steps += [transforms.Resize((224, 224)), transforms.ToTensor(), _NORMALIZE]
    return transforms.Compose(steps)


def _class_directories(root: Path) -> list[Path]:
    dirs = sorted((d for d in root.iterdir() if d.is_dir() and not d.name.startswith(".")),
                  key=lambda d: d.name)
    if not dirs:
        raise ExtractionError(f"{root}: no class subdirectories")
    return dirs


def _load_images(class_dir: Path, transform) -> list[torch.Tensor]:
    tensors = []
    for path in sorted(class_dir.iterdir(), key=lambda p: p.name):
        if not path.is_file():
            continue
        try:
            with Image.open(path) as img:
                tensors.append(transform(img.convert("RGB")))
        except Exception as exc:
            logger.warning("skipping undecodable image %s: %s", path, exc)
    if not tensors:
        raise ExtractionError(f"{class_dir}: no decodable images in class directory")
    return tensors


def write_feature_file(path: Path, features: np.ndarray, labels: np.ndarray,
                       n_classes: int) -> None:
    n, d = features.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIII", FEATURE_MAGIC, FORMAT_VERSION, n, d, n_classes))
        fh.write(np.ascontiguousarray(features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(labels, dtype="<u4").tobytes())


def extract(spec: ExtractSpec) -> Path:
    """Run the backbone over every image and write the feature file.

    Returns the output path; the manifest lands next to it as
    ``<output>.classes`` with one class name per line, line number equal to
    the label index.
    """
    root = Path(spec.input_dir)
    if not root.is_dir():
        raise ExtractionError(f"{root}: not a directory")
    class_dirs = _class_directories(root)
    transform = _preprocess(spec)
    body, width = _build_backbone(spec)

    batches: list[np.ndarray] = []
    labels: list[int] = []
    with torch.no_grad():
        for label, class_dir in enumerate(class_dirs):
            tensors = _load_images(class_dir, transform)
            for start in range(0, len(tensors), spec.batch_size):
                stacked = torch.stack(tensors[start:start + spec.batch_size])
                pooled = body(stacked).flatten(start_dim=1)
                batches.append(pooled.numpy().astype(np.float32))
            labels.extend([label] * len(tensors))
            logger.info("class %d (%s): %d images", label, class_dir.name, len(tensors))

    features = np.concatenate(batches, axis=0)
    assert features.shape[1] == width
    out = Path(spec.output)
    write_feature_file(out, features, np.asarray(labels, dtype=np.int64), len(class_dirs))
    manifest = out.with_name(out.name + ".classes")
    manifest.write_text("".join(f"{d.name}\n" for d in class_dirs))
    return out
