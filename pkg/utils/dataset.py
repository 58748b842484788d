"""
Dataset Module - palm vein image collections
Scans PUT-style directory trees, synthesizes vein-like datasets and turns images into labeled DWT feature matrices.
"""

import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np
from joblib import Parallel, delayed
from scipy.interpolate import interp1d

from utils.errors import DatasetError, ParameterError, PalmVeinError
from utils.features import LabeledDataset
from utils.imaging import AheParams, GrayImage, encode_pgm, load_image, preprocess
from utils.wavelet import SubbandSelection, dwt2_forward, extract_features, feature_length

logger = logging.getLogger(__name__)

DEFAULT_LAYOUT = '{hand}/{subject}/{session}_{shot}.bmp'
SYNTHETIC_LAYOUT = '{hand}/{subject}/{session}_{shot}.pgm'
HANDS = ('left', 'right')

_FIELD_PATTERNS = {
    'hand': r'(?P<hand>[A-Za-z]+)',
    'subject': r'(?P<subject>\d+)',
    'session': r'(?P<session>\d+)',
    'shot': r'(?P<shot>\d+)',
}

ImageSource = Union[GrayImage, str, Path]


@dataclass(frozen=True)
class ManifestEntry:
    subject: int
    hand: str
    session: int
    shot: int
    path: Optional[Path] = None


@dataclass(frozen=True)
class DatasetManifest:
    """Image entries in load order plus the (hand, subject) -> label mapping"""

    entries: Tuple[ManifestEntry, ...]
    label_map: Dict[Tuple[str, int], int] = field(default_factory=dict)

    @property
    def labels(self) -> np.ndarray:
        return np.array([self.label_map[(e.hand, e.subject)] for e in self.entries], dtype=np.int64)

    @property
    def paths(self) -> List[Path]:
        return [e.path for e in self.entries]

    @property
    def n_classes(self) -> int:
        return len(self.label_map)

    def __len__(self) -> int:
        return len(self.entries)


def layout_regex(layout: str) -> 're.Pattern':
    """Compile a layout template such as '{hand}/{subject}/{session}_{shot}.bmp' into a path regex"""
    parts = re.split(r'(\{\w+\})', layout)
    pattern = []
    seen = set()
    for part in parts:
        name = part[1:-1] if part.startswith('{') and part.endswith('}') else None
        if name is None:
            pattern.append(re.escape(part))
            continue
        if name not in _FIELD_PATTERNS:
            raise ParameterError(f"unknown layout field {{{name}}} (expected one of {sorted(_FIELD_PATTERNS)})")
        if name in seen:
            raise ParameterError(f"layout field {{{name}}} appears twice")
        seen.add(name)
        pattern.append(_FIELD_PATTERNS[name])
    if 'subject' not in seen:
        raise ParameterError("layout must contain a {subject} field")
    return re.compile(''.join(pattern) + r'\Z', re.IGNORECASE)


def _assign_labels(entries: List[ManifestEntry]) -> DatasetManifest:
    keys = sorted({(e.hand, e.subject) for e in entries})
    return DatasetManifest(entries=tuple(entries), label_map={k: i for i, k in enumerate(keys)})


def scan_dataset(root, layout: str = DEFAULT_LAYOUT, hands: Optional[Sequence[str]] = None) -> DatasetManifest:
    """Walk root for files matching the layout; labels are contiguous over sorted (hand, subject) keys"""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist or is not a directory")
    wanted = {h.lower() for h in hands} if hands else None
    regex = layout_regex(layout)

    logger.info("🔍 Scanning %s for %s", root, layout)
    entries = []
    for path in sorted(p for p in root.rglob('*') if p.is_file()):
        match = regex.match(path.relative_to(root).as_posix())
        if match is None:
            continue
        fields = match.groupdict()
        hand = fields.get('hand', 'left').lower()
        if wanted is not None and hand not in wanted:
            continue
        if not os.access(path, os.R_OK):
            raise DatasetError(f"{path}: file is not readable")
        entries.append(ManifestEntry(
            subject=int(fields['subject']),
            hand=hand,
            session=int(fields.get('session') or 1),
            shot=int(fields.get('shot') or 1),
            path=path,
        ))

    if not entries:
        raise DatasetError(f"empty dataset: no files under {root} match {layout}")
    entries.sort(key=lambda e: (e.hand, e.subject, e.session, e.shot, str(e.path)))
    manifest = _assign_labels(entries)

    if manifest.n_classes < 2:
        raise DatasetError(f"dataset under {root} has {manifest.n_classes} subject; at least 2 are required")
    counts = np.bincount(manifest.labels, minlength=manifest.n_classes)
    for (hand, subject), label in manifest.label_map.items():
        if counts[label] < 2:
            raise DatasetError(f"subject {subject} ({hand} hand) has only one image; at least 2 are required")

    logger.info("✅ Found %d images of %d classes", len(manifest), manifest.n_classes)
    return manifest


# ---------------------------------------------------------------------------
# Synthetic vein images
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    classes: int = 10
    images_per_class: int = 12
    size: int = 128
    veins: int = 5
    noise_std: float = 8.0
    jitter: float = 1.5
    background: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.classes < 1:
            raise ParameterError(f"classes must be positive, got {self.classes}")
        if self.images_per_class < 2:
            raise ParameterError(f"images_per_class must be at least 2, got {self.images_per_class}")
        if self.size < 4 or self.size % 4:
            raise ParameterError(f"size must be a positive multiple of 4, got {self.size}")
        if self.veins < 1:
            raise ParameterError(f"veins must be positive, got {self.veins}")
        if self.noise_std < 0 or self.jitter < 0:
            raise ParameterError(f"noise_std and jitter must be non-negative, got {self.noise_std}, {self.jitter}")
        if not 0 <= self.background <= 255:
            raise ParameterError(f"background must be in [0, 255], got {self.background}")


@dataclass(frozen=True)
class VeinStroke:
    points: np.ndarray  # control points, (m, 2) as (x, y)
    width: int
    intensity: int


@dataclass(frozen=True)
class SyntheticDataset:
    images: List[GrayImage]
    labels: np.ndarray
    manifest: DatasetManifest
    skeletons: List[List[VeinStroke]]


def _class_skeleton(spec: SynthSpec, label: int) -> List[VeinStroke]:
    rng = np.random.default_rng([spec.seed, 0, label])
    strokes = []
    for _ in range(spec.veins):
        m = int(rng.integers(3, 8))
        along = np.sort(rng.uniform(0.0, spec.size - 1, m))
        across = rng.uniform(0.1 * spec.size, 0.9 * spec.size, m)
        points = np.column_stack([along, across])
        if rng.random() < 0.5:
            points = points[:, ::-1]
        strokes.append(VeinStroke(points=points, width=int(rng.integers(2, 5)),
                                  intensity=int(rng.integers(40, 71))))
    return strokes


def _render(spec: SynthSpec, strokes: List[VeinStroke], rng: np.random.Generator) -> GrayImage:
    canvas = np.full((spec.size, spec.size), spec.background, dtype=np.uint8)
    samples = np.linspace(0.0, 1.0, 4 * spec.size)
    for stroke in strokes:
        points = stroke.points
        if spec.jitter > 0:
            points = points + rng.normal(0.0, spec.jitter, points.shape)
        knots = np.linspace(0.0, 1.0, len(points))
        curve = interp1d(knots, points, kind='quadratic', axis=0)(samples)
        curve = np.clip(np.rint(curve), 0, spec.size - 1).astype(np.int32)
        cv2.polylines(canvas, [curve.reshape(-1, 1, 2)], False, int(stroke.intensity),
                      thickness=stroke.width, lineType=cv2.LINE_8)
    if spec.noise_std > 0:
        noisy = canvas + rng.normal(0.0, spec.noise_std, canvas.shape)
        canvas = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    return GrayImage(canvas)


def synth_generate(spec: SynthSpec) -> SyntheticDataset:
    """Render images_per_class jittered, noisy copies of each class's fixed vein skeleton"""
    skeletons = [_class_skeleton(spec, c) for c in range(spec.classes)]
    images, labels, entries = [], [], []
    for c, strokes in enumerate(skeletons):
        for i in range(spec.images_per_class):
            rng = np.random.default_rng([spec.seed, 1, c, i])
            images.append(_render(spec, strokes, rng))
            labels.append(c)
            entries.append(ManifestEntry(subject=c + 1, hand='left', session=i // 4 + 1, shot=i % 4 + 1))
    logger.debug("synthesized %d images of %d classes", len(images), spec.classes)
    return SyntheticDataset(images=images, labels=np.array(labels, dtype=np.int64),
                            manifest=_assign_labels(entries), skeletons=skeletons)


def write_synthetic(dataset: SyntheticDataset, root) -> DatasetManifest:
    """Persist as PGM files in the scan layout and return the manifest scan_dataset reads back"""
    root = Path(root)
    for image, entry in zip(dataset.images, dataset.manifest.entries):
        target = root / SYNTHETIC_LAYOUT.format(
            hand=entry.hand, subject=f"{entry.subject:03d}", session=entry.session, shot=entry.shot)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(encode_pgm(image))
    logger.info("✅ Wrote %d synthetic images to %s", len(dataset.images), root)
    return scan_dataset(root, SYNTHETIC_LAYOUT)


# ---------------------------------------------------------------------------
# Feature matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureParams:
    ahe: AheParams = field(default_factory=AheParams)
    size: int = 128
    levels: int = 2
    selection: SubbandSelection = SubbandSelection.ALL

    def __post_init__(self):
        object.__setattr__(self, 'selection', SubbandSelection.parse(self.selection))
        # raises when size is not divisible by 2^levels
        feature_length(self.size, self.size, self.levels, self.selection)

    @property
    def n_features(self) -> int:
        return feature_length(self.size, self.size, self.levels, self.selection)


def image_features(img: GrayImage, params: FeatureParams) -> np.ndarray:
    """preprocess -> dwt2_forward -> extract_features for a single image"""
    prepared = preprocess(img, params.ahe, params.size)
    return extract_features(dwt2_forward(prepared.pixels, params.levels), params.selection)


def _source_features(source: ImageSource, index: int, params: FeatureParams) -> np.ndarray:
    name = str(source) if not isinstance(source, GrayImage) else f"image {index}"
    try:
        img = source if isinstance(source, GrayImage) else load_image(source)
        return image_features(img, params)
    except (PalmVeinError, OSError) as e:
        raise DatasetError(f"{name}: {e}") from e


def build_feature_matrix(sources: Sequence[ImageSource], labels, params: FeatureParams,
                         workers: int = 1) -> LabeledDataset:
    """Feature rows for images (or image paths) in the given order"""
    labels = np.asarray(labels, dtype=np.int64)
    if len(sources) != len(labels):
        raise DatasetError(f"{len(sources)} images but {len(labels)} labels")
    if len(sources) == 0:
        raise DatasetError("no images to build features from")

    logger.info("🔍 Extracting %d features from %d images", params.n_features, len(sources))
    rows = Parallel(n_jobs=max(workers, 1), prefer='threads')(
        delayed(_source_features)(source, i, params) for i, source in enumerate(sources))
    return LabeledDataset(np.vstack(rows), labels)
