"""Focal stack loading: PGM images plus a plain-text manifest.

Manifest format (line oriented, diff friendly)::

    focalstack v1
    # optional note lines
    img_000.pgm<TAB>50.0
    img_001.pgm<TAB>53.7
    ...

Image paths are relative to the manifest's directory. Images must be
binary 8-bit PGM (P5, maxval <= 255); binary PPM (P6) color images are
accepted and converted to gray by the integer luma average
floor((r+g+b)/3). 16-bit images are rejected rather than silently
down-converted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    FormatError,
    MissingFileError,
    NonMonotonicFocalError,
    TooFewImagesError,
)

MANIFEST_HEADER = "focalstack v1"

# Three-point depth interpolation needs at least three focal samples.
MIN_IMAGES = 3


@dataclass(frozen=True)
class StackManifest:
    version: int
    image_paths: list[str]
    focal_lengths_mm: list[float]
    notes: str | None = None

    def __post_init__(self):
        if len(self.image_paths) != len(self.focal_lengths_mm):
            raise FormatError(
                "manifest lists %d paths but %d focal lengths"
                % (len(self.image_paths), len(self.focal_lengths_mm))
            )


@dataclass(frozen=True)
class FocalStack:
    """Ordered grayscale slices with per-slice focal length metadata.

    Immutable after construction; safe to share across threads. Depth is
    treated as the slice index throughout the pipeline, so the focal
    lengths are metadata until a depth index is converted back to a lens
    command.
    """

    images: tuple[np.ndarray, ...]
    focal_lengths_mm: tuple[float, ...]
    width: int
    height: int
    name: str = field(default="stack")

    def __post_init__(self):
        if len(self.images) < MIN_IMAGES:
            raise TooFewImagesError(
                f"{len(self.images)} images; need at least {MIN_IMAGES}"
            )
        if len(self.images) != len(self.focal_lengths_mm):
            raise DimensionMismatchError("one focal length per image required")
        for i, img in enumerate(self.images):
            if img.dtype != np.uint8 or img.ndim != 2:
                raise FormatError(f"image {i} is not 8-bit grayscale")
            if img.shape != (self.height, self.width):
                raise DimensionMismatchError(
                    f"image {i} is {img.shape[1]}x{img.shape[0]}, "
                    f"stack is {self.width}x{self.height}"
                )
        f = np.asarray(self.focal_lengths_mm, dtype=np.float64)
        d = np.diff(f)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise NonMonotonicFocalError(
                "focal lengths must be strictly monotonic: %s" % (list(f),)
            )

    @property
    def depth_count(self) -> int:
        return len(self.images)


def make_stack(images, focal_lengths_mm, name="stack") -> FocalStack:
    """Build a validated FocalStack from in-memory slices."""
    images = tuple(np.ascontiguousarray(im, dtype=np.uint8) for im in images)
    if not images:
        raise TooFewImagesError("empty image list")
    h, w = images[0].shape
    return FocalStack(
        images=images,
        focal_lengths_mm=tuple(float(f) for f in focal_lengths_mm),
        width=w,
        height=h,
        name=name,
    )


# ---------------------------------------------------------------------------
# PGM / PPM
# ---------------------------------------------------------------------------

def _read_pnm_header(data: bytes, path):
    """Parse a P5/P6 header, skipping '#' comments; return (magic, w, h, maxval, offset)."""
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM (magic {magic!r})")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise FormatError(f"{path}: truncated header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif c.isspace():
            pos += 1
        else:
            m = re.match(rb"\d+", data[pos:])
            if not m:
                raise FormatError(f"{path}: bad header token at byte {pos}")
            fields.append(int(m.group()))
            pos += m.end()
    # exactly one whitespace byte separates maxval from the raster
    pos += 1
    return magic, fields[0], fields[1], fields[2], pos


def read_grayscale(path) -> np.ndarray:
    """Read a P5 PGM (or P6 PPM, luma-averaged) as a (h, w) uint8 array."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(str(path))
    data = path.read_bytes()
    magic, w, h, maxval, off = _read_pnm_header(data, path)
    if maxval > 255:
        raise FormatError(f"{path}: maxval {maxval} (16-bit input rejected)")
    if maxval < 1:
        raise FormatError(f"{path}: invalid maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    need = w * h * channels
    raster = data[off : off + need]
    if len(raster) < need:
        raise FormatError(f"{path}: raster truncated ({len(raster)}/{need} bytes)")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, channels)
    if channels == 3:
        arr = (arr.astype(np.uint16).sum(axis=2) // 3).astype(np.uint8)
    else:
        arr = arr[:, :, 0]
    return np.ascontiguousarray(arr)


def write_pgm(path, image: np.ndarray) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(image.tobytes())


def write_ppm(path, image: np.ndarray) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w, _ = image.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(image.tobytes())


def encode_pgm(image: np.ndarray) -> bytes:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = image.shape
    return b"P5\n%d %d\n255\n" % (w, h) + image.tobytes()


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def read_manifest(path) -> StackManifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(str(path))
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise FormatError(f"{path}: first line must be '{MANIFEST_HEADER}'")
    paths, focals, notes = [], [], []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.lstrip().startswith("#"):
            notes.append(line.lstrip()[1:].strip())
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{n}: expected 'path<TAB>focal_mm'")
        paths.append(parts[0])
        try:
            focals.append(float(parts[1]))
        except ValueError:
            raise FormatError(f"{path}:{n}: bad focal length {parts[1]!r}") from None
    return StackManifest(
        version=1,
        image_paths=paths,
        focal_lengths_mm=focals,
        notes="\n".join(notes) if notes else None,
    )


def write_manifest(path, manifest: StackManifest) -> None:
    lines = [MANIFEST_HEADER]
    if manifest.notes:
        lines.extend("# " + n for n in manifest.notes.splitlines())
    lines.extend(
        f"{p}\t{f!r}" for p, f in zip(manifest.image_paths, manifest.focal_lengths_mm)
    )
    Path(path).write_text("\n".join(lines) + "\n")


def load_stack(manifest_path) -> FocalStack:
    """Load and validate a focal stack; slice order equals manifest order."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    if len(manifest.image_paths) < MIN_IMAGES:
        raise TooFewImagesError(
            f"{manifest_path}: {len(manifest.image_paths)} images; "
            f"need at least {MIN_IMAGES}"
        )
    base = manifest_path.parent
    images = [read_grayscale(base / p) for p in manifest.image_paths]
    h, w = images[0].shape
    for i, img in enumerate(images):
        if img.shape != (h, w):
            raise DimensionMismatchError(
                f"{manifest.image_paths[i]} is {img.shape[1]}x{img.shape[0]}, "
                f"expected {w}x{h}"
            )
    return make_stack(images, manifest.focal_lengths_mm, name=manifest_path.stem)


def save_stack(stack: FocalStack, out_dir, name=None) -> Path:
    """Write the stack as PGMs plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = name or stack.name
    paths = []
    for z, img in enumerate(stack.images):
        rel = f"{name}_{z:03d}.pgm"
        write_pgm(out_dir / rel, img)
        paths.append(rel)
    manifest = StackManifest(
        version=1,
        image_paths=paths,
        focal_lengths_mm=list(stack.focal_lengths_mm),
    )
    mpath = out_dir / f"{name}.txt"
    write_manifest(mpath, manifest)
    return mpath
