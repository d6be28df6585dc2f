import numpy as np
import pytest

from focalgraph import stack_io
from focalgraph.errors import (
    DimensionMismatchError,
    FormatError,
    MissingFileError,
    NonMonotonicFocalError,
    TooFewImagesError,
)


def write_stack_files(tmp_path, images, focals, name="stack"):
    paths = []
    for i, img in enumerate(images):
        rel = f"{name}_{i:03d}.pgm"
        stack_io.write_pgm(tmp_path / rel, img)
        paths.append(rel)
    manifest = tmp_path / f"{name}.txt"
    lines = [stack_io.MANIFEST_HEADER] + [
        f"{p}\t{f}" for p, f in zip(paths, focals)
    ]
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def test_load_20_slice_stack(tmp_path, rng):
    images = [rng.integers(0, 256, (512, 640), dtype=np.uint8) for _ in range(20)]
    focals = np.linspace(50.0, 120.0, 20)
    manifest = write_stack_files(tmp_path, images, focals)
    stack = stack_io.load_stack(manifest)
    assert stack.depth_count == 20
    assert (stack.width, stack.height) == (640, 512)
    assert stack.focal_lengths_mm[0] == 50.0
    assert stack.focal_lengths_mm[-1] == 120.0
    # order preservation: slice i equals manifest entry i
    for i in range(20):
        assert np.array_equal(stack.images[i], images[i])


def test_two_images_rejected(tmp_path, rng):
    images = [rng.integers(0, 256, (8, 8), dtype=np.uint8) for _ in range(2)]
    manifest = write_stack_files(tmp_path, images, [50.0, 60.0])
    with pytest.raises(TooFewImagesError):
        stack_io.load_stack(manifest)


def test_duplicate_focal_rejected(tmp_path, rng):
    images = [rng.integers(0, 256, (8, 8), dtype=np.uint8) for _ in range(3)]
    manifest = write_stack_files(tmp_path, images, [50.0, 50.0, 60.0])
    with pytest.raises(NonMonotonicFocalError):
        stack_io.load_stack(manifest)


def test_descending_focal_accepted(tmp_path, rng):
    images = [rng.integers(0, 256, (8, 8), dtype=np.uint8) for _ in range(3)]
    manifest = write_stack_files(tmp_path, images, [120.0, 80.0, 50.0])
    stack = stack_io.load_stack(manifest)
    assert stack.focal_lengths_mm == (120.0, 80.0, 50.0)


def test_dimension_mismatch(tmp_path, rng):
    images = [
        rng.integers(0, 256, (8, 8), dtype=np.uint8),
        rng.integers(0, 256, (8, 9), dtype=np.uint8),
        rng.integers(0, 256, (8, 8), dtype=np.uint8),
    ]
    manifest = write_stack_files(tmp_path, images, [50.0, 60.0, 70.0])
    with pytest.raises(DimensionMismatchError):
        stack_io.load_stack(manifest)


def test_missing_image(tmp_path, rng):
    images = [rng.integers(0, 256, (8, 8), dtype=np.uint8) for _ in range(3)]
    manifest = write_stack_files(tmp_path, images, [50.0, 60.0, 70.0])
    (tmp_path / "stack_001.pgm").unlink()
    with pytest.raises(MissingFileError):
        stack_io.load_stack(manifest)


def test_missing_manifest(tmp_path):
    with pytest.raises(MissingFileError):
        stack_io.load_stack(tmp_path / "nope.txt")


def test_bad_header(tmp_path):
    m = tmp_path / "m.txt"
    m.write_text("not a manifest\n")
    with pytest.raises(FormatError):
        stack_io.read_manifest(m)


def test_sixteen_bit_rejected(tmp_path):
    p = tmp_path / "deep.pgm"
    p.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
    with pytest.raises(FormatError):
        stack_io.read_grayscale(p)


def test_color_luma_conversion(tmp_path):
    rgb = np.array([[[10, 20, 31], [255, 255, 254]]], dtype=np.uint8)
    p = tmp_path / "c.ppm"
    stack_io.write_ppm(p, rgb)
    gray = stack_io.read_grayscale(p)
    # floor((r+g+b)/3)
    assert gray[0, 0] == (10 + 20 + 31) // 3
    assert gray[0, 1] == (255 + 255 + 254) // 3


def test_pgm_comment_header(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n2 1\n255\n\x07\x09")
    img = stack_io.read_grayscale(p)
    assert img.tolist() == [[7, 9]]


def test_round_trip_bit_identical(tmp_path, rng):
    images = [rng.integers(0, 256, (16, 12), dtype=np.uint8) for _ in range(4)]
    focals = [50.0, 60.5, 77.25, 120.0]
    stack = stack_io.make_stack(images, focals, name="rt")
    manifest = stack_io.save_stack(stack, tmp_path)
    again = stack_io.load_stack(manifest)
    assert again.focal_lengths_mm == stack.focal_lengths_mm
    for a, b in zip(stack.images, again.images):
        assert np.array_equal(a, b)


def test_manifest_notes_round_trip(tmp_path):
    m = stack_io.StackManifest(
        version=1,
        image_paths=["a.pgm", "b.pgm", "c.pgm"],
        focal_lengths_mm=[50.0, 60.0, 70.0],
        notes="desk scan\nsecond line",
    )
    path = tmp_path / "m.txt"
    stack_io.write_manifest(path, m)
    again = stack_io.read_manifest(path)
    assert again.image_paths == m.image_paths
    assert again.focal_lengths_mm == m.focal_lengths_mm
    assert again.notes == m.notes


def test_manifest_mismatched_lengths():
    with pytest.raises(FormatError):
        stack_io.StackManifest(
            version=1, image_paths=["a.pgm"], focal_lengths_mm=[1.0, 2.0]
        )
