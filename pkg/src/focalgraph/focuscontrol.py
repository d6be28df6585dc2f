"""Point-to-focal-length mapping and the HTTP service around it.

A query point (hover standing in for gaze) looks up the rasterized
depth, which interpolates the stack's focal lengths at the fractional
index and clamps to the lens range. Queries landing on unmeasurable
pixels hold the last valid command instead of jumping the lens, since
the whole point of the linear triangle transitions is a sweep without
oscillation.
"""

from __future__ import annotations

import io
import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRangeError, OutOfBoundsError
from .raster import DepthMap, ViewImage, encode_fdm, normalize_for_view
from .stack_io import FocalStack, encode_pgm

DEFAULT_LENS = (50.0, 120.0, 2.5)


@dataclass(frozen=True)
class LensConfig:
    min_focal_mm: float = DEFAULT_LENS[0]
    max_focal_mm: float = DEFAULT_LENS[1]
    settle_time_ms: float = DEFAULT_LENS[2]

    def __post_init__(self):
        if not self.min_focal_mm < self.max_focal_mm:
            raise ValueError(
                f"lens range empty: [{self.min_focal_mm}, {self.max_focal_mm}]"
            )
        if self.settle_time_ms < 0:
            raise ValueError("settle time must be >= 0")


@dataclass(frozen=True)
class FocusCommand:
    focal_length_mm: float
    source_depth_index: float
    valid: bool


def query_depth(depth_map: DepthMap, x: int, y: int) -> float | None:
    """Depth at a pixel, or None where the map has no measurement."""
    if not (0 <= x < depth_map.width and 0 <= y < depth_map.height):
        raise OutOfBoundsError(
            f"({x}, {y}) outside {depth_map.width}x{depth_map.height}"
        )
    if not depth_map.valid[y, x]:
        return None
    return float(depth_map.depth[y, x])


def depth_to_focal(
    depth_index: float, stack: FocalStack, lens: LensConfig
) -> FocusCommand:
    """Focal length at a fractional stack index, clamped to the lens range."""
    if not 0 <= depth_index <= stack.depth_count - 1:
        raise IndexOutOfRangeError(
            f"index {depth_index} outside [0, {stack.depth_count - 1}]"
        )
    focal = float(
        np.interp(
            depth_index,
            np.arange(stack.depth_count, dtype=np.float64),
            np.asarray(stack.focal_lengths_mm, dtype=np.float64),
        )
    )
    focal = min(max(focal, lens.min_focal_mm), lens.max_focal_mm)
    return FocusCommand(
        focal_length_mm=focal, source_depth_index=float(depth_index), valid=True
    )


def nearest_frame(depth_index: float) -> int:
    # half-up, matching Math.round in the browser client
    return int(math.floor(depth_index + 0.5))


class FocusService:
    """Stateless reads over an immutable stack + map, plus the one piece
    of mutable state: the last valid focus command (hold policy)."""

    def __init__(self, stack: FocalStack, depth_map: DepthMap, lens: LensConfig):
        if (depth_map.width, depth_map.height) != (stack.width, stack.height):
            raise OutOfBoundsError("depth map size does not match the stack")
        self.stack = stack
        self.depth_map = depth_map
        self.lens = lens
        self._lock = threading.Lock()
        middle = (stack.depth_count - 1) // 2
        self._last_valid = depth_to_focal(float(middle), stack, lens)
        self._view: ViewImage | None = None

    def view(self) -> ViewImage:
        if self._view is None:
            self._view = normalize_for_view(self.depth_map)
        return self._view

    def focus_at(self, x: int, y: int) -> dict:
        """The /focus response body; raises OutOfBounds for bad pixels."""
        depth = query_depth(self.depth_map, x, y)
        if depth is None:
            with self._lock:
                held = self._last_valid
            return {
                "depth_index": held.source_depth_index,
                "focal_length_mm": held.focal_length_mm,
                "nearest_frame": nearest_frame(held.source_depth_index),
                "valid": False,
            }
        cmd = depth_to_focal(depth, self.stack, self.lens)
        with self._lock:
            self._last_valid = cmd
        return {
            "depth_index": cmd.source_depth_index,
            "focal_length_mm": cmd.focal_length_mm,
            "nearest_frame": nearest_frame(cmd.source_depth_index),
            "valid": True,
        }

    def meta(self) -> dict:
        return {
            "width": self.stack.width,
            "height": self.stack.height,
            "depth_count": self.stack.depth_count,
            "focal_lengths_mm": list(self.stack.focal_lengths_mm),
        }


def frame_png(stack: FocalStack, z: int) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(stack.images[z], mode="L").save(buf, format="PNG")
    return buf.getvalue()


def build_app(service: FocusService, cors_origin: str = "*"):
    """FastAPI app exposing the focus-control wire protocol."""
    from fastapi import FastAPI, HTTPException, Response
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="focalgraph focus control")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origin],
        allow_methods=["GET"],
        allow_headers=["*"],
    )

    @app.get("/meta")
    def meta():
        return service.meta()

    @app.get("/frame/{z}")
    def frame(z: int, format: str = "png"):
        if not 0 <= z < service.stack.depth_count:
            raise HTTPException(status_code=404, detail=f"no frame {z}")
        if format == "pgm":
            return Response(
                encode_pgm(service.stack.images[z]),
                media_type="image/x-portable-graymap",
            )
        return Response(frame_png(service.stack, z), media_type="image/png")

    @app.get("/focus")
    def focus(x: int, y: int):
        try:
            return service.focus_at(x, y)
        except OutOfBoundsError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/depthmap")
    def depthmap():
        return Response(
            encode_fdm(service.depth_map), media_type="application/octet-stream"
        )

    @app.get("/preview")
    def preview():
        return Response(
            encode_pgm(service.view().gray), media_type="image/x-portable-graymap"
        )

    return app


def serve(
    stack: FocalStack,
    depth_map: DepthMap,
    lens: LensConfig,
    bind: str = "127.0.0.1:8713",
    cors_origin: str = "*",
) -> None:
    """Run the service until interrupted."""
    import uvicorn

    host, _, port = bind.partition(":")
    app = build_app(FocusService(stack, depth_map, lens), cors_origin=cors_origin)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8713), log_level="warning")
