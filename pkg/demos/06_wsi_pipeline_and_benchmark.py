"""Whole-slide normalization and the throughput benchmark.

Parameters are predicted once from the slide thumbnail, so every tile is
mapped under the same 59 scalars: no seams, and the output is bit-identical
for any tile size or worker count. The benchmark times only the mapping
computation over in-memory tiles (no I/O), the same rule the published
FPS figures use.
"""

import tempfile
from pathlib import Path

import numpy as np

from stainforge import (
    REFERENCE_GPU_FPS,
    SlideSource,
    benchmark,
    init_weights,
    normalize_slide,
    open_slide_dir,
    plan_tiles,
    write_slide_dir,
)

rng = np.random.default_rng(1)
store = init_weights(seed=99)

# a 1024x768 synthetic slide held in memory
raw = rng.integers(40, 220, (768, 1024, 3)).astype(np.uint8)
slide = SlideSource.from_array(raw)

small_tiles = normalize_slide(slide, store, tile=64, workers=1, use_lut=False)
big_tiles = normalize_slide(slide, store, tile=512, workers=8, use_lut=False)
print("tiling/worker invariance:", np.array_equal(small_tiles, big_tiles))

# the same pipeline against an on-disk tiled slide directory
with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "slide"
    sink = write_slide_dir(root, slide.width, slide.height, tile_size=256)
    for rect in plan_tiles(slide.width, slide.height, 256):
        sink(rect, raw[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w])
    reopened = open_slide_dir(root)
    from_disk = normalize_slide(reopened, store, tile=256, workers=4, use_lut=True)
    print("disk-backed pipeline matches in-memory:", np.array_equal(from_disk, small_tiles))

print("\nthroughput (this machine, CPU, 512x512 tiles, I/O excluded):")
for path in ("direct", "lut"):
    r = benchmark(store, tile=512, path=path, workers=1, duration=1.5)
    print(f"  {path:6s}: {r.fps:8.1f} fps  ({r.mpx_per_s:7.1f} Mpx/s, {r.tiles} tiles)")
print(f"\npublished GPU reference, same rule: "
      f"{REFERENCE_GPU_FPS['stainnet']} fps (fixed 1x1 network), "
      f"{REFERENCE_GPU_FPS['paramnet']} fps (dynamic parameters, GTX 1080Ti)")
