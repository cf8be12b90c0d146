"""The pointwise color mapper and its exact lookup-table fast path.

The mapper is a two-layer 1x1-convolutional network: every pixel's RGB
vector goes through 8 hidden ReLU channels and a tanh output layer, 59
scalars in total. Because the mapping never looks at a pixel's neighbors,
the whole network can be compiled into a 256^3 lookup table that is
bit-exact against the direct float path.
"""

import time

import numpy as np

from stainforge import (
    compile_lut,
    decode_u8,
    encode_u8,
    map_image,
    map_image_lut,
    pack_params,
    unpack_params,
)

rng = np.random.default_rng(7)

# any 59-vector defines a mapping; here: a random but tame one
params = unpack_params(rng.uniform(-1.5, 1.5, 59))
print("parameter count:", pack_params(params).shape[0])

# a synthetic 512x512 "tile"
raw = rng.integers(0, 256, (512, 512, 3), dtype=np.uint8)

t0 = time.perf_counter()
direct = encode_u8(map_image(decode_u8(raw), params))
t_direct = time.perf_counter() - t0
print(f"direct path : {t_direct*1e3:7.1f} ms for one 512x512 tile")

t0 = time.perf_counter()
lut = compile_lut(params)
t_compile = time.perf_counter() - t0
t0 = time.perf_counter()
via_lut = map_image_lut(raw, lut)
t_lut = time.perf_counter() - t0
print(f"LUT compile : {t_compile*1e3:7.1f} ms (one-time, 48 MiB table)")
print(f"LUT path    : {t_lut*1e3:7.1f} ms for the same tile")

print("bit-exact   :", np.array_equal(direct, via_lut))
print("speedup     : %.1fx per tile after compilation" % (t_direct / t_lut))
