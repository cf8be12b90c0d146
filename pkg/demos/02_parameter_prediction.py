"""Per-image dynamic parameters from the prediction network.

A modified ResNet18 (no normalization layers, biased convolutions) looks at
a 128x128 downsample of the input and emits the mapper's 59 parameters,
squashed by tanh and scaled by the learnable bound alpha. Different color
casts produce different parameters; the bound holds for any input.

No pretrained weights ship with the repository, so this demo uses the
deterministic seeded initializer. Real weights load from a PNWT file.
"""

import numpy as np

from stainforge import decode_u8, init_weights, normalize_one, pack_params, predict_params

rng = np.random.default_rng(11)
store = init_weights(seed=123)  # fixture weights, alpha = 4.5
alpha = float(store.get("alpha")[0])

base = rng.integers(80, 180, (96, 96, 3)).astype(np.uint8)
pinkish = np.clip(base * np.array([1.3, 0.8, 1.0]), 0, 255).astype(np.uint8)
bluish = np.clip(base * np.array([0.8, 0.9, 1.3]), 0, 255).astype(np.uint8)

for name, raw in (("neutral", base), ("pinkish", pinkish), ("bluish", bluish)):
    v = pack_params(predict_params(decode_u8(raw), store))
    print(f"{name:8s}: |param|max = {np.abs(v).max():.3f} (alpha = {alpha}), "
          f"first five = {np.round(v[:5], 3)}")

# same weights, same image -> same parameters; the mapping itself runs at
# original resolution
out = normalize_one(decode_u8(pinkish), store)
print("normalized image size:", out.height, "x", out.width)
