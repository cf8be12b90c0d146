"""stainforge: dynamic-parameter stain normalization for pathology images.

The engine pairs a tiny 59-parameter pointwise color mapper with a
prediction network that emits those parameters per input image, alongside
classical Reinhard and Macenko baselines, SSIM/QSSIM/PSNR metrics, the
training losses, a gradient-checked mapper trainer, and a tiled
whole-slide pipeline with a throughput benchmark.
"""

from .baselines import (
    DegenerateImageError,
    RankError,
    ReinhardStats,
    StainBasis,
    macenko_apply,
    macenko_fit,
    reinhard_apply,
    reinhard_fit,
)
from .core import (
    DimensionError,
    NumericError,
    PixelImage,
    StainforgeError,
    Tile,
    decode_u8,
    encode_u8,
    resize_bilinear,
)
from .mapper import (
    PARAM_COUNT,
    ColorLut,
    MapperParams,
    compile_lut,
    map_image,
    map_image_lut,
    map_pixel,
    pack_params,
    params_from_json,
    params_to_json,
    unpack_params,
)
from .metrics import MetricReport, evaluate_set, psnr, qssim, ssim
from .normalizer import (
    REFERENCE_GPU_FPS,
    BenchReport,
    SlideSource,
    TileRect,
    benchmark,
    normalize_slide,
    open_slide_dir,
    open_slide_image,
    plan_tiles,
    write_slide_dir,
)
from .predictor import (
    DEFAULT_ALPHA,
    WeightsError,
    downsample_128,
    expected_tensors,
    init_weights,
    normalize_one,
    predict_params,
)
from .raster import read_image_u8, write_image_u8
from .training import (
    AdamState,
    LrSchedule,
    adam_step,
    adv_loss,
    cycle_loss,
    domain_loss,
    fit_mapper,
    identity_loss,
    lr_at,
    mapper_grads,
    mapper_loss,
    random_scale,
)
from .weights import WeightStore, load_weights, save_weights

__version__ = "0.1.0"
