"""SAR scene preparation, balanced patch sampling, and training kernels.

The package turns georeferenced single-channel SAR scenes plus land-cover
rasters into calibrated, category-balanced patch datasets, and provides
reference implementations (values and analytic gradients) of the masked
reconstruction and segmentation losses used to train on them.
"""

from .calibration import DEFAULT_CALIBRATION_FACTOR, CalibrationTable, calibrate_db
from .config import ConfigError, PipelineConfig, config_hash, default_config, load_config, save_config
from .geotiff import GeoreferenceError, LayoutError, read_geotiff, write_geotiff
from .gradcheck import central_difference_grad, max_relative_error
from .grid import (
    CoregistrationError,
    GeoTransform,
    RasterGrid,
    SampleKind,
    coregistered,
    require_coregistered,
    world_bounds,
)
from .legend import LegendRemap, apply_legend, example_legend, load_legend, save_legend
from .masking import MaskSpec, expand_token_mask, generate_mask, mixmae_mix, simmim_corrupt
from .metrics import confusion_counts, merge_confusions, metrics_from_confusion
from .patches import (
    DEFAULT_PATCH_SIZE,
    MANIFEST_KEYS,
    PatchRecord,
    enumerate_patch_windows,
    extract_patch_pair,
    read_manifest,
    window_is_valid,
    write_manifest,
)
from .patchio import read_patch_blob, write_patch_blob
from .recon_loss import WeightMapConfig, sar_weight_map, weighted_l1_loss
from .rng import Xoshiro256StarStar, derive_seed, splitmix64
from .sampling import (
    CategoryStats,
    CategoryWeights,
    SamplePlan,
    SamplePoint,
    accumulate_stats,
    allocate_per_image,
    assign_splits,
    category_weights,
    filter_full_forest,
    largest_remainder,
    load_plan,
    match_points_to_patches,
    sample_locations,
    save_plan,
)
from .scene import downsample_half, mask_labels_by_sar, merge_label_tiles
from .schedule import LrSchedule, ScheduleConfig, finetune_schedule, lr_schedule, pretrain_schedule
from .seg_loss import LossConfig, combined_loss, dice_loss, focal_loss, one_hot

__version__ = "0.1.0"
