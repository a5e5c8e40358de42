"""Stereo matching with zigzag-scanned ZNCC costs and quantized
domain-transform aggregation."""

from .aggregation import (
    DtParams,
    WeightMaps,
    compute_weights,
    dt_aggregate,
    dt_pass_d2u,
    dt_pass_l2r,
    dt_pass_r2l,
    dt_pass_u2d,
    normalize_zero_mean,
)
from .cost_volume import ProductRowSums, ScanConfig, product_sum_initial, zncc_fast, zncc_reference
from .image_io import (
    PgmFormatError,
    read_disparity_pgm,
    read_pgm,
    synth_shift_pair,
    write_disparity_map,
    write_pgm,
)
from .pipeline import EvalReport, PipelineConfig, benchmark, evaluate_d1, run_pipeline, wta, wta_cost
from .quantization import PackedCostVolume, decode8, encode16, pack4, quantize_scale, unpack4
from .summation import (
    WindowStats,
    integral_image,
    prefix_scan_row,
    window_sums,
    window_sums_direct,
    window_sums_integral,
)

__version__ = "0.1.0"
