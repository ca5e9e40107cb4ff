"""Oriented 1D depthwise convolutions on NHWC numpy tensors.

Reference oracles, a cache-banded multithreaded fast path that matches them
bit for bit, toy ConvNeXt-style blocks with a reverse-mode tape, analysis
helpers and a benchmark harness.
"""
from .analysis import (
    GaussianSpec,
    MadTally,
    erf_from_forward,
    erf_map,
    gaussian_separability_check,
    mad_count,
    verify_downsampling_decomposition,
    write_pgm,
)
from .bench import BenchReport, run_bench
from .blocks import (
    NetworkConfig,
    block_fwd,
    gelu_fwd,
    init_params,
    layernorm_fwd,
    network_fwd,
    network_grad_input,
    stem_fwd,
)
from .estimator import OrientedConv1D
from .fast import ExecutionPlan, dwconv1d_fast_bwd, dwconv1d_fast_fwd, plan_build
from .geometry import (
    ConvConfig,
    InvalidConfigError,
    OffsetTable,
    angle_tables,
    direction_angles,
    layerwise_angles,
    offsets_even,
    offsets_rotation,
    offsets_shear,
    stage_kernel_caps,
)
from .reference import (
    MadCounter,
    SoftConfig,
    dwconv1d_bilinear_fwd,
    dwconv1d_bwd,
    dwconv1d_even_fwd,
    dwconv1d_fwd,
    dwconv2d_oriented_fwd,
    dwconv2d_standard_fwd,
    softconv_fwd,
    softconv_grad_theta,
)
from .tape import Tape
from .tensor import InvalidShapeError, Rng, TensorFormatError, tensor_random, tensor_read, tensor_write

__version__ = "0.1.0"
