"""Streaming 3x3 mathematical morphology on CPU pipelines."""

from .image import ElementType, Image, as_image, global_extreme, new_filled, pointwise
from .io import ImageFormatError, load, load_pgm, load_raw, store_pgm, store_raw
from .kernel import KernelKind, LaneConfig, QdtState, RowCache
from .operators import (
    GranulometryResult,
    OperatorResult,
    asf,
    dilate_s,
    dome,
    erode_s,
    granulometry,
    hfill,
    hmax,
    marker_hfill,
    marker_raobj,
    open_by_reconstruction,
    quasi_distance,
    raobj,
    reconstruct_dilate,
    reconstruct_erode,
)
from .pipeline import FilterTask, Pipeline, PinningMap, PipelineError, build_pool, run_chain

__version__ = "0.1.0"
