"""Multi-scale homography estimation for dynamic scenes.

Images are 2-D float32 arrays in [0, 1]; homographies are 3x3 float64 arrays
normalized so h[2, 2] == 1.
"""

from ._core import (
    Error,
    Model,
    anaglyph,
    apply,
    block_matching_flow,
    build_pyramid,
    compose_across_scale,
    displacement_to_homography,
    downscale_half,
    evaluate,
    extract_static_clips,
    generate_pair,
    homography_loss,
    homography_to_displacement,
    invert,
    mask_loss,
    mean_corner_error,
    read_dataset,
    read_gray_png,
    synth_dataset,
    synth_dynamic_clip,
    total_loss,
    warp,
    write_png,
)

__all__ = [
    "Error",
    "Model",
    "anaglyph",
    "apply",
    "block_matching_flow",
    "build_pyramid",
    "compose_across_scale",
    "displacement_to_homography",
    "downscale_half",
    "evaluate",
    "extract_static_clips",
    "generate_pair",
    "homography_loss",
    "homography_to_displacement",
    "invert",
    "mask_loss",
    "mean_corner_error",
    "read_dataset",
    "read_gray_png",
    "synth_dataset",
    "synth_dynamic_clip",
    "total_loss",
    "warp",
    "write_png",
]
