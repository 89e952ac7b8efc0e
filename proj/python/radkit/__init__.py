"""Python bindings for the radkit radar toolkit."""

from ._radkit import (  # noqa: F401
    RadkitError,
    ca_alpha,
    cfar_2d,
    decode3d,
    evaluate,
    expected_bins,
    fit_anchors,
    focal_objectness_loss,
    iou2d,
    iou3d,
    log_magnitude,
    polar_to_cart,
    ra_map,
    rad_from_adc,
    rd_map,
    read_tensor,
    synth_adc,
    write_tensor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
