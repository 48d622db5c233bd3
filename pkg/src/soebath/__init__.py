"""Sum-of-exponentials approximation of bath correlation functions and memory kernels."""
from .spectral import (AnalyticSegment, BaseDensity, SpectralModel, effective_segments,
                       make_preset, matsubara_margin)
from .soe import (SoeRepresentation, affine_rescale, eval_grid, evaluate, l1_error,
                  linf_error, merge)
from .contour import (QuadratureParams, RefinementError, build_bcf_soe, build_segment_soe,
                      select_params)
from .oracle import BcfOracle, bcf_reference, closed_form, tail_l1

__all__ = [
    "AnalyticSegment", "BaseDensity", "SpectralModel", "effective_segments", "make_preset",
    "matsubara_margin", "SoeRepresentation", "affine_rescale", "eval_grid", "evaluate",
    "l1_error", "linf_error", "merge", "QuadratureParams", "RefinementError",
    "build_bcf_soe", "build_segment_soe", "select_params", "BcfOracle", "bcf_reference",
    "closed_form", "tail_l1",
]
