"""Pseudo- and quasi-random generation, SDE path simulation, option pricing
and short-rate calibration."""

from __future__ import annotations

__version__ = "0.1.0"

from .calibration import CalibrationError, VasicekEstimate, ZeroCouponCurve
from .dist_transforms import NormalSource, box_muller, moro_inverse_normal
from .pricing import CallSpec, bs_call_price, mc_call_price
from .rng_core import LcgSource, MixedTorusSource, TorusPrecisionError, TorusSource, make_source
from .sde import CirParams, GbmParams, VasicekParams, measure_strong_order, simulate_ensemble

__all__ = [
    "CalibrationError", "VasicekEstimate", "ZeroCouponCurve",
    "NormalSource", "box_muller", "moro_inverse_normal",
    "CallSpec", "bs_call_price", "mc_call_price",
    "LcgSource", "MixedTorusSource", "TorusPrecisionError", "TorusSource", "make_source",
    "CirParams", "GbmParams", "VasicekParams", "measure_strong_order", "simulate_ensemble",
]
