"""Closed-form and quadrature results for the two-tier uplink."""

from .exclusion import (no_exclusion_ccdf_lb, exclusion_ccdf_lb, exclusion_cdf_ub,
                        exclusion_H, tier_selected_mean, tier_selection_factor,
                        tier_selection_intensity)
from .femto import (CellularBound, FemtoObserver, cellular_bound, femto_cellular_ccdf_lb,
                    femto_outage_lb)
from .macro import OutageResult, macro_outage, truncated_poisson_weights
from .outofcell import (InsufficientSamples, TruncGaussian, fit_from_moments,
                        fit_out_of_cell, thinned_fit)
from .stable import (DomainError, LevyStable, QuadratureFailure, UnsupportedExponent,
                     cf_inversion_cdf, convolve_fixed, femto_levy, kappa_f, levy_cdf, levy_pdf,
                     stable_char_fn)

__all__ = [
    "CellularBound", "DomainError", "FemtoObserver", "InsufficientSamples", "LevyStable",
    "OutageResult", "QuadratureFailure", "TruncGaussian", "UnsupportedExponent",
    "cellular_bound", "cf_inversion_cdf", "convolve_fixed", "no_exclusion_ccdf_lb", "exclusion_H",
    "exclusion_ccdf_lb", "exclusion_cdf_ub", "femto_cellular_ccdf_lb", "femto_levy",
    "femto_outage_lb", "fit_from_moments", "fit_out_of_cell", "kappa_f", "levy_cdf", "levy_pdf",
    "macro_outage", "stable_char_fn", "tier_selected_mean", "tier_selection_factor",
    "thinned_fit", "tier_selection_intensity", "truncated_poisson_weights",
]
