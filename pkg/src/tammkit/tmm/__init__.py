from .engine import (FieldProfile1D, PlaneWaveQuery, field_profile,
                     reflection_coefficient, reflectivity, reflectivity_map,
                     transmittance)
from .resonance import (calibrate_gold, dispersion, find_resonance,
                        fit_parabolic_dispersion, planar_q, tamm_energy_estimate)

__all__ = [
    "FieldProfile1D", "PlaneWaveQuery", "field_profile", "reflection_coefficient",
    "reflectivity", "reflectivity_map", "transmittance", "calibrate_gold",
    "dispersion", "find_resonance", "fit_parabolic_dispersion", "planar_q",
    "tamm_energy_estimate",
]
