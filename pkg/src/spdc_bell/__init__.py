"""Type-II SPDC polarization-frequency entanglement: Bell content versus
frequency offset, coincidence spectra, fibre time selection, Monte Carlo."""

from .state import (BellWeights, BiphotonAmplitude, CoincidenceCurve, FrequencyGrid,
                    OutOfGridError, SourceParams, bell_decompose, make_spdc_state,
                    pair_rate_spectrum, sinc_amplitude, singlet_offset, total_pair_rate)
from .optics import (FibreParams, JonesElement, apply_common_path, coincidence_projection,
                     coincidence_projection_polarized_time, compensator, fibre_time_density,
                     hwp, polarizer, qwp)
from .analytics import (SpectralFilter, coincidence_spectrum, hwp_scan_family,
                        offset_to_wavelength, polarization_fringe, rc_closed_form, visibility,
                        wavelength_to_offset)

__all__ = [
    "BellWeights", "BiphotonAmplitude", "CoincidenceCurve", "FrequencyGrid", "OutOfGridError",
    "SourceParams", "bell_decompose", "make_spdc_state", "pair_rate_spectrum", "sinc_amplitude",
    "singlet_offset", "total_pair_rate", "FibreParams", "JonesElement", "apply_common_path",
    "coincidence_projection", "coincidence_projection_polarized_time", "compensator",
    "fibre_time_density", "hwp", "polarizer", "qwp", "SpectralFilter", "coincidence_spectrum",
    "hwp_scan_family", "offset_to_wavelength", "polarization_fringe", "rc_closed_form",
    "visibility", "wavelength_to_offset",
]
