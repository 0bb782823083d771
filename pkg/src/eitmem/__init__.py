"""Simulation of heralded SPDC photons stored in an EIT quantum memory."""

__version__ = "0.1.0"

from .waveforms import ComplexSpectrum, FieldWaveform, G2Waveform, frequency_grid
from .spdc_source import CavitySpdcParams, biphoton_spectrum, field_coefficients, g2_waveform_from_spectrum
from .eit_medium import (EitParams, MediumResponse, eit_bandwidth, fit_optical_depth, group_delay,
                         propagation_kernel, transmission_spectrum)
from .memory_sim import (CouplingSchedule, DecoherenceModel, bandwidth_vs_xi, reference_operating_point,
                         retrieved_g2, simulate_storage, slow_light)
from .coincidence import (CorrelationHistogram, DetectionParams, G2Model, estimate_g2, fit_g2_model,
                          g2_peak_model, monte_carlo_histogram)
