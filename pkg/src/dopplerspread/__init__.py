"""Doppler spread analysis and antenna weighting for Doppler-compensated
high-mobility massive-MIMO uplinks."""

from .array import (AodRegion, ArrayGeometry, BeamformerBank, beam_gain, gain_matrix, make_bank,
                    normalization_eta, steering_matrix, steering_vector)
from .channel import (EquivalentChannelTrace, ScattererSet, autocorrelation, draw_scatterers,
                      equivalent_channel, numerical_psd, relative_l2)
from .errors import DimensionError, DomainError, NumericError
from .linksim import (LinkResult, OfdmConfig, apply_channel, receive_detect, run_ser_sweep,
                      transmit_frame)
from .spectrum import (PsdCurve, WindowFunction, beam_function, closed_form_window, contributing_set,
                       discrete_window, elliptic_f_complete, psd_analytic, window_eval)
from .weighting import (CMatrices, WeightVector, assemble_c_matrices, doppler_spread, optimal_weights,
                        smr)

__version__ = "0.1.0"
