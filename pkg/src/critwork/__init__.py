"""Work statistics of weakly driven open quantum systems from linear response."""
from .errors import (CritworkError, DimensionTooLarge, DivergenceError, DomainError,
                     ObservableUnavailable, PoleError, PropagatorNotConverged, QuadratureError)
from .chi_models import RLM, MajoranaRLM, TabulatedChi, SusceptibilityModel
from .cft_scaling import CftChi, CftParams, psi0, scaling_dimension
from .lr_engine import RampProtocol, cumulant, crossover_sweep
from .ed_oracle import EdSystem, build_discretized_rlm, build_two_level, wdf_two_time
from .work import WorkDistribution

__version__ = '0.1.0'

__all__ = ['CritworkError', 'DimensionTooLarge', 'DivergenceError', 'DomainError',
           'ObservableUnavailable', 'PoleError', 'PropagatorNotConverged', 'QuadratureError',
           'RLM', 'MajoranaRLM', 'TabulatedChi', 'SusceptibilityModel', 'CftChi', 'CftParams',
           'psi0', 'scaling_dimension', 'RampProtocol', 'cumulant', 'crossover_sweep',
           'EdSystem', 'build_discretized_rlm', 'build_two_level', 'wdf_two_time',
           'WorkDistribution']
