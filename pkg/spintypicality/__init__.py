__version__ = "1.0.0"

from spintypicality.core import StateVector, down_probability, polarization_from_w, total_magnetization, up_probability
from spintypicality.errors import (
    CapabilityError,
    ConfigError,
    DimensionError,
    DomainError,
    OutputError,
    SiteIndexError,
    SpinError,
)
from spintypicality.experiments import (
    TimeGrid,
    PolarizationTrace,
    averaged_trace,
    chebyshev_bound,
    cross_term_residual,
    ensemble_trace,
    pure_state_trace,
)
from spintypicality.hamiltonian import AnisotropyKind, CouplingNetwork, build_chain, build_ladder, build_star
from spintypicality.propagators import ExactPropagator, TrotterPropagator, make_propagator
from spintypicality.states import InitialStateSpec, StateKind
from spintypicality.typicality import EnsembleDynamics, PureStateDynamics
