"""Localization probabilities for Poisson-deployed anchor/non-anchor networks
under log-normal shadowing: closed forms, thresholds and Monte Carlo checks."""

__version__ = "0.1.0"

from .analytic import (
    Deployment,
    NumericalError,
    expected_neighbors_bounded,
    expected_neighbors_unbounded,
    minimum_density,
    network_localization_probability,
    quadrature_oracle,
    single_node_localization_probability,
)
from .channel import ChannelModel, ParameterError, link_probability, new_channel, sample_link
from .montecarlo import (
    DegenerateSampleError,
    MonteCarloEstimate,
    SimConfig,
    estimate_network_localization,
    estimate_node_localization,
)
from .thresholds import (
    GrowthSpec,
    ThresholdResult,
    network_density_threshold,
    network_range_threshold,
    single_node_density_threshold,
    single_node_range_threshold,
)
