"""Cluster-based air-to-ground multipath channel modeling.

Estimation, K-Power-Means clustering, intra- and inter-cluster
characterization, cluster tracking across link distance and a stochastic
channel generator driven by the fitted parameter set.
"""

from .core import (
    ChannelRecord,
    MultipathComponent,
    PowerDelayProfile,
    Snapshot,
    compute_pdp,
    normalize_and_clip,
    normalize_mpcs,
)
from .errors import (
    AgChanError,
    DomainError,
    InvalidArgumentError,
    NumericError,
    ParseError,
    ValidationFailure,
)
from .params import DEFAULT_PARAMETERS, ModelParameters

__version__ = "0.1.0"
