"""Density estimation for events on linear networks.

Events are binned along each edge and the bin heights are smoothed by
local linear regression.  At every junction a chi-square pretest decides
whether the density is continuous; where it is, nearby edges are fitted
jointly with a shared value at the vertex.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateMomentsError,
    InsufficientSupportError,
    NetdensError,
    NetworkError,
    NothingToTestError,
    NumericalError,
    RecursionLimitError,
    SingularDesignError,
)
from .kernels import EPANECHNIKOV, KERNELS, get_kernel  # noqa: E402
from .network import LinearNetwork, NetworkPoint, build_network, h_neighborhood, network_distance  # noqa: E402
from .binning import BinConfig, bin_events, default_bin_width  # noqa: E402
from .lpr import fit_local_poly, estimate_edge_limit_at_vertex  # noqa: E402
from .vertex_test import equality_test, run_vertex_tests, slope_equality_test, subset_grouping  # noqa: E402
from .piecewise import density_profile, estimate_at  # noqa: E402
from .baselines import esck, esdk, naive_kde  # noqa: E402

__all__ = [
    "__version__",
    "NetdensError", "NetworkError", "NumericalError", "DegenerateMomentsError",
    "SingularDesignError", "InsufficientSupportError", "NothingToTestError", "RecursionLimitError",
    "EPANECHNIKOV", "KERNELS", "get_kernel",
    "LinearNetwork", "NetworkPoint", "build_network", "h_neighborhood", "network_distance",
    "BinConfig", "bin_events", "default_bin_width",
    "fit_local_poly", "estimate_edge_limit_at_vertex",
    "equality_test", "run_vertex_tests", "slope_equality_test", "subset_grouping",
    "density_profile", "estimate_at",
    "esck", "esdk", "naive_kde",
]
