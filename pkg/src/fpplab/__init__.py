"""Simulation laboratory for Euclidean first-passage percolation.

Power-weighted shortest paths on Poisson point clouds: exact certified
geodesics, Monte Carlo estimation of the time constant and fluctuations, and
an empirical bench for the probabilistic events behind them.
"""

__version__ = "0.1.0"

from .points import (  # noqa: F401
    BoxRegion,
    PoissonSample,
    SpatialGrid,
    ball_points,
    ball_volume,
    build_index,
    nearest,
    plant_resample_event,
    resample_region,
    sample_poisson,
)
from .geodesic import (  # noqa: F401
    GeodesicOptions,
    GeodesicResult,
    audit_local_optimality,
    ball_crossing,
    brute_force_passage_time,
    edge_cost,
    max_jump,
    passage_time,
    passage_time_via,
)
from .streamstats import StreamStats, merge_stats  # noqa: F401
