"""Joint service caching and computing design for cellular edge networks."""

from .baselines import gcps, pcos, tcps, ucps
from .combinations import (
    CachingDistribution,
    CombinationIndex,
    ComputingAllocation,
    a_from_t,
    enumerate_combinations,
    t_from_a,
)
from .config import ScenarioConfig, load_config, zipf_popularity
from .constants import derive_constants, z_integral
from .exceptions import (
    BracketError,
    EdgeSspError,
    InfeasibleError,
    InvalidConfigError,
    NumericalError,
    QueueUnstableError,
)
from .near_optimal import run_algorithm3, run_cccp
from .sca import Algorithm1, find_feasible_start, run_algorithm1
from .simulator import SimConfig, Simulator, estimate_ssp
from .ssp import asymptotic_ssp, ssp
from .validation import validate

__version__ = "0.1.0"
