"""Indoor line-of-sight massive MIMO deployment simulator.

Compares co-located and wall-distributed antenna deployments by the
zero-forcing transmit power they need and the per-user rates they achieve
under pilot-based channel estimation.
"""

__version__ = "0.1.0"

from .antenna import PatchDims, SubstrateSpec, design_patch, gain, pattern_factor
from .channel import (
    ChannelMatrix,
    PilotConfig,
    channel_matrix,
    estimate_channel,
    estimate_channel_despread,
    los_gain,
)
from .config import RunConfig, parse_config
from .errors import (
    CampaignError,
    ConfigError,
    DesignError,
    GeometryError,
    InfeasibleRegionError,
    QuadratureError,
    SimulationError,
    SingularMatrixError,
    StatisticalValidityError,
)
from .geometry import (
    AntennaPose,
    CandelabrumSpec,
    Room,
    Spherical,
    Topology,
    TopologyKind,
    build_topology,
    cart_to_sph,
    to_local_spherical,
)
from .montecarlo import (
    CampaignResult,
    DropSpec,
    drop_users,
    run_power_campaign,
    run_rate_campaign,
)
from .precoding import (
    LinkBudget,
    Precoder,
    rate_per_user,
    sinr_per_user,
    zf_precoder,
    zf_required_power,
)
