"""Monte Carlo laboratory for local times of simple random walk on b-ary trees."""

__version__ = "0.1.0"

from .tree import TreeShape  # noqa: F401
from .field import LocalTimeField, sample_field  # noqa: F401
from .walker import WalkConfig, run_inverse_local_time  # noqa: F401
from .brw import GaussianField, sample_brw  # noqa: F401
