"""Monte Carlo and exact-enumeration checks of rescaled GWI limits."""
from .config import *  # noqa: F401,F403
from .experiments import *  # noqa: F401,F403
from .occupation import *  # noqa: F401,F403
from .report import *  # noqa: F401,F403
from .scaling import *  # noqa: F401,F403
from .simulate import *  # noqa: F401,F403
