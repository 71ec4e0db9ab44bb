"""Ordered trees, sin-trees, offspring/dispatching laws, samplers and codecs."""
from .formats import *  # noqa: F401,F403
from .laws import *  # noqa: F401,F403
from .ordered import *  # noqa: F401,F403
from .sampling import *  # noqa: F401,F403
from .sintree import *  # noqa: F401,F403
