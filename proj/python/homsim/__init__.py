"""Pulsed two-photon interference: simulation, correlation, fitting, tuning.

The heavy lifting lives in the compiled extension ``homsim._core``; this
package re-exports its public surface.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
