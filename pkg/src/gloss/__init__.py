"""Location-aware service assemblies.

Importing the package registers the location-event XML codec used by the
pipeline adapters.
"""

from . import transports as _transports  # noqa: F401  (codec registration)

__version__ = "0.1.0"
