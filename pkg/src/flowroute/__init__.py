"""Flow-based deep Q routing and spectrum access for wireless ad-hoc networks."""

__version__ = "0.1.0"
