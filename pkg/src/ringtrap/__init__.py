"""Energy-transfer efficiency of a ring antenna with spatially correlated dephasing."""

__version__ = "0.1.0"
