"""Which-way information against fringe visibility in two-path matter-wave interferometers, with the uncertainty relations behind the trade-off."""

__version__ = "0.1.0"
