"""Dyson-Ising chain simulator: exact kernels, samplers, decimation probes."""

__version__ = "0.1.0"
