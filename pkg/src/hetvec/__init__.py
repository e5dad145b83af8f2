"""Delay-bounded resource allocation for heterogeneous vehicular edge computing.

Modules: ``env`` (slot dynamics), ``snc`` (delay bounds), ``objective``
(utility, drift, reward), ``policies`` (baselines), ``sac`` (learned
allocator) and ``harness`` (experiments and CLI).
"""
__version__ = "0.1.0"
