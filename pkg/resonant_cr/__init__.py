# resonant_cr/__init__.py
"""Resonant lattice sums, the delta-method circle method and the continuous
resonant equation: numerics plus an experiment harness."""

__version__ = "0.1.0"
