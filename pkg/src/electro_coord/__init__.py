"""Real-time coordination of wind-powered alkaline electrolyzer clusters.

A feedback-optimization layer produces current references from the
steady-state power map; a projection layer enforces electrical, ramp,
cluster-power and discrete-time CBF hydrogen-in-oxygen limits.
"""

__version__ = "0.1.0"
