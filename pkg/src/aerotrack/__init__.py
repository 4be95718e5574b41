"""Aerial target tracking toolkit.

Target motion prediction by constrained Bernstein-basis regression, a
target-informed kinodynamic path search, corridor-constrained trajectory
optimization, a re-locating strategy for lost targets, and a seeded
simulation/benchmark harness tying them together.
"""

from aerotrack.bezier import BezierCurve, bernstein_basis

__all__ = [
    "BezierCurve",
    "bernstein_basis",
]

__version__ = "0.1.0"
