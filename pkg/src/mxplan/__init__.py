"""Planner for mixed logical/numeric planning problems.

Discrete action choices come from a relaxed-planning-graph heuristic;
continuous action parameters are optimized by gradient descent over a
recorded rollout.  A discretized baseline planner, benchmark generator,
plan validator and plotting CLI round out the toolkit.
"""

__version__ = "0.1.0"
