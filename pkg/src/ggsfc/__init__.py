"""Service function chaining on mutable topologies.

Simulates VNF-bearing networks, solves delay-optimal chain routing exactly,
and trains a graph-neural policy to generate chains on topologies it has
never seen.
"""

__version__ = "0.1.0"
