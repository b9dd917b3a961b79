"""Spanning-tree compression for binary convolution layers.

Reorders XNOR-popcount output computation along a minimum spanning tree of
inter-channel Hamming distances, proves the reordering bit-exact against
direct convolution, and compares its cost against K-medoid and shortest
Hamiltonian path orderings.
"""

__version__ = "0.1.0"
