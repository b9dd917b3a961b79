import numpy as np
import pytest

from mstbnn.core import LayerShape, layer_from_bits
from mstbnn.graph import DistanceGraph


def random_shape(rng, c_out_max=16, c_in_max=8, m_choices=(1, 3, 5), hw_max=8):
    m = int(rng.choice(m_choices))
    hw_min = max(1, m - 2)  # keeps h_out, w_out >= 1 with pad=1
    return LayerShape(
        c_out=int(rng.integers(1, c_out_max + 1)),
        c_in=int(rng.integers(1, c_in_max + 1)),
        m=m,
        h_in=int(rng.integers(hw_min, hw_max + 1)),
        w_in=int(rng.integers(hw_min, hw_max + 1)),
        pad=1,
    )


def random_layer_for(shape, rng, alpha=1.0):
    bits = rng.integers(0, 2, size=(shape.c_out, shape.full), dtype=np.uint8)
    return layer_from_bits(bits, shape, alpha)


def random_distance_graph(rng, n, full=64):
    """A random symmetric integer distance matrix (not necessarily metric)."""
    d = rng.integers(0, full + 1, size=(n, n))
    d = np.triu(d, 1)
    d = d + d.T
    return DistanceGraph(d.astype(np.int64), full)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
