import numpy as np
import pytest

from focalgraph.focus_measure import FocusSlice


def slice_from_dict(width, height, z, entries):
    """FocusSlice from {(x, y): magnitude}, (y, x)-sorted like the real path."""
    items = sorted(entries.items(), key=lambda kv: (kv[0][1], kv[0][0]))
    xs = np.array([x for (x, _), _ in items], dtype=np.int32)
    ys = np.array([y for (_, y), _ in items], dtype=np.int32)
    vals = np.array([v for _, v in items], dtype=np.float64)
    return FocusSlice(width=width, height=height, z=z, xs=xs, ys=ys, values=vals)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
