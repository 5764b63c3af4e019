import numpy as np
import pytest

from utils.fields import TraceField
from utils.grid import build_half_strip, levels_for_spacing
from utils.profiles import smooth_bump


@pytest.fixture
def small_strip():
    """[-2, 2] x [0, 2] with hx = 0.25 and a graded y-ladder"""
    return build_half_strip(2.0, 2.0, 17, levels_for_spacing(2.0, 0.25, 1.1), 1.1)


@pytest.fixture
def bump_on(small_strip):
    def make(width=1.0, amp=1.0, center=0.0):
        x = small_strip.x_nodes
        return TraceField(small_strip.x, amp * smooth_bump((x - center) / width))
    return make


@pytest.fixture
def unit_density(small_strip):
    return TraceField(small_strip.x, np.ones(small_strip.nx))
