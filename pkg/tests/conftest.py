import numpy as np
import pytest

from homeocomm import FiberKind, MapExpr


class Reflection(MapExpr):
    """t -> -t: a homeomorphism of R that swaps the ends."""

    fiber = FiberKind.POINT
    preserves_angle = True

    def forward(self, theta, t):
        return theta, -t

    backward = forward


@pytest.fixture
def reflection():
    return Reflection()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
