import numpy as np
import pytest

from cimpcc import build_curvature_profile
from cimpcc.fixtures import circle_track, stadium_chicane, straight_hairpin
from cimpcc.track import TrackView


@pytest.fixture(scope="session")
def circle_r2():
    return circle_track(radius=2.0, n_points=200)


@pytest.fixture(scope="session")
def stadium():
    return stadium_chicane()


@pytest.fixture(scope="session")
def stadium_view(stadium):
    return TrackView(stadium, build_curvature_profile(stadium, window=9))


@pytest.fixture(scope="session")
def hairpin_view():
    track = straight_hairpin()
    return TrackView(track, build_curvature_profile(track, window=9))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
