import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flexarea.network import Constraints, load_fixture, serialize_network
from flexarea.offers import FspOffer, offers_from_network


@pytest.fixture(scope="session")
def feeder4():
    return load_fixture("feeder4")


@pytest.fixture(scope="session")
def mv_net():
    return load_fixture("mv-oberrhein-like")


@pytest.fixture(scope="session")
def feeder4_doc(feeder4):
    return serialize_network(feeder4)


@pytest.fixture(scope="session")
def mv_doc(mv_net):
    return serialize_network(mv_net)


@pytest.fixture
def tight_limits():
    return Constraints(max_loading_percent=16.0)


@pytest.fixture
def feeder4_offers(feeder4):
    return offers_from_network(feeder4, [0, 1], [0], "Smax", [])


@pytest.fixture
def small_offers():
    """Two narrow offers keeping exhaustive lattices tiny and fast."""
    return [
        FspOffer(kind="load", index=0, p_mw=2.0, q_mvar=0.5, s_max_mva=3.0,
                 p_shift_range=(-0.6, 0.2), q_shift_range=(-0.4, 0.4)),
        FspOffer(kind="sgen", index=0, p_mw=1.0, q_mvar=0.2, s_max_mva=1.5,
                 p_shift_range=(-0.4, 0.4), q_shift_range=(-0.2, 0.2)),
    ]
