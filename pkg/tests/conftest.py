import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ibcochlea.builder import ChannelSpec, build_channel


def tiny_spec(**overrides):
    """A coarse channel that steps in milliseconds, for engine/CLI tests."""
    base = dict(
        dims=(16, 8, 8),
        h=0.2,
        mu=0.05,
        length=2.8,
        width=1.0,
        height=1.0,
        w_base=0.28,
        w_apex=0.56,
        window_radius=0.13,
        membrane_k0=50.0,
        membrane_anchor_k0=150.0,
        window_k=200.0,
        window_anchor_k=400.0,
        wall_k=800.0,
        heli_gap=0.4,
    )
    base.update(overrides)
    return ChannelSpec(**base)


@pytest.fixture(scope="session")
def tiny_model():
    return build_channel(tiny_spec())
