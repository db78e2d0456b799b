import pytest

from _support import DESIGNS


@pytest.fixture
def loopback_graph():
    from esic import fabric, system

    desc = system.load_system(str(DESIGNS / "loopback.json"))
    return fabric.elaborate(desc)
