import pytest

from _client_support import spawn_server


@pytest.fixture(scope="module")
def server():
    proc, host, port = spawn_server()
    yield host, port
    proc.kill()
    proc.wait(timeout=10)
