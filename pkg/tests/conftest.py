import random

import pytest

from bead.messages import ContentObject, Name
from bead.auth import generate_token

ACCEPTANCE_RESULTS = []


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def make_content(rng):
    def make(uri="/prefix/A/1", payload=b"x" * 16, expiry=float("inf")):
        token, digest = generate_token(rng)
        return ContentObject(Name.parse(uri), payload, expiry, digest), token
    return make


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
