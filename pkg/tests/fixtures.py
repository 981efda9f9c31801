import tempfile

import pytest


@pytest.fixture
def temporary_dir():
    return tempfile.mkdtemp()
