"""
Shared fixtures for the ellreg tests
"""

import os
import sys
import tempfile
from pathlib import Path

# Logs from test runs go to a scratch directory
os.environ.setdefault("ELLREG_LOG_DIR", tempfile.mkdtemp(prefix="ellreg-logs-"))

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import pytest

from elliptic_kernel import new_context

TAUS = [1j, 2j, 0.3 + 1.7j]


@pytest.fixture(scope="session")
def ctx_i():
    return new_context(1j)


@pytest.fixture(scope="session")
def ctx_2i():
    return new_context(2j)


@pytest.fixture(scope="session", params=TAUS, ids=["i", "2i", "0.3+1.7i"])
def ctx(request):
    return new_context(request.param)
