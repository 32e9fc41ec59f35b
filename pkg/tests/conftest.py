import os
import tempfile

import numpy as np
import pytest

# settings configure logging at import time
os.environ.setdefault("LOG_FILE_PATH", os.path.join(tempfile.mkdtemp(prefix="causal_sde_"), "tests.log"))
os.environ.setdefault("CAUSAL_SDE_THREADS", "2")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
