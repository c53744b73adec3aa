import os
from pathlib import Path

import pytest

from formkv import synthetic


@pytest.fixture(scope="session")
def funsd_root() -> Path:
    """Extracted dataset root, taken from the FUNSD_ROOT environment variable.

    Checks that need the published archive skip loudly when it is not
    available; everything else in the suite runs without it.
    """
    root = os.environ.get("FUNSD_ROOT")
    if not root:
        pytest.skip("FUNSD_ROOT is not set; export it to the extracted dataset "
                    "root (containing training_data/ and testing_data/) to run "
                    "the published-archive checks")
    path = Path(root)
    if not (path / "training_data" / "annotations").is_dir():
        pytest.fail(f"FUNSD_ROOT={root} does not look like a dataset root "
                    "(missing training_data/annotations)")
    return path


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory) -> Path:
    """A small generated dataset shared by CLI and integration tests."""
    root = tmp_path_factory.mktemp("synthds")
    synthetic.make_dataset(root, train_forms=6, test_forms=3, seed=11)
    return root
