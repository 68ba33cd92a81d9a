import os
from pathlib import Path

import pytest

from ginlab.datasets import load_tud_dataset


def mutag_directory() -> Path | None:
    """MUTAG lives under $GINLAB_DATA or the repo's data/ directory."""
    candidates = []
    if os.environ.get("GINLAB_DATA"):
        candidates.append(Path(os.environ["GINLAB_DATA"]))
        candidates.append(Path(os.environ["GINLAB_DATA"]) / "MUTAG")
    repo = Path(__file__).resolve().parent.parent
    candidates.append(repo / "data" / "MUTAG")
    candidates.append(repo / "data")
    for cand in candidates:
        if (cand / "MUTAG_A.txt").is_file():
            return cand
    return None


@pytest.fixture(scope="session")
def mutag():
    directory = mutag_directory()
    if directory is None:
        pytest.skip(
            "MUTAG dataset files not present (this sandbox has no dataset network "
            "access); place MUTAG_*.txt under data/MUTAG or set GINLAB_DATA to run"
        )
    return load_tud_dataset(directory, "MUTAG")
