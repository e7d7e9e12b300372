import os
import sys
from pathlib import Path

import pytest

# Ensure project root on sys.path
PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

ML100K_ENV = "LOWRANK_ML100K"
SLOW_ENV = "LOWRANK_SLOW"


def ml100k_path() -> Path:
    return Path(os.environ.get(ML100K_ENV, PROJECT_ROOT / "data" / "ml-100k" / "u.data"))


def pytest_collection_modifyitems(config, items):
    run_slow = os.environ.get(SLOW_ENV) == "1"
    have_data = ml100k_path().exists()
    skip_slow = pytest.mark.skip(reason=f"long run; set {SLOW_ENV}=1")
    skip_data = pytest.mark.skip(reason=f"MovieLens-100K not found at {ml100k_path()} (set {ML100K_ENV})")
    for item in items:
        if "slow" in item.keywords and not run_slow:
            item.add_marker(skip_slow)
        if "dataset" in item.keywords and not have_data:
            item.add_marker(skip_data)


@pytest.fixture()
def temp_output_dir(tmp_path):
    d = tmp_path / "out"
    d.mkdir()
    return d


@pytest.fixture()
def small_obs():
    """4 x 3 matrix with an empty row (3) and duplicated cell (0, 1)."""
    from lowrank_mc.models import ObservationSet

    return ObservationSet.from_triplets(
        4,
        3,
        [(0, 1, 1.5), (0, 1, 2.5), (1, 0, -1.0), (2, 2, 0.5), (0, 2, 3.0), (2, 0, 1.0)],
    )


@pytest.fixture()
def synthetic_small():
    """Noisy rank-2 20 x 20 problem with 40% observed."""
    from lowrank_mc.experiments import SyntheticSpec, generate_synthetic
    from lowrank_mc.random_streams import RngStream

    spec = SyntheticSpec(m=20, r=2, observe_fraction=0.4, noise_sd=0.5, seed=3)
    truth, obs = generate_synthetic(spec, RngStream(spec.seed).fork(0))
    return truth, obs


@pytest.fixture()
def ratings_file(tmp_path):
    lines = [
        "10\t100\t4\t881250949",
        "10\t200\t3\t881250950",
        "20\t100\t5\t881250951",
        "30\t300\t1\t881250952",
        "20\t300\t2\t881250953",
        "30\t200\t4\t881250954",
        "10\t300\t3\t881250955",
        "20\t200\t5\t881250956",
        "30\t100\t2\t881250957",
        "40\t100\t3\t881250958",
    ]
    path = tmp_path / "u.data"
    path.write_text("\n".join(lines) + "\n")
    return path

