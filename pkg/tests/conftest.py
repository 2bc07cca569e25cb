import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gazepool.synth import SynthSpec, generate_dataset


@pytest.fixture(scope="session")
def small_dataset():
    """Shared small planted dataset: 6 classes, 2 collages each, 3 participants."""
    spec = SynthSpec(classes=6, collages_per_class=2, participants=3)
    return generate_dataset(spec, seed=101)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
