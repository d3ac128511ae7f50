import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from xalign import datagen, models


@pytest.fixture(scope="session")
def loan_correlated():
    return datagen.gen_loan_correlated(5000, seed=7)


@pytest.fixture(scope="session")
def loan_independent():
    return datagen.gen_loan_independent(5000, seed=7)


@pytest.fixture(scope="session")
def loan_model_093(loan_correlated):
    ds, _ = loan_correlated
    return models.train_to_target(
        ds, 100, models.PerformanceTarget(0.93, 0.02), seed=2
    )
