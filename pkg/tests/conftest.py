from pathlib import Path

import pytest

from relaudit.classifiers import ClassifierSpec, load_ledger
from relaudit.dataset import parse_dataset
from relaudit.pipeline import train_pipeline
from relaudit.synth import make_fixture_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def corpus():
    return make_fixture_corpus(0)


@pytest.fixture(scope="session")
def fixture_test():
    return parse_dataset(FIXTURES / "synth_test.jsonl", "test")


@pytest.fixture(scope="session")
def fixture_train():
    return parse_dataset(FIXTURES / "synth_train.jsonl", "train")


@pytest.fixture(scope="session")
def oracle_pipeline(fixture_train):
    return train_pipeline(
        fixture_train,
        ClassifierSpec("scripted_oracle", {"ledger": load_ledger(FIXTURES / "binary_ledger.jsonl")}),
        ClassifierSpec("scripted_oracle", {"ledger": load_ledger(FIXTURES / "semantic_ledger.jsonl")}),
    )
