from pathlib import Path

import pytest

from stepchat.corpus import load_corpus
from stepchat.gateway import Gateway, default_mock
from stepchat.ingestion import load_documents, run_pipeline, spoken_augmenter

FIXTURE_PAGES = Path(__file__).parent / "fixtures" / "pages"
DATA_DIR = Path(__file__).parent / "data"

EASY_LASAGNA_ID = "easy-vegan-lasagna-cc940cd8"
CLASSIC_LASAGNA_ID = "classic-vegan-lasagna-a477d7e4"
SQUEAKY_DOOR_ID = "fix-a-squeaky-door-hinge-81962ed5"


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    report = run_pipeline(load_documents(FIXTURE_PAGES), [spoken_augmenter()], out)
    assert report.counts()["written"] == 8, report.counts()
    return out


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    return load_corpus(corpus_dir)


@pytest.fixture()
def mock_gateway():
    return Gateway(backend=default_mock())
