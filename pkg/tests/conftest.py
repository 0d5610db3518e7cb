import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from langshift.bpe import train_bpe
from langshift.corpus import Document, SyntheticLanguageSpec, gen_synthetic_language, single_dataset_corpus
from langshift.model import get_preset, init_model
from langshift.numerics import RngState

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    max_examples=50,
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def rng():
    return RngState(1234)


@pytest.fixture(scope="session")
def tiny_lang():
    spec = SyntheticLanguageSpec(name="tiny", n_words=400, alphabet="abcdef", n_docs=80, doc_len_mean=40.0)
    return gen_synthetic_language(spec, RngState(99))


@pytest.fixture(scope="session")
def tiny_corpus(tiny_lang):
    return tiny_lang.corpus


@pytest.fixture(scope="session")
def tiny_vocab(tiny_corpus):
    return train_bpe([d.text for d in tiny_corpus.documents()], 300)


@pytest.fixture(scope="session")
def pico_model():
    cfg = get_preset("pico", vocab_size=300)
    return cfg, init_model(cfg, RngState(5))


@pytest.fixture()
def toy_docs():
    texts = ["aa bb cc", "dd ee", "aa aa bb", "cc dd ee ff", "gg hh", "ff gg"]
    return [Document(t, lang="toy", source="unit") for t in texts]


@pytest.fixture()
def toy_corpus(toy_docs):
    return single_dataset_corpus("toy", toy_docs)


def assert_allclose(a, b, rtol=1e-7, atol=0.0):
    np.testing.assert_allclose(a, b, rtol=rtol, atol=atol)
