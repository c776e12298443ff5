"""Shared fixtures: synthetic corpora and a trained classifier."""
from __future__ import annotations

import pytest

from ransomwatch.gbdt import BoostParams, fit
from ransomwatch.notes import tokenize
from ransomwatch.simulator import build_corpus, make_benign_doc_corpus, make_note_corpus

TRAIN_SEED = 11
HELDOUT_SEED = 99


@pytest.fixture(scope="session")
def note_corpus():
    """158 synthetic ransom notes and 110 benign docs, tokenized."""
    notes = [tokenize(t) for t in make_note_corpus(158, seed=21)]
    benign = [tokenize(t) for t in make_benign_doc_corpus(110, seed=22)]
    return notes, benign


@pytest.fixture(scope="session")
def train_corpus():
    return build_corpus(240, 260, seed=TRAIN_SEED)


@pytest.fixture(scope="session")
def heldout_corpus():
    return build_corpus(96, 104, seed=HELDOUT_SEED)


@pytest.fixture(scope="session")
def trained_forest(train_corpus):
    return fit(train_corpus.X, train_corpus.y, BoostParams(),
               dims=train_corpus.dims, hash_seed=train_corpus.hash_seed)


@pytest.fixture(scope="session")
def gene_pool():
    from ransomwatch.notes import build_pool

    notes = [tokenize(t) for t in make_note_corpus(100, seed=31)]
    return build_pool(notes, n=3, top_k=300)
