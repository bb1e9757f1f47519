"""Shared fixtures for the test suite."""

import pytest
from hypothesis import HealthCheck, settings

from radmask.lexicon import EntityLexicon
from radmask.tokenizer import Vocabulary

# Kernel warm-up and occasional automaton builds make per-example deadlines
# too noisy to be useful.
settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")


PLAIN_WORDS = (
    "a an and are as at borderline both but by cancer cardiac chest chronic "
    "clear compared compatible consolidation contours demonstrated disease "
    "edema effusion elevated enlarged evidence examination findings focal "
    "for heart hilar history in is lateral left low lower lung lungs mild "
    "moderate new no normal of on or patient pleural portable position "
    "prior process pulmonary radiograph right seen severe silhouette size "
    "stable status study the there this to unchanged unremarkable upper "
    "vascular view volumes wall was with within"
).split()

PHRASE_ROWS = (
    ("C0034063", "pulmonary vascular congestion"),
    ("C0032285", "pneumonia"),
    ("C0032326", "pneumothorax"),
    ("C0013404", "pleural effusion"),
    ("C0234582", "low lung volumes"),
)


@pytest.fixture(scope="session")
def phrase_lexicon():
    return EntityLexicon(PHRASE_ROWS, "phrase")


@pytest.fixture(scope="session")
def word_lexicon(phrase_lexicon):
    from radmask.lexicon import derive_word_level

    return derive_word_level(phrase_lexicon)


@pytest.fixture(scope="session")
def base_vocab():
    # Covers the plain words and the single words inside each phrase surface,
    # so subword encodes stay one-token-per-word in most tests. Single-char
    # words are already fallback tokens.
    words = set(PLAIN_WORDS)
    for _, surface in PHRASE_ROWS:
        words.update(surface.split())
    return Vocabulary.base(sorted(w for w in words if len(w) > 1))
