import random

import pytest

from emorag.embedding import HashingEmbedder
from emorag.gateway import MockChatBackend, echo_responder, hashed_score_responder, lexicon_emotion_responder
from emorag.pipeline import Backends
from emorag.store import CharacterProfile


@pytest.fixture
def rng():
    return random.Random(20240917)


@pytest.fixture
def mock_backends():
    return Backends(
        embedder=HashingEmbedder(dim=64),
        scorer=MockChatBackend(responder=lexicon_emotion_responder),
        generator=MockChatBackend(responder=echo_responder),
        judge=MockChatBackend(responder=hashed_score_responder),
    )


@pytest.fixture
def profile():
    return CharacterProfile("c1", "Haruhi", "A restless high-school girl who hates anything ordinary.")


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
