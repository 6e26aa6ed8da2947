import pytest
from hypothesis import given
from hypothesis import strategies as st

from emorag.emotion import DIMENSIONS, EmotionVector, emotion_distance, parse_emotion_response, score_emotion
from emorag.errors import BackendError, ParseError
from emorag.gateway import MockChatBackend

from .oracles import cosine_loop

intensity = st.integers(min_value=1, max_value=10)
vectors = st.builds(EmotionVector, *([intensity] * 8))


class TestEmotionVector:
    def test_fixed_order(self):
        assert DIMENSIONS == ("joy", "acceptance", "fear", "surprise", "sadness", "disgust", "anger", "anticipation")
        assert EmotionVector(1, 2, 3, 4, 5, 6, 7, 8).to_list() == [1, 2, 3, 4, 5, 6, 7, 8]

    @pytest.mark.parametrize("bad", [0, 11, -3, 5.0, True])
    def test_rejects_out_of_range_or_non_int(self, bad):
        with pytest.raises(ValueError):
            EmotionVector(bad, 1, 1, 1, 1, 1, 1, 1)

    def test_from_sequence_length(self):
        with pytest.raises(ValueError):
            EmotionVector.from_sequence([1] * 7)


class TestParse:
    def test_prose_wrapped(self):
        raw = "Scores: joy:3, acceptance:3, fear:8, surprise:2, sadness:9, disgust:4, anger:6, anticipation:2."
        assert parse_emotion_response(raw) == EmotionVector(3, 3, 8, 2, 9, 4, 6, 2)

    def test_all_tens(self):
        raw = "joy:10 acceptance:10 fear:10 surprise:10 sadness:10 disgust:10 anger:10 anticipation:10"
        assert parse_emotion_response(raw) == EmotionVector(*[10] * 8)

    def test_missing_dimensions(self):
        with pytest.raises(ParseError, match="missing"):
            parse_emotion_response("joy:3, fear:8")

    def test_case_and_separators(self):
        raw = "**Joy** = 4\nACCEPTANCE - 5\nfear：2\nSurprise: 7; sadness=1 | disgust :1, anger  3, Anticipation:9"
        assert parse_emotion_response(raw) == EmotionVector(4, 5, 2, 7, 1, 1, 3, 9)

    def test_prose_mentions_ignored(self):
        raw = ("I can sense joy and a bit of fear here.\n"
               "joy:7, acceptance:4, fear:3, surprise:2, sadness:1, disgust:1, anger:1, anticipation:6")
        assert parse_emotion_response(raw).joy == 7

    @pytest.mark.parametrize("raw", [
        "joy: eleven, acceptance:1, fear:1, surprise:1, sadness:1, disgust:1, anger:1, anticipation:1",
        "joy:11, acceptance:1, fear:1, surprise:1, sadness:1, disgust:1, anger:1, anticipation:1",
        "joy:0, acceptance:1, fear:1, surprise:1, sadness:1, disgust:1, anger:1, anticipation:1",
        "joy:-2, acceptance:1, fear:1, surprise:1, sadness:1, disgust:1, anger:1, anticipation:1",
        "joy:2.5, acceptance:1, fear:1, surprise:1, sadness:1, disgust:1, anger:1, anticipation:1",
        "joy:2, joy:3, acceptance:1, fear:1, surprise:1, sadness:1, disgust:1, anger:1, anticipation:1",
        "",
    ])
    def test_rejects(self, raw):
        with pytest.raises(ParseError):
            parse_emotion_response(raw)

    @given(vectors)
    def test_render_round_trip(self, v):
        assert parse_emotion_response(v.render()) == v


class TestScoreEmotion:
    def test_configured_reply(self):
        scorer = MockChatBackend(default="joy:9, acceptance:6, fear:1, surprise:7, sadness:1, disgust:1, anger:1, anticipation:8")
        assert score_emotion("I am thrilled we won!", scorer) == EmotionVector(9, 6, 1, 7, 1, 1, 1, 8)
        assert scorer.call_count == 1
        # the text is sent as its own user message
        assert scorer.calls[0].last_user_content == "I am thrilled we won!"

    def test_uniform(self):
        scorer = MockChatBackend(default=", ".join(f"{d}:5" for d in DIMENSIONS))
        assert score_emotion("anything", scorer) == EmotionVector(*[5] * 8)

    def test_reprompts_then_fails(self):
        scorer = MockChatBackend(default="joy: eleven")
        with pytest.raises(ParseError):
            score_emotion("text", scorer)
        assert scorer.call_count == 3  # first try + 2 re-prompts
        assert len(scorer.calls[-1].messages) == len(scorer.calls[0].messages) + 4

    def test_recovers_on_reprompt(self):
        replies = iter(["no idea", "joy:2, acceptance:2, fear:2, surprise:2, sadness:2, disgust:2, anger:2, anticipation:2"])
        scorer = MockChatBackend(responder=lambda req: next(replies))
        assert score_emotion("text", scorer) == EmotionVector(*[2] * 8)

    def test_backend_error_propagates(self):
        with pytest.raises(BackendError):
            score_emotion("text", MockChatBackend())

    def test_empty_text(self):
        with pytest.raises(ValueError):
            score_emotion("  ", MockChatBackend(default="x"))

    def test_deterministic_with_mock(self):
        from emorag.gateway import lexicon_emotion_responder

        a = score_emotion("I'm so happy and excited!", MockChatBackend(responder=lexicon_emotion_responder))
        b = score_emotion("I'm so happy and excited!", MockChatBackend(responder=lexicon_emotion_responder))
        assert a == b
        assert a.joy > a.sadness


class TestDistance:
    def test_identical(self):
        v = EmotionVector(*[5] * 8)
        assert emotion_distance(v, v) == 0.0

    def test_opposite_corners(self):
        # frozen from the loop-based cosine oracle: 1 - 26/107 = 81/107
        a = EmotionVector(10, 1, 1, 1, 1, 1, 1, 1)
        b = EmotionVector(1, 1, 1, 1, 1, 1, 1, 10)
        assert emotion_distance(a, b) == pytest.approx(0.7570093457943925, abs=1e-12)
        assert emotion_distance(a, b) == pytest.approx(1 - cosine_loop(a.as_tuple(), b.as_tuple()), abs=1e-12)

    def test_parallel(self):
        assert emotion_distance(EmotionVector(*[2] * 8), EmotionVector(*[9] * 8)) == 0.0

    @given(vectors, vectors)
    def test_symmetric_and_bounded(self, a, b):
        d = emotion_distance(a, b)
        assert d == emotion_distance(b, a)
        assert 0.0 <= d <= 2.0
        assert abs(d - (1 - cosine_loop(a.as_tuple(), b.as_tuple()))) < 1e-12

    @given(st.lists(st.integers(1, 5), min_size=8, max_size=8), st.integers(1, 2))
    def test_scale_invariant(self, base, c):
        a = EmotionVector(*base)
        assert abs(emotion_distance(a, EmotionVector(*[c * x for x in base]))) < 1e-12
        assert abs(emotion_distance(a, a)) < 1e-12
