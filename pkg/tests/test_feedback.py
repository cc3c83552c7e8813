"""Feedback validation and UMUX-Lite arithmetic."""

import pytest

from askengine.errors import EngineError
from askengine.feedback import FeedbackLog, QuestionFeedback, SystemFeedback, umux_lite_score


class TestQuestionFeedback:
    def test_valid(self):
        feedback = QuestionFeedback("q1", helpfulness=5, correctness=3, completeness=1)
        assert feedback.to_dict()["helpfulness"] == 5

    @pytest.mark.parametrize("value", [0, 6, -1, "3", 3.5, True])
    def test_out_of_range(self, value):
        with pytest.raises(EngineError) as err:
            QuestionFeedback("q1", helpfulness=value, correctness=3, completeness=3)
        assert err.value.code == "out_of_range"


class TestSystemFeedback:
    def test_partial_storable_but_incomplete(self):
        partial = SystemFeedback(umux_capability=5)
        assert partial.is_complete is False
        complete = SystemFeedback(umux_capability=5, umux_ease=6)
        assert complete.is_complete is True

    def test_ranges(self):
        with pytest.raises(EngineError):
            SystemFeedback(umux_capability=8, umux_ease=1)
        with pytest.raises(EngineError):
            SystemFeedback(umux_capability=1, umux_ease=1, satisfaction=6)
        with pytest.raises(EngineError):
            SystemFeedback()


class TestUmuxScore:
    def test_maximum(self):
        assert umux_lite_score([SystemFeedback(umux_capability=7, umux_ease=7)]) == 100.0

    def test_minimum(self):
        assert umux_lite_score([SystemFeedback(umux_capability=1, umux_ease=1)]) == 0.0

    def test_documented_pair(self):
        responses = [
            SystemFeedback(umux_capability=7, umux_ease=4),
            SystemFeedback(umux_capability=4, umux_ease=7),
        ]
        assert abs(umux_lite_score(responses) - 75.0) <= 1e-9
        assert abs(umux_lite_score(responses[:1]) - 75.0) <= 1e-9

    def test_incomplete_excluded(self):
        responses = [
            SystemFeedback(umux_capability=7, umux_ease=7),
            SystemFeedback(umux_capability=1),  # discarded
        ]
        assert umux_lite_score(responses) == 100.0

    def test_no_complete_responses_undefined(self):
        with pytest.raises(EngineError) as err:
            umux_lite_score([SystemFeedback(satisfaction=3)])
        assert err.value.code == "undefined_score"
        with pytest.raises(EngineError):
            umux_lite_score([])

    def test_large_synthetic_set_matches_hand_formula(self):
        responses = []
        expected = []
        for i in range(1000):
            cap = 1 + (i * 7) % 7
            ease = 1 + (i * 3) % 7
            if i % 5 == 0:
                responses.append(SystemFeedback(umux_capability=cap))  # incomplete
            else:
                responses.append(SystemFeedback(umux_capability=cap, umux_ease=ease))
                expected.append(((cap - 1) + (ease - 1)) / 12 * 100)
        assert abs(umux_lite_score(responses) - sum(expected) / len(expected)) <= 1e-9


class TestFeedbackLog:
    def test_append_and_read_back(self, tmp_path):
        log = FeedbackLog(tmp_path / "feedback.ndjson")
        entry_id = log.append("question", {"helpfulness": 4}, session="abc")
        rows = log.entries()
        assert len(rows) == 1
        assert rows[0]["id"] == entry_id
        assert rows[0]["payload"] == {"helpfulness": 4}
        assert rows[0]["session"] == "abc"

    def test_kind_filter(self, tmp_path):
        log = FeedbackLog(tmp_path / "feedback.ndjson")
        log.append("question", {}, "s")
        log.append("system", {}, "s")
        assert len(log.entries("system")) == 1

    def test_append_only(self, tmp_path):
        path = tmp_path / "feedback.ndjson"
        log = FeedbackLog(path)
        log.append("system", {"umux_capability": 5}, "s")
        before = path.read_text()
        log.append("system", {"umux_ease": 2}, "s")
        assert path.read_text().startswith(before)
