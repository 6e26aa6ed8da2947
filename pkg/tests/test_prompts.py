import pytest

from emorag.errors import MissingVariableError
from emorag.prompts import (
    PromptTemplate,
    TemplateRegistry,
    build_assessment_request,
    build_emotion_request,
    build_generation_prompt,
    render,
)
from emorag.personality import MBTI_DIMENSIONS
from emorag.store import CharacterProfile, MemoryFragment


def frags(n):
    return [MemoryFragment(f"m{i}", "c1", f"memory text number {i}") for i in range(n)]


class TestRender:
    def test_basic(self):
        assert render(PromptTemplate("t", "Hello {name}"), {"name": "Ada"}) == "Hello Ada"

    def test_missing(self):
        with pytest.raises(MissingVariableError) as err:
            render(PromptTemplate("t", "Hello {name}"), {})
        assert err.value.names == ["name"]

    def test_braces_in_value_verbatim(self):
        assert render(PromptTemplate("t", "x={v}"), {"v": "{name} {{y}}"}) == "x={name} {{y}}"

    def test_escaped_braces(self):
        assert render(PromptTemplate("t", "{{literal}} {a}"), {"a": 1}) == "{literal} 1"

    def test_declared_placeholders_must_match(self):
        with pytest.raises(ValueError):
            PromptTemplate("t", "Hello {name}", frozenset({"name", "other"}))

    def test_extra_variables_ignored(self):
        assert render(PromptTemplate("t", "{a}"), {"a": "1", "b": "2"}) == "1"


class TestRegistry:
    def test_bundled_templates_in_both_languages(self):
        reg = TemplateRegistry()
        for name in ("emotion_scoring", "generation", "personality_assessment", "no_memory", "correction"):
            assert reg.get(name, "en").name == f"{name}.en"
            assert reg.get(name, "zh").name == f"{name}.zh"

    def test_fallback_to_english(self):
        assert TemplateRegistry().get("generation", "fr").name == "generation.en"

    def test_custom_directory(self, tmp_path):
        (tmp_path / "generation.en.txt").write_text("{query}|{memories}|{role_profile}|{role_name}\n", encoding="utf-8")
        (tmp_path / "no_memory.en.txt").write_text("none\n", encoding="utf-8")
        reg = TemplateRegistry(tmp_path)
        prof = CharacterProfile("c", "N", "P")
        req = build_generation_prompt(prof, [], "q", registry=reg)
        assert req.messages[0].content == "q|none|P|N"


class TestGenerationPrompt:
    def test_sections_in_order_and_all_fragments(self, profile):
        memories = frags(10)
        req = build_generation_prompt(profile, memories, "What do you think of aliens?")
        assert len(req.messages) == 1 and req.messages[0].role == "user"
        body = req.messages[0].content
        positions = [body.index(h) for h in ("# Task", "# Role profile", "# Retrieved memories", "# User message")]
        assert positions == sorted(positions)
        idx = [body.index(m.text + "\n") if i < 9 else body.index(m.text) for i, m in enumerate(memories)]
        assert idx == sorted(idx)
        assert profile.profile_text in body
        assert body.rstrip().endswith("What do you think of aliens?")

    def test_empty_memory_notice(self, profile):
        body = build_generation_prompt(profile, [], "hi").messages[0].content
        assert "No relevant memory" in body
        assert "# Retrieved memories" in body

    def test_query_inside_fragment_not_deduplicated(self, profile):
        q = "Do you like the sea?"
        memory = MemoryFragment("m1", "c1", f"Q: {q}\nA: I love it.")
        body = build_generation_prompt(profile, [memory], q).messages[0].content
        assert body.count(q) == 2

    def test_pure(self, profile):
        a = build_generation_prompt(profile, frags(3), "q")
        b = build_generation_prompt(profile, frags(3), "q")
        assert a == b

    def test_chinese(self, profile):
        body = build_generation_prompt(profile, [], "你好", lang="zh").messages[0].content
        assert "角色资料" in body and "没有检索到" in body


def test_emotion_request_separates_text():
    req = build_emotion_request("I am thrilled")
    assert [m.role for m in req.messages] == ["system", "user"]
    assert req.messages[1].content == "I am thrilled"
    assert "anticipation:<score>" in req.messages[0].content


def test_assessment_request():
    req = build_assessment_request("MBTI", MBTI_DIMENSIONS[0], [("Q?", "A!")])
    assert "Extraversion" in req.messages[0].content and "Introversion" in req.messages[0].content
    assert req.messages[1].content == "Q1: Q?\nA1: A!"
