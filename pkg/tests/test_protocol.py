from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cases import CORRECT_FINAL, CORRECT_TRIAL, CORRECT_EXEC, VERDICT_CORPUS
from trialexec import protocol
from trialexec.protocol import Bare, FinalAnswer, ParsedTurn, ProtocolError, ToolCall
from strategies import turns

# -- parse / render ------------------------------------------------------------


def test_parse_call_with_think():
    t = protocol.parse_turn('<think>count</think><tool_call>{"name": "count_letters", '
                            '"arguments": {"input": "Lori"}}</tool_call>')
    assert t.payload == ToolCall("count_letters", {"input": "Lori"})
    assert t.think == "count"
    assert t.is_call and not t.is_answer


def test_parse_minimal_answer():
    t = protocol.parse_turn("<answer>done</answer>")
    assert t.payload == FinalAnswer("done") and t.think is None


def test_answer_whitespace_preserved():
    assert protocol.parse_turn("<answer>  a\n b </answer>").payload.text == "  a\n b "


def test_malformed_body_raises():
    with pytest.raises(ProtocolError) as exc:
        protocol.parse_turn('<tool_call>{"name":}</tool_call>')
    assert exc.value.code == "MalformedCallBody"


def test_render_examples():
    assert protocol.render_turn(ParsedTurn(ToolCall("count_letters", {"input": "Tom"}))) == \
        '<tool_call>{"name": "count_letters", "arguments": {"input": "Tom"}}</tool_call>'
    assert protocol.render_turn(ParsedTurn(FinalAnswer("x"))) == "<answer>x</answer>"


def test_render_rejects_bare_and_reserved_tags():
    with pytest.raises(ValueError):
        protocol.render_turn(ParsedTurn(Bare("x")))
    with pytest.raises(ValueError):
        protocol.render_turn(ParsedTurn(FinalAnswer("a</answer>b")))


@settings(max_examples=300)
@given(turns)
def test_parse_render_identity(turn):
    assert protocol.parse_turn(protocol.render_turn(turn)) == turn


def test_duplicate_argument_keys_rejected():
    with pytest.raises(ProtocolError):
        protocol.parse_call_body('{"name": "f", "arguments": {"a": 1, "a": 2}}')


def test_depth_limit():
    deep: dict = {}
    node = deep
    for _ in range(8):
        node["k"] = {}
        node = node["k"]
    body = json.dumps({"name": "f", "arguments": deep})
    with pytest.raises(ProtocolError):
        protocol.parse_call_body(body)
    assert protocol.parse_call_body(body, max_depth=9).name == "f"


def test_extra_top_level_key_rejected():
    with pytest.raises(ProtocolError):
        protocol.parse_call_body('{"name": "f", "arguments": {}, "id": 1}')


def test_empty_arguments_accepted():
    assert protocol.parse_call_body('{"name": "f", "arguments": {}}') == ToolCall("f", {})


# -- verdict corpus --------------------------------------------------------------


@pytest.mark.parametrize("label,raw,expected", VERDICT_CORPUS, ids=[c[0] for c in VERDICT_CORPUS])
def test_verdict_corpus(label, raw, expected):
    verdict = protocol.check_turn(raw)
    assert verdict.violations == expected
    assert verdict.well_formed == (not expected)
    if expected:
        with pytest.raises(ProtocolError) as exc:
            protocol.parse_turn(raw)
        assert exc.value.code == expected[0]
    else:
        protocol.parse_turn(raw)


def test_require_think():
    assert protocol.check_turn("<answer>x</answer>", require_think=True).violations == ("MissingThink",)
    assert protocol.check_turn("<think>a</think><answer>x</answer>", require_think=True).well_formed


# -- lenient mode ----------------------------------------------------------------


def test_lenient_salvages_first_decodable_call():
    raw = "noise <tool_call>bad</tool_call> <tool_call>{\"name\": \"g\", \"arguments\": {}}</tool_call>"
    assert protocol.parse_turn(raw, "lenient").payload == ToolCall("g", {})


def test_lenient_falls_back_to_answer_then_bare():
    assert protocol.parse_turn("x <answer>y</answer> z", "lenient").payload == FinalAnswer("y")
    assert protocol.parse_turn("plain", "lenient").payload == Bare("plain")


@given(st.lists(st.sampled_from([*"ab <>/{}\"", *protocol.RESERVED_TAGS]), max_size=30)
       .map("".join))
def test_lenient_never_fails_and_segments_are_lossless(raw):
    parsed = protocol.parse_turn(raw, "lenient")
    assert "".join(s.text for s in parsed.segments) == raw
    assert "".join(s.text for s in protocol.segment(raw)) == raw


# -- format reward ----------------------------------------------------------------

CORRECT = [*CORRECT_TRIAL, *CORRECT_EXEC, CORRECT_FINAL]


def test_format_reward_correct_transcript():
    reward, verdicts = protocol.format_reward(CORRECT)
    assert reward == 1 and len(verdicts) == 7


def test_format_reward_answer_tag_deleted():
    last = CORRECT[-1].replace("<answer>", "").replace("</answer>", "")
    reward, verdicts = protocol.format_reward([*CORRECT[:-1], last])
    assert reward == 0
    assert "MissingAnswer" in verdicts[-1].violations


def test_format_reward_double_call():
    turns = [CORRECT[0] + CORRECT[1], CORRECT[-1]]
    reward, verdicts = protocol.format_reward(turns)
    assert reward == 0
    # independent oracle: count open tags by substring scan
    assert turns[0].count("<tool_call>") == 2
    assert "MultipleCalls" in verdicts[0].violations


def test_format_reward_contextual_rules():
    _, verdicts = protocol.format_reward([CORRECT[0]])
    assert verdicts[0].violations == ("MissingAnswer",)
    _, verdicts = protocol.format_reward([CORRECT[-1], CORRECT[0]])
    assert verdicts[1].violations == ("TrailingContent", "MissingAnswer")
    assert protocol.format_reward([])[0] == 0


@settings(max_examples=100)
@given(st.lists(turns, min_size=1, max_size=6))
def test_format_reward_matches_definition(seq):
    texts = [protocol.render_turn(t) for t in seq]
    expected = int(all(t.is_call for t in seq[:-1]) and seq[-1].is_answer)
    reward, verdicts = protocol.format_reward(texts)
    assert reward == expected
    if reward:
        assert all(protocol.check_turn(t).well_formed for t in texts)
    assert protocol.format_reward(texts) == (reward, verdicts)


def test_tag_text_inside_arguments_survives_rendering():
    turn = ParsedTurn(ToolCall("A", {"": "<tool_call>", "x": ["</answer>"]}))
    raw = protocol.render_turn(turn)
    assert raw.count("<tool_call>") == 1
    assert protocol.parse_turn(raw) == turn
