from __future__ import annotations

import json
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cases import REGISTRY, registry
from trialexec.protocol import ToolCall
from trialexec.toolenv import (
    NOT_FOUND,
    OK,
    SCHEMA_ERROR,
    TOOL_ERROR,
    DuplicateTool,
    ErrorTemplates,
    HttpBinding,
    MockBinding,
    ParamSpec,
    SchemaViolation,
    ToolDoc,
    ToolRegistry,
    validate_call,
)
from trialexec.toolenv import builtins


def fam_doc() -> ToolDoc:
    return registry().lookup("family_relationship_finder")


# -- docs ---------------------------------------------------------------------


def test_param_spec_invariants():
    with pytest.raises(ValueError):
        ParamSpec("x", "string", enum_values=())
    with pytest.raises(ValueError):
        ParamSpec("x", "integer", enum_values=(1, "a"))
    with pytest.raises(ValueError):
        ParamSpec("x", "integer", default="3")
    with pytest.raises(ValueError):
        ParamSpec("x", "colour")
    assert ParamSpec("x", "STRING").kind == "string"
    assert ParamSpec("x", "int").kind == "integer"


def test_bool_is_not_a_number():
    doc = ToolDoc("f", params=(ParamSpec("n", "integer", True),))
    assert validate_call(ToolCall("f", {"n": True}), doc) == [SchemaViolation("KindMismatch", "n")]
    assert validate_call(ToolCall("f", {"n": 3}), doc) == []


def test_tool_doc_roundtrip_and_unique_params():
    doc = fam_doc()
    assert ToolDoc.from_json(doc.to_json()) == doc
    with pytest.raises(ValueError):
        ToolDoc("f", params=(ParamSpec("a"), ParamSpec("a")))


def test_function_schema_shape():
    schema = fam_doc().function_schema()
    fn = schema["function"]
    assert schema["type"] == "function"
    assert fn["parameters"]["required"] == ["individual_name", "relationship_type"]
    assert fn["parameters"]["properties"]["relationship_type"]["enum"][0] == "father"


# -- register ----------------------------------------------------------------------


def test_register_lookup_and_duplicate():
    reg = ToolRegistry()
    doc = ToolDoc("count_letters", params=(ParamSpec("input", "string", True),))
    reg.register(doc, MockBinding.builtin_tool("count_letters"))
    assert reg.lookup("count_letters") is doc
    with pytest.raises(DuplicateTool):
        reg.register(doc, MockBinding.builtin_tool("count_letters"))


def test_bulk_register_against_association_list():
    reg = ToolRegistry()
    pairs = []
    for i in range(3000):
        doc = ToolDoc(f"tool_{i}", f"doc {i}")
        reg.register(doc, MockBinding.builtin_tool("to_upper"))
        pairs.append((doc.name, doc))
    for name, doc in pairs[::97] + pairs[-1:]:
        assert reg.lookup(name) == next(d for n, d in pairs if n == name)
    assert len(reg) == 3000


# -- validation ---------------------------------------------------------------------


def test_unknown_argument():
    call = ToolCall("family_relationship_finder", {"individual_name": "Lori Lyons",
                                                   "relationship_type": "child",
                                                   "data_source": "FamilySearch",
                                                   "output_format": "json"})
    assert validate_call(call, fam_doc()) == [SchemaViolation("UnknownArgument", "output_format")]


def test_enum_violation():
    call = ToolCall("family_relationship_finder", {"individual_name": "Lori Lyons",
                                                   "relationship_type": "parent"})
    assert validate_call(call, fam_doc()) == [SchemaViolation("EnumViolation", "relationship_type")]


def test_exact_required_params_ok():
    call = ToolCall("family_relationship_finder", {"individual_name": "A",
                                                   "relationship_type": "sibling"})
    assert validate_call(call, fam_doc()) == []


def test_violation_order():
    call = ToolCall("family_relationship_finder", {"zz": 1, "relationship_type": 5, "aa": 2})
    assert validate_call(call, fam_doc()) == [
        SchemaViolation("UnknownArgument", "zz"),
        SchemaViolation("UnknownArgument", "aa"),
        SchemaViolation("MissingRequired", "individual_name"),
        SchemaViolation("KindMismatch", "relationship_type"),
    ]


def test_validate_name_mismatch_is_precondition():
    with pytest.raises(ValueError):
        validate_call(ToolCall("other", {}), fam_doc())


# -- execute ----------------------------------------------------------------------


def test_execute_examples():
    reg = registry()
    obs = reg.execute(ToolCall("count_letters", {"input": "Lori"}))
    assert (obs.status, obs.text) == (OK, "4")
    obs = reg.execute(ToolCall("extract_first_name", {"full_names": ["Tom Hood"]}))
    assert (obs.status, obs.text) == (OK, "Tom")
    obs = reg.execute(ToolCall("foo", {}))
    assert obs.status == NOT_FOUND and "foo" in obs.text


def test_error_strings_byte_exact():
    reg = registry()
    obs = reg.execute(ToolCall("family_relationship_finder",
                               {"individual_name": "Lori Lyons", "relationship_type": "child",
                                "data_source": "FamilySearch", "output_format": "json"}))
    assert obs.status == SCHEMA_ERROR
    assert obs.text == ("an error occured when call family_relationship_finder: "
                        "family_relationship_finder() got an unexpected keyword argument "
                        "'output_format'")
    obs = reg.execute(ToolCall("family_relationship_finder",
                               {"individual_name": "Lori Lyons", "relationship_type": "parent"}))
    assert obs.text == ("Error: 'relationship_type' must be one of ['father', 'mother', 'sibling', "
                        "'child', 'grandparent', 'aunt', 'uncle', 'cousin'].")


def test_lookup_missing_error_and_text():
    reg = registry()
    obs = reg.execute(ToolCall("family_relationship_finder",
                               {"individual_name": "Lori Lyons", "relationship_type": "child"}))
    assert obs.status == TOOL_ERROR
    assert obs.text == "Error: No data found for Lori Lyons with relationship type child."
    obs = reg.execute(ToolCall("enhanced_family_relationship_finder",
                               {"person_name": "X", "data_source": "Y"}))
    assert obs.status == OK and json.loads(obs.text) == {"error": "Person not found in the data source."}


def test_custom_templates():
    reg = ToolRegistry.from_json(REGISTRY, templates=ErrorTemplates(call_error="[{tool}] {detail}"))
    obs = reg.execute(ToolCall("count_letters", {"input": "a", "x": 1}))
    assert obs.text == "[count_letters] count_letters() got an unexpected keyword argument 'x'"


def test_truncation_marker():
    reg = ToolRegistry(observation_cap=10)
    reg.register(ToolDoc("up", params=(ParamSpec("input", "string", True),)),
                 MockBinding.builtin_tool("to_upper"))
    obs = reg.execute(ToolCall("up", {"input": "a" * 25}))
    assert obs.text == "A" * 10 + "...[truncated 15 characters]"


def test_defaults_are_applied():
    reg = ToolRegistry()
    reg.register(ToolDoc("cat", params=(ParamSpec("strings", "array", True),
                                        ParamSpec("separator", "string", default="-"))),
                 MockBinding.builtin_tool("concatenate"))
    assert reg.execute(ToolCall("cat", {"strings": ["a", "b"]})).text == "a-b"


def test_registry_file_roundtrip(tmp_path):
    path = tmp_path / "reg.json"
    path.write_text(json.dumps(registry().to_json()))
    again = ToolRegistry.load(path)
    assert again.docs == registry().docs
    assert again.to_json() == registry().to_json()


@settings(max_examples=60)
@given(st.text(max_size=30), st.sampled_from(["count_letters", "to_upper", "reverse_string",
                                              "string_length", "extract_first_letter"]))
def test_mock_execution_is_referentially_transparent(text, name):
    reg = ToolRegistry()
    reg.register(ToolDoc(name, params=(ParamSpec("input", "string", True),)),
                 MockBinding.builtin_tool(name))
    call = ToolCall(name, {"input": text})
    results = []

    def run():
        results.append(reg.execute(call).text)

    threads = [threading.Thread(target=run) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(results)) == 1


@settings(max_examples=60)
@given(st.dictionaries(st.sampled_from(["individual_name", "relationship_type", "data_source", "x"]),
                       st.text(max_size=5) | st.integers(), max_size=4))
def test_valid_calls_never_yield_schema_errors(args):
    reg = registry()
    call = ToolCall("family_relationship_finder", args)
    obs = reg.execute(call)
    assert (obs.status == SCHEMA_ERROR) == bool(validate_call(call, fam_doc()))


# -- builtins --------------------------------------------------------------------------


def test_builtins():
    assert builtins.count_letters({"input": "Tom Hood!"}) == 7
    assert builtins.extract_first_name({"names": ["Lori Lyons", "Tom Hood"]}) == "Lori, Tom"
    assert builtins.arithmetic({"operation": "subtract", "numbers": [4, 3]}) == 1
    assert builtins.arithmetic({"operation": "divide", "numbers": [1, 4]}) == 0.25
    with pytest.raises(builtins.ToolError):
        builtins.arithmetic({"operation": "divide", "numbers": [1, 0]})
    with pytest.raises(builtins.ToolError):
        builtins.arithmetic({"operation": "pow", "numbers": [1]})
    with pytest.raises(KeyError):
        builtins.resolve("no_such_tool")


# -- HTTP bridge ----------------------------------------------------------------------------


def http_registry(url: str, retries: int = 2) -> ToolRegistry:
    reg = ToolRegistry()
    reg.register(ToolDoc("echo", params=(ParamSpec("q", "string", True),)),
                 HttpBinding(url + "/tools/{tool}", timeout=5, retries=retries, backoff=0.01))
    return reg


def test_http_success_posts_arguments(fake_server):
    server = fake_server([(200, "pong")])
    obs = http_registry(server.url).execute(ToolCall("echo", {"q": "ping"}))
    assert (obs.status, obs.text, obs.transport) == (OK, "pong", False)
    path, _, body = server.requests[0]
    assert path == "/tools/echo" and body == {"q": "ping"}


def test_http_retries_then_succeeds(fake_server):
    server = fake_server([(503, "busy"), (429, "slow down"), (200, "ok")])
    obs = http_registry(server.url).execute(ToolCall("echo", {"q": "x"}))
    assert obs.text == "ok" and len(server.requests) == 3


def test_http_transport_failure_after_retries(fake_server):
    server = fake_server([(500, "boom")])
    obs = http_registry(server.url).execute(ToolCall("echo", {"q": "x"}))
    assert obs.status == TOOL_ERROR and obs.transport
    assert len(server.requests) == 3
    assert obs.text.startswith("an error occured when call echo: transport failure")


def test_http_client_error_is_a_tool_error_without_retry(fake_server):
    server = fake_server([(404, "no such thing")])
    obs = http_registry(server.url).execute(ToolCall("echo", {"q": "x"}))
    assert (obs.status, obs.text, obs.transport) == (TOOL_ERROR, "no such thing", False)
    assert len(server.requests) == 1


def test_http_unreachable():
    obs = http_registry("http://127.0.0.1:9", retries=0).execute(ToolCall("echo", {"q": "x"}))
    assert obs.status == TOOL_ERROR and obs.transport
