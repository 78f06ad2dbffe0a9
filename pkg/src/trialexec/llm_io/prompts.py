"""Prompt-template catalog.

Templates use ``string.Template`` placeholders (``$name``) so the literal JSON
braces in the output-format examples need no escaping. ``render`` raises on a
missing value; ``unresolved`` is the lint used by tests and by job validation.
"""

from __future__ import annotations

import re
from string import Template

SYSTEM_PROMPT = """\
You are a smart assistant capable of utilizing provided tools to answer users' questions. Follow this process to solve problems:
1. Create a global plan for the query.
2. Execute each step in the plan:
- Record your thought process, formatted as <think></think>.
- Call the appropriate tool by providing its name and parameters in JSON format. For each function call, return a json object with function name and arguments within <tool_call></tool_call> XML tags: <tool_call>{"name": <function-name>, "arguments": <args-json-object>}</tool_call>.
- Get the result returned by the tool, formatted as <tool_response></tool_response>.
3. After completing all steps, provide the final answer, formatted as <answer></answer>.

You are provided with function signatures within <tools></tools> XML tags:
<tools>
$tool_docs
</tools>"""

# Teacher instruction in its original tool-call dialect; replies are normalized
# by trialexec.synthesis.normalize_dialect before parsing.
DATA_SYNTHESIS_PROMPT = """\
Task Description
You are a smart assistant capable of utilizing provided tools to answer users' questions. Your primary strategy should be to use the available tools rather than relying on internal knowledge. Follow this enhanced process to solve problems, incorporating the behaviors of backtracking, setting sub-goals, validation, and exploration.
1. Create a global plan for the query. This plan must include: an exploration phase to understand tool functionality by making initial tool calls with sample inputs. Decomposition of the task into sub-goals when necessary.
2. Execute each step in the plan:
- Record your thought process, formatted as <thought></thought>.
- Call the appropriate tool by providing its name and parameters in JSON format, like <|tool calls begin|><|tool call begin|>tool's name<|tool sep|>{"parameters1":"value1","parameters2":"value2"}<|tool call end|><|tool calls end|>, formatted as <|tool calls begin|><|tool call begin|><|tool call end|><|tool calls end|>.
- Every turn must include one tool call and do not combine multiple tool calls in one turn.
- Validate whether the result meets the requirements of the current step. If not, backtrack by revising the plan and repeating the relevant steps.
- If a tool is unavailable or returns an error, consider using alternative tools that can achieve similar results, and adjust the plan accordingly.
- Try your best to use the tools to obtain information and you can call the tools multiple times if necessary.

Stopping Criteria
You can stop the problem-solving process when:
- You have obtained a result that fully satisfies the user's request.
- You have validated that the result meets all requirements.
- All sub-goals have been successfully addressed.

Tool Usage Policy
- Always prioritize using the available tools to obtain information.
- When uncertain about the accuracy or sufficiency of information from tools, perform additional tool calls or validation steps.
- Do not use internal knowledge and only rely on tools to get information.
- If a tool is unavailable, look for alternative tools within the provided documentation that can serve as substitutes to achieve the same objective.
- Include an exploration phase in your plan to better understand tool behavior before applying them to the task. This phase is mandatory and must be completed before proceeding with the main task.

Tool Documentation
Below is the documentation for available tools: $tool_docs."""

# Same behaviours as the synthesis prompt, spoken in the runtime dialect.
SYNTHESIS_INSTRUCTION = """\
You are a smart assistant capable of utilizing provided tools to answer users' questions. Use the available tools rather than internal knowledge, and incorporate backtracking, sub-goals, validation, and exploration:
1. Create a global plan for the query, including an exploration phase that calls tools with sample inputs to understand how they behave, and decompose the task into sub-goals when necessary.
2. Execute each step in the plan:
- Record your thought process, formatted as <think></think>.
- Call exactly one tool per turn: <tool_call>{"name": <function-name>, "arguments": <args-json-object>}</tool_call>.
- Tool results are returned to you formatted as <tool_response></tool_response>.
- Validate every result. If it does not meet the requirement of the current step, revise the plan and repeat the relevant steps; if a tool errors or is unavailable, try an alternative tool.
3. When every sub-goal is resolved and validated, provide the final answer, formatted as <answer></answer>.

You are provided with function signatures within <tools></tools> XML tags:
<tools>
$tool_docs
</tools>"""

TRIAL_STAGE_DIRECTIVE = """\
Current stage: TRIAL. Probe the tools you expect to need with sample or real inputs to learn their argument constraints and output formats. Do not attempt to solve the query yet. When you have learned enough, reply with <answer>TRIAL COMPLETE</answer>."""

EXEC_STAGE_DIRECTIVE = """\
Current stage: EXECUTION. Use what the earlier tool trials revealed to plan and call tools that solve the query, correcting yourself after any error, then give the final answer in <answer></answer>."""

CORRECTIVE_MESSAGE = """\
Your previous reply did not follow the required format ($violation). Reply with an optional <think></think> block followed by exactly one <tool_call>{"name": ..., "arguments": {...}}</tool_call> or exactly one <answer></answer>, and nothing else."""

FINAL_ANSWER_REQUEST = """\
The tool budget is exhausted. Based on the tool results so far, provide your final answer now, formatted as <answer></answer>."""

TRAJECTORY_FILTER_PROMPT = """\
You are an expert evaluator of AI Agent reasoning and tool usage. Your task is to analyze a conversation log between a User and an AI Assistant to determine if the Assistant exhibits a specific set of advanced problem-solving behaviors.

You must look for the presence of three distinct behaviors. The Assistant does not need to use exact keywords (like "Global Plan" or "Backtracking"), but the reasoning process in the <think> tags must clearly demonstrate these actions took place.

The Three Required Behaviors:
1. Global Planning & Decomposition:
The Assistant must set a high-level strategy at the beginning.
It should break complex user queries into smaller, manageable sub-goals or steps.
Criteria: Does the Assistant explicitly map out what it intends to do before jumping into tool calls?
2. Tool Exploration (Mandatory):
The Assistant must demonstrate an intent to "understand" or "test" a tool before fully relying on it for the final answer.
This can appear as:
- Calling a tool to see its output format (schema exploration).
- Calling a tool with sample data to verify behavior.
- Explicitly stating in the thought process that a call is being made to "explore," "check capabilities," or "understand the response" (even if using real user data).
Criteria: Is there a step where the Agent tries to learn about the tool's behavior rather than just assuming it works perfectly immediately?
3. Validation & Backtracking (Self-Correction):
Validation: After receiving a tool output, the Assistant must evaluate if the data satisfy the user's request.
Resilience/Backtracking:
- If an error occurs: The Assistant must acknowledge the error and propose a fix, a retry with different parameters, or a substitute tool.
- If successful: The Assistant validates the data is correct. (Note: If the tool works perfectly, "backtracking" is not required, only validation is required).
Criteria: Does the Agent verify the results? If things go wrong, does it try to fix them instead of giving up or ignoring the error?

Evaluation Rules:
- Be Lenient on Format: Do not demand specific XML tags or numbered lists for the plan. Narrative paragraphs are acceptable if the logic is present.
- Contextual Exploration: "Exploration" is valid even if the agent uses the user's actual input, provided the intent described in the thought process is to verify how the tool functions or returns data.
- Partial Trajectories: If the log ends abruptly (e.g., during a retry), judge based on the behaviors exhibited so far. If the agent demonstrated the intent to fix an error, that counts as satisfying the Validation/Backtracking requirement.

Output Format:
- Analysis: Briefly describe where you found evidence (or lack thereof) for each of the three behaviors.
- Result: Output only True if ALL three behaviors are present. Output False if ANY of the three are missing."""

FILTER_INPUT = """\
Conversation log:
$transcript"""

PASS_RATE_PROMPT = """\
You are an assistant responsible for evaluating whether an LLM agent's response should be counted as Pass, Fail, or Unsure in passrate calculations. Your evaluation must consider both the final answer and the complete execution chain.
Status Determination Rules:
Pass: Answer sufficiently solves query; Execution chain shows successful API calls; Initial errors were corrected; Information verifiable through API responses
Fail: API observations show execution errors; Answer contradicts evidence; Information incorrect/invalid; Solution misses core requirements
Unsure: Cannot verify authenticity; Insufficient validation data; Need complete reasoning process;
Output Format:
{"content": "Evaluation reasoning", "answer_status": "Pass/Fail/Unsure"}
Required Input: Original query; Final answer; Complete execution chain with API responses"""

PASS_RATE_INPUT = """\
Original query: $query
Final answer: $final_answer
Complete execution chain with API responses:
$execution_chain"""

ERROR_TYPE_PROMPT = """\
You are an expert analyst of Large Language Model (LLM) Agent behaviors. Your task is to analyze failed execution trajectories and classify the PRIMARY error type into EXACTLY one of the following 3 categories.

Input Data - 'ground_truth': The correct answer. - 'response': The trajectory of thoughts, tool calls, and tool outputs.
Classification Taxonomy Please identify the Root Cause or the most Fatal Error that led to the failure. Evaluate which error type is the dominant factor.

I. Under-calling & Scope Insufficiency
* Definition: The agent fails to initiate the necessary tool calls to cover the full scope of the question. It makes incomplete attempts.
* Scope: The error is about "What was NOT called".
* Key Indicators:
* Direct Answering: The agent answers the question directly (often hallucinating) WITHOUT calling any tools.
* Partial Coverage: The user asks for "Director AND Actor", but the agent ONLY calls a tool for "Director" (Missing scope).
* Phantom Usage: The agent claims to use a tool in thought, but no actual tool call is generated.

II. Tool Execution Failure
* Definition: The agent attempts to use tools, but the Tool Layer fails to provide usable data, and the agent fails to recover. This covers both Technical Failures (Syntax) and Data Failures (Empty Results).
* Scope: The error is about "The Tool Call yielded nothing useful".
* Key Indicators:
* Syntax/Schema Errors: Persistent JSON errors, missing parameters, or wrong types that prevent execution.
* Empty/Null Results: The tool runs successfully but returns "Not Found", "[]", or "None", and the agent cannot recover (e.g., stops, loops, or gives up).
* Unrecovered Mechanical Loop: Repeatedly making the exact same failed call (Syntax or Empty) without changing strategy.

III. Reasoning Discontinuity
* Definition: Reasoning Process breaks down. The logic connection between steps is flawed or incoherent.
* Scope: The error is about Reasoning Discontinuity.
* Key Indicators:
* Context Loss / Interruption: The agent starts a reasoning chain but abruptly stops or forgets previous constraints.
* Logical Errors: The agent forgets to the original question constraints, mixes up variables, or makes invalid deductions.

---
Guidance on Identifying the "Primary" Error
Use the following priority logic to decide the Primary one:
1. Check for Under-calling (Type I):
* Did the agent fail to call the necessary tools entirely?
* Did it miss a part of the question (e.g., checked date but missed location)?
* If YES, categorize as I.
2. Check for Tool/Retrieval Failure (Type II):
* Did the agent call the tool, but the tool failed to work (Syntax Error) OR failed to return data (Empty Result) and cannot recover?
* Did this failure cause the agent to get stuck, loop, or fail to produce an answer?
* If all YES, categorize as II.
3. Check for Reasoning Discontinuity (Type III):
* If agent dive in to reasoning but got lost or looped, mixed variables, or made illogical jumps?
* If YES, categorize as III.

Output Format
{"trajectory_id": "ID or Summary", "category_code": "Category ID (I, II, or III)", "category_name": "Full Category Name", "reasoning": "Explain why this is the primary error type."}"""

ERROR_TYPE_INPUT = """\
Now, analyze the following trajectory:
Question: $question
Ground Truth: $ground_truth
Response Trajectory: $response"""

CATALOG: dict[str, str] = {
    "system": SYSTEM_PROMPT,
    "data_synthesis": DATA_SYNTHESIS_PROMPT,
    "synthesis_instruction": SYNTHESIS_INSTRUCTION,
    "trial_stage": TRIAL_STAGE_DIRECTIVE,
    "exec_stage": EXEC_STAGE_DIRECTIVE,
    "corrective": CORRECTIVE_MESSAGE,
    "final_answer_request": FINAL_ANSWER_REQUEST,
    "trajectory_filter": TRAJECTORY_FILTER_PROMPT,
    "filter_input": FILTER_INPUT,
    "pass_rate": PASS_RATE_PROMPT,
    "pass_rate_input": PASS_RATE_INPUT,
    "error_type": ERROR_TYPE_PROMPT,
    "error_type_input": ERROR_TYPE_INPUT,
}

_PLACEHOLDER = re.compile(r"\$(?:\{(\w+)\}|(\w+))")


def placeholders(template: str) -> set[str]:
    return {a or b for a, b in _PLACEHOLDER.findall(template)}


def render(template: str, **values: str) -> str:
    return Template(template).substitute(**values)


def unresolved(template: str, **values: str) -> set[str]:
    """Placeholders of ``template`` that ``values`` does not supply."""
    return placeholders(template) - set(values)
