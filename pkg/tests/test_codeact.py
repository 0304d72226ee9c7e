import time

import pytest

from avalonplay.codeact import (
    CodeActError,
    DebugLoopConfig,
    ExecStatus,
    ExecutionResult,
    build_code_prompt,
    execute_sandboxed,
    parse_final_team,
    self_debug_loop,
)
from avalonplay.knowledge import PrivateFact, FactKind
from avalonplay.llm import MockLLM, MockRule
from avalonplay.memory import LeaderMemory, PublicFact
from avalonplay.parsing import ParseError, WrongSize

FAST = DebugLoopConfig(max_attempts=3, per_run_timeout=10.0, output_cap=4096)


def result_with(stdout, status=ExecStatus.OK):
    return ExecutionResult(
        status=status, stdout=stdout, stderr="", exit_code=0, wall_time=0.0
    )


class TestBuildCodePrompt:
    def test_all_placeholders_filled(self):
        lm = LeaderMemory(
            private_facts=(
                PrivateFact(FactKind.EVIL_SET, frozenset({5, 6, 7}), "Players 5, 6, and 7 belong to the evil side."),
            ),
            public_facts=(PublicFact(1, frozenset({1, 2}), True, None),),
        )
        prompt = build_code_prompt(lm, 3)
        assert prompt.team_n == 3
        assert "Players 5, 6, and 7 belong to the evil side." in prompt.text
        assert "In the initial round, players 1 and 2 were selected" in prompt.text
        assert "selects 3 players" in prompt.text
        assert "Please print the final 3 players." in prompt.text
        assert "{" not in prompt.text.replace("{1, 2}", "")  # no unfilled slots

    def test_empty_sections_get_placeholders(self):
        prompt = build_code_prompt(LeaderMemory(private_facts=(), public_facts=()), 2)
        assert "(no private information)" in prompt.text
        assert "(no quest results yet)" in prompt.text


class TestConfigValidation:
    def test_rejects_bad_limits(self):
        with pytest.raises(CodeActError):
            DebugLoopConfig(max_attempts=0)
        with pytest.raises(CodeActError):
            DebugLoopConfig(per_run_timeout=0)
        with pytest.raises(CodeActError):
            DebugLoopConfig(output_cap=0)
        with pytest.raises(CodeActError):
            DebugLoopConfig(interpreter_path="/no/such/python")


class TestSandbox:
    def test_ok_program(self):
        result = execute_sandboxed("print([1, 2])", FAST)
        assert result.status is ExecStatus.OK
        assert result.stdout == "[1, 2]\n"
        assert result.exit_code == 0

    def test_crash_is_error_with_traceback(self):
        result = execute_sandboxed("raise ValueError('boom')", FAST)
        assert result.status is ExecStatus.ERROR
        assert result.exit_code != 0
        assert "ValueError: boom" in result.stderr

    def test_network_is_unreachable(self):
        probe = (
            "import socket\n"
            "try:\n"
            "    socket.create_connection(('1.1.1.1', 80), timeout=3)\n"
            "    print('CONNECTED')\n"
            "except Exception as exc:\n"
            "    print('BLOCKED', type(exc).__name__)\n"
        )
        result = execute_sandboxed(probe, FAST)
        assert "CONNECTED" not in result.stdout
        assert "BLOCKED" in result.stdout

    def test_infinite_loop_is_killed_promptly(self):
        limits = DebugLoopConfig(max_attempts=1, per_run_timeout=1.0, output_cap=4096)
        t0 = time.monotonic()
        result = execute_sandboxed("while True:\n    pass", limits)
        elapsed = time.monotonic() - t0
        assert result.status is ExecStatus.TIMEOUT
        assert elapsed <= limits.per_run_timeout + 1.0

    def test_output_is_capped(self):
        limits = DebugLoopConfig(max_attempts=1, per_run_timeout=10.0, output_cap=1024)
        result = execute_sandboxed("print('x' * 100000)", limits)
        assert result.status is ExecStatus.OUTPUT_TRUNCATED
        assert result.stdout_truncated
        assert len(result.stdout.encode()) <= 1024

    def test_writes_outside_scratch_blocked_but_scratch_allowed(self):
        program = (
            "import os\n"
            "with open('inside.txt', 'w') as fh:\n"
            "    fh.write('ok')\n"
            "print('WROTE_INSIDE')\n"
            "try:\n"
            "    open('/tmp/codeact-escape-attempt', 'w')\n"
            "    print('WROTE_OUTSIDE')\n"
            "except PermissionError:\n"
            "    print('DENIED_OUTSIDE')\n"
        )
        result = execute_sandboxed(program, FAST)
        assert "WROTE_INSIDE" in result.stdout
        assert "WROTE_OUTSIDE" not in result.stdout
        assert "DENIED_OUTSIDE" in result.stdout

    def test_process_creation_blocked(self):
        program = (
            "import subprocess\n"
            "try:\n"
            "    subprocess.run(['/bin/ls'])\n"
            "    print('SPAWNED')\n"
            "except PermissionError:\n"
            "    print('DENIED')\n"
        )
        result = execute_sandboxed(program, FAST)
        assert "SPAWNED" not in result.stdout
        assert "DENIED" in result.stdout

    def test_scratch_directory_is_cleaned_up(self, tmp_path):
        result = execute_sandboxed("import os; print(os.getcwd())", FAST)
        scratch = result.stdout.strip()
        import os

        assert not os.path.exists(scratch)


class TestParseFinalTeam:
    def test_bracketed_last_line(self):
        assert parse_final_team(result_with("thinking...\n[2, 3, 6, 7]\n"), 4) == frozenset(
            {2, 3, 6, 7}
        )

    def test_final_answer_sentence(self):
        out = "scores computed\nFinal Answer: players 1 and 4 look safest\n(done)"
        assert parse_final_team(result_with(out), 2) == frozenset({1, 4})

    def test_last_bracketed_line_preferred(self):
        out = "Final Answer: [1, 2, 3]\n[4, 5, 6]"
        assert parse_final_team(result_with(out), 3) == frozenset({4, 5, 6})

    def test_empty_output(self):
        with pytest.raises(ParseError, match="printed nothing"):
            parse_final_team(result_with(""), 2)

    def test_prose_only_output(self):
        with pytest.raises(ParseError, match="no bracketed list"):
            parse_final_team(result_with("the best team is two and three\n"), 2)

    def test_wrong_size_carries_ids(self):
        with pytest.raises(WrongSize) as err:
            parse_final_team(result_with("[2, 3, 4, 6, 7]"), 4)
        assert err.value.ids == [2, 3, 4, 6, 7]


class TestSelfDebugLoop:
    def fallback(self):
        return frozenset({9, 9})  # sentinel; tests assert whether it was used

    def test_first_attempt_success(self):
        llm = MockLLM([MockRule("```python\nprint([1, 2])\n```", phase="code_generation")])
        prompt = build_code_prompt(LeaderMemory((), ()), 2)
        outcome = self_debug_loop(llm, prompt, FAST, lambda: frozenset({6, 7}))
        assert outcome.team == frozenset({1, 2})
        assert outcome.attempts_used == 1
        assert not outcome.fell_back
        assert outcome.attempts[0].issue is None
        assert len(outcome.exchanges) == 1
        assert outcome.exchanges[0]["tag"] == "code_generation"

    def test_revision_after_bad_output(self):
        llm = MockLLM(
            [
                MockRule("```python\nprint([1, 2, 3])\n```", phase="code_generation", pattern="selects 2 players"),
                MockRule("```python\nprint([1, 2])\n```", phase="code_generation", pattern="did not produce a usable answer"),
            ]
        )
        prompt = build_code_prompt(LeaderMemory((), ()), 2)
        outcome = self_debug_loop(llm, prompt, FAST, lambda: frozenset({6, 7}))
        assert outcome.team == frozenset({1, 2})
        assert outcome.attempts_used == 2
        assert not outcome.fell_back
        first = outcome.attempts[0]
        assert first.issue.startswith("unusable output")
        assert first.parsed_ids == [1, 2, 3]
        # The revision request carries the failing program and its output.
        revision_request = outcome.exchanges[1]["request"]
        assert revision_request[1]["role"] == "assistant"
        assert "print([1, 2, 3])" in revision_request[2]["content"]
        assert "[1, 2, 3]" in revision_request[2]["content"]

    def test_revision_after_crash(self):
        llm = MockLLM(
            [
                MockRule("```python\nraise RuntimeError('no')\n```", phase="code_generation", pattern="selects 2"),
                MockRule("```python\nprint([4, 5])\n```", phase="code_generation", pattern="execution error"),
            ]
        )
        prompt = build_code_prompt(LeaderMemory((), ()), 2)
        outcome = self_debug_loop(llm, prompt, FAST, lambda: frozenset({6, 7}))
        assert outcome.team == frozenset({4, 5})
        assert outcome.attempts[0].issue == "execution error"

    def test_exhaustion_falls_back(self):
        llm = MockLLM([MockRule("no code here at all", phase="code_generation", max_uses=None)])
        limits = DebugLoopConfig(max_attempts=2, per_run_timeout=5.0, output_cap=4096)
        prompt = build_code_prompt(LeaderMemory((), ()), 2)
        outcome = self_debug_loop(llm, prompt, limits, lambda: frozenset({6, 7}))
        assert outcome.fell_back
        assert outcome.team == frozenset({6, 7})
        assert outcome.attempts_used == 2
        assert len(outcome.attempts) == 2
        assert all(a.issue for a in outcome.attempts)

    def test_attempts_serialize(self):
        llm = MockLLM([MockRule("```python\nprint([1, 2])\n```", phase="code_generation")])
        prompt = build_code_prompt(LeaderMemory((), ()), 2)
        outcome = self_debug_loop(llm, prompt, FAST, lambda: frozenset({6, 7}))
        d = outcome.attempts[0].to_dict()
        assert d["program"] == "print([1, 2])"
        assert d["result"]["status"] == "ok"
        assert d["issue"] is None
        assert d["parsed_ids"] == []
