"""Pluggable seat policies.

Four families:

* random   — uniform legal actions from a per-seat seeded stream.
* scripted_evil — a fixed heuristic evil policy (stack teams with evil,
  approve only teams containing evil, cast suspicion in discussion).
* deduction — possible-worlds reasoning: selects the seats most likely
  good, approves teams whose success probability is at least one half
  under its surviving worlds, and mirrors that judgement when evil.
* llm      — delegates decisions to a chat model under one of four
  prompting strategies (base, cot, react, codeact), with one reprompt on
  a parse failure and a legal fallback after that.

All non-LLM policies are pure functions of (observation, seeded stream),
so games built from them replay bit-identically.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

from .codeact import DebugLoopConfig, build_code_prompt, self_debug_loop
from .deduction import (
    ConstraintSet,
    ContradictionError,
    belief,
    enumerate_worlds,
    facts_from_history,
    facts_from_private,
    select_team,
)
from .game import ALL_SEATS, Phase, Side
from .knowledge import KnowledgeView
from .llm import ChatMessage, LLMClient
from .memory import LeaderMemory, PublicFact
from .parsing import ParseError, parse_team_selection, parse_vote
from .prompts import PromptBundle
from .templates import render

STRATEGIES = ("base", "cot", "react", "codeact")
POLICIES = ("random", "scripted_evil", "deduction", "llm")


# ----- actions ---------------------------------------------------------------


@dataclass(frozen=True)
class SelectTeam:
    members: frozenset[int]


@dataclass(frozen=True)
class Discuss:
    text: str


@dataclass(frozen=True)
class TeamVote:
    reasoning: str
    approve: bool


@dataclass(frozen=True)
class QuestVote:
    approve: bool


@dataclass(frozen=True)
class Assassinate:
    target: int


Action = SelectTeam | Discuss | TeamVote | QuestVote | Assassinate


@dataclass
class AgentReply:
    action: Action
    trace: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Observation:
    """Everything a seat may see when asked to act.

    The prompt bundle is only needed by model-backed policies; pure
    policies act on the structured fields alone and callers may omit it.
    """

    seat: int
    phase: Phase
    round: int
    attempt: int
    bundle: PromptBundle | None = None
    team_size: int | None = None
    threshold: int | None = None
    proposed_team: frozenset[int] | None = None
    public_facts: tuple[PublicFact, ...] = ()
    reveal_sabotage_count: bool = False
    leader_memory: LeaderMemory | None = None


@dataclass(frozen=True)
class AgentSpec:
    policy: str = "random"
    strategy: str = "base"
    model: str = ""
    temperature_text: float = 0.7
    temperature_code: float = 0.0

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "policy": self.policy,
            "strategy": self.strategy,
            "model": self.model,
            "temperature_text": self.temperature_text,
            "temperature_code": self.temperature_code,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AgentSpec":
        return cls(**data)


ErrorSink = Callable[[int, str, str, dict[str, Any]], None]


def _no_error_sink(seat: int, reason: str, detail: str, payload: dict[str, Any]) -> None:
    return None


class Agent:
    """One seat's decision maker for a single game."""

    def __init__(
        self,
        seat: int,
        view: KnowledgeView,
        rng: random.Random,
        on_error: ErrorSink = _no_error_sink,
    ) -> None:
        self.seat = seat
        self.view = view
        self.rng = rng
        self.on_error = on_error

    def act(self, obs: Observation) -> AgentReply:
        raise NotImplementedError

    # Seats an evil-side agent knows to be just; used for assassination.
    def _known_just_seats(self) -> list[int]:
        known_evil: set[int] = set()
        for fact in self.view.private_facts:
            known_evil |= fact.players
        return sorted(set(ALL_SEATS) - known_evil)

    def _forced_quest_vote(self) -> QuestVote:
        return QuestVote(approve=self.view.side is Side.JUST)


class RandomAgent(Agent):
    def act(self, obs: Observation) -> AgentReply:
        phase = obs.phase
        if phase is Phase.TEAM_SELECTION:
            team = frozenset(self.rng.sample(ALL_SEATS, obs.team_size))
            return AgentReply(SelectTeam(team))
        if phase is Phase.DISCUSSION:
            return AgentReply(Discuss("I have nothing to add."))
        if phase is Phase.TEAM_VOTE:
            approve = self.rng.random() < 0.5
            reasoning = "I agree with this team." if approve else "I disagree with this team."
            return AgentReply(TeamVote(reasoning=reasoning, approve=approve))
        if phase is Phase.QUEST_EXECUTION:
            return AgentReply(self._forced_quest_vote())
        if phase is Phase.ASSASSINATION:
            return AgentReply(Assassinate(self.rng.choice(self._known_just_seats())))
        raise ValueError(f"no action for phase {phase}")


class ScriptedEvilAgent(Agent):
    """Deterministic evil heuristic; assumes an evil-side view."""

    def _evil_seats(self) -> list[int]:
        for fact in self.view.private_facts:
            if fact.players:
                return sorted(fact.players)
        return [self.seat]

    def act(self, obs: Observation) -> AgentReply:
        phase = obs.phase
        evil = self._evil_seats()
        if phase is Phase.TEAM_SELECTION:
            # Stack the team with as many evil seats as fit: itself first,
            # then evil teammates, then just seats, all ascending.
            ordered = [self.seat] + [p for p in evil if p != self.seat]
            ordered += [p for p in ALL_SEATS if p not in ordered]
            team = frozenset(ordered[: obs.team_size])
            return AgentReply(SelectTeam(team))
        if phase is Phase.DISCUSSION:
            target = self.rng.choice([p for p in ALL_SEATS if p not in evil])
            return AgentReply(
                Discuss(f"I'm not sure about player {target}. Something about their choices feels off.")
            )
        if phase is Phase.TEAM_VOTE:
            approve = bool(obs.proposed_team and set(obs.proposed_team) & set(evil))
            reasoning = "I agree with this team." if approve else "I disagree with this team."
            return AgentReply(TeamVote(reasoning=reasoning, approve=approve))
        if phase is Phase.QUEST_EXECUTION:
            return AgentReply(self._forced_quest_vote())
        if phase is Phase.ASSASSINATION:
            return AgentReply(Assassinate(self.rng.choice(self._known_just_seats())))
        raise ValueError(f"no action for phase {phase}")


class DeductionAgent(Agent):
    def _constraints(self, obs: Observation) -> ConstraintSet:
        history = facts_from_history(
            obs.public_facts, reveal_counts=obs.reveal_sabotage_count
        )
        return ConstraintSet(tuple(facts_from_private(self.view) + history))

    def _success_probability(self, obs: Observation) -> Fraction | None:
        worlds = enumerate_worlds(self._constraints(obs))
        if not worlds:
            return None
        team = obs.proposed_team
        ok = sum(1 for w in worlds if len(team & w.evil_set) < obs.threshold)
        return Fraction(ok, len(worlds))

    def act(self, obs: Observation) -> AgentReply:
        phase = obs.phase
        if phase is Phase.TEAM_SELECTION:
            beliefs = belief(self._constraints(obs))
            try:
                team = select_team(beliefs, obs.team_size, self.seat)
                return AgentReply(SelectTeam(team))
            except ContradictionError:
                team = frozenset(self.rng.sample(ALL_SEATS, obs.team_size))
                self.on_error(
                    self.seat,
                    "contradiction_fallback",
                    "belief state had no consistent world; selected a random legal team",
                    {"team": sorted(team)},
                )
                return AgentReply(SelectTeam(team), trace={"fallback": True})
        if phase is Phase.DISCUSSION:
            p = self._success_probability_for_discussion(obs)
            if p is None or p >= Fraction(1, 2):
                return AgentReply(Discuss("I have no objection to this team."))
            return AgentReply(Discuss("I am not convinced by this team."))
        if phase is Phase.TEAM_VOTE:
            p = self._success_probability(obs)
            if p is None:
                approve = True
                self.on_error(
                    self.seat,
                    "contradiction_fallback",
                    "belief state had no consistent world; voted approve",
                    {},
                )
            elif self.view.side is Side.JUST:
                approve = p >= Fraction(1, 2)
            else:
                approve = p <= Fraction(1, 2)
            reasoning = "I agree with this team." if approve else "I disagree with this team."
            return AgentReply(TeamVote(reasoning=reasoning, approve=approve))
        if phase is Phase.QUEST_EXECUTION:
            return AgentReply(self._forced_quest_vote())
        if phase is Phase.ASSASSINATION:
            return AgentReply(Assassinate(self.rng.choice(self._known_just_seats())))
        raise ValueError(f"no action for phase {phase}")

    def _success_probability_for_discussion(self, obs: Observation) -> Fraction | None:
        if obs.proposed_team is None or obs.threshold is None:
            return None
        return self._success_probability(obs)


# ----- LLM-backed agent -------------------------------------------------------


def build_strategy_prompt(strategy: str, bundle: PromptBundle) -> list[ChatMessage]:
    """Chat messages for one decision under a prompting strategy.

    The codeact strategy only changes leader team selection (handled by
    the code-action path); for every other decision it behaves like base.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    user = bundle.user_text()
    if strategy == "cot":
        user = user + "\n\n" + render("strategy_cot")
    elif strategy == "react":
        user = user + "\n\n" + render("strategy_react")
    return [ChatMessage("system", bundle.system_text()), ChatMessage("user", user)]


class LLMAgent(Agent):
    def __init__(
        self,
        seat: int,
        view: KnowledgeView,
        rng: random.Random,
        client: LLMClient,
        spec: AgentSpec,
        on_error: ErrorSink = _no_error_sink,
        debug_config: DebugLoopConfig | None = None,
    ) -> None:
        super().__init__(seat, view, rng, on_error)
        self.client = client
        self.spec = spec
        self.debug_config = debug_config or DebugLoopConfig()

    # -- plumbing ---------------------------------------------------------

    def _call(self, messages: Sequence[ChatMessage], tag: str, trace: dict[str, Any]) -> str:
        t0 = time.monotonic()
        response = self.client.complete(messages, temperature=self.spec.temperature_text, tag=tag)
        trace.setdefault("exchanges", []).append(
            {
                "request": [m.to_dict() for m in messages],
                "response": response,
                "tag": tag,
                "temperature": self.spec.temperature_text,
                "latency": round(time.monotonic() - t0, 6),
            }
        )
        return response

    def _bundle(self, obs: Observation) -> PromptBundle:
        if obs.bundle is None:
            raise ValueError("a model-backed agent needs the observation's prompt bundle")
        return obs.bundle

    def _ask_and_parse(
        self,
        obs: Observation,
        tag: str,
        parse: Callable[[str], Any],
        trace: dict[str, Any],
    ) -> tuple[Any, bool]:
        """One ask, one reprompt on parse failure; (value, ok)."""
        messages = build_strategy_prompt(self.spec.strategy, self._bundle(obs))
        text = self._call(messages, tag, trace)
        attempts = trace.setdefault("raw_attempts", [])
        try:
            value = parse(text)
        except ParseError as exc:
            first_error = str(exc)
            attempts.append(
                {"text": text, "error": first_error, "error_kind": type(exc).__name__, "ids": exc.ids}
            )
        else:
            trace["final_text"] = text
            return value, True
        retry = list(messages) + [
            ChatMessage("assistant", text),
            ChatMessage("user", render("reprompt", error=first_error)),
        ]
        text2 = self._call(retry, tag, trace)
        try:
            value = parse(text2)
        except ParseError as exc2:
            attempts.append(
                {"text": text2, "error": str(exc2), "error_kind": type(exc2).__name__, "ids": exc2.ids}
            )
            return None, False
        trace["final_text"] = text2
        return value, True

    def _fallback(self, reason: str, detail: str, payload: dict[str, Any], trace: dict[str, Any]) -> None:
        trace["fallback"] = True
        self.on_error(self.seat, reason, detail, payload)

    # -- decisions ----------------------------------------------------------

    def act(self, obs: Observation) -> AgentReply:
        phase = obs.phase
        if phase is Phase.TEAM_SELECTION:
            return self._select_team(obs)
        if phase is Phase.DISCUSSION:
            trace: dict[str, Any] = {}
            text = self._call(
                build_strategy_prompt(self.spec.strategy, self._bundle(obs)), "discussion", trace
            )
            return AgentReply(Discuss(text.strip()), trace)
        if phase is Phase.TEAM_VOTE:
            return self._vote(obs, "team_vote")
        if phase is Phase.QUEST_EXECUTION:
            return self._quest_vote(obs)
        if phase is Phase.ASSASSINATION:
            return self._assassinate(obs)
        raise ValueError(f"no action for phase {phase}")

    def _select_team(self, obs: Observation) -> AgentReply:
        if self.spec.strategy == "codeact" and self.view.side is Side.JUST:
            return self._select_team_codeact(obs)
        trace: dict[str, Any] = {"required_n": obs.team_size}
        value, ok = self._ask_and_parse(
            obs,
            "team_selection",
            lambda text: parse_team_selection(text, self.seat, obs.team_size),
            trace,
        )
        if ok:
            return AgentReply(SelectTeam(value), trace)
        team = frozenset(self.rng.sample(ALL_SEATS, obs.team_size))
        self._fallback(
            "parse_fallback",
            "team selection could not be parsed after a reprompt; using a random legal team",
            {"team": sorted(team), "phase": obs.phase.value},
            trace,
        )
        return AgentReply(SelectTeam(team), trace)

    def _select_team_codeact(self, obs: Observation) -> AgentReply:
        leader_memory = obs.leader_memory
        if leader_memory is None:
            raise ValueError("code-action team selection requires a leader memory")
        prompt = build_code_prompt(leader_memory, obs.team_size)

        def deduction_fallback() -> frozenset[int]:
            constraints = ConstraintSet(
                tuple(
                    facts_from_private(self.view)
                    + facts_from_history(obs.public_facts, reveal_counts=obs.reveal_sabotage_count)
                )
            )
            try:
                return select_team(belief(constraints), obs.team_size, self.seat)
            except ContradictionError:
                return frozenset(self.rng.sample(ALL_SEATS, obs.team_size))

        outcome = self_debug_loop(
            self.client,
            prompt,
            self.debug_config,
            deduction_fallback,
            temperature=self.spec.temperature_code,
        )
        trace = {
            "required_n": obs.team_size,
            "exchanges": outcome.exchanges,
            "codeact": {
                "attempts_used": outcome.attempts_used,
                "fell_back": outcome.fell_back,
                "attempts": [a.to_dict() for a in outcome.attempts],
            },
        }
        if outcome.fell_back:
            self._fallback(
                "codeact_fallback",
                "no generated program produced a usable team; used deduction instead",
                {"team": sorted(outcome.team), "attempts": outcome.attempts_used},
                trace,
            )
        return AgentReply(SelectTeam(outcome.team), trace)

    def _vote(self, obs: Observation, tag: str) -> AgentReply:
        trace: dict[str, Any] = {}
        value, ok = self._ask_and_parse(obs, tag, parse_vote, trace)
        if ok:
            reasoning, approve = value
            return AgentReply(TeamVote(reasoning=reasoning, approve=approve), trace)
        self._fallback(
            "parse_fallback",
            "ballot could not be parsed after a reprompt; voting approve",
            {"phase": obs.phase.value},
            trace,
        )
        return AgentReply(TeamVote(reasoning="", approve=True), trace)

    def _quest_vote(self, obs: Observation) -> AgentReply:
        trace: dict[str, Any] = {}
        value, ok = self._ask_and_parse(obs, "quest_vote", parse_vote, trace)
        if ok:
            _, approve = value
            return AgentReply(QuestVote(approve=approve), trace)
        forced = self._forced_quest_vote()
        self._fallback(
            "parse_fallback",
            "quest ballot could not be parsed after a reprompt; casting the side-mandated vote",
            {"phase": obs.phase.value},
            trace,
        )
        return AgentReply(forced, trace)

    def _assassinate(self, obs: Observation) -> AgentReply:
        trace: dict[str, Any] = {}
        value, ok = self._ask_and_parse(
            obs,
            "assassination",
            lambda text: parse_team_selection(text, self.seat, 1),
            trace,
        )
        if ok:
            return AgentReply(Assassinate(next(iter(value))), trace)
        target = self.rng.choice(self._known_just_seats())
        self._fallback(
            "parse_fallback",
            "assassination target could not be parsed after a reprompt; choosing a random just seat",
            {"target": target},
            trace,
        )
        return AgentReply(Assassinate(target), trace)


def make_agent(
    spec: AgentSpec,
    seat: int,
    view: KnowledgeView,
    rng: random.Random,
    on_error: ErrorSink = _no_error_sink,
    client: LLMClient | None = None,
    debug_config: DebugLoopConfig | None = None,
) -> Agent:
    if spec.policy == "random":
        return RandomAgent(seat, view, rng, on_error)
    if spec.policy == "scripted_evil":
        return ScriptedEvilAgent(seat, view, rng, on_error)
    if spec.policy == "deduction":
        return DeductionAgent(seat, view, rng, on_error)
    if spec.policy == "llm":
        if client is None:
            raise ValueError("llm policy requires a client")
        return LLMAgent(seat, view, rng, client, spec, on_error, debug_config)
    raise ValueError(f"unknown policy {spec.policy!r}")
