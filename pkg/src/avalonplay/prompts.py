"""Observation prompts assembled from five parts.

Global parts, fixed for the whole game:
  1. game rule        shared rule text for every agent
  2. role assignment  the seat's own role prompt
  3. role identification  the seat's private-fact texts

Real-time parts, rebuilt per decision:
  4. game history     key-info digest plus the recent-message window
  5. action description  what the moderator asks this seat to do now

Rendered prompts never include another seat's role, private facts, or
secret ballots; the memory layer has already filtered visibility.
"""

from __future__ import annotations

from dataclasses import dataclass

from .game import GameEngine, Phase, ProtocolError, Role
from .knowledge import KnowledgeView
from .memory import GlobalMemory
from .templates import render

_ROLE_TEMPLATE = {
    Role.MERLIN: "role_merlin",
    Role.PERCIVAL: "role_percival",
    Role.SERVANT: "role_servant",
    Role.MORGANA: "role_morgana",
    Role.ASSASSIN: "role_assassin",
    Role.MINION: "role_minion",
}


@dataclass(frozen=True)
class PromptBundle:
    game_rule: str
    role_assignment: str
    role_identification: str
    game_history: str
    action_description: str

    def system_text(self) -> str:
        parts = [self.game_rule, self.role_assignment]
        if self.role_identification:
            parts.append(self.role_identification)
        return "\n\n".join(parts)

    def user_text(self) -> str:
        parts = []
        if self.game_history:
            parts.append(self.game_history)
        parts.append(self.action_description)
        return "\n\n".join(parts)


def render_global_prompt(view: KnowledgeView) -> tuple[str, str, str]:
    """The three per-game-constant parts for one seat."""
    game_rule = render("game_rule")
    role_assignment = render(_ROLE_TEMPLATE[view.own_role])
    role_identification = "\n".join(f.text for f in view.private_facts)
    return game_rule, role_assignment, role_identification


def render_game_history(memory: GlobalMemory) -> str:
    """Digest of evicted key info followed by the verbatim recent window."""
    evicted = memory.evicted_key_info()
    lines: list[str] = []
    if evicted:
        lines.append("Key information from earlier in the game:")
        lines.extend(f"{e.speaker_label()}: {e.text}" for e in evicted)
    if memory.window:
        if lines:
            lines.append("")
        lines.append("Recent messages:")
        lines.extend(f"{e.speaker_label()}: {e.text}" for e in memory.window)
    return "\n".join(lines)


def render_action_description(engine: GameEngine, player: int) -> str:
    """Moderator instruction for the seat expected to act now."""
    state = engine.state
    phase = state.phase
    if player not in engine.expected_actors():
        raise ProtocolError(f"player {player} is not expected to act during {phase.value}")
    if phase is Phase.TEAM_SELECTION:
        return render("action_team_selection", leader=state.leader, n=state.team_size())
    if phase is Phase.DISCUSSION:
        return render("action_discussion", player=player)
    if phase is Phase.TEAM_VOTE:
        return render("action_team_vote", player=player)
    if phase is Phase.QUEST_EXECUTION:
        return render("action_quest_vote", player=player)
    if phase is Phase.ASSASSINATION:
        return render("action_assassination", player=player)
    raise ProtocolError(f"no action is possible during {phase.value}")


def build_bundle(engine: GameEngine, view: KnowledgeView, memory: GlobalMemory) -> PromptBundle:
    game_rule, role_assignment, role_identification = render_global_prompt(view)
    return PromptBundle(
        game_rule=game_rule,
        role_assignment=role_assignment,
        role_identification=role_identification,
        game_history=render_game_history(memory),
        action_description=render_action_description(engine, view.player),
    )
