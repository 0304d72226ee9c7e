"""Durable game records: JSONL serialization and replay verification.

A record file holds one game: a header line, one line per event in
sequence order, and a closing outcome line.  Loading is the exact
inverse of writing, and `replay` re-drives the rules engine from the
recorded actions and verifies that every public and private event —
moderator announcements, ballots, quest results — reproduces exactly.
Audit-channel events (agent diagnostics) are record-only and excluded
from replay comparison, since no agents run during a replay.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, TextIO

from .agents import AgentSpec
from .events import AUDIT, EventKind, EventLogEntry
from .game import GameConfig, GameEngine, GameOutcome, Phase, RuleError
from .knowledge import RoleAssignment

SCHEMA_VERSION = 1


class RecordFormatError(ValueError):
    """A record file is structurally malformed (names the offending line)."""


class RecordSchemaError(ValueError):
    """A record file is well-formed but from an incompatible schema."""


class ReplayMismatch(AssertionError):
    """Re-driving the recorded actions diverged from the recorded events."""


@dataclass
class GameRecord:
    game_id: str
    config: GameConfig
    roles: RoleAssignment
    agents: dict[int, AgentSpec]
    seed_info: dict[str, Any]
    events: list[EventLogEntry] = field(default_factory=list)
    outcome: GameOutcome | None = None
    aborted: bool = False
    error: str | None = None
    schema_version: int = SCHEMA_VERSION

    def header_dict(self) -> dict[str, Any]:
        return {
            "type": "header",
            "schema_version": self.schema_version,
            "game_id": self.game_id,
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "seed": dict(self.seed_info),
            "roles": self.roles.to_json(),
            "agents": {str(s): spec.to_dict() for s, spec in sorted(self.agents.items())},
        }

    def outcome_dict(self) -> dict[str, Any]:
        return {
            "type": "outcome",
            "aborted": self.aborted,
            "error": self.error,
            "outcome": self.outcome.to_dict() if self.outcome else None,
        }


def write_record(record: GameRecord, destination: str | Path | TextIO) -> None:
    """Write one game as JSON lines: header, events by seq, outcome."""
    lines = [record.header_dict()]
    lines.extend(e.to_dict() | {"type": "event"} for e in sorted(record.events, key=lambda e: e.seq))
    lines.append(record.outcome_dict())
    text = "\n".join(json.dumps(obj, ensure_ascii=False) for obj in lines) + "\n"
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text, encoding="utf-8")
    else:
        destination.write(text)


def _parse_lines(raw: str, source: str) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordFormatError(f"{source}: line {lineno} is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict) or "type" not in obj:
            raise RecordFormatError(f"{source}: line {lineno} has no record type")
        obj["_lineno"] = lineno
        rows.append(obj)
    return rows


def load_record(source: str | Path | TextIO) -> GameRecord:
    """Exact inverse of `write_record`, with schema and order validation."""
    if isinstance(source, (str, Path)):
        name = str(source)
        raw = Path(source).read_text(encoding="utf-8")
    else:
        name = getattr(source, "name", "<stream>")
        raw = source.read()
    rows = _parse_lines(raw, name)
    if not rows:
        raise RecordFormatError(f"{name}: empty record")
    header = rows[0]
    if header["type"] != "header":
        raise RecordFormatError(f"{name}: line {header['_lineno']} should be the header")
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise RecordSchemaError(f"{name}: schema version {version!r}, expected {SCHEMA_VERSION}")
    config = GameConfig.from_dict(header["config"])
    config.validate()
    if config.config_hash() != header.get("config_hash"):
        raise RecordSchemaError(f"{name}: config hash does not match the stored configuration")
    roles = RoleAssignment.from_json(header["roles"])
    agents = {int(s): AgentSpec.from_dict(spec) for s, spec in header.get("agents", {}).items()}

    events: list[EventLogEntry] = []
    outcome_row: dict[str, Any] | None = None
    for row in rows[1:]:
        if row["type"] == "event":
            if outcome_row is not None:
                raise RecordFormatError(f"{name}: line {row['_lineno']}: event after the outcome line")
            data = {k: v for k, v in row.items() if k not in ("type", "_lineno")}
            try:
                event = EventLogEntry.from_dict(data)
            except (KeyError, ValueError) as exc:
                raise RecordFormatError(f"{name}: line {row['_lineno']}: bad event: {exc}") from exc
            if events and event.seq <= events[-1].seq:
                raise RecordFormatError(
                    f"{name}: line {row['_lineno']}: event seq {event.seq} out of order"
                )
            events.append(event)
        elif row["type"] == "outcome":
            if outcome_row is not None:
                raise RecordFormatError(f"{name}: line {row['_lineno']}: duplicate outcome line")
            outcome_row = row
        else:
            raise RecordFormatError(f"{name}: line {row['_lineno']}: unknown type {row['type']!r}")
    if outcome_row is None:
        raise RecordFormatError(f"{name}: missing outcome line")

    outcome = GameOutcome.from_dict(outcome_row["outcome"]) if outcome_row.get("outcome") else None
    return GameRecord(
        game_id=header["game_id"],
        config=config,
        roles=roles,
        agents=agents,
        seed_info=dict(header.get("seed", {})),
        events=events,
        outcome=outcome,
        aborted=bool(outcome_row.get("aborted", False)),
        error=outcome_row.get("error"),
        schema_version=version,
    )


def iter_record_paths(directory: str | Path) -> list[Path]:
    return sorted(Path(directory).glob("*.jsonl"))


# ----- replay verification ----------------------------------------------------

# Payload keys that carry game facts (as opposed to agent traces), per kind.
_CORE_PAYLOAD_KEYS = {
    EventKind.TEAM_PROPOSED: ("members", "leader"),
    EventKind.QUEST_RESULT: ("round", "team", "success", "sabotage_count"),
    EventKind.ASSASSINATION_RESULT: ("target", "hit"),
}


def _projection(event: EventLogEntry) -> dict[str, Any]:
    core: dict[str, Any] = {}
    if event.kind is EventKind.MODERATOR_NOTE:
        core = dict(event.payload)
    elif event.kind is EventKind.BALLOT_RESULT:
        keys = ("approve",) if event.visibility != "public" else ("approved", "approvals", "forced")
        core = {k: event.payload.get(k) for k in keys}
    else:
        core = {k: event.payload.get(k) for k in _CORE_PAYLOAD_KEYS.get(event.kind, ())}
    return {
        "kind": event.kind.value,
        "round": event.round,
        "attempt": event.attempt,
        "phase": event.phase,
        "actor": event.actor,
        "visibility": event.visibility,
        "text": event.text,
        "payload": core,
    }


@dataclass
class _RecordedActions:
    proposals: list[tuple[list[int], str]]
    discussion: list[tuple[int, str]]
    ballot_rounds: list[dict[int, bool]]
    assassination: tuple[int, int] | None


def _extract_actions(events: Iterable[EventLogEntry]) -> _RecordedActions:
    proposals: list[tuple[list[int], str]] = []
    discussion: list[tuple[int, str]] = []
    ballot_rounds: list[dict[int, bool]] = []
    pending: dict[int, bool] = {}
    assassination: tuple[int, int] | None = None
    for event in sorted(events, key=lambda e: e.seq):
        if event.kind is EventKind.TEAM_PROPOSED:
            proposals.append((list(event.payload["members"]), event.text))
        elif event.kind is EventKind.DISCUSSION:
            discussion.append((event.actor, event.text))
        elif event.kind is EventKind.BALLOT_RESULT and event.visibility.startswith("private:"):
            pending[event.actor] = bool(event.payload["approve"])
            if len(pending) == 7:
                ballot_rounds.append(pending)
                pending = {}
        elif event.kind is EventKind.ASSASSINATION_RESULT:
            assassination = (event.actor, event.payload["target"])
    return _RecordedActions(proposals, discussion, ballot_rounds, assassination)


def replay(record: GameRecord) -> GameEngine:
    """Re-drive the rules engine from recorded actions and verify the log.

    Returns the rebuilt engine on success; raises ReplayMismatch at the
    first diverging event, naming the recorded sequence number.
    """
    seed = record.seed_info.get("engine_seed")
    if seed is None:
        raise RecordSchemaError(f"{record.game_id}: record carries no engine seed")
    engine = GameEngine(record.config, record.roles.as_dict(), int(seed), game_id=record.game_id)
    actions = _extract_actions(record.events)
    proposals = iter(actions.proposals)
    discussion = iter(actions.discussion)
    ballots = iter(actions.ballot_rounds)

    # An aborted record stops at an engine-call boundary: each branch
    # below breaks when its recorded actions run dry, and the count
    # bound stops the drive before action-free steps (quest resolution,
    # leader rotation) the original game never reached.
    target = sum(1 for e in record.events if e.visibility != AUDIT)
    try:
        _drive(engine, actions, proposals, discussion, ballots, target)
    except RuleError as exc:
        # A recorded action the rules engine rejects means the log cannot
        # be an honest transcript of a real game.
        raise ReplayMismatch(f"{record.game_id}: recorded action rejected on replay: {exc}") from exc

    recorded = [e for e in sorted(record.events, key=lambda e: e.seq) if e.visibility != AUDIT]
    replayed = [e for e in engine.events if e.visibility != AUDIT]
    for i, (want, got) in enumerate(zip(recorded, replayed)):
        if _projection(want) != _projection(got):
            raise ReplayMismatch(
                f"{record.game_id}: event {i} (recorded seq {want.seq}) diverged:\n"
                f"  recorded: {_projection(want)}\n"
                f"  replayed: {_projection(got)}"
            )
    if len(recorded) != len(replayed):
        raise ReplayMismatch(
            f"{record.game_id}: recorded {len(recorded)} comparable events, replay produced {len(replayed)}"
        )
    want_outcome = record.outcome.to_dict() if record.outcome else None
    got_outcome = engine.outcome.to_dict() if engine.outcome else None
    if want_outcome != got_outcome:
        raise ReplayMismatch(
            f"{record.game_id}: outcome diverged: recorded {want_outcome}, replayed {got_outcome}"
        )
    return engine


def _drive(engine, actions, proposals, discussion, ballots, n_comparable) -> None:
    while not engine.finished and sum(1 for e in engine.events if e.visibility != AUDIT) < n_comparable:
        phase = engine.state.phase
        if phase is Phase.LEADER_ASSIGNMENT:
            if engine.state.round == 1:
                engine.assign_first_leader()
            else:
                engine.assign_next_leader()
        elif phase is Phase.TEAM_SELECTION:
            entry = next(proposals, None)
            if entry is None:
                break
            members, text = entry
            engine.propose_team(members, text=text)
        elif phase is Phase.DISCUSSION:
            entry = next(discussion, None)
            if entry is None:
                break
            speaker, text = entry
            engine.add_discussion(speaker, text)
        elif phase is Phase.TEAM_VOTE:
            entry = next(ballots, None)
            if entry is None:
                break
            engine.submit_ballots(entry)
        elif phase is Phase.QUEST_EXECUTION:
            engine.resolve_current_quest()
        elif phase is Phase.ASSASSINATION:
            if actions.assassination is None:
                break
            actor, victim = actions.assassination
            engine.run_assassination(actor, victim)
        else:  # pragma: no cover - loop guard
            raise ReplayMismatch(f"{engine.game_id}: replay stuck in phase {phase}")
