"""Transcript consistency analysis.

Two conservative passes over a game record:

* structural — harness-observable slip-ups: proposals of the wrong size
  or naming nonexistent seats, ballots whose stated reasoning contradicts
  the vote cast, and decisions that fell through to a parse fallback.
* claims — discussion statements about the quest history (who was on a
  team, how a round ended) checked against the events that precede them.

Only contradictions with the recorded history are flagged.  Lies about
hidden state (roles, sides) are part of the game and never flagged, and
statements the record cannot verify are ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Iterable

from .events import EventKind, EventLogEntry
from .game import ALL_SEATS
from .records import GameRecord
from .templates import load_template

FINDING_KINDS = (
    "TeamSizeViolation",
    "InvalidPlayerRef",
    "VoteReasoningMismatch",
    "ParseFallbackUsed",
    "CounterfactualClaim",
)


@dataclass(frozen=True)
class ConsistencyFinding:
    game_id: str
    seq: int
    actor: int | None
    kind: str
    detail: str
    contradicts_seq: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "game_id": self.game_id,
            "seq": self.seq,
            "actor": self.actor,
            "kind": self.kind,
            "detail": self.detail,
            "contradicts_seq": self.contradicts_seq,
        }


@lru_cache(maxsize=1)
def _vote_mismatch_rules() -> tuple[tuple[bool, re.Pattern[str]], ...]:
    rules: list[tuple[bool, re.Pattern[str]]] = []
    for line in load_template("vote_mismatch_patterns").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        vote, _, pattern = line.partition("\t")
        rules.append((vote.strip() == "approve", re.compile(pattern.strip(), re.IGNORECASE)))
    return tuple(rules)


@lru_cache(maxsize=1)
def _claim_rules() -> dict[str, re.Pattern[str]]:
    rules: dict[str, re.Pattern[str]] = {}
    for line in load_template("claim_patterns").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, _, pattern = line.partition(":")
        rules[name.strip()] = re.compile(pattern.strip(), re.IGNORECASE)
    return rules


def _ordered(events: Iterable[EventLogEntry]) -> list[EventLogEntry]:
    return sorted(events, key=lambda e: e.seq)


def check_structural(record: GameRecord) -> list[ConsistencyFinding]:
    findings: list[ConsistencyFinding] = []

    def add(event: EventLogEntry, kind: str, detail: str) -> None:
        findings.append(
            ConsistencyFinding(
                game_id=record.game_id,
                seq=event.seq,
                actor=event.actor,
                kind=kind,
                detail=detail,
            )
        )

    for event in _ordered(record.events):
        payload = event.payload
        if event.kind is EventKind.TEAM_PROPOSED:
            required = payload.get("required_n") or len(payload.get("members", ()))
            for attempt in payload.get("raw_attempts", ()):
                ids = attempt.get("ids", [])
                error_kind = attempt.get("error_kind")
                if error_kind == "WrongSize":
                    add(
                        event,
                        "TeamSizeViolation",
                        f"named {len(ids)} player(s) {ids} when {required} were required",
                    )
                elif error_kind == "InvalidPlayerRef":
                    add(event, "InvalidPlayerRef", f"named nonexistent seat(s) in {ids}")
            for attempt in (payload.get("codeact") or {}).get("attempts", ()):
                ids = attempt.get("parsed_ids") or []
                if not ids:
                    continue
                if any(i not in ALL_SEATS for i in ids):
                    add(event, "InvalidPlayerRef", f"program printed nonexistent seat(s) in {ids}")
                elif len(set(ids)) != required:
                    add(
                        event,
                        "TeamSizeViolation",
                        f"program printed {len(set(ids))} player(s) {sorted(set(ids))} "
                        f"when {required} were required",
                    )
        elif event.kind is EventKind.BALLOT_RESULT and event.visibility.startswith("private:"):
            reasoning = payload.get("reasoning") or ""
            approve = payload.get("approve")
            for rule_vote, pattern in _vote_mismatch_rules():
                if approve is rule_vote and pattern.search(reasoning):
                    add(
                        event,
                        "VoteReasoningMismatch",
                        f"voted {'approve' if approve else 'reject'} while reasoning {reasoning!r}",
                    )
                    break
        elif event.kind is EventKind.AGENT_ERROR and payload.get("reason") == "parse_fallback":
            add(event, "ParseFallbackUsed", payload.get("detail", "parse fallback"))
    return findings


def check_claims(record: GameRecord) -> list[ConsistencyFinding]:
    rules = _claim_rules()
    quests: list[tuple[int, int, frozenset[int], bool]] = []  # (seq, round, team, success)
    findings: list[ConsistencyFinding] = []

    def add(event: EventLogEntry, detail: str, contradicts: int | None) -> None:
        findings.append(
            ConsistencyFinding(
                game_id=record.game_id,
                seq=event.seq,
                actor=event.actor,
                kind="CounterfactualClaim",
                detail=detail,
                contradicts_seq=contradicts,
            )
        )

    for event in _ordered(record.events):
        if event.kind is EventKind.QUEST_RESULT:
            quests.append(
                (
                    event.seq,
                    event.payload["round"],
                    frozenset(event.payload["team"]),
                    bool(event.payload["success"]),
                )
            )
            continue
        if event.kind is not EventKind.DISCUSSION:
            continue
        text = event.text
        by_round = {q[1]: q for q in quests}
        quested = {p for q in quests for p in q[2]}
        for match in rules["on_round"].finditer(text):
            player, rnd = int(match.group(1)), int(match.group(2))
            quest = by_round.get(rnd)
            if quest and player not in quest[2]:
                add(
                    event,
                    f"claimed player {player} was on the round-{rnd} quest; "
                    f"the team was {sorted(quest[2])}",
                    quest[0],
                )
        for match in rules["not_on_round"].finditer(text):
            player, rnd = int(match.group(1)), int(match.group(2))
            quest = by_round.get(rnd)
            if quest and player in quest[2]:
                add(
                    event,
                    f"claimed player {player} was not on the round-{rnd} quest; "
                    f"the team was {sorted(quest[2])}",
                    quest[0],
                )
        for match in rules["round_result"].finditer(text):
            rnd, verb = int(match.group(1)), match.group(2).lower()
            quest = by_round.get(rnd)
            if quest and quest[3] != (verb == "succeeded"):
                actual = "succeeded" if quest[3] else "failed"
                add(event, f"claimed the round-{rnd} quest {verb}; it {actual}", quest[0])
        for match in rules["has_quested"].finditer(text):
            player = int(match.group(1))
            if player in ALL_SEATS and player not in quested:
                add(
                    event,
                    f"claimed player {player} has been on a quest; no executed quest includes them",
                    None,
                )
        for match in rules["not_quested"].finditer(text):
            player = int(match.group(1))
            if player in quested:
                first = next(q for q in quests if player in q[2])
                add(
                    event,
                    f"claimed player {player} has not been on a quest; "
                    f"they were on the round-{first[1]} team {sorted(first[2])}",
                    first[0],
                )
    return findings


def analyze_record(record: GameRecord) -> list[ConsistencyFinding]:
    return sorted(
        check_structural(record) + check_claims(record),
        key=lambda f: (f.seq, f.kind, f.detail),
    )


@dataclass(frozen=True)
class AnalysisReport:
    n_games: int
    n_utterances: int
    finding_counts: tuple[tuple[str, int], ...]
    findings_per_100_utterances: Fraction | None

    def to_json(self) -> dict[str, Any]:
        rate = self.findings_per_100_utterances
        return {
            "n_games": self.n_games,
            "n_utterances": self.n_utterances,
            "finding_counts": dict(self.finding_counts),
            "findings_per_100_utterances": None if rate is None else {
                "numerator": rate.numerator,
                "denominator": rate.denominator,
                "value": float(rate),
            },
        }


def summarize(
    findings: Iterable[ConsistencyFinding], records: Iterable[GameRecord]
) -> AnalysisReport:
    records = list(records)
    findings = list(findings)
    utterances = sum(
        1 for r in records for e in r.events if e.kind is EventKind.DISCUSSION
    )
    counts = {kind: 0 for kind in FINDING_KINDS}
    for finding in findings:
        counts[finding.kind] = counts.get(finding.kind, 0) + 1
    rate = Fraction(len(findings) * 100, utterances) if utterances else None
    return AnalysisReport(
        n_games=len(records),
        n_utterances=utterances,
        finding_counts=tuple(sorted((k, v) for k, v in counts.items() if v)),
        findings_per_100_utterances=rate,
    )


def analyze_records(
    records: Iterable[GameRecord],
) -> tuple[list[ConsistencyFinding], AnalysisReport]:
    records = list(records)
    findings: list[ConsistencyFinding] = []
    for record in records:
        findings.extend(analyze_record(record))
    return findings, summarize(findings, records)
