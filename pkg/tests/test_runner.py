import hashlib
import json
from fractions import Fraction

import pytest

from avalonplay.agents import AgentSpec
from avalonplay.events import AUDIT, EventKind
from avalonplay.game import GameConfig, Side
from avalonplay.llm import MockLLM, MockRule
from avalonplay.records import load_record, replay
from avalonplay.runner import (
    SEED_STREAM,
    MetricsCounts,
    TournamentConfig,
    compute_metrics,
    counts_from_record,
    derive_seed,
    report_from_counts,
    run_game,
    run_tournament,
    seed_for_game,
    subseed,
)

DEDUCTION = AgentSpec("deduction")
SCRIPTED = AgentSpec("scripted_evil")
RANDOM = AgentSpec("random")


class TestSeeds:
    def test_stream_name(self):
        assert SEED_STREAM == "sha256-stream-v1"

    def test_frozen_values(self):
        assert seed_for_game(42, 0) == 14347451550736972493
        assert seed_for_game(42, 1) == 13166699750335757183
        assert subseed(seed_for_game(42, 0), "roles") == 6711049363402196892
        assert subseed(seed_for_game(42, 0), "leader") == 8490069030903544509
        assert subseed(seed_for_game(42, 0), "agent/3") == 15879437079338324755

    def test_derivation_is_the_documented_hash(self):
        digest = hashlib.sha256(b"avalonplay/42/game/0").digest()
        assert seed_for_game(42, 0) == int.from_bytes(digest[:8], "big")

    def test_seeds_fit_in_64_bits_and_differ(self):
        seeds = {seed_for_game(7, i) for i in range(200)}
        assert len(seeds) == 200
        assert all(0 <= s < 2**64 for s in seeds)


class TestRunGame:
    def test_identical_seeds_give_identical_records(self):
        a = run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(5, 0))
        b = run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(5, 0))
        assert [e.to_dict() for e in a.events] == [e.to_dict() for e in b.events]
        assert a.outcome == b.outcome
        assert a.roles.as_dict() == b.roles.as_dict()

    def test_different_seeds_differ(self):
        a = run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(5, 0))
        b = run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(5, 1))
        assert [e.to_dict() for e in a.events] != [e.to_dict() for e in b.events]

    def test_specs_assigned_by_side(self):
        record = run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(5, 0))
        for seat in range(1, 8):
            expected = DEDUCTION if record.roles.side(seat) is Side.JUST else SCRIPTED
            assert record.agents[seat] == expected

    def test_seed_info_contents(self):
        game_seed = seed_for_game(5, 0)
        record = run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=game_seed)
        assert record.seed_info == {
            "stream": SEED_STREAM,
            "game_seed": game_seed,
            "roles_seed": subseed(game_seed, "roles"),
            "engine_seed": subseed(game_seed, "leader"),
        }

    def test_record_replays(self):
        record = run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(5, 2))
        assert replay(record).outcome == record.outcome

    def test_aborted_game_when_the_script_runs_dry(self):
        client = MockLLM([])  # no rules: the first model call fails
        record = run_game(
            GameConfig(),
            AgentSpec("llm"),
            SCRIPTED,
            game_seed=seed_for_game(5, 0),
            client=client,
        )
        assert record.aborted
        assert record.outcome is None
        assert "no fixture rule" in record.error
        audit = [e for e in record.events if e.visibility == AUDIT]
        assert audit and audit[-1].payload.get("reason") == "abort"

    def test_llm_policy_requires_a_client(self):
        with pytest.raises(ValueError, match="client"):
            run_game(GameConfig(), AgentSpec("llm"), SCRIPTED, game_seed=1)


class TestMetricsCounts:
    def test_counts_match_a_manual_event_walk(self):
        record = run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(9, 4))
        counts = counts_from_record(record)

        quest_events = [e for e in record.events if e.kind is EventKind.QUEST_RESULT]
        n_success = sum(1 for e in quest_events if e.payload["success"])
        assert counts.n_games == 1
        assert counts.n_aborted == 0
        assert counts.quests_run == len(quest_events)
        assert counts.quests_succeeded == n_success
        assert counts.discussion_utterances == sum(
            1 for e in record.events if e.kind is EventKind.DISCUSSION
        )
        public_ballots = [
            e
            for e in record.events
            if e.kind is EventKind.BALLOT_RESULT and e.visibility == "public"
        ]
        assert counts.rejected_ballots == sum(
            1 for e in public_ballots if not e.payload["approved"]
        )
        assert counts.forced_approvals == sum(1 for e in public_ballots if e.payload["forced"])
        for e in quest_events:
            rnd = e.payload["round"]
            assert counts.round_quests[rnd - 1] >= 1

    def test_team_accuracy_counts_just_led_quest_successes(self):
        record = run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(9, 4))
        counts = counts_from_record(record)
        evil = record.roles.evil_seats()
        leader = None
        just_led = just_led_success = 0
        for e in sorted(record.events, key=lambda e: e.seq):
            if e.kind is EventKind.TEAM_PROPOSED:
                leader = e.payload["leader"]
            elif e.kind is EventKind.QUEST_RESULT:
                if leader not in evil:
                    just_led += 1
                    just_led_success += int(e.payload["success"])
        assert counts.just_led_quests == just_led
        assert counts.just_led_successes == just_led_success

    def test_aborted_records_only_count_as_aborted(self):
        record = run_game(
            GameConfig(), AgentSpec("llm"), SCRIPTED, game_seed=seed_for_game(5, 0), client=MockLLM([])
        )
        counts = counts_from_record(record)
        assert counts.n_games == 1
        assert counts.n_aborted == 1
        assert counts.quests_run == 0
        assert counts.discussion_utterances == 0

    def test_add_accumulates(self):
        a = counts_from_record(run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(9, 0)))
        b = counts_from_record(run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(9, 1)))
        total = MetricsCounts()
        total.add(a)
        total.add(b)
        assert total.n_games == 2
        assert total.quests_run == a.quests_run + b.quests_run


class TestMetricsReport:
    def test_ratios_are_exact_fractions(self):
        counts = MetricsCounts()
        counts.n_games = 4
        counts.n_aborted = 1
        counts.just_overall_wins = 2
        counts.just_quest_wins = 1
        counts.quests_run = 10
        counts.quests_succeeded = 7
        counts.just_led_quests = 5
        counts.just_led_successes = 2
        counts.rejected_ballots = 6
        counts.forced_approvals = 1
        counts.assassination_attempts = 2
        counts.assassination_hits = 1
        counts.discussion_utterances = 70
        report = report_from_counts(counts)
        assert report.n_games == 4
        assert report.n_completed == 3
        assert report.just_game_win_rate == Fraction(2, 3)
        assert report.just_quest_win_rate == Fraction(1, 3)
        assert report.quest_success_rate == Fraction(7, 10)
        assert report.team_accuracy == Fraction(2, 5)
        assert report.rejected_ballots_per_game == Fraction(2, 1)
        assert report.assassination_hit_rate == Fraction(1, 2)
        assert report.discussion_utterances == 70

    def test_empty_denominators_become_none(self):
        report = report_from_counts(MetricsCounts())
        assert report.just_game_win_rate is None
        assert report.team_accuracy is None
        assert report.assassination_hit_rate is None

    def test_to_json_carries_numerator_and_denominator(self):
        counts = MetricsCounts()
        counts.n_games = 2
        counts.just_overall_wins = 1
        report = report_from_counts(counts)
        data = report.to_json()
        assert data["just_game_win_rate"] == {
            "numerator": 1,
            "denominator": 2,
            "value": 0.5,
        }
        assert data["team_accuracy"] is None
        json.dumps(data)  # must be serializable as-is

    def test_compute_metrics_over_records(self):
        records = [
            run_game(GameConfig(), DEDUCTION, SCRIPTED, game_seed=seed_for_game(3, i))
            for i in range(4)
        ]
        report = compute_metrics(records)
        assert report.n_games == 4
        assert report.n_completed == 4
        folded = MetricsCounts()
        for r in records:
            folded.add(counts_from_record(r))
        assert report == report_from_counts(folded)


class TestTournament:
    def test_repeat_runs_are_bit_identical(self):
        config = TournamentConfig(n_games=12, base_seed=21)
        a = run_tournament(config)
        b = run_tournament(config)
        assert a.report == b.report
        assert a.summaries == b.summaries
        assert a.digest() == b.digest()

    def test_parallelism_does_not_change_results(self):
        serial = run_tournament(TournamentConfig(n_games=12, base_seed=21, parallelism=1))
        parallel = run_tournament(TournamentConfig(n_games=12, base_seed=21, parallelism=8))
        assert serial.report == parallel.report
        assert serial.summaries == parallel.summaries
        assert serial.digest() == parallel.digest()

    def test_game_ids_and_order(self):
        result = run_tournament(TournamentConfig(n_games=3, base_seed=21))
        assert [s.game_id for s in result.summaries] == [
            "g21-00000",
            "g21-00001",
            "g21-00002",
        ]

    def test_records_written_and_replayable(self, tmp_path):
        run_tournament(TournamentConfig(n_games=3, base_seed=21, record_dir=str(tmp_path)))
        paths = sorted(tmp_path.glob("*.jsonl"))
        assert [p.stem for p in paths] == ["g21-00000", "g21-00001", "g21-00002"]
        for path in paths:
            record = load_record(path)
            replay(record)

    def test_shared_mock_client_uses_threads(self):
        rules = [
            MockRule("[1, 2]", phase="team_selection", pattern=r"select 2 team members", max_uses=None),
            MockRule("[1, 2, 3]", phase="team_selection", pattern=r"select 3 team members", max_uses=None),
            MockRule("[1, 2, 3, 4]", phase="team_selection", pattern=r"select 4 team members", max_uses=None),
            MockRule("Nothing to add.", phase="discussion", max_uses=None),
            MockRule('{"reasoning": "Fine.", "vote": "approve"}', phase="team_vote", max_uses=None),
            MockRule('{"reasoning": "Go.", "vote": "approve"}', phase="quest_vote", max_uses=None),
            MockRule("player 2", phase="assassination", max_uses=None),
        ]
        config = TournamentConfig(
            n_games=2,
            base_seed=3,
            just_spec=AgentSpec("llm"),
            evil_spec=SCRIPTED,
            parallelism=4,
        )
        result = run_tournament(config, client=MockLLM(rules))
        assert result.report.n_games == 2
        assert result.report.n_aborted == 0

    def test_deduction_beats_random_on_team_accuracy(self):
        deduction = run_tournament(TournamentConfig(n_games=60, base_seed=33)).report
        baseline = run_tournament(
            TournamentConfig(n_games=60, base_seed=33, just_spec=RANDOM)
        ).report
        assert deduction.team_accuracy - baseline.team_accuracy >= Fraction(15, 100)
