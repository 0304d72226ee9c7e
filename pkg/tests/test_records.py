import json

import pytest

from avalonplay.agents import AgentSpec
from avalonplay.game import GameConfig
from avalonplay.records import (
    GameRecord,
    RecordFormatError,
    RecordSchemaError,
    ReplayMismatch,
    iter_record_paths,
    load_record,
    replay,
    write_record,
)
from avalonplay.runner import run_game, seed_for_game


@pytest.fixture(scope="module")
def record():
    return run_game(
        GameConfig(),
        just_spec=AgentSpec("deduction"),
        evil_spec=AgentSpec("scripted_evil"),
        game_seed=seed_for_game(11, 0),
    )


class TestRoundTrip:
    def test_load_inverts_write(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        loaded = load_record(path)
        assert loaded.game_id == record.game_id
        assert loaded.config == record.config
        assert loaded.roles == record.roles
        assert loaded.agents == record.agents
        assert loaded.seed_info == record.seed_info
        assert loaded.outcome == record.outcome
        assert loaded.aborted == record.aborted
        assert loaded.events == record.events

    def test_file_is_one_json_object_per_line(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        lines = path.read_text().splitlines()
        parsed = [json.loads(line) for line in lines]
        assert parsed[0]["type"] == "header"
        assert parsed[-1]["type"] == "outcome"
        assert all(p["type"] == "event" for p in parsed[1:-1])
        assert len(parsed) == len(record.events) + 2

    def test_events_stored_in_sequence_order(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        seqs = [
            json.loads(line)["seq"]
            for line in path.read_text().splitlines()
            if json.loads(line)["type"] == "event"
        ]
        assert seqs == sorted(seqs)

    def test_agent_specs_survive(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        loaded = load_record(path)
        assert set(loaded.agents) == set(range(1, 8))
        assert all(isinstance(s, AgentSpec) for s in loaded.agents.values())


class TestFormatErrors:
    def write_lines(self, tmp_path, lines):
        path = tmp_path / "bad.jsonl"
        path.write_text("\n".join(lines) + "\n")
        return path

    def rows(self, record, tmp_path):
        path = tmp_path / "good.jsonl"
        write_record(record, path)
        return path.read_text().splitlines()

    def test_invalid_json_names_the_line(self, record, tmp_path):
        rows = self.rows(record, tmp_path)
        rows.insert(3, "{not json")
        with pytest.raises(RecordFormatError, match="line 4"):
            load_record(self.write_lines(tmp_path, rows))

    def test_missing_type(self, record, tmp_path):
        rows = self.rows(record, tmp_path)
        rows.insert(1, '{"seq": 0}')
        with pytest.raises(RecordFormatError, match="line 2"):
            load_record(self.write_lines(tmp_path, rows))

    def test_unknown_type(self, record, tmp_path):
        rows = self.rows(record, tmp_path)
        rows.insert(1, '{"type": "mystery"}')
        with pytest.raises(RecordFormatError, match="mystery"):
            load_record(self.write_lines(tmp_path, rows))

    def test_event_after_outcome(self, record, tmp_path):
        rows = self.rows(record, tmp_path)
        rows.append(rows[1])
        with pytest.raises(RecordFormatError, match="after the outcome"):
            load_record(self.write_lines(tmp_path, rows))

    def test_duplicate_outcome(self, record, tmp_path):
        rows = self.rows(record, tmp_path)
        rows.append(rows[-1])
        with pytest.raises(RecordFormatError, match="outcome"):
            load_record(self.write_lines(tmp_path, rows))

    def test_out_of_order_events(self, record, tmp_path):
        rows = self.rows(record, tmp_path)
        rows[1], rows[2] = rows[2], rows[1]
        with pytest.raises(RecordFormatError, match="out of order"):
            load_record(self.write_lines(tmp_path, rows))

    def test_missing_outcome(self, record, tmp_path):
        rows = self.rows(record, tmp_path)[:-1]
        with pytest.raises(RecordFormatError, match="outcome"):
            load_record(self.write_lines(tmp_path, rows))

    def test_missing_header(self, record, tmp_path):
        rows = self.rows(record, tmp_path)[1:]
        with pytest.raises(RecordFormatError):
            load_record(self.write_lines(tmp_path, rows))


class TestSchemaErrors:
    def test_version_mismatch(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        rows = path.read_text().splitlines()
        header = json.loads(rows[0])
        header["schema_version"] = 99
        rows[0] = json.dumps(header)
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(RecordSchemaError, match="schema version"):
            load_record(path)

    def test_config_hash_mismatch(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        rows = path.read_text().splitlines()
        header = json.loads(rows[0])
        header["config_hash"] = "0" * 16
        rows[0] = json.dumps(header)
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(RecordSchemaError, match="hash"):
            load_record(path)


class TestReplay:
    def test_replay_reproduces_the_game(self, record):
        engine = replay(record)
        assert engine.outcome == record.outcome

    def test_replay_after_round_trip(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        assert replay(load_record(path)).outcome == record.outcome

    def test_tampered_ballot_detected(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        rows = path.read_text().splitlines()
        for i, row in enumerate(rows):
            data = json.loads(row)
            if data.get("kind") == "ballot_result" and data["visibility"].startswith("private:"):
                data["payload"]["approve"] = not data["payload"]["approve"]
                rows[i] = json.dumps(data)
                break
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(ReplayMismatch):
            replay(load_record(path))

    def test_tampered_team_detected(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        rows = path.read_text().splitlines()
        for i, row in enumerate(rows):
            data = json.loads(row)
            if data.get("kind") == "team_proposed":
                members = data["payload"]["members"]
                others = [p for p in range(1, 8) if p not in members]
                data["payload"]["members"] = sorted(members[:-1] + others[:1])
                rows[i] = json.dumps(data)
                break
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(ReplayMismatch):
            replay(load_record(path))

    def test_tampered_outcome_detected(self, record, tmp_path):
        path = tmp_path / "game.jsonl"
        write_record(record, path)
        rows = path.read_text().splitlines()
        outcome = json.loads(rows[-1])
        outcome["outcome"]["quest_winner"] = (
            "evil" if outcome["outcome"]["quest_winner"] == "just" else "just"
        )
        rows[-1] = json.dumps(outcome)
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(ReplayMismatch, match="outcome"):
            replay(load_record(path))

    def test_missing_engine_seed_rejected(self, record):
        broken = GameRecord(
            game_id=record.game_id,
            config=record.config,
            roles=record.roles,
            agents=record.agents,
            seed_info={"stream": "sha256-stream-v1"},
            events=record.events,
            outcome=record.outcome,
        )
        with pytest.raises(RecordSchemaError, match="engine seed"):
            replay(broken)


class TestIterRecordPaths:
    def test_sorted_jsonl_only(self, record, tmp_path):
        for name in ("b.jsonl", "a.jsonl", "notes.txt"):
            write_record(record, tmp_path / name) if name.endswith(".jsonl") else (
                tmp_path / name
            ).write_text("x")
        paths = iter_record_paths(tmp_path)
        assert [p.name for p in paths] == ["a.jsonl", "b.jsonl"]
