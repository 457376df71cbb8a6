import json
import signal
import socket
import subprocess
import sys

import pytest

from gridlore.cli import main
from gridlore.logs import decode_log, verify_replay


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run_cli(capsys, *argv)
    assert code == 0, out
    return json.loads(out)


def test_rollout_oracle_wins_every_base6_episode(capsys):
    doc = run_json(capsys, "rollout", "--episodes", "5", "--seed", "0")
    assert doc["agent"] == "oracle"
    assert doc["episodes"] == 5 and doc["first_seed"] == 0
    assert doc["wins"] == 5 and doc["win_rate"] == 1.0
    assert doc["losses_combat"] == 0 and doc["losses_timeout"] == 0
    assert doc["config"]["width"] == 6
    assert doc["mean_frames"] > 0


def test_rollout_is_byte_identical(capsys):
    _, first = run_cli(capsys, "rollout", "--episodes", "3", "--agent", "random_item_then_target")
    _, second = run_cli(capsys, "rollout", "--episodes", "3", "--agent", "random_item_then_target")
    assert first == second


def test_rollout_flag_overrides(capsys):
    doc = run_json(
        capsys, "rollout", "--episodes", "2", "--preset", "base6",
        "--dyna", "--nl", "--split", "eval", "--max-frames", "80",
    )
    cfg = doc["config"]
    assert cfg["dyna"] is True and cfg["nl"] is True
    assert cfg["split"] == "eval" and cfg["max_frames"] == 80


def test_gen_writes_replayable_lines(tmp_path, capsys):
    out_path = str(tmp_path / "episodes.jsonl")
    code, _ = run_cli(capsys, "gen", "--episodes", "3", "--seed", "7", "--out", out_path)
    assert code == 0
    lines = open(out_path).read().splitlines()
    assert len(lines) == 3
    seeds = []
    for line in lines:
        log = decode_log(line)
        verify_replay(log)
        assert log.agent_tag == "oracle"
        seeds.append(log.seed)
    assert seeds == [7, 8, 9]


def test_gen_defaults_to_stdout(capsys):
    code, out = run_cli(capsys, "gen", "--episodes", "2")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 2
    assert all(decode_log(line).outcome == "win" for line in lines)


def test_stats_quest_numbers(capsys):
    doc = run_json(capsys, "stats", "--preset", "base6")
    assert doc["splits"] == {"train_tuples": 713, "eval_tuples": 151}
    assert doc["spaces"]["rule_sets"] == 846_720
    assert doc["templates"] == {"goal": 12, "team": 10, "modifier": 10}


def test_stats_rps_numbers(capsys):
    doc = run_json(capsys, "stats", "--preset", "rps")
    assert doc["graphs"]["kind"] == "permutation"
    assert doc["graphs"]["train"] == 4060 and doc["graphs"]["eval"] == 4060
    assert len(doc["graphs"]["train_alphabet"]) == 30


def test_count_quest(capsys):
    doc = run_json(capsys, "count", "--preset", "base6")
    assert doc == {"task": "quest", "rule_sets": 846_720, "documents": 846_720 * 5040}
    grouped = run_json(capsys, "count", "--preset", "base6", "--group")
    assert grouped["rule_sets"] == 19_051_200
    rich = run_json(capsys, "count", "--preset", "base6", "--group", "--nl")
    assert rich["documents"] > 15 * 10**9


def test_count_rps(capsys):
    doc = run_json(capsys, "count", "--preset", "rps")
    assert doc["train_graphs"] == 4060 and doc["eval_graphs"] == 4060
    assert 0.0505 <= doc["reference_redundancy"] <= 0.0507
    assert doc["reference_redundancy_percent"] == "5%"


def test_gradcheck_reports_and_gates(capsys, monkeypatch):
    import gridlore.network

    monkeypatch.setattr(
        gridlore.network, "standard_grad_checks", lambda eps: {"film_layer": 2e-9, "tiny_network": 3e-9}
    )
    doc = run_json(capsys, "gradcheck")
    assert doc["passed"] is True
    assert doc["max_relative_error"] == 3e-9
    assert set(doc["checks"]) == {"film_layer", "tiny_network"}

    code, out = run_cli(capsys, "gradcheck", "--tolerance", "1e-10")
    assert code == 1
    assert json.loads(out)["passed"] is False


@pytest.mark.parametrize(
    "argv",
    [
        ["rollout", "--preset", "bogus"],
        ["rollout", "--agent", "cheater"],
        ["nope"],
        [],
        ["stats", "--split", "test"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
    capsys.readouterr()


def test_domain_errors_return_2(capsys):
    code, _ = run_cli(capsys, "rollout", "--max-frames", "0", "--episodes", "1")
    assert code == 2


def test_module_entry_point():
    result = subprocess.run(
        [sys.executable, "-m", "gridlore", "count", "--preset", "base6"],
        capture_output=True, text=True, timeout=60,
    )
    assert result.returncode == 0
    assert json.loads(result.stdout)["rule_sets"] == 846_720


def test_serve_announces_port_and_accepts_connections(tmp_path):
    log_path = str(tmp_path / "human.jsonl")
    proc = subprocess.Popen(
        [sys.executable, "-m", "gridlore", "serve", "--port", "0", "--log", log_path],
        stdout=subprocess.PIPE, text=True,
    )
    try:
        line = proc.stdout.readline()
        note = json.loads(line)
        assert note["type"] == "listening" and note["port"] > 0
        sock = socket.create_connection(("127.0.0.1", note["port"]), timeout=5)
        sock.sendall(b'{"type": "hello", "seed": 1}\n')
        reply = json.loads(sock.makefile("rb").readline())
        assert reply["type"] == "obs" and reply["frame"] == 0
        sock.close()
    finally:
        proc.send_signal(signal.SIGINT)
        proc.wait(timeout=10)
