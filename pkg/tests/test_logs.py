import json
from random import Random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridlore.agents import UniformRandomAgent, run_episode
from gridlore.logs import (
    ABANDONED,
    LOG_VERSION,
    EpisodeLog,
    LogError,
    ReplayMismatch,
    VersionMismatch,
    append_log,
    decode_log,
    encode_log,
    read_logs,
    replay,
    verify_replay,
)
from gridlore.worldgen import preset


def sample_log(seed=0, **overrides):
    log = run_episode(UniformRandomAgent(), preset("base6", **overrides), seed)
    return log


def test_encode_decode_identity():
    log = sample_log()
    line = encode_log(log)
    assert decode_log(line) == log
    assert "\n" not in line
    json.loads(line)


@given(seed=st.integers(0, 10**6))
@settings(max_examples=20)
def test_codec_round_trip_property(seed):
    log = sample_log(seed)
    assert decode_log(encode_log(log)) == log


def test_version_gate():
    doc = json.loads(encode_log(sample_log()))
    doc["version"] = 999
    with pytest.raises(VersionMismatch):
        decode_log(json.dumps(doc))
    assert LOG_VERSION == 1


def test_log_validation():
    cfg = preset("base6")
    with pytest.raises(LogError):
        EpisodeLog(cfg, 0, ("up",), (), "win", "t")
    with pytest.raises(LogError):
        EpisodeLog(cfg, 0, ("jump",), (0.0,), "win", "t")
    with pytest.raises(LogError):
        EpisodeLog(cfg, 0, ("up",), (0.0,), "crashed", "t")
    EpisodeLog(cfg, 0, ("up",), (0.0,), ABANDONED, "t")


def test_append_and_read(tmp_path):
    path = str(tmp_path / "episodes.jsonl")
    logs = [sample_log(s) for s in range(3)]
    for log in logs:
        append_log(path, log)
    assert read_logs(path) == logs


def test_replay_reproduces_rewards():
    for seed in range(20):
        log = sample_log(seed)
        rewards, outcome = replay(log)
        assert rewards == log.rewards
        assert outcome == log.outcome
        verify_replay(log)


def test_replay_covers_every_variant():
    for name in ("base6", "full6", "full10", "rps"):
        log = run_episode(UniformRandomAgent(), preset(name), 1)
        verify_replay(log)


def test_replay_rejects_actions_past_the_end():
    log = sample_log(0)
    longer = EpisodeLog(
        log.config,
        log.seed,
        log.actions + ("stay",),
        log.rewards + (0.0,),
        log.outcome,
        log.agent_tag,
    )
    with pytest.raises(ReplayMismatch):
        replay(longer)


def test_verify_replay_flags_tampered_rewards():
    log = sample_log(2)
    tampered = EpisodeLog(
        log.config,
        log.seed,
        log.actions,
        (0.0,) * len(log.rewards),
        log.outcome,
        log.agent_tag,
    )
    if tampered.rewards != log.rewards:
        with pytest.raises(ReplayMismatch):
            verify_replay(tampered)


def test_abandoned_log_checks_prefix_only():
    log = sample_log(3)
    cut = max(1, len(log.actions) - 1)
    partial = EpisodeLog(
        log.config, log.seed, log.actions[:cut], log.rewards[:cut], ABANDONED, "human"
    )
    verify_replay(partial)


def test_replay_seed_comes_from_the_log_field():
    # the seed column wins over whatever seed sits inside the config
    log = sample_log(5)
    assert verify_replay(log) is None
    moved = EpisodeLog(
        log.config.with_seed(12345), log.seed, log.actions, log.rewards, log.outcome, "t"
    )
    verify_replay(moved)
