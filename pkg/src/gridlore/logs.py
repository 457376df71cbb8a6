"""Episode logs: one JSON line per episode, replayable bit-for-bit.

A log stores the config, the episode seed, and the action sequence; nothing
else is needed because generation is fully deterministic.  ``replay`` rebuilds
the episode and re-applies the actions, and ``verify_replay`` checks that the
recorded rewards and outcome come back unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .engine import ACTIONS, OUTCOMES, step
from .episodes import new_episode
from .worldgen import EpisodeConfig

LOG_VERSION = 1

# Sessions cut off mid-episode keep their reward prefix under this outcome.
ABANDONED = "abandoned"


class LogError(ValueError):
    pass


class VersionMismatch(LogError):
    """The log line was written by an incompatible format version."""


class ReplayMismatch(RuntimeError):
    """Re-running a log did not reproduce its recorded rewards or outcome."""


@dataclass(frozen=True)
class EpisodeLog:
    config: EpisodeConfig
    seed: int
    actions: tuple[str, ...]
    rewards: tuple[float, ...]
    outcome: str
    agent_tag: str
    version: int = field(default=LOG_VERSION)

    def __post_init__(self) -> None:
        if len(self.actions) != len(self.rewards):
            raise LogError("actions and rewards must have equal length")
        for a in self.actions:
            if a not in ACTIONS:
                raise LogError(f"unknown action {a!r}")
        if self.outcome not in OUTCOMES and self.outcome != ABANDONED:
            raise LogError(f"unknown outcome {self.outcome!r}")


def encode_log(log: EpisodeLog) -> str:
    doc = {
        "version": log.version,
        "config": log.config.to_dict(),
        "seed": log.seed,
        "actions": list(log.actions),
        "rewards": list(log.rewards),
        "outcome": log.outcome,
        "agent_tag": log.agent_tag,
    }
    return json.dumps(doc, sort_keys=True)


def decode_log(line: str) -> EpisodeLog:
    doc = json.loads(line)
    if doc.get("version") != LOG_VERSION:
        raise VersionMismatch(f"log version {doc.get('version')!r}, expected {LOG_VERSION}")
    return EpisodeLog(
        config=EpisodeConfig.from_dict(doc["config"]),
        seed=doc["seed"],
        actions=tuple(doc["actions"]),
        rewards=tuple(doc["rewards"]),
        outcome=doc["outcome"],
        agent_tag=doc["agent_tag"],
    )


def append_log(path: str, log: EpisodeLog) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(encode_log(log) + "\n")


def read_logs(path: str) -> list[EpisodeLog]:
    logs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                logs.append(decode_log(line))
    return logs


def replay(log: EpisodeLog) -> tuple[tuple[float, ...], str]:
    """Re-run the logged actions; return the rewards seen and the outcome."""
    cfg = log.config.with_seed(log.seed)
    state, _ = new_episode(cfg)
    rewards = []
    outcome = "ongoing"
    for action in log.actions:
        if state.done:
            raise ReplayMismatch("log has actions beyond the episode's end")
        result = step(state, action)
        rewards.append(result.reward)
        outcome = result.outcome
    return tuple(rewards), outcome


def verify_replay(log: EpisodeLog) -> None:
    """Raise ReplayMismatch unless the log reproduces exactly.

    Abandoned logs are reward-prefix checks only; finished logs must also
    land on the recorded outcome.
    """
    rewards, outcome = replay(log)
    if rewards != log.rewards:
        raise ReplayMismatch(f"rewards diverged: {log.rewards} vs {rewards}")
    if log.outcome != ABANDONED and outcome != log.outcome:
        raise ReplayMismatch(f"outcome diverged: {log.outcome!r} vs {outcome!r}")
