"""Play-session protocol: a transport-free state machine over JSON messages.

One session is one episode.  The client opens with ``hello`` (naming a preset
and seed, plus optional flag overrides), the server answers with the frame-0
``obs``, and from then on every ``act`` yields exactly one ``obs`` or, on the
terminal step, one ``end``.  A malformed or illegal ``act`` yields an
``error`` followed by the unchanged current ``obs`` so the client can always
resynchronize.  Finished sessions are appended to the human-baseline log;
sessions cut off mid-episode are logged as abandoned.

The session object never touches sockets; servers feed it decoded JSON
objects and forward the replies.  That keeps the protocol testable without
any transport and guarantees byte-identical behavior across transports.
"""

from __future__ import annotations

from .engine import ACTIONS, Observation, WorldState, step
from .episodes import new_episode
from .logs import ABANDONED, EpisodeLog, append_log
from .worldgen import PRESETS, preset

MESSAGE_TYPES = ("hello", "obs", "act", "end", "error")

_HELLO_KEYS = frozenset(
    ("type", "preset", "seed", "dyna", "group", "nl", "max_frames", "split", "agent_tag")
)
_HELLO_FLAGS = ("dyna", "group", "nl")
DEFAULT_AGENT_TAG = "human"


class ProtocolError(ValueError):
    pass


def obs_payload(obs: Observation) -> dict:
    return {
        "type": "obs",
        "frame": obs.frame,
        "cells": [list(column) for column in obs.cells],
        "doc": obs.doc_text,
        "goal": obs.goal,
        "inventory": obs.inventory,
        "agent": list(obs.agent),
    }


def end_payload(state: WorldState) -> dict:
    win = state.outcome == "win"
    return {
        "type": "end",
        "win": win,
        "reward": 1.0 if win else -1.0,
        "frames": state.frame,
        "outcome": state.outcome,
    }


def _error(message: str) -> dict:
    return {"type": "error", "message": message}


class PlaySession:
    """hello -> (obs -> act)* -> end, with per-session episode state."""

    def __init__(self, log_path: str | None = None):
        self.log_path = log_path
        self.phase = "await_hello"
        self.state: WorldState | None = None
        self.obs: Observation | None = None
        self.config = None
        self.seed = 0
        self.agent_tag = DEFAULT_AGENT_TAG
        self.actions: list[str] = []
        self.rewards: list[float] = []

    def handle(self, msg) -> list[dict]:
        """Process one client message; return the replies, in order."""
        if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
            return [_error("messages are JSON objects with a string 'type'")]
        kind = msg["type"]
        if self.phase == "await_hello":
            if kind != "hello":
                return [_error("expected a hello message first")]
            return self._on_hello(msg)
        if self.phase == "playing":
            if kind != "act":
                return [_error("expected an act message"), obs_payload(self.obs)]
            return self._on_act(msg)
        return [_error("session already ended")]

    def _on_hello(self, msg: dict) -> list[dict]:
        unknown = set(msg) - _HELLO_KEYS
        if unknown:
            return [_error(f"unknown hello keys: {sorted(unknown)}")]
        name = msg.get("preset", "base6")
        if name not in PRESETS:
            return [_error(f"unknown preset {name!r}, expected one of {sorted(PRESETS)}")]
        seed = msg.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            return [_error("seed must be an integer")]
        overrides = {}
        for flag in _HELLO_FLAGS:
            if flag in msg:
                if not isinstance(msg[flag], bool):
                    return [_error(f"{flag} must be a boolean")]
                overrides[flag] = msg[flag]
        if "max_frames" in msg:
            if not isinstance(msg["max_frames"], int) or msg["max_frames"] < 1:
                return [_error("max_frames must be a positive integer")]
            overrides["max_frames"] = msg["max_frames"]
        if "split" in msg:
            if msg["split"] not in ("train", "eval"):
                return [_error("split must be 'train' or 'eval'")]
            overrides["split"] = msg["split"]
        tag = msg.get("agent_tag", DEFAULT_AGENT_TAG)
        if not isinstance(tag, str) or not tag:
            return [_error("agent_tag must be a non-empty string")]

        self.config = preset(name, **overrides)
        self.seed = seed
        self.agent_tag = tag
        self.state, self.obs = new_episode(self.config.with_seed(seed))
        self.phase = "playing"
        return [obs_payload(self.obs)]

    def _on_act(self, msg: dict) -> list[dict]:
        unknown = set(msg) - {"type", "action"}
        if unknown:
            return [_error(f"unknown act keys: {sorted(unknown)}"), obs_payload(self.obs)]
        action = msg.get("action")
        if action not in ACTIONS:
            return [
                _error(f"unknown action {action!r}, expected one of {list(ACTIONS)}"),
                obs_payload(self.obs),
            ]
        result = step(self.state, action)
        self.actions.append(action)
        self.rewards.append(result.reward)
        self.obs = result.observation
        if result.done:
            self.phase = "done"
            self._write_log(self.state.outcome)
            return [end_payload(self.state)]
        return [obs_payload(self.obs)]

    def on_disconnect(self) -> None:
        """Transport closed: log a partial episode as abandoned."""
        if self.phase == "playing":
            self.phase = "done"
            self._write_log(ABANDONED)

    def _write_log(self, outcome: str) -> None:
        if self.log_path is None:
            return
        append_log(
            self.log_path,
            EpisodeLog(
                config=self.config,
                seed=self.seed,
                actions=tuple(self.actions),
                rewards=tuple(self.rewards),
                outcome=outcome,
                agent_tag=self.agent_tag,
            ),
        )
