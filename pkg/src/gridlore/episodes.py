"""Episode construction across game variants, plus a small env wrapper.

``new_episode`` is the one entry point callers need: it reads the task off
the config, resolves the right train/eval split (cached, so repeated resets
do not re-hash the catalog), and returns the initial world state with its
first observation.
"""

from __future__ import annotations

from functools import lru_cache
from random import Random

from .engine import ACTIONS, Observation, StepResult, WorldState, reset_episode, step
from .rps import RpsSplit, make_rps_splits
from .worldgen import EpisodeConfig, SplitSpec, split_assignments


@lru_cache(maxsize=32)
def quest_splits(eval_fraction: float = 0.2, seed: int = 0) -> tuple[SplitSpec, SplitSpec]:
    return split_assignments(eval_fraction=eval_fraction, seed=seed)


def split_for(config: EpisodeConfig) -> SplitSpec | RpsSplit:
    """The split object an episode with this config draws from."""
    if config.task == "rps":
        return make_rps_splits(config.rps_kind, config.split_seed)
    train, ev = quest_splits(config.eval_fraction, config.split_seed)
    return train if config.split == "train" else ev


def new_episode(
    config: EpisodeConfig, rng: Random | None = None
) -> tuple[WorldState, Observation]:
    if config.task == "rps":
        from .rps import rps_episode

        return rps_episode(config, split=split_for(config), rng=rng)
    return reset_episode(config, split=split_for(config), rng=rng)


class Env:
    """Reset/step wrapper holding one episode at a time."""

    actions = ACTIONS

    def __init__(self, config: EpisodeConfig):
        self.config = config
        self.state: WorldState | None = None

    def reset(self, seed: int | None = None) -> Observation:
        cfg = self.config if seed is None else self.config.with_seed(seed)
        self.state, obs = new_episode(cfg)
        return obs

    def step(self, action: str) -> StepResult:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        return step(self.state, action)

    @property
    def done(self) -> bool:
        return self.state is None or self.state.done
