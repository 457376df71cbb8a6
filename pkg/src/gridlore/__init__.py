"""Grounded-policy grid games: text-documented worlds, agents, and a reader-policy model.

Episodes drop a player into a walled grid with monsters and items whose
meaning changes every episode; a small document plus a goal line spell out
which team to defeat and which item modifier overcomes which monster
element.  Winning requires actually reading.  The package provides the
environment family (including moving monsters, grouped entities, templated
language, and a cyclic-beats variant), train/eval splits, scripted reference
agents, replayable episode logs, a play service for humans, and a scratch
autodiff implementation of the text-conditioned policy network, verified by
finite differences.
"""

from .agents import (
    BASELINES,
    NoPlan,
    OracleAgent,
    RandomItemAgent,
    UnarmedAttacker,
    UniformRandomAgent,
    WinStats,
    baseline_policy,
    evaluate_agent,
    run_episode,
)
from .catalog import CatalogError, EntityCatalog, load_catalog
from .engine import (
    ACTIONS,
    EngineError,
    ItemInstance,
    MonsterInstance,
    Observation,
    PlacementFailed,
    StepResult,
    SteppedAfterDone,
    WorldState,
    combat_outcome,
    monster_transition,
    reset_episode,
    step,
)
from .episodes import Env, new_episode
from .logs import (
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
from .network import (
    ModelConfig,
    NotDistribution,
    PolicyNetParams,
    PolicyOutput,
    UnknownToken,
    baseline_loss,
    encode_observation,
    entropy_loss,
    init_params,
    load_checkpoint,
    model_vocab,
    policy_forward,
    save_checkpoint,
)
from .protocol import PlaySession, ProtocolError
from .rps import (
    AlphabetTooSmall,
    DependencyGraph,
    DivisionDomain,
    RpsSplit,
    make_rps_splits,
    redundancy_probability,
    rps_episode,
)
from .templates import (
    AmbiguousTemplate,
    Document,
    ExtractionError,
    MissingStatement,
    TemplatePack,
    build_vocab,
    extract_assignment,
    load_template_pack,
    render_texts,
)
from .worldgen import (
    PRESETS,
    DynamicsAssignment,
    EpisodeConfig,
    SplitExhausted,
    SplitSpec,
    count_space,
    preset,
    sample_dynamics,
    split_assignments,
)

__version__ = "1.0.0"
