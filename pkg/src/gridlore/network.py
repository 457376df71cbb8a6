"""Policy network: text-conditioned convolutional torso with reading heads.

The observation grid becomes a bag-of-words embedding map plus positional
offsets.  Goal, inventory, and document text run through bidirectional LSTM
encoders; attention pools them into fixed-width codes.  Each torso layer
mixes the feature map with the text codes in both directions (text scales
and shifts the convolved map, the map gates a projected text vector), takes
a max-pooled summary, and feeds the summary back as the query for the next
layer's document attention.  Policy and baseline heads read the last summary.

Everything is built on the scratch autodiff tensors, double precision, one
observation at a time.  This is a verification-scale implementation: the
point is exact shapes, exact wiring, and finite-difference-clean gradients,
not training throughput.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .autodiff import (
    ShapeMismatch,
    Tensor,
    add,
    concat,
    conv2d,
    embed_bow_grid,
    embed_rows,
    exp,
    log,
    matmul,
    maxpool_hw,
    mul,
    narrow,
    neg,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    tanh,
    tsum,
)
from .engine import Observation
from .templates import build_vocab, tokenize

CHECKPOINT_VERSION = 1


class UnknownToken(KeyError):
    """A token is outside the model's vocabulary."""


class NotDistribution(ValueError):
    """entropy_loss input is not a probability vector."""


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; defaults give the reference model."""

    n_layers: int = 5
    channels: tuple[int, ...] = (16, 32, 64, 64, 64)
    residual_from: Optional[int] = 3  # 1-indexed layer whose output is re-added
    residual_to: Optional[int] = 5
    d_emb: int = 30
    goal_hidden: int = 10
    inv_hidden: int = 10
    vis_doc_hidden: int = 100
    share_goal_doc_encoder: bool = True
    head_hidden: int = 64
    action_count: int = 5
    no_task_attn: bool = False
    no_vis_attn: bool = False
    no_text_mod: bool = False

    def __post_init__(self) -> None:
        if len(self.channels) != self.n_layers:
            raise ValueError("channels must list one width per layer")
        dims = (self.d_emb, self.goal_hidden, self.inv_hidden, self.vis_doc_hidden,
                self.head_hidden, self.action_count, *self.channels)
        if any(d < 1 for d in dims):
            raise ValueError("all dimensions must be positive")
        if (self.residual_from is None) != (self.residual_to is None):
            raise ValueError("residual_from and residual_to must be set together")
        if self.residual_from is not None:
            if not 1 <= self.residual_from < self.residual_to <= self.n_layers:
                raise ValueError("residual must run forward within the layer stack")
            if self.channels[self.residual_from - 1] != self.channels[self.residual_to - 1]:
                raise ValueError("residual endpoints need equal channel counts")

    @property
    def d_text(self) -> int:
        # goal code + inventory code + goal-conditioned doc code + visual doc code
        return 4 * self.goal_hidden + 2 * self.inv_hidden + 2 * self.vis_doc_hidden

    @property
    def summary_dim(self) -> int:
        return self.channels[0]

    @property
    def o_dim(self) -> int:
        return self.channels[-1]

    def to_dict(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["channels"] = list(self.channels)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        doc = dict(doc)
        doc["channels"] = tuple(doc["channels"])
        return cls(**doc)


@dataclass
class LinearParams:
    w: Tensor  # (out, in)
    b: Tensor  # (out,)

    def apply(self, x: Tensor) -> Tensor:
        return add(matmul(self.w, x), self.b)


@dataclass
class LstmParams:
    w_in: Tensor  # (D, 4H) gate order: input, forget, cell, output
    w_rec: Tensor  # (H, 4H)
    b: Tensor  # (4H,)


@dataclass
class BiLstmParams:
    fwd: LstmParams
    bwd: LstmParams


@dataclass
class AttnParams:
    w: Tensor  # (D,)
    b: Tensor  # (1,)


@dataclass
class ConvParams:
    kernel: Tensor  # (C_out, C_in, kh, kw)
    bias: Tensor  # (C_out,)


@dataclass
class Film2Params:
    """One modulation layer: text scales/shifts the map, the map gates text."""

    w_gamma: LinearParams  # text -> per-channel scale
    w_beta: LinearParams  # text -> per-channel shift
    conv_vis: ConvParams  # main visual convolution
    conv_gamma: ConvParams  # map -> per-cell scale on the text vector
    conv_beta: ConvParams  # map -> per-cell shift on the text vector
    w_text: LinearParams  # text -> per-channel feature


@dataclass
class MlpParams:
    hidden: LinearParams
    out: LinearParams

    def apply(self, x: Tensor) -> Tensor:
        return self.out.apply(relu(self.hidden.apply(x)))


@dataclass
class PolicyNetParams:
    embed: Tensor  # (V, d_emb)
    goal_enc: BiLstmParams
    inv_enc: BiLstmParams
    vis_doc_enc: BiLstmParams
    doc_enc: Optional[BiLstmParams]  # None when sharing the goal encoder
    goal_attn: AttnParams
    inv_attn: AttnParams
    doc_attn: Optional[AttnParams]  # only under no_task_attn
    vis_doc_attn: Optional[AttnParams]  # only under no_vis_attn
    initial_conv: ConvParams  # 1x1, produces the layer-0 summary
    query_proj: tuple[LinearParams, ...]  # per layer: summary -> doc query
    layers: tuple[Film2Params, ...]
    out: LinearParams
    policy_head: MlpParams
    baseline_head: MlpParams


def _uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape))


def _init_linear(rng, d_in: int, d_out: int) -> LinearParams:
    return LinearParams(w=_uniform(rng, d_in, (d_out, d_in)), b=_uniform(rng, d_in, (d_out,)))


def _init_lstm(rng, d_in: int, hidden: int) -> LstmParams:
    return LstmParams(
        w_in=_uniform(rng, d_in, (d_in, 4 * hidden)),
        w_rec=_uniform(rng, hidden, (hidden, 4 * hidden)),
        b=_uniform(rng, hidden, (4 * hidden,)),
    )


def _init_bilstm(rng, d_in: int, hidden: int) -> BiLstmParams:
    return BiLstmParams(fwd=_init_lstm(rng, d_in, hidden), bwd=_init_lstm(rng, d_in, hidden))


def _init_attn(rng, d: int) -> AttnParams:
    return AttnParams(w=_uniform(rng, d, (d,)), b=_uniform(rng, d, (1,)))


def _init_conv(rng, c_in: int, c_out: int, k: int) -> ConvParams:
    fan_in = c_in * k * k
    return ConvParams(
        kernel=_uniform(rng, fan_in, (c_out, c_in, k, k)),
        bias=_uniform(rng, fan_in, (c_out,)),
    )


def _init_film(rng, c_in: int, c_out: int, d_text: int) -> Film2Params:
    return Film2Params(
        w_gamma=_init_linear(rng, d_text, c_out),
        w_beta=_init_linear(rng, d_text, c_out),
        conv_vis=_init_conv(rng, c_in, c_out, 3),
        conv_gamma=_init_conv(rng, c_in, c_out, 3),
        conv_beta=_init_conv(rng, c_in, c_out, 3),
        w_text=_init_linear(rng, d_text, c_out),
    )


def init_params(
    config: ModelConfig, vocab_size: int, rng: np.random.Generator | int = 0
) -> PolicyNetParams:
    """Fresh parameters, every array uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    d = config.d_emb
    layer_inputs = [d + 4] + [c + 2 for c in config.channels[:-1]]
    summary_dims = [config.summary_dim] + list(config.channels[:-1])
    return PolicyNetParams(
        embed=_uniform(rng, d, (vocab_size, d)),
        goal_enc=_init_bilstm(rng, d, config.goal_hidden),
        inv_enc=_init_bilstm(rng, d, config.inv_hidden),
        vis_doc_enc=_init_bilstm(rng, d, config.vis_doc_hidden),
        doc_enc=None if config.share_goal_doc_encoder else _init_bilstm(rng, d, config.goal_hidden),
        goal_attn=_init_attn(rng, 2 * config.goal_hidden),
        inv_attn=_init_attn(rng, 2 * config.inv_hidden),
        doc_attn=_init_attn(rng, 2 * config.goal_hidden) if config.no_task_attn else None,
        vis_doc_attn=_init_attn(rng, 2 * config.vis_doc_hidden) if config.no_vis_attn else None,
        initial_conv=_init_conv(rng, d + 2, config.summary_dim, 1),
        query_proj=tuple(
            _init_linear(rng, s, 2 * config.vis_doc_hidden) for s in summary_dims
        ),
        layers=tuple(
            _init_film(rng, c_in, c_out, config.d_text)
            for c_in, c_out in zip(layer_inputs, config.channels)
        ),
        out=_init_linear(rng, config.channels[-1], config.o_dim),
        policy_head=MlpParams(
            hidden=_init_linear(rng, config.o_dim, config.head_hidden),
            out=_init_linear(rng, config.head_hidden, config.action_count),
        ),
        baseline_head=MlpParams(
            hidden=_init_linear(rng, config.o_dim, config.head_hidden),
            out=_init_linear(rng, config.head_hidden, 1),
        ),
    )


def _lstm_pass(embeds: list[Tensor], p: LstmParams, reverse: bool) -> list[Tensor]:
    hidden = p.w_rec.shape[0]
    h = Tensor(np.zeros(hidden))
    c = Tensor(np.zeros(hidden))
    states: list[Tensor] = []
    order = range(len(embeds) - 1, -1, -1) if reverse else range(len(embeds))
    for t in order:
        z = add(add(matmul(embeds[t], p.w_in), matmul(h, p.w_rec)), p.b)
        i = sigmoid(narrow(z, 0, hidden))
        f = sigmoid(narrow(z, hidden, 2 * hidden))
        g = tanh(narrow(z, 2 * hidden, 3 * hidden))
        o = sigmoid(narrow(z, 3 * hidden, 4 * hidden))
        c = add(mul(f, c), mul(i, g))
        h = mul(o, tanh(c))
        states.append(h)
    if reverse:
        states.reverse()
    return states


def bilstm_forward(embeds: list[Tensor], p: BiLstmParams) -> Tensor:
    """Per-token forward/backward states, concatenated: (T, 2*hidden)."""
    if not embeds:
        raise ShapeMismatch("bilstm_forward needs at least one token")
    fwd = _lstm_pass(embeds, p.fwd, reverse=False)
    bwd = _lstm_pass(embeds, p.bwd, reverse=True)
    width = 2 * p.fwd.w_rec.shape[0]
    rows = [reshape(concat([f, b]), (1, width)) for f, b in zip(fwd, bwd)]
    return rows[0] if len(rows) == 1 else concat(rows, axis=0)


def self_attention(h_mat: Tensor, p: AttnParams) -> tuple[Tensor, Tensor]:
    """Learned-scored pooling: returns (context, weights)."""
    scores = add(matmul(h_mat, p.w), p.b)
    weights = softmax(scores)
    return matmul(weights, h_mat), weights


def attend(h_mat: Tensor, query: Tensor) -> tuple[Tensor, Tensor]:
    """Dot-product attention of ``query`` over rows: returns (context, weights)."""
    if h_mat.shape[1] != query.shape[0]:
        raise ShapeMismatch(f"attend widths differ: {h_mat.shape} vs {query.shape}")
    weights = softmax(matmul(h_mat, query))
    return matmul(weights, h_mat), weights


def positional_features(agent: tuple[int, int], width: int, height: int) -> np.ndarray:
    """Signed offsets to the agent, normalized: (2, H, W) with [dx/W, dy/H]."""
    ax, ay = agent
    xs = (np.arange(width) - ax) / width
    ys = (np.arange(height) - ay) / height
    out = np.zeros((2, height, width))
    out[0] = np.broadcast_to(xs[None, :], (height, width))
    out[1] = np.broadcast_to(ys[:, None], (height, width))
    return out


def film2_forward(
    x_vis: Tensor, x_text: Tensor, p: Film2Params, no_text_mod: bool = False
) -> tuple[Tensor, Tensor]:
    """One bidirectional modulation layer: returns (V, s)."""
    c_out = p.conv_vis.kernel.shape[0]

    def chan(v: Tensor) -> Tensor:
        return reshape(v, (c_out, 1, 1))

    gamma = p.w_gamma.apply(x_text)
    beta = p.w_beta.apply(x_text)
    conv = conv2d(x_vis, p.conv_vis.kernel, p.conv_vis.bias)
    v_vis = relu(add(mul(chan(1.0 + gamma), conv), chan(beta)))
    if no_text_mod:
        v = v_vis
    else:
        gamma_vis = conv2d(x_vis, p.conv_gamma.kernel, p.conv_gamma.bias)
        beta_vis = conv2d(x_vis, p.conv_beta.kernel, p.conv_beta.bias)
        text_feat = p.w_text.apply(x_text)
        v_text = relu(add(mul(1.0 + gamma_vis, chan(text_feat)), beta_vis))
        v = add(v_vis, v_text)
    return v, maxpool_hw(v)


@dataclass
class ObsTensors:
    """Tokenized observation ready for the network."""

    grid_ids: list[list[list[int]]]  # [y][x] -> token ids of that cell
    goal_ids: list[int]
    inv_ids: list[int]
    doc_ids: list[int]
    agent: tuple[int, int]
    width: int
    height: int


def encode_observation(obs: Observation, vocab: tuple[str, ...]) -> ObsTensors:
    index = {w: i for i, w in enumerate(vocab)}

    def ids_of(text: str) -> list[int]:
        out = []
        for tok in tokenize(text):
            if tok not in index:
                raise UnknownToken(tok)
            out.append(index[tok])
        return out

    width = len(obs.cells)
    height = len(obs.cells[0])
    grid = [[ids_of(obs.cells[x][y]) for x in range(width)] for y in range(height)]
    return ObsTensors(
        grid_ids=grid,
        goal_ids=ids_of(obs.goal),
        inv_ids=ids_of(obs.inventory),
        doc_ids=ids_of(" ".join(obs.doc)),
        agent=obs.agent,
        width=width,
        height=height,
    )


@dataclass
class PolicyOutput:
    y_policy: Tensor  # (action_count,) probabilities
    y_baseline: Tensor  # (1,)
    intermediates: dict = field(default_factory=dict)


def _embed_tokens(table: Tensor, ids: list[int]) -> list[Tensor]:
    d = table.shape[1]
    return [reshape(embed_rows(table, [i]), (d,)) for i in ids]


def policy_forward(
    obs: ObsTensors, params: PolicyNetParams, config: ModelConfig
) -> PolicyOutput:
    """Full forward pass from tokens to action distribution and baseline."""
    inter: dict = {}

    h_goal = bilstm_forward(_embed_tokens(params.embed, obs.goal_ids), params.goal_enc)
    c_goal, a_goal = self_attention(h_goal, params.goal_attn)
    h_inv = bilstm_forward(_embed_tokens(params.embed, obs.inv_ids), params.inv_enc)
    c_inv, a_inv = self_attention(h_inv, params.inv_attn)

    doc_embeds = _embed_tokens(params.embed, obs.doc_ids)
    doc_enc = params.goal_enc if config.share_goal_doc_encoder else params.doc_enc
    h_doc = bilstm_forward(doc_embeds, doc_enc)
    if config.no_task_attn:
        c_doc, a_doc = self_attention(h_doc, params.doc_attn)
    else:
        c_doc, a_doc = attend(h_doc, c_goal)

    h_visdoc = bilstm_forward(doc_embeds, params.vis_doc_enc)
    shared_visdoc = (
        self_attention(h_visdoc, params.vis_doc_attn) if config.no_vis_attn else None
    )

    x_pos = Tensor(positional_features(obs.agent, obs.width, obs.height))
    e_obs = embed_bow_grid(params.embed, obs.grid_ids)
    v = concat([e_obs, x_pos], axis=0)
    s = maxpool_hw(conv2d(v, params.initial_conv.kernel, params.initial_conv.bias))

    inter.update(
        h_goal=h_goal, h_inv=h_inv, h_doc=h_doc, h_visdoc=h_visdoc,
        c_goal=c_goal, c_inv=c_inv, c_doc=c_doc,
        attn_goal=a_goal, attn_inv=a_inv, attn_doc=a_doc,
        v0=v, s0=s, attn_visdoc=[], layer_v=[], layer_s=[],
    )

    residual_v = None
    for i in range(1, config.n_layers + 1):
        if config.no_vis_attn:
            c_visdoc, a_visdoc = shared_visdoc
        else:
            query = params.query_proj[i - 1].apply(s)
            c_visdoc, a_visdoc = attend(h_visdoc, query)
        x_text = concat([c_goal, c_inv, c_doc, c_visdoc])
        r = concat([v, x_pos], axis=0)
        v, s = film2_forward(r, x_text, params.layers[i - 1], config.no_text_mod)
        if i == config.residual_from:
            residual_v = v
        if i == config.residual_to and residual_v is not None:
            v = add(v, residual_v)
            s = maxpool_hw(v)
        inter["attn_visdoc"].append(a_visdoc)
        inter["layer_v"].append(v)
        inter["layer_s"].append(s)

    o = relu(params.out.apply(s))
    y_policy = softmax(params.policy_head.apply(o))
    y_baseline = params.baseline_head.apply(o)
    inter["o"] = o
    return PolicyOutput(y_policy=y_policy, y_baseline=y_baseline, intermediates=inter)


def entropy_loss(y) -> "Tensor | float":
    """-sum(y ln y) with 0 ln 0 = 0; input must be a probability vector."""
    data = y.data if isinstance(y, Tensor) else np.asarray(y, dtype=np.float64)
    if data.ndim != 1 or data.size == 0:
        raise NotDistribution("expected a non-empty vector")
    if (data < -1e-12).any() or abs(data.sum() - 1.0) > 1e-9:
        raise NotDistribution(f"entries must be >= 0 and sum to 1, got sum {data.sum()!r}")
    if isinstance(y, Tensor):
        return neg(tsum(mul(y, log(y))))
    positive = data[data > 0]
    return float(-(positive * np.log(positive)).sum() + 0.0)  # +0.0 avoids -0.0


def baseline_loss(advantages) -> "Tensor | float":
    """Root mean square of the advantages."""
    if isinstance(advantages, Tensor):
        if advantages.data.size == 0:
            raise ValueError("advantages must be non-empty")
        n = advantages.data.size
        return sqrt(tsum(mul(advantages, advantages)) * (1.0 / n))
    arr = np.asarray(advantages, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("advantages must be non-empty")
    return float(np.sqrt(np.mean(arr * arr)))


def _named_tensors(params) -> dict[str, Tensor]:
    """Flatten a parameter tree into dotted-name -> Tensor."""
    out: dict[str, Tensor] = {}

    def walk(node, prefix: str) -> None:
        if node is None:
            return
        if isinstance(node, Tensor):
            out[prefix] = node
        elif isinstance(node, tuple):
            for i, item in enumerate(node):
                walk(item, f"{prefix}.{i}")
        else:
            for f in fields(node):
                walk(getattr(node, f.name), f"{prefix}.{f.name}" if prefix else f.name)

    walk(params, "")
    return out


def save_checkpoint(
    path: str, params: PolicyNetParams, config: ModelConfig, vocab: tuple[str, ...]
) -> None:
    arrays = {
        name: {"shape": list(t.data.shape), "data": t.data.reshape(-1).tolist()}
        for name, t in _named_tensors(params).items()
    }
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "vocab": list(vocab),
        "arrays": arrays,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_checkpoint(path: str) -> tuple[PolicyNetParams, ModelConfig, tuple[str, ...]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"checkpoint version {doc.get('version')!r} not supported")
    config = ModelConfig.from_dict(doc["config"])
    vocab = tuple(doc["vocab"])
    params = init_params(config, len(vocab), rng=0)
    named = _named_tensors(params)
    stored = doc["arrays"]
    if set(named) != set(stored):
        raise ValueError("checkpoint arrays do not match this architecture")
    for name, tensor in named.items():
        shape = tuple(stored[name]["shape"])
        if shape != tensor.data.shape:
            raise ShapeMismatch(f"{name}: checkpoint {shape} vs model {tensor.data.shape}")
        tensor.data = np.asarray(stored[name]["data"], dtype=np.float64).reshape(shape)
    return params, config, vocab


def model_vocab(extra: tuple[str, ...] = ()) -> tuple[str, ...]:
    return build_vocab(extra=extra)


def _film_check_setup(seed: int = 0):
    """A 3-channel modulation layer on a 3x3 grid with a sum-of-outputs loss."""
    rng = np.random.default_rng(seed)
    film = _init_film(rng, c_in=2, c_out=3, d_text=5)
    x_vis = Tensor(rng.normal(size=(2, 3, 3)))
    x_text = Tensor(rng.normal(size=5))

    def loss() -> Tensor:
        v, s = film2_forward(x_vis, x_text, film)
        return add(tsum(v), tsum(s))

    params = list(_named_tensors(film).values()) + [x_vis, x_text]
    return loss, params


def _tiny_net_setup(seed: int = 0):
    """A 2-layer network on a 3x3 grid, entropy plus baseline loss."""
    config = ModelConfig(
        n_layers=2,
        channels=(4, 4),
        residual_from=1,
        residual_to=2,
        d_emb=4,
        goal_hidden=2,
        inv_hidden=2,
        vis_doc_hidden=3,
        head_hidden=4,
        action_count=5,
    )
    vocab_size = 10
    params = init_params(config, vocab_size, rng=np.random.default_rng(seed))
    obs = ObsTensors(
        grid_ids=[[[0], [1, 2], []], [[3], [], [4]], [[], [5, 6], [7]]],
        goal_ids=[8, 1, 9],
        inv_ids=[2],
        doc_ids=[0, 3, 9, 4, 8, 5],
        agent=(1, 1),
        width=3,
        height=3,
    )

    def loss() -> Tensor:
        out = policy_forward(obs, params, config)
        return add(entropy_loss(out.y_policy), baseline_loss(out.y_baseline + (-0.5)))

    return loss, list(_named_tensors(params).values())


def standard_grad_checks(eps: float = 1e-5) -> dict[str, float]:
    """The two reference finite-difference checks; both must come in < 1e-4."""
    from .autodiff import grad_check

    film_loss, film_params = _film_check_setup()
    net_loss, net_params = _tiny_net_setup()
    return {
        "film_layer": grad_check(film_loss, film_params, eps=eps),
        "tiny_network": grad_check(net_loss, net_params, eps=eps),
    }
