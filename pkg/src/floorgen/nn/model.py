"""Skip-connected encoder-decoder with boundary fusion and graph conditioning.

Layout per stage k (widths double as resolution halves):
  encoder   : [conv3 -> norm -> relu] x2, then 2x2 max-pool to descend
  bottleneck: the same double-conv block at the deepest resolution
  graph     : stacked graph-convolution layers, mean-pooled, projected, and
              tiled over the bottleneck grid, then concatenated channel-wise
  decoder   : nearest 2x upsample -> channel-reducing conv, concatenated with
              the stage's skip and the boundary image resized to stage
              resolution, then the double-conv block
  head      : 1x1 conv to class logits

The whole network is plain numpy with hand-written backward passes; the
finite-difference suite in tests/ checks every parameter tensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, DimensionError, InvalidGraph
from ..geometry import nearest_resize2d
from . import ops

PARAMS_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    classes: int
    stages: int = 4
    base_width: int = 32
    gcn_layers: int = 3
    gcn_hidden: int = 64
    graph_channels: int = 32
    norm_groups: int = 8
    in_channels: int = 3

    def __post_init__(self):
        if self.stages < 1:
            raise ConfigError("stages must be >= 1")
        if min(self.base_width, self.gcn_hidden, self.graph_channels, self.gcn_layers) < 1:
            raise ConfigError("widths and layer counts must be >= 1")
        if self.classes < 3:
            raise ConfigError("need >= 3 classes (background, structure, rooms)")
        if self.in_channels != 3:
            raise ConfigError("model consumes the 3-channel boundary encoding")

    @property
    def node_features(self) -> int:
        # one-hot over room classes plus the degree feature
        return (self.classes - 2) + 1

    def stage_width(self, k: int) -> int:
        return self.base_width * (1 << k)

    def to_dict(self) -> dict:
        return {
            "classes": self.classes,
            "stages": self.stages,
            "base_width": self.base_width,
            "gcn_layers": self.gcn_layers,
            "gcn_hidden": self.gcn_hidden,
            "graph_channels": self.graph_channels,
            "norm_groups": self.norm_groups,
            "in_channels": self.in_channels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        try:
            return cls(**{k: int(v) for k, v in d.items()})
        except TypeError as exc:
            raise ConfigError(f"bad model config: {exc}") from exc


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, np.ndarray]
    version: int = PARAMS_VERSION

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.config, {k: v.astype(dtype) for k, v in self.tensors.items()}, self.version)

    def check_finite(self) -> Optional[str]:
        for name, t in self.tensors.items():
            if not np.isfinite(t).all():
                return name
        return None


def _norm_groups(cfg: ModelConfig, channels: int) -> int:
    g = min(cfg.norm_groups, channels)
    while channels % g:
        g -= 1
    return g


def param_spec(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...], str]]:
    """Ordered (name, shape, kind) table; kind drives initialization."""
    spec: list[tuple[str, tuple[int, ...], str]] = []

    def block(prefix: str, cin: int, cout: int):
        spec.append((f"{prefix}.conv1.w", (cout, cin, 3, 3), "fan_in"))
        spec.append((f"{prefix}.norm1.gamma", (cout,), "one"))
        spec.append((f"{prefix}.norm1.beta", (cout,), "zero"))
        spec.append((f"{prefix}.conv2.w", (cout, cout, 3, 3), "fan_in"))
        spec.append((f"{prefix}.norm2.gamma", (cout,), "one"))
        spec.append((f"{prefix}.norm2.beta", (cout,), "zero"))

    s = cfg.stages
    for k in range(s):
        block(f"enc{k}", cfg.in_channels if k == 0 else cfg.stage_width(k - 1), cfg.stage_width(k))
    block(f"enc{s}", cfg.stage_width(s - 1), cfg.stage_width(s))
    for i in range(1, cfg.gcn_layers + 1):
        fin = cfg.node_features if i == 1 else cfg.gcn_hidden
        spec.append((f"gcn{i}.w", (fin, cfg.gcn_hidden), "fan_in"))
        spec.append((f"gcn{i}.b", (cfg.gcn_hidden,), "zero"))
    spec.append(("gproj.w", (cfg.gcn_hidden, cfg.graph_channels), "fan_in"))
    spec.append(("gproj.b", (cfg.graph_channels,), "zero"))
    for k in range(s - 1, -1, -1):
        up_in = cfg.stage_width(s) + cfg.graph_channels if k == s - 1 else cfg.stage_width(k + 1)
        w = cfg.stage_width(k)
        spec.append((f"dec{k}.up.w", (w, up_in, 3, 3), "fan_in"))
        block(f"dec{k}", w + w + cfg.in_channels, w)
    spec.append(("head.w", (cfg.classes, cfg.stage_width(0), 1, 1), "fan_in"))
    spec.append(("head.b", (cfg.classes,), "zero"))
    return spec


def _fan_in(shape: tuple[int, ...]) -> int:
    if len(shape) == 4:  # conv: (out, in, k, k)
        return shape[1] * shape[2] * shape[3]
    return shape[0]  # linear: (in, out)


def init_model(cfg: ModelConfig, seed: int, dtype=np.float32) -> ModelParams:
    """Fan-in-scaled uniform weights, unit norm scales, zero shifts."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x1717)))
    tensors: dict[str, np.ndarray] = {}
    for name, shape, kind in param_spec(cfg):
        if kind == "fan_in":
            lim = np.sqrt(6.0 / _fan_in(shape))
            tensors[name] = rng.uniform(-lim, lim, size=shape).astype(dtype)
        elif kind == "one":
            tensors[name] = np.ones(shape, dtype=dtype)
        else:
            tensors[name] = np.zeros(shape, dtype=dtype)
    return ModelParams(cfg, tensors)


@dataclass
class FeaturePyramid:
    skips: list[np.ndarray]  # stage k at H/2^k, width W0*2^k
    bottleneck: np.ndarray  # H/2^S, width W0*2^S


# ---------------------------------------------------------------------------
# Forward pieces (cache=None gives inference mode)
# ---------------------------------------------------------------------------


def _block(params: ModelParams, prefix: str, x: np.ndarray, caches):
    cfg = params.config
    y, c1 = ops.conv2d(x, params[f"{prefix}.conv1.w"])
    g = _norm_groups(cfg, y.shape[1])
    y, n1 = ops.group_norm(y, params[f"{prefix}.norm1.gamma"], params[f"{prefix}.norm1.beta"], g)
    y, r1 = ops.relu(y)
    y, c2 = ops.conv2d(y, params[f"{prefix}.conv2.w"])
    y, n2 = ops.group_norm(y, params[f"{prefix}.norm2.gamma"], params[f"{prefix}.norm2.beta"], g)
    y, r2 = ops.relu(y)
    if caches is not None:
        caches[prefix] = (c1, n1, r1, c2, n2, r2)
    return y


def _block_backward(params: ModelParams, prefix: str, dy: np.ndarray, caches, grads):
    c1, n1, r1, c2, n2, r2 = caches[prefix]
    dy = ops.relu_backward(dy, r2)
    dy, dg2, db2 = ops.group_norm_backward(dy, n2)
    grads[f"{prefix}.norm2.gamma"] += dg2
    grads[f"{prefix}.norm2.beta"] += db2
    dy, dw2 = ops.conv2d_backward(dy, params[f"{prefix}.conv2.w"], c2)
    grads[f"{prefix}.conv2.w"] += dw2
    dy = ops.relu_backward(dy, r1)
    dy, dg1, db1 = ops.group_norm_backward(dy, n1)
    grads[f"{prefix}.norm1.gamma"] += dg1
    grads[f"{prefix}.norm1.beta"] += db1
    dy, dw1 = ops.conv2d_backward(dy, params[f"{prefix}.conv1.w"], c1)
    grads[f"{prefix}.conv1.w"] += dw1
    return dy


def encoder_forward(params: ModelParams, boundaries: np.ndarray, caches=None) -> FeaturePyramid:
    """Boundary batch (B, 3, H, W) -> skip maps and bottleneck."""
    cfg = params.config
    b, c, h, w = boundaries.shape
    if c != cfg.in_channels:
        raise DimensionError(f"expected {cfg.in_channels} input channels, got {c}")
    div = 1 << cfg.stages
    if h % div or w % div:
        raise DimensionError(f"input dims {(h, w)} must be divisible by 2^{cfg.stages}")
    x = boundaries.astype(params["enc0.conv1.w"].dtype, copy=False)
    skips = []
    for k in range(cfg.stages):
        y = _block(params, f"enc{k}", x, caches)
        skips.append(y)
        x, pc = ops.maxpool2(y)
        if caches is not None:
            caches[f"pool{k}"] = pc
    bottleneck = _block(params, f"enc{cfg.stages}", x, caches)
    return FeaturePyramid(skips, bottleneck)


def gcn_layer(h: np.ndarray, adj: np.ndarray, w: np.ndarray, bias: np.ndarray, activate: bool = True):
    """One graph convolution: activation(adj @ h @ w + b)."""
    if h.shape[0] != adj.shape[0] or h.shape[1] != w.shape[0]:
        raise DimensionError(f"gcn shapes h{h.shape} adj{adj.shape} w{w.shape}")
    m = adj @ h
    z = m @ w + bias
    if activate:
        out, mask = ops.relu(z)
    else:
        out, mask = z, None
    return out, (m, mask)


def gcn_layer_backward(dout: np.ndarray, adj: np.ndarray, w: np.ndarray, cache):
    m, mask = cache
    dz = ops.relu_backward(dout, mask) if mask is not None else dout
    dw = m.T @ dz
    db = dz.sum(axis=0)
    dh = adj.T @ (dz @ w.T)
    return dh, dw, db


def graph_encode(params: ModelParams, features: np.ndarray, adjacency: np.ndarray, caches=None) -> np.ndarray:
    """Node features (N, F) -> graph vector (G,): GCN stack, mean-pool, affine."""
    cfg = params.config
    if features.ndim != 2 or features.shape[1] != cfg.node_features:
        raise InvalidGraph(
            f"expected (N, {cfg.node_features}) node features, got {features.shape}"
        )
    dtype = params["gcn1.w"].dtype
    h = features.astype(dtype, copy=False)
    adj = adjacency.astype(dtype, copy=False)
    layer_caches = []
    for i in range(1, cfg.gcn_layers + 1):
        h, lc = gcn_layer(
            h, adj, params[f"gcn{i}.w"], params[f"gcn{i}.b"], activate=i < cfg.gcn_layers
        )
        layer_caches.append(lc)
    pooled = h.mean(axis=0)
    vec = pooled @ params["gproj.w"] + params["gproj.b"]
    if caches is not None:
        caches.append((adj, layer_caches, pooled, h.shape[0]))
    return vec


def graph_encode_backward(params: ModelParams, dvec: np.ndarray, cache, grads):
    cfg = params.config
    adj, layer_caches, pooled, n = cache
    grads["gproj.w"] += np.outer(pooled, dvec)
    grads["gproj.b"] += dvec
    dpooled = params["gproj.w"] @ dvec
    dh = np.broadcast_to(dpooled / n, (n, dpooled.shape[0])).astype(dvec.dtype)
    for i in range(cfg.gcn_layers, 0, -1):
        dh, dw, db = gcn_layer_backward(dh, adj, params[f"gcn{i}.w"], layer_caches[i - 1])
        grads[f"gcn{i}.w"] += dw
        grads[f"gcn{i}.b"] += db


def tile_graph_features(vec: np.ndarray, h: int, w: int) -> np.ndarray:
    """Broadcast a graph vector to a (G, h, w) map."""
    if h < 1 or w < 1:
        raise DimensionError(f"bad tile dims {(h, w)}")
    return np.broadcast_to(vec[:, None, None], (vec.shape[0], h, w)).copy()


def tile_graph_features_backward(dmap: np.ndarray) -> np.ndarray:
    return dmap.sum(axis=(1, 2))


def decoder_forward(
    params: ModelParams,
    fused_bottleneck: np.ndarray,
    pyramid: FeaturePyramid,
    boundaries: np.ndarray,
    caches=None,
) -> np.ndarray:
    """Fused bottleneck (B, W_S + G, h, w) -> logits (B, C, H, W)."""
    cfg = params.config
    x = fused_bottleneck
    for k in range(cfg.stages - 1, -1, -1):
        u, uc = ops.upsample2(x)
        u, cc = ops.conv2d(u, params[f"dec{k}.up.w"])
        skip = pyramid.skips[k]
        bres = nearest_resize2d(boundaries, skip.shape[2], skip.shape[3]).astype(u.dtype)
        cat = np.concatenate([u, skip, bres], axis=1)
        x = _block(params, f"dec{k}", cat, caches)
        if caches is not None:
            caches[f"up{k}"] = (uc, cc, u.shape[1], skip.shape[1])
    logits, hc = ops.conv2d(x, params["head.w"])
    logits = logits + params["head.b"][None, :, None, None]
    if caches is not None:
        caches["head"] = hc
    return logits


@dataclass
class ForwardCaches:
    blocks: dict = field(default_factory=dict)
    graph: list = field(default_factory=list)
    bottleneck_channels: int = 0


def forward_logits(params: ModelParams, batch, caches: Optional[ForwardCaches] = None) -> np.ndarray:
    """Full network on a packed batch; returns (B, C, H, W) logits."""
    cfg = params.config
    boundaries = batch.boundaries
    if len(batch.graphs) != boundaries.shape[0]:
        raise DimensionError("batch graphs and boundaries disagree in length")
    blocks = caches.blocks if caches is not None else None
    pyramid = encoder_forward(params, boundaries, blocks)
    vecs = []
    for feats, adj in batch.graphs:
        vecs.append(graph_encode(params, feats, adj, caches.graph if caches is not None else None))
    gvec = np.stack(vecs)
    bh, bw = pyramid.bottleneck.shape[2], pyramid.bottleneck.shape[3]
    gmap = np.stack([tile_graph_features(v, bh, bw) for v in gvec])
    fused = np.concatenate([pyramid.bottleneck, gmap], axis=1)
    if caches is not None:
        caches.bottleneck_channels = pyramid.bottleneck.shape[1]
        caches.blocks["pyramid"] = pyramid
    return decoder_forward(params, fused, pyramid, boundaries, blocks)


def forward(params: ModelParams, batch) -> np.ndarray:
    """Class probabilities (B, C, H, W); softmax over the class axis."""
    return ops.softmax_channels(forward_logits(params, batch))


def predict(probabilities: np.ndarray) -> np.ndarray:
    """Per-pixel argmax; ties resolve to the lowest class id."""
    return probabilities.argmax(axis=1).astype(np.int32)


def zero_grads(params: ModelParams, dtype=None) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v, dtype=dtype or v.dtype) for k, v in params.tensors.items()}


def backward(params: ModelParams, batch, caches: ForwardCaches, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss wrt every parameter, given d loss/d logits."""
    cfg = params.config
    grads = zero_grads(params, dtype=dlogits.dtype)
    blocks = caches.blocks
    pyramid: FeaturePyramid = blocks["pyramid"]

    grads["head.b"] += dlogits.sum(axis=(0, 2, 3))
    dx, dhw = ops.conv2d_backward(dlogits, params["head.w"], blocks["head"])
    grads["head.w"] += dhw

    dskips: dict[int, np.ndarray] = {}
    for k in range(cfg.stages):
        dcat = _block_backward(params, f"dec{k}", dx, blocks, grads)
        uc, cc, u_ch, skip_ch = blocks[f"up{k}"]
        du = dcat[:, :u_ch]
        dskips[k] = dcat[:, u_ch : u_ch + skip_ch]
        # boundary slice of the concat is an input, not a parameter path
        du, dupw = ops.conv2d_backward(du, params[f"dec{k}.up.w"], cc)
        grads[f"dec{k}.up.w"] += dupw
        dx = ops.upsample2_backward(du, uc)

    w_s = caches.bottleneck_channels
    dbottleneck = dx[:, :w_s]
    dgmap = dx[:, w_s:]
    for i in range(dgmap.shape[0]):
        graph_encode_backward(params, tile_graph_features_backward(dgmap[i]), caches.graph[i], grads)

    dx = _block_backward(params, f"enc{cfg.stages}", dbottleneck, blocks, grads)
    for k in range(cfg.stages - 1, -1, -1):
        dy = ops.maxpool2_backward(dx, blocks[f"pool{k}"]) + dskips[k]
        dx = _block_backward(params, f"enc{k}", dy, blocks, grads)
    return grads
