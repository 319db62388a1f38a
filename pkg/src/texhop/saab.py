"""Data-driven block transforms (Saab) and multi-stage channel-wise chains.

A single stage partitions its input into non-overlapping ``window x window``
blocks, flattens each block (over the group's channels) to a d-vector and
projects it onto one DC filter (all-ones, unit norm) plus PCA filters of the
DC-removed residuals. A shared nonnegative bias is added to every retained
response so that downstream stages never see sign-ambiguous inputs.

A chain applies one joint stage to the raw input, then one independent stage
per retained channel at every later hop, halving the spatial extent each time
(window 2, stride = window). The inverse path reverses the chain group by
group, treating discarded channels as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "SaabStage",
    "HopSpec",
    "HopChain",
    "ChannelRule",
    "fit_saab",
    "forward_stage",
    "inverse_stage",
    "fit_chain",
    "forward_chain",
    "inverse_chain",
    "select_channels",
    "default_hop_specs",
]

# amount added on top of the worst negative training response
_BIAS_MARGIN = 1e-3
# residual trace below this means the training blocks were all identical
_DEGENERATE_TRACE = 1e-12


@dataclass(frozen=True)
class ChannelRule:
    """How many entries to keep from a descending eigenvalue list.

    ``fixed`` keeps ``min(k, len)``. ``knee`` keeps every eigenvalue whose
    ratio to the largest one is at least ``sensitivity`` (the knee where the
    energy flattens), clamped to ``[min_keep, max_keep]`` when set.
    """

    kind: str = "knee"
    k: int = 0
    sensitivity: float = 0.01
    min_keep: int | None = None
    max_keep: int | None = None


def select_channels(eigenvalues, rule: ChannelRule) -> int:
    """Return the number of leading entries of ``eigenvalues`` to retain."""
    ev = np.asarray(eigenvalues, dtype=np.float64)
    n = ev.size
    if rule.kind == "fixed":
        return min(int(rule.k), n)
    if rule.kind != "knee":
        raise ValueError(f"unknown channel rule {rule.kind!r}")
    if n == 0 or ev[0] <= 0.0:
        return 0
    count = int(np.sum(ev / ev[0] >= rule.sensitivity))
    if rule.min_keep is not None:
        count = max(count, rule.min_keep)
    if rule.max_keep is not None:
        count = min(count, rule.max_keep)
    return max(0, min(count, n))


@dataclass(frozen=True)
class SaabStage:
    """One fitted block transform over a channel group."""

    window: int
    in_channels: int
    ac_filters: np.ndarray  # (n_ac, d), unit rows orthogonal to DC, by descending eigenvalue
    eigenvalues: np.ndarray  # (n_ac,), descending, >= 0
    kept_ac: int
    bias: float
    degenerate: bool = False  # training blocks were all identical

    @property
    def block_dim(self) -> int:
        return self.window * self.window * self.in_channels

    @property
    def out_channels(self) -> int:
        return 1 + self.kept_ac

    @property
    def dc_filter(self) -> np.ndarray:
        d = self.block_dim
        return np.full(d, 1.0 / np.sqrt(d))

    def filter_matrix(self) -> np.ndarray:
        """Stacked (1 + kept_ac, d) matrix of the DC filter and kept AC filters."""
        return np.vstack([self.dc_filter[None, :], self.ac_filters[: self.kept_ac]])

    def trimmed(self) -> "SaabStage":
        """Drop AC filters beyond ``kept_ac`` (they are never used downstream)."""
        return replace(
            self,
            ac_filters=np.ascontiguousarray(self.ac_filters[: self.kept_ac]),
            eigenvalues=np.ascontiguousarray(self.eigenvalues[: self.kept_ac]),
        )


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"expected (H, W, C) or (n, H, W, C) input, got shape {x.shape}")


def _to_blocks(x: np.ndarray, window: int) -> np.ndarray:
    """(n, H, W, C) -> (n, H/w, W/w, w*w*C) of flattened non-overlapping blocks."""
    n, H, W, C = x.shape
    if H % window or W % window:
        raise ValueError(f"spatial dims {H}x{W} not divisible by window {window}")
    hb, wb = H // window, W // window
    x = x.reshape(n, hb, window, wb, window, C)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(n, hb, wb, window * window * C)


def _from_blocks(blocks: np.ndarray, window: int, channels: int) -> np.ndarray:
    """Inverse of :func:`_to_blocks`."""
    n, hb, wb, d = blocks.shape
    if d != window * window * channels:
        raise ValueError(f"block dim {d} does not match window {window} x channels {channels}")
    x = blocks.reshape(n, hb, wb, window, window, channels)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(n, hb * window, wb * window, channels)


def _complement_basis(d: int) -> np.ndarray:
    """Orthonormal (d, d-1) basis of the subspace orthogonal to the DC direction.

    Built from the Householder reflection mapping e_0 to the DC filter, so the
    orthogonality is exact to machine precision.
    """
    dc = np.full(d, 1.0 / np.sqrt(d))
    v = -dc.copy()
    v[0] += 1.0  # e_0 - dc; nonzero since dc has no unit entry for d > 1
    H = np.eye(d) - 2.0 * np.outer(v, v) / (v @ v)
    return H[:, 1:]


def _fit_components(blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """PCA of DC-removed block vectors.

    Returns (ac_filters (d-1, d), eigenvalues (d-1,) descending, degenerate).
    Eigenvalues equal the population variance of the corresponding filter
    response over the training blocks.
    """
    d = blocks.shape[1]
    Q = _complement_basis(d)
    y = blocks @ Q  # residual coordinates; DC component drops out exactly
    m = y.shape[0]
    mean = y.mean(axis=0)
    cov = (y.T @ y) / m - np.outer(mean, mean)
    if np.trace(cov) <= _DEGENERATE_TRACE:
        filters = Q.T.copy()
        return filters, np.zeros(d - 1), True
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(-evals, kind="stable")
    evals = np.maximum(evals[order], 0.0)
    filters = (Q @ evecs[:, order]).T  # rows orthonormal, exactly orthogonal to DC
    # fix signs so the largest-magnitude entry of each filter is positive
    for row in filters:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1.0
    return filters, evals, False


def _stage_bias(stage_filters: np.ndarray, blocks: np.ndarray) -> float:
    """Shared bias making every retained response nonnegative on the training blocks."""
    responses = blocks @ stage_filters.T
    worst = responses.min() if responses.size else 0.0
    return float((1.0 + _BIAS_MARGIN) * max(0.0, -worst))


def fit_saab(samples: np.ndarray, window: int, rule: ChannelRule | str = "all") -> SaabStage:
    """Fit one block transform on (n, H, W, C) training samples.

    ``rule`` selects how many AC components to keep from this stage's own
    eigenvalue spectrum; ``"all"`` keeps every component. For degenerate
    input (all blocks identical) the stage is still valid with ``kept_ac=0``
    and ``degenerate=True``.
    """
    x, _ = _as_batch(samples)
    blocks = _to_blocks(x, window).reshape(-1, window * window * x.shape[3])
    if blocks.shape[0] < 2:
        raise ValueError("need at least 2 training blocks")
    filters, evals, degenerate = _fit_components(blocks)
    if degenerate:
        kept = 0
    elif rule == "all":
        kept = filters.shape[0]
    else:
        kept = select_channels(evals, rule)
    stage = SaabStage(
        window=window,
        in_channels=x.shape[3],
        ac_filters=filters,
        eigenvalues=evals,
        kept_ac=kept,
        bias=0.0,
        degenerate=degenerate,
    )
    return replace(stage, bias=_stage_bias(stage.filter_matrix(), blocks))


def forward_stage(stage: SaabStage, x: np.ndarray) -> np.ndarray:
    """Apply one stage: (.., H, W, C_in) -> (.., H/w, W/w, 1 + kept_ac)."""
    xb, single = _as_batch(x)
    if xb.shape[3] != stage.in_channels:
        raise ValueError(f"expected {stage.in_channels} input channels, got {xb.shape[3]}")
    blocks = _to_blocks(xb, stage.window)
    y = blocks @ stage.filter_matrix().T + stage.bias
    return y[0] if single else y


def inverse_stage(stage: SaabStage, y: np.ndarray) -> np.ndarray:
    """Invert one stage; discarded channels are reconstructed as zero."""
    yb, single = _as_batch(y)
    if yb.shape[3] != stage.out_channels:
        raise ValueError(f"expected {stage.out_channels} response channels, got {yb.shape[3]}")
    blocks = (yb - stage.bias) @ stage.filter_matrix()
    x = _from_blocks(blocks, stage.window, stage.in_channels)
    return x[0] if single else x


@dataclass(frozen=True)
class HopSpec:
    """Per-hop fitting configuration.

    ``channels`` fixes the total retained channel count of the hop (each
    group's DC channel is always kept, so it must be at least the group
    count); ``"all"`` keeps everything; ``None`` selects the knee of the
    pooled AC eigenvalue spectrum, with ``min_channels``/``max_channels``
    clamping the total.
    """

    window: int = 2
    channels: int | str | None = None
    sensitivity: float = 0.01
    min_channels: int | None = None
    max_channels: int | None = None


def default_hop_specs() -> list[HopSpec]:
    """Two knee-selected hops bounded to 6-10 and 20-30 total channels."""
    return [
        HopSpec(window=2, min_channels=6, max_channels=10),
        HopSpec(window=2, min_channels=20, max_channels=30),
    ]


@dataclass
class HopChain:
    """An ordered sequence of fitted hops.

    ``hops[0]`` holds a single stage over all input channels jointly; every
    later hop holds one stage per channel retained by the previous hop.
    ``shape_meta[i]`` is the (H, W, C) tensor shape entering hop i, with the
    final output shape appended last.
    """

    hops: list[list[SaabStage]]
    group_sizes: list[list[int]] = field(default_factory=list)
    shape_meta: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def n_hops(self) -> int:
        return len(self.hops)

    @property
    def channel_counts(self) -> list[int]:
        """Total retained channels after each hop (K_1, K_2, ...)."""
        return [sum(sizes) for sizes in self.group_sizes]

    @property
    def core_shape(self) -> tuple[int, int, int]:
        return self.shape_meta[-1]

    def dims(self) -> list[int]:
        """Flattened dimension at the chain input and after each hop."""
        return [h * w * c for (h, w, c) in self.shape_meta]


def _ac_budget(spec: HopSpec, pooled: np.ndarray, n_groups: int) -> int:
    """Total AC channels to keep across a hop's groups, from the pooled spectrum."""
    if spec.channels == "all":
        return pooled.size
    if spec.channels is not None:
        total = int(spec.channels)
        if total < n_groups:
            raise ValueError(
                f"hop channel total {total} is below the group count {n_groups}; "
                "every group keeps its DC channel"
            )
        return min(total - n_groups, pooled.size)
    lo = None if spec.min_channels is None else max(0, spec.min_channels - n_groups)
    hi = None if spec.max_channels is None else max(0, spec.max_channels - n_groups)
    rule = ChannelRule(kind="knee", sensitivity=spec.sensitivity, min_keep=lo, max_keep=hi)
    return select_channels(pooled, rule)


def _fit_hop(x: np.ndarray, spec: HopSpec, channel_wise: bool) -> tuple[list[SaabStage], np.ndarray]:
    """Fit all groups of one hop on (n, H, W, C) input and return (stages, output)."""
    n, H, W, C = x.shape
    group_slices = [slice(k, k + 1) for k in range(C)] if channel_wise else [slice(0, C)]
    fitted = []
    for sl in group_slices:
        xg = np.ascontiguousarray(x[..., sl])
        blocks = _to_blocks(xg, spec.window).reshape(-1, spec.window**2 * xg.shape[3])
        filters, evals, degenerate = _fit_components(blocks)
        fitted.append((filters, evals, degenerate, blocks))

    # allocate the hop's AC budget across groups by global eigenvalue ranking
    pooled = np.sort(np.concatenate([f[1] for f in fitted]))[::-1]
    budget = _ac_budget(spec, pooled, len(group_slices))
    ranked = sorted(
        ((-lam, k, j) for k, f in enumerate(fitted) for j, lam in enumerate(f[1])),
    )
    kept_per_group = [0] * len(fitted)
    for _, k, j in ranked[:budget]:
        kept_per_group[k] += 1

    stages, outputs = [], []
    for (filters, evals, degenerate, blocks), kept, sl in zip(fitted, kept_per_group, group_slices):
        kept = 0 if degenerate else kept
        stage = SaabStage(
            window=spec.window,
            in_channels=sl.stop - sl.start,
            ac_filters=filters,
            eigenvalues=evals,
            kept_ac=kept,
            bias=0.0,
            degenerate=degenerate,
        )
        responses = blocks @ stage.filter_matrix().T
        worst = responses.min()
        bias = float((1.0 + _BIAS_MARGIN) * max(0.0, -worst))
        stages.append(replace(stage, bias=bias).trimmed())
        hb, wb = H // spec.window, W // spec.window
        outputs.append((responses + bias).reshape(n, hb, wb, -1))
    return stages, np.concatenate(outputs, axis=-1)


def fit_chain(samples: np.ndarray, hops: list[HopSpec] | None = None) -> HopChain:
    """Fit a channel-wise chain on (n, H, W, C) training patches."""
    x, _ = _as_batch(samples)
    if x.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    specs = default_hop_specs() if hops is None else list(hops)
    if not specs:
        raise ValueError("need at least one hop")
    chain = HopChain(hops=[], group_sizes=[], shape_meta=[x.shape[1:]])
    for i, spec in enumerate(specs):
        stages, x = _fit_hop(x, spec, channel_wise=i > 0)
        chain.hops.append(stages)
        chain.group_sizes.append([s.out_channels for s in stages])
        chain.shape_meta.append(x.shape[1:])
    return chain


def forward_chain(chain: HopChain, x: np.ndarray) -> np.ndarray:
    """Push (.., H, W, C) input through every hop of the chain."""
    xb, single = _as_batch(x)
    if xb.shape[1:] != chain.shape_meta[0]:
        raise ValueError(f"expected input shape {chain.shape_meta[0]}, got {xb.shape[1:]}")
    for i, stages in enumerate(chain.hops):
        if i == 0:
            xb = forward_stage(stages[0], xb)
        else:
            xb = np.concatenate(
                [forward_stage(s, xb[..., k : k + 1]) for k, s in enumerate(stages)], axis=-1
            )
    return xb[0] if single else xb


def inverse_chain(chain: HopChain, z: np.ndarray) -> np.ndarray:
    """Invert the chain from core responses back to the input space."""
    zb, single = _as_batch(z)
    if zb.shape[1:] != chain.shape_meta[-1]:
        raise ValueError(f"expected core shape {chain.shape_meta[-1]}, got {zb.shape[1:]}")
    for stages, sizes in zip(reversed(chain.hops), reversed(chain.group_sizes)):
        bounds = np.cumsum([0] + sizes)
        parts = [
            inverse_stage(s, zb[..., bounds[k] : bounds[k + 1]]) for k, s in enumerate(stages)
        ]
        zb = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=-1)
    return zb[0] if single else zb
