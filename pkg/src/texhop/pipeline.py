"""Train/generate orchestration, model persistence, and the size auditor.

A TextureModel bundles the fitted transform chain with the core generative
model. It persists to a small versioned binary container; the container is
also what the size auditor walks, so the reported parameter counts describe
the artifact on disk rather than some in-memory bookkeeping.

Persistence stores each hop's filter bank as one dense
(out_channels, window^2 * in_channels) matrix. For channel-wise hops that
embeds the per-group banks block-diagonally; the zero blocks are part of the
stored parameterization on purpose, so that the walked element count matches
the closed-form size formulas. Wall-clock provenance (fit timestamps, phase
timings) deliberately stays out of the byte stream: two runs with the same
seed must produce identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import CdfCodebook, Cluster, CoreModel, SdrModel, fit_core, fit_sdr, sample_core
from .errors import FormatError
from .image_io import Image, extract_patches
from .saab import (
    HopChain,
    HopSpec,
    SaabStage,
    default_hop_specs,
    fit_chain,
    forward_chain,
    inverse_chain,
)

__all__ = [
    "TrainConfig",
    "Provenance",
    "RunRecord",
    "TextureModel",
    "SizeReport",
    "train",
    "generate_patches",
    "serialize",
    "deserialize",
    "audit_size",
    "closed_form_size",
    "walk_parameters",
    "timing_report",
    "exemplar_digest",
]

MAGIC = b"TXHM"
FORMAT_VERSION = 1

_MAX_SEED = 2**64 - 1


# ---------------------------------------------------------------------------
# configuration and model types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Everything train() needs; serialized verbatim into the model file."""

    patch_size: int = 32
    patch_stride: int = 2
    hops: tuple[HopSpec, ...] | None = None  # None -> default_hop_specs()
    gamma: float = 0.0
    n_clusters: int = 50
    codebook_size: int = 200
    whiten_energy: float = 0.99
    rejection_percentile: float = 90.0
    rejection_threshold: float | None = None
    max_attempts: int = 100
    seed: int = 0

    def hop_specs(self) -> list[HopSpec]:
        return list(self.hops) if self.hops is not None else default_hop_specs()

    def validate(self) -> None:
        if self.patch_size < 2:
            raise ValueError(f"patch_size must be >= 2, got {self.patch_size}")
        if self.patch_stride < 1:
            raise ValueError(f"patch_stride must be >= 1, got {self.patch_stride}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.n_clusters < 1:
            raise ValueError(f"n_clusters must be >= 1, got {self.n_clusters}")
        if self.codebook_size < 1:
            raise ValueError(f"codebook_size must be >= 1, got {self.codebook_size}")
        if not 0.0 < self.whiten_energy <= 1.0:
            raise ValueError(f"whiten_energy must be in (0, 1], got {self.whiten_energy}")
        if not 0.0 <= self.rejection_percentile <= 100.0:
            raise ValueError(f"rejection_percentile must be in [0, 100], got {self.rejection_percentile}")
        if self.max_attempts < 1:
            raise ValueError(f"max_attempts must be >= 1, got {self.max_attempts}")
        if not 0 <= self.seed <= _MAX_SEED:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        size = self.patch_size
        for i, spec in enumerate(self.hop_specs()):
            if spec.window < 2:
                raise ValueError(f"hop {i}: window must be >= 2, got {spec.window}")
            if size % spec.window:
                raise ValueError(f"hop {i}: window {spec.window} does not divide extent {size}")
            size //= spec.window

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        d = json.loads(text)
        hops = d.pop("hops")
        if hops is not None:
            hops = tuple(HopSpec(**h) for h in hops)
        return cls(hops=hops, **d)


@dataclass
class Provenance:
    """Where a model came from. Timestamps and timings are in-memory only."""

    exemplar_hash: str
    seed: int
    fitted_at: float | None = None
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class RunRecord:
    """Wall-clock log of generation/quilting phases for timing_report."""

    generation: list[float] = field(default_factory=list)
    quilting: list[float] = field(default_factory=list)


@dataclass
class TextureModel:
    config: TrainConfig
    chain: HopChain
    core: CoreModel
    provenance: Provenance

    def __post_init__(self):
        if tuple(self.chain.core_shape) != tuple(self.core.core_shape):
            raise ValueError(
                f"chain core shape {self.chain.core_shape} != core model shape {self.core.core_shape}"
            )


def exemplar_digest(img: Image) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(img.data.shape, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(img.data).tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# train / generate
# ---------------------------------------------------------------------------

def train(exemplar: Image, config: TrainConfig | None = None) -> TextureModel:
    """Fit the full model on one exemplar image.

    Crops strided patches, fits the transform chain, pushes all patches to
    the core subspace, and fits the dimension reduction plus the cluster/ICA
    model there. Deterministic for a fixed config (all randomness derives
    from config.seed).
    """
    cfg = config if config is not None else TrainConfig()
    cfg.validate()
    if exemplar.height < cfg.patch_size or exemplar.width < cfg.patch_size:
        raise ValueError(
            f"exemplar {exemplar.height}x{exemplar.width} is smaller than "
            f"patch size {cfg.patch_size}"
        )
    t0 = time.perf_counter()
    patches = extract_patches(exemplar, cfg.patch_size, mode="strided", stride=cfg.patch_stride)
    chain = fit_chain(patches, cfg.hop_specs())
    core_coeff = forward_chain(chain, patches)
    sdr, reduced = fit_sdr(core_coeff, cfg.gamma)
    core = fit_core(
        sdr,
        reduced,
        n_clusters=cfg.n_clusters,
        codebook_size=cfg.codebook_size,
        seed=cfg.seed,
        whiten_energy=cfg.whiten_energy,
        rejection_percentile=cfg.rejection_percentile,
        rejection_threshold=cfg.rejection_threshold,
        max_attempts=cfg.max_attempts,
        clamp_codebook=True,
    )
    provenance = Provenance(
        exemplar_hash=exemplar_digest(exemplar),
        seed=cfg.seed,
        fitted_at=time.time(),
        timings={"analysis": time.perf_counter() - t0},
    )
    return TextureModel(config=cfg, chain=chain, core=core, provenance=provenance)


def generate_patches(
    model: TextureModel,
    count: int,
    seed: int,
    threads: int = 1,
    record: RunRecord | None = None,
) -> list[np.ndarray]:
    """Draw ``count`` patches from the model, coarse-to-fine.

    Patch i uses an rng derived from (seed, i), so the result is independent
    of evaluation order and worker count. Values are clipped to [0, 255];
    quantize with round-to-nearest when writing images.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    t0 = time.perf_counter()

    def one(i: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        core_sample = sample_core(model.core, rng)
        return np.clip(inverse_chain(model.chain, core_sample), 0.0, 255.0)

    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            patches = list(pool.map(one, range(count)))
    else:
        patches = [one(i) for i in range(count)]
    if record is not None:
        record.generation.append(time.perf_counter() - t0)
    return patches


def timing_report(model: TextureModel, record: RunRecord | None = None) -> dict:
    """Three-phase wall-clock breakdown.

    The analysis entry comes from the training run and is a one-time cost:
    every image generated from the same model file shares it, so it is
    flagged as amortized. A model loaded from disk reports analysis=None.
    """
    analysis = model.provenance.timings.get("analysis")
    generation = list(record.generation) if record else []
    quilting = list(record.quilting) if record else []
    return {
        "analysis": analysis,
        "generation": generation,
        "quilting": quilting,
        "total": (analysis or 0.0) + sum(generation) + sum(quilting),
        "analysis_amortized": True,
    }


# ---------------------------------------------------------------------------
# binary container
# ---------------------------------------------------------------------------
# Layout: MAGIC, u32 version, a flat stream of tagged records, u32 CRC32 of
# everything before it. Records are self-describing (kind byte, then either a
# fixed-size scalar, a length-prefixed byte string, or an array with section/
# dtype/shape headers), which lets the auditor walk a file without knowing
# the model structure.

_KIND_U64 = 1
_KIND_F64 = 2
_KIND_BYTES = 3
_KIND_ARRAY = 4

_DTYPE_F64 = 0
_DTYPE_I64 = 1
_DTYPES = {_DTYPE_F64: np.dtype("<f8"), _DTYPE_I64: np.dtype("<i8")}

# array section tags; STATE arrays are structural/diagnostic and not counted
# as model parameters by the auditor
SEC_STATE = 0
SEC_SDR = 1
SEC_ICHM_I = 2
SEC_ICHM_II = 3
SEC_ICHM_III = 4
_SEC_STAGE_BASE = 16


def _sec_stage(hop_index: int) -> int:
    return _SEC_STAGE_BASE + hop_index


def _section_name(code: int) -> str:
    if code >= _SEC_STAGE_BASE:
        return f"stage{code - _SEC_STAGE_BASE + 1}"
    return {SEC_SDR: "sdr", SEC_ICHM_I: "ichm_i", SEC_ICHM_II: "ichm_ii", SEC_ICHM_III: "ichm_iii"}[code]


class _Writer:
    def __init__(self):
        self.buf = bytearray()

    def u64(self, v: int) -> None:
        self.buf += struct.pack("<BQ", _KIND_U64, v)

    def f64(self, v: float) -> None:
        self.buf += struct.pack("<Bd", _KIND_F64, v)

    def bytes_(self, b: bytes) -> None:
        self.buf += struct.pack("<BQ", _KIND_BYTES, len(b))
        self.buf += b

    def shape(self, dims) -> None:
        for d in dims:
            self.u64(int(d))

    def array(self, section: int, arr: np.ndarray) -> None:
        a = np.ascontiguousarray(arr)
        if a.dtype == np.float64:
            code = _DTYPE_F64
        elif a.dtype == np.int64:
            code = _DTYPE_I64
        else:
            raise TypeError(f"cannot store dtype {a.dtype}")
        self.buf += struct.pack("<BBBB", _KIND_ARRAY, section, code, a.ndim)
        for d in a.shape:
            self.buf += struct.pack("<Q", d)
        self.buf += a.astype(_DTYPES[code], copy=False).tobytes()


class _Reader:
    def __init__(self, blob: bytes, start: int, end: int):
        self.blob = blob
        self.off = start
        self.end = end

    def _take(self, n: int) -> bytes:
        if self.off + n > self.end:
            raise FormatError(f"truncated model data at offset {self.off} (need {n} more bytes)")
        out = self.blob[self.off : self.off + n]
        self.off += n
        return out

    def _expect(self, kind: int, what: str) -> None:
        at = self.off
        if self._take(1)[0] != kind:
            raise FormatError(f"expected {what} record at offset {at}")

    def u64(self) -> int:
        self._expect(_KIND_U64, "integer")
        return struct.unpack("<Q", self._take(8))[0]

    def f64(self) -> float:
        self._expect(_KIND_F64, "float")
        return struct.unpack("<d", self._take(8))[0]

    def bytes_(self) -> bytes:
        self._expect(_KIND_BYTES, "byte string")
        (n,) = struct.unpack("<Q", self._take(8))
        return bytes(self._take(n))

    def shape(self, ndim: int) -> tuple[int, ...]:
        return tuple(self.u64() for _ in range(ndim))

    def array_header(self) -> tuple[int, int, tuple[int, ...]]:
        self._expect(_KIND_ARRAY, "array")
        section, code, ndim = struct.unpack("<BBB", self._take(3))
        if code not in _DTYPES:
            raise FormatError(f"unknown array dtype code {code} at offset {self.off - 2}")
        dims = struct.unpack(f"<{ndim}Q", self._take(8 * ndim))
        return section, code, dims

    def array(self) -> np.ndarray:
        _, code, dims = self.array_header()
        n = int(np.prod(dims, dtype=np.int64)) if dims else 1
        raw = self._take(8 * n)
        return np.frombuffer(raw, dtype=_DTYPES[code]).reshape(dims).copy()


def _dense_hop_matrix(stages: list[SaabStage]) -> np.ndarray:
    """Block-diagonal embedding of a hop's per-group filter banks."""
    rows = sum(s.out_channels for s in stages)
    cols = sum(s.block_dim for s in stages)
    dense = np.zeros((rows, cols))
    r = c = 0
    for s in stages:
        dense[r : r + s.out_channels, c : c + s.block_dim] = s.filter_matrix()
        r += s.out_channels
        c += s.block_dim
    return dense


def serialize(model: TextureModel) -> bytes:
    """Encode a model as bytes; identical models yield identical bytes."""
    w = _Writer()
    w.bytes_(model.config.to_json().encode("utf-8"))
    w.bytes_(model.provenance.exemplar_hash.encode("ascii"))
    w.u64(model.provenance.seed)

    chain = model.chain
    w.u64(chain.n_hops)
    w.shape(chain.shape_meta[0])
    for i, stages in enumerate(chain.hops):
        sec = _sec_stage(i)
        w.u64(len(stages))
        w.u64(stages[0].window)
        w.array(SEC_STATE, np.array([s.in_channels for s in stages], dtype=np.int64))
        w.array(SEC_STATE, np.array([s.out_channels for s in stages], dtype=np.int64))
        w.array(sec, _dense_hop_matrix(stages))
        w.array(sec, np.array([s.bias for s in stages]))
        w.array(SEC_STATE, np.concatenate([s.eigenvalues[: s.kept_ac] for s in stages]))
        w.array(SEC_STATE, np.array([int(s.degenerate) for s in stages], dtype=np.int64))
        w.shape(chain.shape_meta[i + 1])

    core = model.core
    sdr = core.sdr
    w.shape(sdr.core_shape)
    for c in range(sdr.core_shape[2]):
        w.array(SEC_STATE, sdr.means[c])
        w.array(SEC_SDR, sdr.bases[c])
        w.array(SEC_STATE, sdr.variances[c])

    w.u64(len(core.clusters))
    w.array(SEC_ICHM_I, np.array([cl.probability for cl in core.clusters]))
    for cl in core.clusters:
        w.array(SEC_STATE, cl.mean)
        w.array(SEC_ICHM_II, cl.whitening)
        w.array(SEC_STATE, cl.ica_unmixing)
        w.array(SEC_STATE, cl.ica_mixing)
        w.u64(int(cl.ica_fallback))
        w.array(SEC_ICHM_III, cl.cdf_codewords.astype(np.int64))
        w.array(SEC_ICHM_III, cl.cdf_lo)
        w.array(SEC_ICHM_III, cl.cdf_hi)
    w.array(SEC_ICHM_III, core.codebook.tables)
    w.f64(core.rejection_threshold)
    w.u64(core.max_attempts)

    body = MAGIC + struct.pack("<I", FORMAT_VERSION) + bytes(w.buf)
    return body + struct.pack("<I", zlib.crc32(body))


def _check_envelope(blob: bytes) -> _Reader:
    if len(blob) < 12:
        raise FormatError(f"model data is only {len(blob)} bytes; not a model container")
    if blob[:4] != MAGIC:
        raise FormatError("bad magic at offset 0; not a model container")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported container version {version} (expected {FORMAT_VERSION})")
    (stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    actual = zlib.crc32(blob[:-4])
    if stored != actual:
        raise FormatError(f"checksum mismatch at offset {len(blob) - 4}: corrupt model data")
    return _Reader(blob, 8, len(blob) - 4)


def deserialize(blob: bytes) -> TextureModel:
    """Decode bytes produced by serialize(); raises FormatError on damage."""
    r = _check_envelope(blob)
    config = TrainConfig.from_json(r.bytes_().decode("utf-8"))
    exemplar_hash = r.bytes_().decode("ascii")
    seed = r.u64()

    n_hops = r.u64()
    shape_meta = [r.shape(3)]
    hops: list[list[SaabStage]] = []
    group_sizes: list[list[int]] = []
    for _ in range(n_hops):
        n_groups = r.u64()
        window = r.u64()
        in_ch = r.array()
        out_ch = r.array()
        dense = r.array()
        bias = r.array()
        eigs = r.array()
        degen = r.array()
        out_shape = r.shape(3)
        if not (len(in_ch) == len(out_ch) == len(bias) == len(degen) == n_groups):
            raise FormatError("hop group headers disagree on group count")
        stages = []
        row = col = e0 = 0
        for g in range(n_groups):
            d = window * window * int(in_ch[g])
            oc = int(out_ch[g])
            if oc < 1 or row + oc > dense.shape[0] or col + d > dense.shape[1]:
                raise FormatError("filter matrix smaller than channel headers claim")
            block = dense[row : row + oc, col : col + d]
            stages.append(
                SaabStage(
                    window=int(window),
                    in_channels=int(in_ch[g]),
                    ac_filters=np.ascontiguousarray(block[1:]),
                    eigenvalues=eigs[e0 : e0 + oc - 1].copy(),
                    kept_ac=oc - 1,
                    bias=float(bias[g]),
                    degenerate=bool(degen[g]),
                )
            )
            row += oc
            col += d
            e0 += oc - 1
        if (row, col) != dense.shape or e0 != len(eigs):
            raise FormatError("filter matrix dimensions disagree with channel headers")
        hops.append(stages)
        group_sizes.append([int(v) for v in out_ch])
        shape_meta.append(out_shape)
    chain = HopChain(hops=hops, group_sizes=group_sizes, shape_meta=shape_meta)

    core_shape = r.shape(3)
    if core_shape != tuple(shape_meta[-1]):
        raise FormatError(f"core shape {core_shape} disagrees with chain output {shape_meta[-1]}")
    hw = core_shape[0] * core_shape[1]
    means, bases, variances = [], [], []
    for _ in range(core_shape[2]):
        mean = r.array()
        basis = r.array()
        var = r.array()
        if mean.shape != (hw,) or basis.ndim != 2 or basis.shape[0] != hw or var.shape != (basis.shape[1],):
            raise FormatError("reduction arrays disagree with the core shape")
        means.append(mean)
        bases.append(basis)
        variances.append(var)
    sdr = SdrModel(core_shape=core_shape, means=means, bases=bases, variances=variances)

    n_clusters = r.u64()
    probabilities = r.array()
    if probabilities.shape != (n_clusters,):
        raise FormatError("cluster probability vector length mismatch")
    clusters = []
    for i in range(n_clusters):
        mean = r.array()
        whitening = r.array()
        unmixing = r.array()
        mixing = r.array()
        fallback = bool(r.u64())
        codewords = r.array()
        lo = r.array()
        hi = r.array()
        k = whitening.shape[0] if whitening.ndim == 2 else 0
        if whitening.ndim != 2 or whitening.shape[1] != sdr.reduced_dim or mean.shape != (sdr.reduced_dim,):
            raise FormatError(f"cluster {i}: whitening/mean shape mismatch")
        if unmixing.shape != (k, k) or mixing.shape != (k, k):
            raise FormatError(f"cluster {i}: ICA matrices are not {k}x{k}")
        if not (codewords.shape == lo.shape == hi.shape == (k,)):
            raise FormatError(f"cluster {i}: CDF reference arrays are not length {k}")
        clusters.append(
            Cluster(
                probability=float(probabilities[i]),
                mean=mean,
                whitening=whitening,
                ica_unmixing=unmixing,
                ica_mixing=mixing,
                cdf_codewords=codewords.astype(np.int64),
                cdf_lo=lo,
                cdf_hi=hi,
                ica_fallback=fallback,
            )
        )
    tables = r.array()
    if tables.ndim != 2 or (tables.size and tables.shape[1] != 256):
        raise FormatError("codebook tables must be (W, 256)")
    for i, cl in enumerate(clusters):
        if cl.cdf_codewords.size and (
            cl.cdf_codewords.min() < 0 or cl.cdf_codewords.max() >= tables.shape[0]
        ):
            raise FormatError(f"cluster {i}: codeword index out of range")
    threshold = r.f64()
    max_attempts = r.u64()
    if r.off != r.end:
        raise FormatError(f"{r.end - r.off} unexpected trailing bytes at offset {r.off}")

    bounds = np.concatenate([[0.0], np.cumsum(probabilities)])
    bounds[-1] = 1.0
    core = CoreModel(
        sdr=sdr,
        clusters=clusters,
        codebook=CdfCodebook(tables=tables),
        interval_bounds=bounds,
        rejection_threshold=threshold,
        max_attempts=int(max_attempts),
    )
    provenance = Provenance(exemplar_hash=exemplar_hash, seed=seed)
    return TextureModel(config=config, chain=chain, core=core, provenance=provenance)


def walk_parameters(blob: bytes) -> dict[str, int]:
    """Count stored parameter elements per section by walking the container.

    Only the record framing is interpreted, not the model structure, so this
    is an independent check against the closed-form size formulas.
    """
    r = _check_envelope(blob)
    counts: dict[str, int] = {}
    while r.off < r.end:
        at = r.off
        kind = r._take(1)[0]
        if kind == _KIND_U64 or kind == _KIND_F64:
            r._take(8)
        elif kind == _KIND_BYTES:
            (n,) = struct.unpack("<Q", r._take(8))
            r._take(n)
        elif kind == _KIND_ARRAY:
            r.off = at
            section, _, dims = r.array_header()
            n = int(np.prod(dims, dtype=np.int64)) if dims else 1
            r._take(8 * n)
            if section != SEC_STATE:
                name = _section_name(section)
                counts[name] = counts.get(name, 0) + n
        else:
            raise FormatError(f"unknown record kind {kind} at offset {at}")
    return counts


# ---------------------------------------------------------------------------
# size audit
# ---------------------------------------------------------------------------

@dataclass
class SizeReport:
    """Closed-form parameter counts, optionally checked against a file walk."""

    components: dict[str, int]
    walked: dict[str, int] | None = None

    @property
    def total(self) -> int:
        return sum(self.components.values())

    @property
    def walked_total(self) -> int | None:
        return None if self.walked is None else sum(self.walked.values())

    @property
    def matches(self) -> bool | None:
        if self.walked is None:
            return None
        keys = set(self.components) | set(self.walked)
        return all(self.components.get(k, 0) == self.walked.get(k, 0) for k in keys)

    def lines(self) -> list[str]:
        out = []
        for name, value in self.components.items():
            if self.walked is None:
                out.append(f"{name:<10} {value:>12,}")
            else:
                got = self.walked.get(name, 0)
                mark = "ok" if got == value else f"MISMATCH (walked {got:,})"
                out.append(f"{name:<10} {value:>12,}  {mark}")
        out.append(f"{'total':<10} {self.total:>12,}")
        return out


def closed_form_size(
    k1: int,
    k2: int,
    d_r: int,
    n_clusters: int,
    n_cdfs: int,
    codebook_size: int,
    *,
    window: int = 2,
    in_channels: int = 3,
    core_spatial: int = 64,
) -> SizeReport:
    """Parameter counts from the scalar hyperparameters alone.

    Components: two transform stages (dense filter banks plus one bias per
    group), the spatial reduction bases, and the three core-model parts
    (cluster probabilities, whitening matrices, CDF references + codebook).
    """
    components = {
        "stage1": window * window * in_channels * k1 + 1,
        "stage2": window * window * k1 * k2 + k1,
        "sdr": core_spatial * d_r,
        "ichm_i": n_clusters,
        "ichm_ii": n_cdfs * d_r,
        "ichm_iii": 3 * n_cdfs + 256 * codebook_size,
    }
    return SizeReport(components=components)


def audit_size(model: TextureModel, blob: bytes | None = None) -> SizeReport:
    """Closed-form counts for a fitted model, checked against its container.

    The closed form is computed from the model's dimension scalars; the walk
    counts array elements actually present in the container bytes. Pass the
    bytes the model was loaded from to audit the stored file rather than a
    fresh re-encoding. The two routes must agree exactly.
    """
    chain = model.chain
    ks = chain.channel_counts
    in_counts = [chain.shape_meta[0][2]] + ks[:-1]
    components: dict[str, int] = {}
    for i, stages in enumerate(chain.hops):
        window = stages[0].window
        components[f"stage{i + 1}"] = window * window * in_counts[i] * ks[i] + len(stages)
    h, w, _ = model.core.core_shape
    d_r = model.core.sdr.reduced_dim
    n_cdfs = model.core.n_cdfs
    components["sdr"] = h * w * d_r
    components["ichm_i"] = len(model.core.clusters)
    components["ichm_ii"] = n_cdfs * d_r
    components["ichm_iii"] = 3 * n_cdfs + 256 * model.core.codebook.size
    walked = walk_parameters(blob if blob is not None else serialize(model))
    for name in components:
        walked.setdefault(name, 0)
    return SizeReport(components=components, walked=walked)
