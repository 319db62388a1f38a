"""Generative model of the coarsest-subspace responses.

Fitting reduces each core channel's spatial map with a per-channel PCA
(dropping low-variance components), clusters the concatenated coefficients
with k-means, and models each cluster by PCA whitening, FastICA, and one
empirical inverse CDF per independent component. The inverse CDF tables are
vector-quantized into a shared codebook to shrink the model.

Sampling walks the fitted path backwards: pick a cluster through the unit
interval, draw Gaussian seeds, histogram-match them through the cluster's
inverse CDFs, mix and color back to a coefficient vector, and expand it to a
core tensor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr
from sklearn.cluster import KMeans
from sklearn.decomposition import FastICA
from sklearn.exceptions import ConvergenceWarning

from .errors import SamplingError

__all__ = [
    "SdrModel",
    "Cluster",
    "CdfCodebook",
    "CoreModel",
    "fit_sdr",
    "forward_sdr",
    "inverse_sdr",
    "fit_core",
    "sample_core",
    "match_histogram",
    "build_inverse_cdf",
]

CDF_BINS = 256
# eigenvalues below this fraction of the cluster's total variance are rank noise
_RANK_EPS = 1e-12


# ---------------------------------------------------------------------------
# spatial dimension reduction
# ---------------------------------------------------------------------------

@dataclass
class SdrModel:
    """Per-channel PCA over flattened core spatial maps."""

    core_shape: tuple[int, int, int]  # (h, w, channels)
    means: list[np.ndarray]  # per channel, (h*w,)
    bases: list[np.ndarray]  # per channel, (h*w, kept) with orthonormal columns
    variances: list[np.ndarray]  # per channel, kept component variances, descending

    @property
    def reduced_dim(self) -> int:
        return sum(b.shape[1] for b in self.bases)

    @property
    def kept_dims(self) -> list[int]:
        return [b.shape[1] for b in self.bases]


def _pca_descending(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Population-covariance PCA, eigenvalues descending, deterministic signs."""
    m = X.shape[0]
    mean = X.mean(axis=0)
    cov = (X.T @ X) / m - np.outer(mean, mean)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(-evals, kind="stable")
    evals = np.maximum(evals[order], 0.0)
    evecs = evecs[:, order]
    flip = evecs[np.argmax(np.abs(evecs), axis=0), np.arange(evecs.shape[1])] < 0
    evecs[:, flip] *= -1.0
    return evals, evecs


def fit_sdr(core_samples: np.ndarray, gamma: float) -> tuple[SdrModel, np.ndarray]:
    """Fit the per-channel spatial PCA and return (model, reduced vectors).

    Components with training variance >= ``gamma`` are kept; the same
    threshold applies to all channels. ``gamma`` is in squared units of the
    core responses, so it scales with the input pixel range.
    """
    x = np.asarray(core_samples, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"expected (n, h, w, C) core samples, got shape {x.shape}")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 core samples")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    n, h, w, C = x.shape
    means, bases, variances, reduced = [], [], [], []
    for c in range(C):
        Xc = x[..., c].reshape(n, h * w)
        evals, evecs = _pca_descending(Xc)
        kept = int(np.sum(evals >= gamma))
        means.append(Xc.mean(axis=0))
        bases.append(np.ascontiguousarray(evecs[:, :kept]))
        variances.append(evals[:kept].copy())
        reduced.append((Xc - means[-1]) @ bases[-1])
    model = SdrModel(core_shape=(h, w, C), means=means, bases=bases, variances=variances)
    if model.reduced_dim == 0:
        raise ValueError(f"gamma={gamma} removed every component; nothing left to model")
    return model, np.concatenate(reduced, axis=1)


def forward_sdr(sdr: SdrModel, x: np.ndarray) -> np.ndarray:
    """Project core tensors (.., h, w, C) to reduced vectors (.., reduced_dim)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    h, w, C = sdr.core_shape
    if x.shape[1:] != (h, w, C):
        raise ValueError(f"expected core shape {(h, w, C)}, got {x.shape[1:]}")
    parts = [
        (x[..., c].reshape(x.shape[0], h * w) - sdr.means[c]) @ sdr.bases[c] for c in range(C)
    ]
    z = np.concatenate(parts, axis=1)
    return z[0] if single else z


def inverse_sdr(sdr: SdrModel, z: np.ndarray) -> np.ndarray:
    """Expand reduced vectors back to core tensors (mean + basis @ coefficients)."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None]
    if z.shape[1] != sdr.reduced_dim:
        raise ValueError(f"expected vectors of length {sdr.reduced_dim}, got {z.shape[1]}")
    h, w, C = sdr.core_shape
    out = np.empty((z.shape[0], h, w, C))
    start = 0
    for c in range(C):
        k = sdr.bases[c].shape[1]
        maps = sdr.means[c] + z[:, start : start + k] @ sdr.bases[c].T
        out[..., c] = maps.reshape(-1, h, w)
        start += k
    return out[0] if single else out


# ---------------------------------------------------------------------------
# inverse CDF tables
# ---------------------------------------------------------------------------

def build_inverse_cdf(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Empirical inverse CDF of ``values`` as a (table, lo, hi) triple.

    The table holds ``CDF_BINS`` non-decreasing entries in [0, 1] sampled at
    uniform quantile levels; entry t maps back to the value lo + t * (hi - lo).
    The histogram uses equal-width bins between lo and hi, and the inverse is
    the generalized inverse of the piecewise-linear CDF (linear interpolation
    between bin edges).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot build a CDF from no values")
    lo, hi = float(v.min()), float(v.max())
    if hi - lo <= 0.0:
        return np.linspace(0.0, 1.0, CDF_BINS), lo, hi
    counts, _ = np.histogram(v, bins=CDF_BINS, range=(lo, hi))
    cdf = np.concatenate([[0.0], np.cumsum(counts) / v.size])  # at bin edges
    cdf[-1] = 1.0
    edges = np.arange(CDF_BINS + 1) / CDF_BINS  # normalized positions
    u = np.linspace(0.0, 1.0, CDF_BINS)
    k = np.searchsorted(cdf, u, side="left")
    k = np.clip(k, 1, CDF_BINS)
    denom = cdf[k] - cdf[k - 1]
    frac = np.where(denom > 0, (u - cdf[k - 1]) / np.where(denom > 0, denom, 1.0), 0.0)
    table = edges[k - 1] + frac * (edges[k] - edges[k - 1])
    table[0] = 0.0
    table[-1] = 1.0
    return np.maximum.accumulate(table), lo, hi


def match_histogram(gaussians: np.ndarray, table: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Map standard-normal draws through a dequantized inverse CDF table."""
    u = ndtr(np.asarray(gaussians, dtype=np.float64))
    t = np.interp(u, np.linspace(0.0, 1.0, len(table)), table)
    return lo + t * (hi - lo)


# ---------------------------------------------------------------------------
# cluster model
# ---------------------------------------------------------------------------

@dataclass
class Cluster:
    """One k-means cluster's whitening/ICA/CDF parameters."""

    probability: float
    mean: np.ndarray  # (D_r,)
    whitening: np.ndarray  # (K_c, D_r)
    ica_unmixing: np.ndarray  # (K_c, K_c)
    ica_mixing: np.ndarray  # (K_c, K_c)
    cdf_codewords: np.ndarray  # (K_c,) int indices into the codebook
    cdf_lo: np.ndarray  # (K_c,)
    cdf_hi: np.ndarray  # (K_c,)
    ica_fallback: bool = False  # ICA skipped or did not converge; identity unmixing
    coloring: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.coloring = np.linalg.pinv(self.whitening) if self.whitening.size else self.whitening.T.copy()

    @property
    def ica_dim(self) -> int:
        return self.whitening.shape[0]


@dataclass
class CdfCodebook:
    """Shared codebook of quantized inverse CDF tables."""

    tables: np.ndarray  # (W, CDF_BINS), each row non-decreasing in [0, 1]

    @property
    def size(self) -> int:
        return self.tables.shape[0]


@dataclass
class CoreModel:
    """Full generative model of the core subspace."""

    sdr: SdrModel
    clusters: list[Cluster]
    codebook: CdfCodebook
    interval_bounds: np.ndarray  # (N+1,) cumulative cluster probabilities, 0 .. 1
    rejection_threshold: float
    max_attempts: int = 100

    @property
    def core_shape(self) -> tuple[int, int, int]:
        return self.sdr.core_shape

    @property
    def n_cdfs(self) -> int:
        """Total number of inverse CDFs across clusters (F)."""
        return sum(c.ica_dim for c in self.clusters)

    def select_cluster(self, u: float | np.ndarray) -> int | np.ndarray:
        """Map uniform draws in [0, 1] to cluster indices via the interval representation."""
        idx = np.searchsorted(self.interval_bounds, u, side="right") - 1
        idx = np.clip(idx, 0, len(self.clusters) - 1)
        return int(idx) if np.isscalar(u) else idx

    def inverse_cdf(self, cluster_idx: int, comp_idx: int) -> tuple[np.ndarray, float, float]:
        """Dequantized (table, lo, hi) for one cluster component."""
        cl = self.clusters[cluster_idx]
        return (
            self.codebook.tables[cl.cdf_codewords[comp_idx]],
            float(cl.cdf_lo[comp_idx]),
            float(cl.cdf_hi[comp_idx]),
        )


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def _whiten_cluster(members: np.ndarray, energy: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """PCA-whitening of one cluster; returns (mean, whitening, whitened members)."""
    mean = members.mean(axis=0)
    evals, evecs = _pca_descending(members)
    total = evals.sum()
    if total <= 0.0:
        return mean, np.empty((0, members.shape[1])), np.empty((members.shape[0], 0))
    keep = evals > _RANK_EPS * total
    frac = np.cumsum(evals) / total
    # smallest leading set covering the energy target, restricted to true rank
    n_energy = int(np.searchsorted(frac, energy) + 1)
    k = min(n_energy, int(np.sum(keep)))
    whitening = (evecs[:, :k] / np.sqrt(evals[:k])).T
    return mean, whitening, (members - mean) @ whitening.T


def _fit_ica(whitened: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray, bool]:
    """Square FastICA on whitened data; identity fallback when not applicable."""
    m, k = whitened.shape
    if k == 0 or m < k + 1:
        eye = np.eye(k)
        return eye, eye.copy(), True
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        ica = FastICA(
            n_components=k,
            whiten=False,
            fun="logcosh",
            algorithm="parallel",
            max_iter=200,
            tol=1e-4,
            random_state=seed,
        )
        ica.fit(whitened)
        converged = not any(issubclass(w.category, ConvergenceWarning) for w in caught)
    if not converged:
        eye = np.eye(k)
        return eye, eye.copy(), True
    return ica.components_.copy(), ica.mixing_.copy(), False


def fit_core(
    sdr: SdrModel,
    reduced: np.ndarray,
    n_clusters: int,
    codebook_size: int,
    seed: int,
    *,
    whiten_energy: float = 0.99,
    rejection_percentile: float = 90.0,
    rejection_threshold: float | None = None,
    max_attempts: int = 100,
    clamp_codebook: bool = False,
) -> CoreModel:
    """Fit the cluster/ICA/CDF model on reduced core vectors.

    ``codebook_size`` must not exceed the total CDF count (with
    ``clamp_codebook`` it is silently capped instead, for callers that pick
    the size before knowing the CDF count). Pass ``rejection_threshold=-inf``
    to disable rejection, or leave it None to derive it from the given
    percentile of per-sample peak ICA magnitudes.
    """
    z = np.asarray(reduced, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != sdr.reduced_dim:
        raise ValueError(f"expected (n, {sdr.reduced_dim}) reduced vectors, got {z.shape}")
    n = z.shape[0]
    if not 1 <= n_clusters <= n:
        raise ValueError(f"cluster count {n_clusters} must be in [1, {n}]")

    ss = np.random.SeedSequence(seed)
    km_ss, vq_ss, ica_parent = ss.spawn(3)
    ica_seeds = ica_parent.spawn(n_clusters)

    km = KMeans(
        n_clusters=n_clusters,
        init="k-means++",
        n_init=10,
        max_iter=300,
        random_state=_seed_int(km_ss),
    ).fit(z)
    labels = km.labels_

    clusters: list[Cluster] = []
    tables: list[np.ndarray] = []
    peak_magnitudes: list[np.ndarray] = []
    probs: list[float] = []
    for i in range(n_clusters):
        members = z[labels == i]
        if members.shape[0] == 0:
            continue  # pruned; probabilities stay strictly positive
        mean, whitening, whitened = _whiten_cluster(members, whiten_energy)
        unmixing, mixing, fallback = _fit_ica(whitened, _seed_int(ica_seeds[i]))
        sources = whitened @ unmixing.T
        k = whitening.shape[0]
        codewords = np.zeros(k, dtype=np.int64)
        lo = np.zeros(k)
        hi = np.zeros(k)
        for f in range(k):
            table, lo[f], hi[f] = build_inverse_cdf(sources[:, f])
            codewords[f] = len(tables)
            tables.append(table)
        if k:
            peak_magnitudes.append(np.abs(sources).max(axis=1))
        probs.append(members.shape[0] / n)
        clusters.append(
            Cluster(
                probability=members.shape[0] / n,
                mean=mean,
                whitening=whitening,
                ica_unmixing=unmixing,
                ica_mixing=mixing,
                cdf_codewords=codewords,
                cdf_lo=lo,
                cdf_hi=hi,
                ica_fallback=fallback,
            )
        )

    n_cdfs = len(tables)
    if codebook_size > n_cdfs:
        if not clamp_codebook:
            raise ValueError(f"codebook size {codebook_size} exceeds the CDF count {n_cdfs}")
        codebook_size = n_cdfs
    if n_cdfs == 0:
        codebook = CdfCodebook(tables=np.empty((0, CDF_BINS)))
    elif codebook_size == n_cdfs:
        codebook = CdfCodebook(tables=np.asarray(tables))
    else:
        all_tables = np.asarray(tables)
        vq = KMeans(
            n_clusters=codebook_size,
            init="k-means++",
            n_init=10,
            max_iter=300,
            random_state=_seed_int(vq_ss),
        ).fit(all_tables)
        codebook = CdfCodebook(tables=vq.cluster_centers_.copy())
        assignment = vq.labels_
        start = 0
        for cl in clusters:
            cl.cdf_codewords = assignment[start : start + cl.ica_dim].astype(np.int64)
            start += cl.ica_dim

    bounds = np.concatenate([[0.0], np.cumsum(probs)])
    bounds[-1] = 1.0

    if rejection_threshold is None:
        if peak_magnitudes:
            rejection_threshold = float(
                np.percentile(np.concatenate(peak_magnitudes), rejection_percentile)
            )
        else:
            rejection_threshold = -np.inf

    return CoreModel(
        sdr=sdr,
        clusters=clusters,
        codebook=codebook,
        interval_bounds=bounds,
        rejection_threshold=float(rejection_threshold),
        max_attempts=max_attempts,
    )


def sample_core(model: CoreModel, rng: np.random.Generator | int) -> np.ndarray:
    """Draw one core tensor (h, w, C) from the fitted model.

    Deterministic given the generator state. Raises SamplingError when
    ``max_attempts`` consecutive draws fail the rejection test.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    threshold = model.rejection_threshold
    for _ in range(model.max_attempts):
        ci = model.select_cluster(float(rng.uniform()))
        cl = model.clusters[ci]
        g = rng.standard_normal(cl.ica_dim)
        matched = np.empty(cl.ica_dim)
        for f in range(cl.ica_dim):
            table, lo, hi = model.inverse_cdf(ci, f)
            matched[f] = match_histogram(g[f : f + 1], table, lo, hi)[0]
        accepted = threshold == -np.inf or (
            matched.size > 0 and np.max(np.abs(matched)) > threshold
        )
        if not accepted:
            continue
        z = cl.mean + cl.coloring @ (cl.ica_mixing @ matched)
        return inverse_sdr(model.sdr, z)
    raise SamplingError(
        f"no accepted core sample in {model.max_attempts} attempts; "
        f"rejection threshold {threshold} is likely misconfigured"
    )
