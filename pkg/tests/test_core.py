import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp
from scipy.stats import ks_2samp

from texhop import (
    SamplingError,
    SdrModel,
    build_inverse_cdf,
    fit_core,
    fit_sdr,
    forward_sdr,
    inverse_sdr,
    match_histogram,
    sample_core,
)


def identity_sdr(dim_side=2, channels=1):
    """A pass-through reduction model for driving fit_core with raw vectors."""
    hw = dim_side * dim_side
    return SdrModel(
        core_shape=(dim_side, dim_side, channels),
        means=[np.zeros(hw) for _ in range(channels)],
        bases=[np.eye(hw) for _ in range(channels)],
        variances=[np.ones(hw) for _ in range(channels)],
    )


def two_blob_data(n=4000, p=0.7, seed=0, dim=4):
    """Well-separated clusters with distinct non-Gaussian marginals."""
    rng = np.random.default_rng(seed)
    na = int(round(n * p))
    a = np.stack(
        [
            rng.laplace(0.0, 1.0, na),
            rng.uniform(-2.0, 2.0, na),
            rng.laplace(0.0, 0.5, na),
            rng.uniform(-1.0, 1.0, na),
        ],
        axis=1,
    )[:, :dim] - 8.0
    b = np.stack(
        [
            rng.uniform(-1.5, 1.5, n - na),
            rng.laplace(0.0, 0.8, n - na),
            rng.uniform(-2.5, 2.5, n - na),
            rng.laplace(0.0, 0.3, n - na),
        ],
        axis=1,
    )[:, :dim] + 8.0
    return np.concatenate([a, b], axis=0)


# ---------------------------------------------------------------------------
# spatial dimension reduction
# ---------------------------------------------------------------------------

def test_sdr_keeps_everything_at_gamma_zero():
    rng = np.random.default_rng(0)
    x = rng.normal(100.0, 20.0, size=(300, 8, 8, 5))
    sdr, reduced = fit_sdr(x, gamma=0.0)
    assert sdr.reduced_dim == 64 * 5
    assert reduced.shape == (300, 320)
    for v in sdr.variances:
        assert np.all(np.diff(v) <= 0.0)


def test_sdr_round_trip_is_exact_when_complete():
    rng = np.random.default_rng(1)
    x = rng.normal(0.0, 3.0, size=(120, 4, 4, 2))
    sdr, reduced = fit_sdr(x, gamma=0.0)
    assert np.allclose(forward_sdr(sdr, x), reduced)
    back = inverse_sdr(sdr, reduced)
    assert np.max(np.abs(back - x)) <= 1e-10


def test_sdr_dimension_is_monotone_in_gamma():
    rng = np.random.default_rng(2)
    x = rng.normal(0.0, 1.0, size=(200, 4, 4, 3)) * np.linspace(0.1, 4.0, 16).reshape(4, 4, 1)
    dims = []
    for gamma in [0.0, 0.05, 0.2, 1.0, 4.0, 20.0]:
        try:
            sdr, _ = fit_sdr(x, gamma)
            dims.append(sdr.reduced_dim)
        except ValueError:
            dims.append(0)
    assert dims[0] == 48
    assert all(a >= b for a, b in zip(dims, dims[1:]))
    assert dims[-1] < 48


def test_sdr_rejects_bad_arguments():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(50, 4, 4, 1))
    with pytest.raises(ValueError):
        fit_sdr(x, gamma=-0.5)
    with pytest.raises(ValueError):
        fit_sdr(x[0], gamma=0.0)
    with pytest.raises(ValueError):
        fit_sdr(x, gamma=1e12)  # removes every component


def test_sdr_single_vector_round_trip():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(80, 2, 2, 3))
    sdr, reduced = fit_sdr(x, gamma=0.0)
    one = forward_sdr(sdr, x[7])
    assert one.shape == (sdr.reduced_dim,)
    assert np.allclose(inverse_sdr(sdr, one), x[7], atol=1e-10)


# ---------------------------------------------------------------------------
# inverse CDF machinery
# ---------------------------------------------------------------------------

def test_inverse_cdf_endpoints_and_monotonicity():
    rng = np.random.default_rng(5)
    values = rng.gamma(2.0, 3.0, size=5000) - 4.0
    table, lo, hi = build_inverse_cdf(values)
    assert table.shape == (256,)
    assert table[0] == 0.0 and table[-1] == 1.0
    assert np.all(np.diff(table) >= 0.0)
    assert lo == values.min() and hi == values.max()


def test_inverse_cdf_constant_values():
    table, lo, hi = build_inverse_cdf(np.full(10, 3.25))
    assert lo == hi == 3.25
    assert np.all(np.diff(table) >= 0.0)


def test_inverse_cdf_matches_empirical_quantiles():
    rng = np.random.default_rng(6)
    values = rng.normal(5.0, 2.0, size=20000)
    table, lo, hi = build_inverse_cdf(values)
    u = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    mapped = lo + np.interp(u, np.linspace(0, 1, 256), table) * (hi - lo)
    expected = np.quantile(values, u)
    assert np.max(np.abs(mapped - expected)) < 0.1


def test_match_histogram_reproduces_target_distribution():
    rng = np.random.default_rng(7)
    target = rng.laplace(1.0, 2.0, size=30000)
    table, lo, hi = build_inverse_cdf(target)
    matched = match_histogram(rng.standard_normal(20000), table, lo, hi)
    assert matched.min() >= lo and matched.max() <= hi
    stat = ks_2samp(matched, target).statistic
    assert stat <= 0.05


def test_build_inverse_cdf_rejects_empty():
    with pytest.raises(ValueError):
        build_inverse_cdf(np.array([]))


@given(
    hnp.arrays(
        np.float64,
        st.integers(1, 300),
        elements=st.floats(-1e6, 1e6, allow_nan=False),
    ),
    st.integers(0, 2**32 - 1),
)
def test_inverse_cdf_is_valid_for_any_sample(values, seed):
    table, lo, hi = build_inverse_cdf(values)
    assert table.shape == (256,)
    assert table[0] == 0.0 and table[-1] == 1.0
    assert np.all(np.diff(table) >= 0.0)
    assert lo == values.min() and hi == values.max()
    # matched draws never escape the observed range
    gaussians = np.random.default_rng(seed).standard_normal(64)
    matched = match_histogram(gaussians, table, lo, hi)
    assert np.all((matched >= lo) & (matched <= hi))


# ---------------------------------------------------------------------------
# cluster model fitting
# ---------------------------------------------------------------------------

def test_fit_core_two_blobs_structure():
    z = two_blob_data()
    sdr = identity_sdr()
    model = fit_core(sdr, z, n_clusters=2, codebook_size=8, seed=42)
    assert len(model.clusters) == 2
    probs = [c.probability for c in model.clusters]
    assert abs(sum(probs) - 1.0) < 1e-12
    assert min(probs) > 0.2  # blobs are 70/30
    assert model.interval_bounds[0] == 0.0 and model.interval_bounds[-1] == 1.0
    assert np.all(np.diff(model.interval_bounds) > 0.0)
    for cl in model.clusters:
        assert cl.whitening.shape[1] == sdr.reduced_dim
        assert cl.ica_unmixing.shape == (cl.ica_dim, cl.ica_dim)
        assert np.all(cl.cdf_lo <= cl.cdf_hi)
        assert cl.cdf_codewords.max() < model.codebook.size
    for row in model.codebook.tables:
        assert np.all(np.diff(row) >= 0.0)
        assert row[0] == 0.0 and row[-1] == 1.0


def test_fit_core_whitening_whitens():
    z = two_blob_data(seed=3)
    model = fit_core(identity_sdr(), z, n_clusters=2, codebook_size=8, seed=0)
    # assign training points to nearest cluster mean and check unit covariance
    means = np.stack([c.mean for c in model.clusters])
    labels = np.argmin(((z[:, None, :] - means[None]) ** 2).sum(axis=2), axis=1)
    for i, cl in enumerate(model.clusters):
        members = z[labels == i]
        w = (members - cl.mean) @ cl.whitening.T
        cov = np.cov(w, rowvar=False, ddof=0)
        assert np.max(np.abs(cov - np.eye(cl.ica_dim))) < 0.05


def test_select_cluster_interval_semantics():
    z = two_blob_data(seed=4)
    model = fit_core(identity_sdr(), z, n_clusters=2, codebook_size=4, seed=1)
    assert model.select_cluster(0.0) == 0
    assert model.select_cluster(1.0) == len(model.clusters) - 1
    b = model.interval_bounds
    # left-closed segments: u exactly at an interior boundary belongs to the next cluster
    assert model.select_cluster(float(b[1])) == 1
    mid = (b[0] + b[1]) / 2
    assert model.select_cluster(float(mid)) == 0


def test_fit_core_codebook_quantization_path():
    z = two_blob_data(n=3000, seed=5)
    full = fit_core(identity_sdr(), z, n_clusters=4, codebook_size=1, seed=2)
    assert full.codebook.size == 1  # heavy quantization still yields monotone tables
    assert np.all(np.diff(full.codebook.tables[0]) >= 0.0)
    with pytest.raises(ValueError):
        fit_core(identity_sdr(), z, n_clusters=2, codebook_size=10**6, seed=2)
    clamped = fit_core(identity_sdr(), z, n_clusters=2, codebook_size=10**6, seed=2, clamp_codebook=True)
    assert clamped.codebook.size == clamped.n_cdfs


def test_fit_core_rejects_bad_cluster_count():
    z = two_blob_data(n=50)
    with pytest.raises(ValueError):
        fit_core(identity_sdr(), z, n_clusters=0, codebook_size=1, seed=0)
    with pytest.raises(ValueError):
        fit_core(identity_sdr(), z, n_clusters=51, codebook_size=1, seed=0)


def test_fit_core_single_member_clusters_fall_back():
    rng = np.random.default_rng(8)
    z = rng.normal(size=(6, 4)) * 20.0
    model = fit_core(identity_sdr(), z, n_clusters=6, codebook_size=1, seed=0, clamp_codebook=True)
    assert all(cl.ica_fallback for cl in model.clusters)
    assert all(cl.ica_dim == 0 for cl in model.clusters)
    assert model.n_cdfs == 0
    assert model.codebook.size == 0
    # sampling still works with rejection disabled: returns cluster means
    sample = sample_core(model, np.random.default_rng(0))
    assert sample.shape == model.core_shape


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_core_deterministic_and_in_shape():
    z = two_blob_data(seed=9)
    model = fit_core(identity_sdr(), z, n_clusters=2, codebook_size=6, seed=3)
    a = sample_core(model, np.random.default_rng(123))
    b = sample_core(model, np.random.default_rng(123))
    c = sample_core(model, np.random.default_rng(124))
    assert a.shape == (2, 2, 1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_core_rejection_threshold_paths():
    z = two_blob_data(seed=10)
    model = fit_core(
        identity_sdr(), z, n_clusters=2, codebook_size=6, seed=4, rejection_threshold=-np.inf
    )
    assert sample_core(model, 0).shape == (2, 2, 1)

    impossible = fit_core(
        identity_sdr(), z, n_clusters=2, codebook_size=6, seed=4, rejection_threshold=np.inf
    )
    with pytest.raises(SamplingError):
        sample_core(impossible, 0)


def test_sampled_values_stay_within_cdf_ranges():
    z = two_blob_data(seed=11)
    model = fit_core(identity_sdr(), z, n_clusters=2, codebook_size=6, seed=5)
    lo = min(c.mean.min() for c in model.clusters) - 50
    hi = max(c.mean.max() for c in model.clusters) + 50
    for i in range(50):
        s = sample_core(model, np.random.default_rng(i))
        assert np.all(s > lo) and np.all(s < hi)


def test_generated_marginals_match_training_marginals():
    z = two_blob_data(n=6000, seed=12)
    sdr = identity_sdr()
    model = fit_core(
        sdr, z, n_clusters=2, codebook_size=8, seed=6, rejection_threshold=-np.inf
    )
    rng = np.random.default_rng(99)
    flat = np.stack([sample_core(model, rng).reshape(-1) for _ in range(4000)])
    means = np.stack([c.mean for c in model.clusters])
    labels = np.argmin(((flat[:, None, :] - means[None]) ** 2).sum(axis=2), axis=1)
    train_labels = np.argmin(((z[:, None, :] - means[None]) ** 2).sum(axis=2), axis=1)
    for i, cl in enumerate(model.clusters):
        gen_sources = (flat[labels == i] - cl.mean) @ cl.whitening.T @ cl.ica_unmixing.T
        train_sources = (z[train_labels == i] - cl.mean) @ cl.whitening.T @ cl.ica_unmixing.T
        for f in range(cl.ica_dim):
            stat = ks_2samp(gen_sources[:, f], train_sources[:, f]).statistic
            assert stat <= 0.08
