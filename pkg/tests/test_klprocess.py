import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from klsde.errors import DomainError, ValidationError
from klsde.klprocess import (BLOCK_SIZE, BasisKind, GaussianDraw, KlBasis, draw_gaussians, kl_frequencies,
                             kl_path, kl_path_batch, standard_normals)


def test_frequencies():
    np.testing.assert_allclose(kl_frequencies(KlBasis(), 3), [math.pi / 2, 1.5 * math.pi, 2.5 * math.pi])
    np.testing.assert_allclose(kl_frequencies(KlBasis(BasisKind.BRIDGE), 2), [math.pi, 2 * math.pi])
    np.testing.assert_allclose(kl_frequencies(KlBasis(horizon=0.4), 1), [math.pi / 0.8])
    lam = kl_frequencies(KlBasis(horizon=3.0), 100)
    assert np.all(lam > 0) and np.all(np.diff(lam) > 0)
    with pytest.raises(DomainError):
        kl_frequencies(KlBasis(), 0)
    with pytest.raises(ValidationError):
        KlBasis(horizon=0.0)
    assert KlBasis(horizon=0.5).amplitude == pytest.approx(2.0)


def test_draws_are_deterministic():
    a, b = draw_gaussians(7, 2, 3), draw_gaussians(7, 2, 3)
    assert np.array_equal(a.z, b.z)
    assert not np.array_equal(a.z, draw_gaussians(8, 2, 3).z)
    assert a.z.shape == (2, 3) and a.m == 2 and a.n == 3
    with pytest.raises(ValueError):
        a.z[0, 0] = 1.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), start=st.integers(0, 500), count=st.integers(1, 150),
       split=st.integers(0, 150))
def test_batches_do_not_change_samples(seed, start, count, split):
    split = min(split, count)
    whole = standard_normals(seed, start, count, 3, 2)
    parts = np.concatenate([standard_normals(seed, start, split, 3, 2),
                            standard_normals(seed, start + split, count - split, 3, 2)])
    assert np.array_equal(whole, parts)
    j = count // 2
    assert np.array_equal(whole[j], draw_gaussians(seed, 3, 2, index=start + j).z)


def test_longer_draw_extends_shorter():
    short = standard_normals(3, 0, 70, 5, 4)
    long = standard_normals(3, 0, 70, 9, 4)
    assert np.array_equal(long[:, :5], short)


def test_seed_range():
    with pytest.raises(ValidationError):
        standard_normals(-1, 0, 1, 1, 1)
    with pytest.raises(ValidationError):
        standard_normals(2**64, 0, 1, 1, 1)


def test_normality_ks():
    z = standard_normals(11, 0, 1000, 100, 10).ravel()
    assert abs(z.mean()) < 4.0 / math.sqrt(z.size)
    assert abs(z.var() - 1.0) < 4.0 * math.sqrt(2.0 / z.size)
    # 1% critical value of the one-sample KS statistic
    assert stats.kstest(z, "norm").statistic < 1.63 / math.sqrt(z.size)


def test_columns_of_a_block_are_independent_streams():
    z = standard_normals(5, 0, BLOCK_SIZE, 200, 1)[:, :, 0]
    c = np.corrcoef(z)
    off = c[~np.eye(BLOCK_SIZE, dtype=bool)]
    assert np.abs(off).max() < 5.0 / math.sqrt(200)


def test_path_endpoints():
    d = draw_gaussians(1, 50, 3)
    assert np.array_equal(kl_path(KlBasis(), d, 0.0), np.zeros(3))
    assert np.abs(kl_path(KlBasis(BasisKind.BRIDGE, 2.0), d, 2.0)).max() < 1e-13
    with pytest.raises(DomainError):
        kl_path(KlBasis(), d, 1.5)


def test_telescoping_terms():
    basis = KlBasis(horizon=2.0)
    z = standard_normals(2, 0, 1, 11, 2)[0]
    t = 0.7
    lam = basis.frequencies(11)[-1]
    diff = kl_path_batch(basis, z, t) - kl_path_batch(basis, z[:10], t)
    np.testing.assert_allclose(diff, basis.amplitude * z[10] * math.sin(lam * t) / lam, rtol=1e-12, atol=1e-15)


def test_wiener_terminal_variance():
    z = standard_normals(17, 0, 100_000, 2000, 1)
    w1 = kl_path_batch(KlBasis(), z, 1.0)[:, 0]
    # truncated variance: 1 - 2 sum_{k>m} 1/lam_k^2 ~ 1 - 2/(pi^2 m)
    se = math.sqrt(2.0 / w1.size)
    assert abs(w1.var() - 1.0) < 3 * se


@pytest.mark.parametrize("kind,cov", [(BasisKind.WIENER, lambda s, t: min(s, t)),
                                      (BasisKind.BRIDGE, lambda s, t: min(s, t) - s * t)])
def test_covariance(kind, cov):
    grid = [0.1, 0.3, 0.5, 0.7, 0.9]
    z = standard_normals(23, 0, 100_000, 1000, 1)
    basis = KlBasis(kind)
    paths = np.stack([kl_path_batch(basis, z, t)[:, 0] for t in grid])
    for i, s in enumerate(grid):
        for j, t in enumerate(grid):
            prod = paths[i] * paths[j]
            se = prod.std() / math.sqrt(prod.size)
            assert abs(prod.mean() - cov(s, t)) < 4 * se


def test_horizon_rescaling_covariance():
    # on [0, T] the expansion reproduces min(s, t)
    basis = KlBasis(horizon=0.4)
    z = standard_normals(29, 0, 100_000, 1000, 1)
    a = kl_path_batch(basis, z, 0.1)[:, 0]
    b = kl_path_batch(basis, z, 0.4)[:, 0]
    for x, ref in ((a * a, 0.1), (a * b, 0.1), (b * b, 0.4)):
        assert abs(x.mean() - ref) < 4 * x.std() / math.sqrt(x.size)
