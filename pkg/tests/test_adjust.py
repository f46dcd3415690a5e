import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_binary, random_symmetric, star_matrix
from netdisrupt import (NetworkValidationError, adjusted_overlap_bounds, dpo_bounds, make_network, reduce,
                        sharp_overlap_set, svt_denoise)
from netdisrupt.adjust import reduced_overlap_range, svt_threshold
from netdisrupt.oracle import permuted_overlap


# ---------------------------------------------------------------- reduce

def test_reduce_constant():
    d = reduce(make_network(np.full((4, 4), 3.0)))
    np.testing.assert_allclose(d.residual.values, 0, atol=1e-15)
    np.testing.assert_allclose(d.row_offsets, 1.5)
    assert d.grand_offset == 0


def test_reduce_regular_graph_equal_offsets():
    cycle = np.roll(np.eye(6), 1, axis=1)
    d = reduce(make_network(cycle + cycle.T))
    assert np.ptp(d.row_offsets) < 1e-15


def test_reduce_star():
    d = reduce(make_network(star_matrix()))
    assert d.row_offsets[0] > d.row_offsets[1:].max()
    rows = d.residual.values.mean(axis=1)
    assert np.ptp(rows) < 1e-15


@pytest.mark.parametrize("variant", ["rowmean", "offdiag"])
def test_reduce_reconstructs(rng, variant):
    net = random_symmetric(rng, 7)
    d = reduce(net, variant)
    np.testing.assert_allclose(d.reconstruct(), net.values, atol=1e-12, rtol=0)


def test_offdiag_residual_shape(rng):
    d = reduce(random_symmetric(rng, 6), "offdiag")
    R = d.residual.values
    np.testing.assert_allclose(np.diag(R), 0, atol=1e-12)
    np.testing.assert_allclose(R.sum(axis=1), 0, atol=1e-12)


def test_unknown_variant(rng):
    with pytest.raises(ValueError):
        reduce(random_symmetric(rng, 4), "bogus")


@pytest.mark.parametrize("variant", ["rowmean", "offdiag"])
def test_reduced_range_brackets_every_permutation(rng, variant):
    import itertools
    for _ in range(20):
        A = random_symmetric(rng, 5).values
        B = random_symmetric(rng, 5).values
        lo, hi = reduced_overlap_range(A, B, variant)
        for p in itertools.permutations(range(5)):
            v = permuted_overlap(A, B, p)
            assert lo - 1e-9 <= v <= hi + 1e-9


# ---------------------------------------------------------------- adjusted bounds

def test_adjusted_toy_contains_sharp_set(toy):
    for variant in ("rowmean", "offdiag"):
        iv = adjusted_overlap_bounds(*toy, 0, 0, variant=variant)
        assert iv.lower <= 18 / 36 + 1e-12 and 20 / 36 - 1e-12 <= iv.upper


def test_offdiag_variant_is_sharp_on_toy(toy):
    iv = adjusted_overlap_bounds(*toy, 0, 0, variant="offdiag")
    assert iv.lower == pytest.approx(18 / 36) and iv.upper == pytest.approx(20 / 36)


def test_adjusted_identical_regular_within_unadjusted():
    cycle = np.roll(np.eye(8), 1, axis=1)
    net = make_network(cycle + cycle.T)
    base = dpo_bounds(net, net, 0, 0)
    adj = adjusted_overlap_bounds(net, net, 0, 0)
    assert base.lower <= adj.lower and adj.upper <= base.upper


def test_adjusted_constant_networks_point():
    a = make_network(np.ones((5, 5)), diagonal="keep")
    b = make_network(np.zeros((5, 5)))
    iv = adjusted_overlap_bounds(a, b, 0.5, 0.5)
    assert iv.lower == iv.upper == 0.0
    iv = adjusted_overlap_bounds(a, b, 1.0, 0.5)
    assert iv.lower == pytest.approx(1.0) and iv.upper == pytest.approx(1.0)


def test_adjusted_unequal_sizes_fall_back(rng):
    a, b = random_binary(rng, 5, 0.5), random_binary(rng, 6, 0.5)
    with pytest.warns(RuntimeWarning):
        iv = adjusted_overlap_bounds(a, b, 0, 0)
    base = dpo_bounds(a, b, 0, 0)
    assert (iv.lower, iv.upper) == (base.lower, base.upper)


@settings(max_examples=80, deadline=None)
@given(n=st.integers(3, 6), p1=st.floats(0.1, 0.9), p0=st.floats(0.1, 0.9), seed=st.integers(0, 10 ** 6),
       variant=st.sampled_from(["rowmean", "offdiag"]), diag=st.sampled_from(["zero", "keep"]))
def test_adjusted_contains_sharp_and_inside_unadjusted(n, p1, p0, seed, variant, diag):
    rng = np.random.default_rng(seed)
    a, b = random_binary(rng, n, p1, diag), random_binary(rng, n, p0, diag)
    iv = adjusted_overlap_bounds(a, b, 0, 0, variant=variant)
    base = dpo_bounds(a, b, 0, 0)
    s = sharp_overlap_set(a, b, 0, 0)
    assert iv.lower - 1e-12 <= s.min and s.max <= iv.upper + 1e-12
    assert base.lower <= iv.lower + 1e-15 and iv.upper <= base.upper + 1e-15


# ---------------------------------------------------------------- SVT

def test_svt_recovers_planted_rank_one():
    rng = np.random.default_rng(7)
    n = 200
    u = rng.uniform(0.2, 0.8, n)
    P = np.outer(u, u)
    noise = rng.normal(scale=0.1, size=(n, n))
    noise = np.triu(noise) + np.triu(noise, 1).T
    net = make_network(P + noise, diagonal="keep")
    den = svt_denoise(net, "auto", binary=False)
    err = np.sqrt(np.mean((den.values - P) ** 2))
    assert err < 0.1 / 3


def test_svt_zero_and_infinite(rng):
    z = make_network(np.zeros((5, 5)))
    assert not svt_denoise(z, "auto").values.any()
    net = random_binary(rng, 6, 0.5)
    assert not svt_denoise(net, math.inf).values.any()


def test_svt_rejects_nonpositive(rng):
    net = random_binary(rng, 6, 0.5)
    for tau in (0, -1.0):
        with pytest.raises(NetworkValidationError):
            svt_denoise(net, tau)


def test_svt_binary_clipped(rng):
    net = random_binary(rng, 30, 0.3)
    den = svt_denoise(net, "auto")
    assert den.values.min() >= 0 and den.values.max() <= 1


def test_svt_auto_threshold_formula(rng):
    net = random_binary(rng, 20, 0.3)
    p = net.values.mean()
    assert svt_threshold(net) == pytest.approx(2.01 * math.sqrt(20 * p * (1 - p)))
    w = random_symmetric(rng, 20)
    assert svt_threshold(w) == pytest.approx(2.01 * math.sqrt(20) * w.values.std())


def test_svt_idempotent(rng):
    for _ in range(10):
        net = random_symmetric(rng, 15)
        lam = np.abs(np.linalg.eigvalsh(net.values))
        tau = float(np.median(lam))
        if np.min(np.abs(lam - tau)) < 1e-9:
            tau += 1e-6
        once = svt_denoise(net, tau, binary=False)
        twice = svt_denoise(once, tau, binary=False)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-9)


def test_denoised_bounds_still_valid_shape(rng):
    a, b = random_binary(rng, 40, 0.2), random_binary(rng, 40, 0.25)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        iv = dpo_bounds(a, b, 0, 0, denoise="auto")
    assert 0 <= iv.lower <= iv.upper <= 1
