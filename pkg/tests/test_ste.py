import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_binary, random_symmetric
from netdisrupt import (MonotoneLift, NetworkValidationError, disruption_lower_bound, dte_point_identified,
                        make_network, matrix_lift, spectrum, ste_field)
from netdisrupt.ste import implicit_counterfactual, paired_gaps


def _lifted_pair(rng, n):
    net0 = random_symmetric(rng, n)
    lam = spectrum(net0).eigenvalues
    knots = np.sort(rng.uniform(lam.min() - 0.1, lam.max() + 0.1, 4))
    knots = np.concatenate([[lam.min() - 1], knots, [lam.max() + 1]])
    vals = np.cumsum(rng.uniform(0.1, 2.0, knots.size)) - 2
    g = MonotoneLift(knots=tuple(knots), knot_values=tuple(vals))
    return net0, matrix_lift(g, net0)


# ---------------------------------------------------------------- ste_field

def test_identical_gives_zero_field(rng):
    net = random_symmetric(rng, 6)
    assert np.abs(ste_field(net, net, "treated").values).max() < 1e-12


def test_scaling_lift_untreated_basis(rng):
    net0 = random_symmetric(rng, 7)
    net1 = make_network(2 * net0.values, diagonal="keep")
    f = ste_field(net1, net0, "untreated")
    np.testing.assert_allclose(f.values, net0.values, atol=1e-10)


def test_toy_field_norm(toy):
    f = ste_field(*toy, "treated")
    gaps = paired_gaps(spectrum(toy[0]).eigenvalues, spectrum(toy[1]).eigenvalues)
    assert f.l2_squared() == pytest.approx((gaps ** 2).sum(), rel=1e-8)


def test_toy_flags_degeneracy(toy):
    # The star has a four-fold zero eigenvalue.
    assert ste_field(*toy, "untreated").degenerate


def test_basis_independence(rng):
    a, b = random_symmetric(rng, 8), random_symmetric(rng, 8)
    q, _ = np.linalg.qr(rng.normal(size=(8, 8)))
    norms = [ste_field(a, b, basis).l2_squared() for basis in ("treated", "untreated", q)]
    assert norms[1] == pytest.approx(norms[0], rel=1e-8)
    assert norms[2] == pytest.approx(norms[0], rel=1e-8)


def test_custom_basis_must_be_orthonormal(rng):
    a, b = random_symmetric(rng, 4), random_symmetric(rng, 4)
    with pytest.raises(NetworkValidationError):
        ste_field(a, b, np.ones((4, 4)))


def test_unequal_sizes_field_norm(rng):
    a, b = random_symmetric(rng, 5), random_symmetric(rng, 8)
    for basis in ("treated", "untreated"):
        f = ste_field(a, b, basis)
        assert f.values.shape == ((5, 5) if basis == "treated" else (8, 8))
        assert np.allclose(f.values, f.values.T)


def test_histogram_mass_sums_to_one(rng):
    f = ste_field(random_symmetric(rng, 6), random_symmetric(rng, 6))
    h = f.histogram(10)
    assert len(h["bin_edges"]) == 11
    assert sum(h["mass"]) == pytest.approx(1.0)


# ---------------------------------------------------------------- disruption bound

def test_disruption_identical_zero(rng):
    net = random_binary(rng, 6, 0.5)
    assert disruption_lower_bound(net, net) == 0


def test_disruption_toy_positive(toy):
    line, star = toy
    lam_s = np.sort(spectrum(star).eigenvalues)[::-1]
    lam_l = np.sort(spectrum(line).eigenvalues)[::-1]
    expect = ((lam_l - lam_s) ** 2).sum()
    assert disruption_lower_bound(line, star) == pytest.approx(expect)
    assert expect > 0


def test_disruption_constant_shift(rng):
    net0 = random_symmetric(rng, 6)
    c = 0.7
    net1 = make_network(net0.values + c, diagonal="keep")
    assert disruption_lower_bound(net1, net0) <= c ** 2 + 1e-12


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 10 ** 6))
def test_hoffman_wielandt_exhaustive(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_symmetric(rng, n), random_symmetric(rng, n)
    lb = disruption_lower_bound(a, b)
    A, B = a.values, b.values
    worst = min(np.sum((A[np.ix_(p, p)] - B) ** 2) for p in itertools.permutations(range(n))) / n ** 2
    assert lb <= worst + 1e-9


# ---------------------------------------------------------------- point identification

def test_point_identified_identical_step(rng):
    net = random_symmetric(rng, 5)
    res = dte_point_identified(net, net, grid=[-1e-6, 1e-6])
    np.testing.assert_array_equal(res.values, [0.0, 1.0])
    assert res.curve.lower is res.curve.upper


def test_point_identified_cubic_lift(rng):
    net0 = random_symmetric(rng, 8)
    g = MonotoneLift(coefficients=(0.0, 1.0, 0.0, 0.1))
    net1 = matrix_lift(g, net0)
    stt = ste_field(net1, net0, "treated").entries()
    truth = np.sort((net1.values - net0.values).ravel())
    assert np.max(np.abs(stt - truth)) < 1e-8


def test_point_identified_relabeling(rng):
    net0, net1 = _lifted_pair(rng, 7)
    grid = np.linspace(-3, 3, 41)
    base = dte_point_identified(net1, net0, grid=grid)
    moved = dte_point_identified(net1.permuted(rng.permutation(7)), net0, grid=grid)
    np.testing.assert_array_equal(base.values, moved.values)


def test_point_identified_lifted_pairs_agree(rng):
    for _ in range(20):
        net0, net1 = _lifted_pair(rng, int(rng.integers(3, 12)))
        res = dte_point_identified(net1, net0, grid=np.linspace(-5.0005, 5.0005, 201))
        assert res.sup_distance < 1e-8
        assert res.cdf_distance < 1e-8


def test_implicit_counterfactual_under_lift(rng):
    net0, net1 = _lifted_pair(rng, 6)
    cf = implicit_counterfactual(net1, net0)
    np.testing.assert_allclose(np.sort(cf.ravel()), np.sort(net0.values.ravel()), atol=1e-8)


# ---------------------------------------------------------------- matrix lift

def test_lift_identity(rng):
    net = random_symmetric(rng, 6)
    out = matrix_lift(lambda x: x, net)
    np.testing.assert_allclose(out.values, net.values, atol=1e-8)


def test_lift_square_on_psd(rng):
    X = rng.normal(size=(6, 3))
    net = make_network(X @ X.T, diagonal="keep")
    out = matrix_lift(MonotoneLift(coefficients=(0, 0, 1)), net)
    np.testing.assert_allclose(out.values, net.values @ net.values / 6, atol=1e-10)


def test_lift_zero(rng):
    out = matrix_lift(lambda x: np.zeros_like(x), random_symmetric(rng, 5))
    assert np.abs(out.values).max() < 1e-12


def test_lift_rejects_decreasing(rng):
    net = random_symmetric(rng, 5)
    with pytest.raises(NetworkValidationError):
        matrix_lift(lambda x: -x, net)
    with pytest.raises(NetworkValidationError):
        matrix_lift(MonotoneLift(coefficients=(0, -1)), net)
    with pytest.raises(NetworkValidationError):
        MonotoneLift(knots=(0, 1), knot_values=(1, 0))


def test_polynomial_square_rejected_on_mixed_sign_spectrum(rng):
    net = random_symmetric(rng, 6)
    with pytest.raises(NetworkValidationError):
        matrix_lift(MonotoneLift(coefficients=(0, 0, 1)), net)
