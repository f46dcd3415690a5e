"""Exhaustive permutation search for sharp identified sets on small networks.

Feasible up to ``n = 10`` (3.6M relabelings). The enumeration visits every
permutation in lexicographic order; witnesses are the first permutation in
that order attaining the minimum and maximum.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bounds import IndicatorSpectra, paired_products
from .exceptions import NetworkValidationError
from .netmat import Network, threshold_indicator

MAX_ORACLE_N = 10

# Statistic values are rounded to this many decimals before deduplication so
# that floating summation order cannot split one achievable value in two.
_DEDUP_DECIMALS = 10


@dataclass(frozen=True)
class SharpSet:
    values: np.ndarray
    argmin_perm: np.ndarray
    argmax_perm: np.ndarray

    @property
    def min(self) -> float:
        return float(self.values[0])

    @property
    def max(self) -> float:
        return float(self.values[-1])

    def to_dict(self, full=True):
        out = {"min": self.min, "max": self.max,
               "argmin_perm": [int(i) for i in self.argmin_perm],
               "argmax_perm": [int(i) for i in self.argmax_perm]}
        if full:
            out["values"] = [float(v) for v in self.values]
        return out


def _check_sizes(net1: Network, net0: Network):
    if net1.n != net0.n:
        raise NetworkValidationError(
            f"sharp sets need equal group sizes, got {net1.n} and {net0.n}; "
            "use the eigenvalue bounds for unequal sizes")
    if net1.n > MAX_ORACLE_N:
        raise NetworkValidationError(f"n = {net1.n} exceeds the oracle limit of {MAX_ORACLE_N}")


def _sharp_from_matrices(A, B, transform, decimals=_DEDUP_DECIMALS) -> SharpSet:
    # statistic(p) = transform(sum_ij A[p(i), p(j)] B[i, j])
    raw = _kernels.overlap_all_permutations(A, B)
    stat = transform(raw)
    kmin = int(np.argmin(stat))
    kmax = int(np.argmax(stat))
    values = np.unique(np.round(stat, decimals))
    # Keep the endpoints bit-exact so witnesses reproduce them.
    values[0] = stat[kmin]
    values[-1] = stat[kmax]
    n = A.shape[0]
    return SharpSet(values=values,
                    argmin_perm=_kernels.nth_permutation(n, kmin),
                    argmax_perm=_kernels.nth_permutation(n, kmax))


def permuted_overlap(A, B, perm) -> float:
    """``sum_ij A[perm[i], perm[j]] * B[i, j]`` for a single permutation."""
    perm = np.asarray(perm, dtype=np.int64)
    return float(np.sum(np.asarray(A)[np.ix_(perm, perm)] * np.asarray(B)))


def sharp_overlap_set(net1: Network, net0: Network, y1: float, y0: float) -> SharpSet:
    """All achievable values of ``F(y1, y0)`` over relabelings of arm 1.

    The statistic is ``(1/n^2) sum_ij 1{Y1 <= y1}[P(i), P(j)] 1{Y0 <= y0}[i, j]``.
    """
    _check_sizes(net1, net0)
    A = threshold_indicator(net1, y1).filled(0.0)
    B = threshold_indicator(net0, y0).filled(0.0)
    n = net1.n
    return _sharp_from_matrices(A, B, lambda raw: raw / (n * n))


def orthogonal_relaxation(net1: Network, net0: Network, y1: float, y0: float):
    """Extremes of the overlap over orthogonal (not just permutation) relabelings.

    Returns ``(anti_paired, co_paired)`` products of the indicator spectra.
    """
    lam1 = IndicatorSpectra(net1).eigenvalues(y1)
    lam0 = IndicatorSpectra(net0).eigenvalues(y0)
    return paired_products(lam1, lam0, "anti"), paired_products(lam1, lam0, "co")


def _require_binary(net: Network, name: str):
    if not net.is_binary():
        raise NetworkValidationError(f"{name} must be binary (0/1) for destroyed/created counts")


def sharp_destroyed_created(net1: Network, net0: Network):
    """Sharp sets of destroyed and created link counts (unordered pairs).

    destroyed = 1/2 sum (1 - Y1 o P) Y0 and created = 1/2 sum (Y1 o P)(1 - Y0),
    with self-dyads excluded.
    """
    _check_sizes(net1, net0)
    _require_binary(net1, "net1")
    _require_binary(net0, "net0")
    A = net1.filled(0.0).copy()
    B = net0.filled(0.0).copy()
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(B, 0.0)
    # destroyed = (sum B - overlap) / 2 and created = (sum A - overlap) / 2.
    destroyed = _sharp_from_matrices(A, B, lambda raw: (B.sum() - raw) / 2)
    created = _sharp_from_matrices(A, B, lambda raw: (A.sum() - raw) / 2)
    return destroyed, created
