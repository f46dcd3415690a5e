"""Pre-processing adjustments: row/column reduction and spectral denoising.

Reduction splits a matrix into row offsets and a residual with equal row
sums. Under any relabeling the overlap of two matrices then separates into a
bilinear residual part, bounded by eigenvalue pairing, and a linear part
whose extremes over permutations are available exactly. Removing strong
degree heterogeneity from the residual is what tightens the bound.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import BoundInterval, IndicatorSpectra, _clip_interval, dpo_bounds, paired_products, unmasked_fraction
from .exceptions import NetworkValidationError
from .netmat import Network

VARIANTS = ("rowmean", "offdiag")
SVT_CONSTANT = 2.01


@dataclass(frozen=True)
class ReductionDecomposition:
    """``input = residual + r 1^T + 1 r^T + grand_offset + diag(diag_offsets)``.

    ``diag_offsets`` is zero for the ``rowmean`` variant.
    """

    residual: Network
    row_offsets: np.ndarray
    grand_offset: float
    diag_offsets: Optional[np.ndarray] = None
    variant: str = "rowmean"

    def reconstruct(self) -> np.ndarray:
        r = self.row_offsets
        out = self.residual.filled(0.0) + r[:, None] + r[None, :] + self.grand_offset
        if self.diag_offsets is not None:
            out = out + np.diag(self.diag_offsets)
        return out


def _reduce_matrix(A, variant):
    n = A.shape[0]
    if variant == "rowmean":
        r = A.mean(axis=1) - A.mean() / 2.0
        d = np.zeros(n)
    elif variant == "offdiag":
        if n < 3:
            raise NetworkValidationError("the off-diagonal reduction needs at least 3 agents")
        a = A.sum(axis=1) - np.diag(A)
        z = a.sum() / (2.0 * (n - 1))
        r = (a - z) / (n - 2)
        d = np.diag(A) - 2.0 * r
    else:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    residual = A - r[:, None] - r[None, :] - np.diag(d)
    return residual, r, d


def reduce(net: Network, variant: str = "rowmean") -> ReductionDecomposition:
    """Row-offset reduction of a symmetric network (masked cells read as 0).

    ``rowmean``: ``r_i = mean_j A_ij - mean(A) / 2``. The residual has all
    row sums equal to zero.

    ``offdiag``: offsets computed from off-diagonal row sums only, with the
    diagonal carried separately in ``diag_offsets``. The residual has a zero
    diagonal and zero row sums.
    """
    A = net.filled(0.0)
    residual, r, d = _reduce_matrix(A, variant)
    # The residual may be nonzero on masked cells, so it is returned unmasked.
    res_net = Network(labels=net.labels, values=residual, mask=None, group=net.group,
                      diagonal_policy=net.diagonal_policy)
    return ReductionDecomposition(residual=res_net, row_offsets=r, grand_offset=0.0,
                                  diag_offsets=d if variant == "offdiag" else None, variant=variant)


def _linear_extremes(r, b, d=None, bdiag=None):
    # Extremes over permutations p of sum_i 2 r[p(i)] b[i] (+ d[p(i)] bdiag[i]).
    if d is None or not np.any(d) or not np.any(bdiag):
        rs = np.sort(r)
        bs = np.sort(b)
        return 2.0 * float(np.dot(rs, bs[::-1])), 2.0 * float(np.dot(rs, bs))
    from scipy.optimize import linear_sum_assignment
    cost = 2.0 * np.outer(b, r) + np.outer(bdiag, d)
    rows, cols = linear_sum_assignment(cost)
    lo = float(cost[rows, cols].sum())
    rows, cols = linear_sum_assignment(cost, maximize=True)
    hi = float(cost[rows, cols].sum())
    return lo, hi


def reduced_overlap_range(A, B, variant="rowmean"):
    """Outer bounds on ``sum_ij A[p(i), p(j)] B[i, j]`` over permutations ``p``.

    Both matrices are square of equal size and symmetric; the result is on
    the raw (unnormalized) scale.
    """
    At, r, d = _reduce_matrix(A, variant)
    Bt, _, _ = _reduce_matrix(B, variant)
    la = np.linalg.eigvalsh(At)[::-1]
    lb = np.linalg.eigvalsh(Bt)[::-1]
    bil_lo = paired_products(la, lb, "anti")
    bil_hi = paired_products(la, lb, "co")
    lin_lo, lin_hi = _linear_extremes(r, B.sum(axis=1), d, np.diag(B))
    return bil_lo + lin_lo, bil_hi + lin_hi


def adjusted_overlap_bounds(net1: Network, net0: Network, y1: float, y0: float, *,
                            variant: str = "rowmean", denoise=None, spectra=None) -> BoundInterval:
    """Reduction-adjusted outer bounds on ``F(y1, y0)``.

    The adjusted interval is intersected with the unadjusted eigenvalue
    bounds, so it is never wider. Unequal group sizes fall back to the
    unadjusted bounds with a warning because the linear part needs a
    one-to-one matching of agents.
    """
    base = dpo_bounds(net1, net0, y1, y0, denoise=denoise, spectra=spectra)
    if net1.n != net0.n:
        warnings.warn("unequal group sizes: reduction adjustment skipped", RuntimeWarning)
        return base
    omega = unmasked_fraction(net1, net0)
    s1, s0 = spectra if spectra is not None else (IndicatorSpectra(net1, denoise), IndicatorSpectra(net0, denoise))
    A = s1.indicator(s1.count(y1))
    B = s0.indicator(s0.count(y0))
    lo, hi = reduced_overlap_range(A, B, variant)
    n2 = float(net1.n) ** 2
    lo, hi = lo / (n2 * omega), hi / (n2 * omega)
    lower, la = (lo, "reduction") if lo > base.lower else (base.lower, base.lower_active)
    upper, ua = (hi, "reduction") if hi < base.upper else (base.upper, base.upper_active)
    lower, upper = _clip_interval(lower, upper)
    return BoundInterval(lower, upper, la, ua)


# ----------------------------------------------------------------------------
# singular value thresholding
# ----------------------------------------------------------------------------

def svt_threshold(net: Network, binary: Optional[bool] = None, constant: float = SVT_CONSTANT) -> float:
    """Universal threshold on the matrix scale.

    Binary data: ``c * sqrt(N p (1 - p))`` with ``p`` the density of ones.
    Otherwise ``c * sqrt(N) * s`` with ``s`` the cell standard deviation.
    """
    vals = net.unmasked_values()
    if binary is None:
        binary = net.is_binary()
    if binary:
        p = float(vals.mean())
        return constant * math.sqrt(net.n * p * (1.0 - p))
    return constant * math.sqrt(net.n) * float(vals.std())


def svt_denoise(net: Network, threshold="auto", *, binary: Optional[bool] = None,
                constant: float = SVT_CONSTANT) -> Network:
    """Drop eigen-components with ``|lambda| < tau`` (matrix scale) and rebuild.

    Binary inputs are clipped back to ``[0, 1]`` after reconstruction.
    Masked cells stay masked.
    """
    if binary is None:
        binary = net.is_binary()
    if isinstance(threshold, str):
        if threshold != "auto":
            raise NetworkValidationError(f"threshold must be a number or 'auto', got {threshold!r}")
        tau = svt_threshold(net, binary, constant)
    else:
        tau = float(threshold)
        if not tau > 0:
            raise NetworkValidationError(f"SVT threshold must be positive, got {tau}")
    if math.isinf(tau):
        return net.with_values(np.zeros((net.n, net.n)))
    lam, vec = np.linalg.eigh(net.filled(0.0))
    keep = np.abs(lam) >= tau
    out = (vec[:, keep] * lam[keep]) @ vec[:, keep].T
    out = 0.5 * (out + out.T)
    if binary:
        out = np.clip(out, 0.0, 1.0)
    return net.with_values(out)
