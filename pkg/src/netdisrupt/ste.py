"""Spectral treatment effects, the disruption lower bound, and monotone matrix lifts."""

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .bounds import DteCurve
from .exceptions import NetworkValidationError
from .netmat import EigenPair, Network, eigen_pairs, format_number, spectrum

DEGENERACY_GAP = 1e-9
BASES = ("treated", "untreated", "custom")


def _pad_sort_with_index(eigenvalues, length):
    """Descending pad-then-sort; returns values and source index (-1 for padding)."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    vals = np.concatenate([lam, np.zeros(length - lam.size)])
    src = np.concatenate([np.arange(lam.size), -np.ones(length - lam.size, dtype=np.int64)])
    # Stable sort on -value keeps real eigenvalues ahead of padding on ties.
    order = np.argsort(-vals, kind="stable")
    return vals[order], src[order]


def paired_gaps(lam1, lam0):
    """``sigma_r1 - sigma_r0`` after padding both lists to a common length."""
    length = max(len(lam1), len(lam0))
    s1, _ = _pad_sort_with_index(lam1, length)
    s0, _ = _pad_sort_with_index(lam0, length)
    return s1 - s0


def _is_degenerate(lam):
    lam = np.sort(np.asarray(lam))
    return bool(lam.size > 1 and np.min(np.diff(lam)) < DEGENERACY_GAP)


@dataclass(frozen=True, eq=False)
class SteField:
    """Spectral treatment effects expressed in one arm's eigenbasis.

    ``values`` is on the matrix scale (same units as the outcomes).
    """

    basis: str
    values: np.ndarray
    eigengap: np.ndarray
    degenerate: bool = False

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def l2_squared(self) -> float:
        """Integral of ``STE^2`` over the unit square."""
        return float(np.sum(self.values ** 2)) / self.n ** 2

    def entries(self) -> np.ndarray:
        return np.sort(self.values, axis=None)

    def cdf(self, grid) -> np.ndarray:
        """Fraction of entries ``<= y`` for each ``y`` in ``grid``."""
        e = self.entries()
        return np.searchsorted(e, np.asarray(grid, dtype=np.float64), side="right") / e.size

    def histogram(self, bins=40) -> dict:
        mass, edges = np.histogram(self.values.ravel(), bins=bins)
        return {"bin_edges": [float(x) for x in edges], "mass": [float(m) for m in mass / mass.sum()]}

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for row in self.values:
                fh.write(",".join(format_number(v) for v in row) + "\n")


def ste_field(net1: Network, net0: Network, basis: Union[str, np.ndarray] = "treated") -> SteField:
    """``sum_r (sigma_r1 - sigma_r0) phi_r phi_r^T`` in the chosen basis.

    Parameters
    ----------
    basis : {"treated", "untreated"} or ndarray
        ``"treated"`` uses the eigenvectors of ``net1``, ``"untreated"`` those
        of ``net0``. An ``N x N`` orthonormal matrix (unit columns) supplies a
        custom basis whose column ``r`` pairs with the ``r``-th largest gap
        position; it needs equal group sizes.

    Notes
    -----
    Within an eigenspace of repeated eigenvalues the basis is not unique and
    the field depends on the solver's choice; ``degenerate`` flags this.
    """
    lam1 = spectrum(net1).eigenvalues
    lam0 = spectrum(net0).eigenvalues
    length = max(lam1.size, lam0.size)
    s1, src1 = _pad_sort_with_index(lam1, length)
    s0, src0 = _pad_sort_with_index(lam0, length)
    gaps = s1 - s0
    degenerate = _is_degenerate(lam1) or _is_degenerate(lam0)

    if isinstance(basis, str):
        if basis == "treated":
            pairs, src = eigen_pairs(net1), src1
        elif basis == "untreated":
            pairs, src = eigen_pairs(net0), src0
        else:
            raise ValueError(f"basis must be 'treated', 'untreated' or a matrix, got {basis!r}")
        phi = pairs.eigenvectors
        keep = src >= 0
        # Padded positions carry no eigenfunction of the basis arm.
        values = (phi[:, src[keep]] * gaps[keep]) @ phi[:, src[keep]].T
        label = basis
    else:
        U = np.asarray(basis, dtype=np.float64)
        if net1.n != net0.n or U.shape != (net1.n, net1.n):
            raise NetworkValidationError("a custom basis needs equal group sizes and an N x N matrix")
        if not np.allclose(U.T @ U, np.eye(U.shape[0]), atol=1e-8):
            raise NetworkValidationError("custom basis columns are not orthonormal")
        phi = U * np.sqrt(U.shape[0])
        values = (phi * gaps) @ phi.T
        label = "custom"
    values = 0.5 * (values + values.T)
    return SteField(basis=label, values=values, eigengap=gaps, degenerate=degenerate)


def disruption_lower_bound(net1: Network, net0: Network) -> float:
    """``sum_r (sigma_r1 - sigma_r0)^2``, a lower bound on the mean squared change.

    Holds for every relabeling consistent with the observed arms.
    """
    gaps = paired_gaps(spectrum(net1).eigenvalues, spectrum(net0).eigenvalues)
    return float(np.dot(gaps, gaps))


@dataclass(frozen=True, eq=False)
class PointIdentifiedDte:
    """Distribution of treatment effects implied by rank invariance.

    ``values`` is the CDF of the requested basis. ``sup_distance`` is the
    largest gap between sorted STT and STU entries; ``cdf_distance`` is the
    largest gap between their CDFs on the grid.
    """

    grid: np.ndarray
    values: np.ndarray
    basis: str
    treated: np.ndarray
    untreated: np.ndarray
    sup_distance: float
    cdf_distance: float

    @property
    def curve(self) -> DteCurve:
        return DteCurve(grid=self.grid, lower=self.values, upper=self.values)


def dte_point_identified(net1: Network, net0: Network, basis: str = "treated", grid=None) -> PointIdentifiedDte:
    """Empirical CDF of STE entries on ``grid`` (defaults to the entries themselves)."""
    stt = ste_field(net1, net0, "treated")
    stu = ste_field(net1, net0, "untreated")
    if grid is None:
        grid = np.unique(np.concatenate([stt.entries(), stu.entries()]))
    grid = np.asarray(grid, dtype=np.float64)
    ct, cu = stt.cdf(grid), stu.cdf(grid)
    et, eu = stt.entries(), stu.entries()
    sup = float(np.max(np.abs(et - eu))) if et.size == eu.size else float("inf")
    if basis not in ("treated", "untreated"):
        raise ValueError(f"basis must be 'treated' or 'untreated', got {basis!r}")
    chosen = ct if basis == "treated" else cu
    return PointIdentifiedDte(grid=grid, values=chosen, basis=basis, treated=ct, untreated=cu,
                              sup_distance=sup, cdf_distance=float(np.max(np.abs(ct - cu), initial=0.0)))


# ----------------------------------------------------------------------------
# monotone lifts
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class MonotoneLift:
    """Nondecreasing scalar map applied to embedded eigenvalues.

    Give either ``knots`` and ``knot_values`` (piecewise linear, held
    constant beyond the end knots) or ``coefficients`` (polynomial,
    lowest degree first).
    """

    knots: Optional[tuple] = None
    knot_values: Optional[tuple] = None
    coefficients: Optional[tuple] = None

    def __post_init__(self):
        if (self.knots is None) == (self.coefficients is None):
            raise ValueError("give exactly one of knots or coefficients")
        if self.knots is not None:
            x = np.asarray(self.knots, dtype=np.float64)
            y = np.asarray(self.knot_values, dtype=np.float64)
            if x.shape != y.shape or x.size < 2 or np.any(np.diff(x) <= 0):
                raise ValueError("knots must be strictly increasing with one value each")
            if np.any(np.diff(y) < 0):
                raise NetworkValidationError("piecewise-linear lift decreases between knots")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.knots is not None:
            return np.interp(x, self.knots, self.knot_values)
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def check_nondecreasing(self, lo: float, hi: float, points=2001):
        if self.coefficients is None or hi <= lo:
            return
        deriv = np.polynomial.polynomial.polyder(self.coefficients)
        xs = np.linspace(lo, hi, points)
        crit = np.polynomial.polynomial.polyroots(deriv) if len(deriv) > 1 else np.array([])
        crit = np.real(crit[np.isreal(crit)])
        xs = np.concatenate([xs, crit[(crit >= lo) & (crit <= hi)]])
        dv = np.polynomial.polynomial.polyval(xs, deriv)
        if np.any(dv < -1e-12 * max(1.0, np.abs(dv).max())):
            raise NetworkValidationError(f"polynomial lift decreases on [{lo:.6g}, {hi:.6g}]")


def matrix_lift(g: Union[MonotoneLift, Callable], net: Network) -> Network:
    """Apply ``g`` to the embedded eigenvalues of ``net`` keeping its eigenvectors.

    Returns the matrix-scale network ``sum_r g(sigma_r) phi_r phi_r^T``.
    Masked cells are read as 0 and stay masked.
    """
    pairs: EigenPair = eigen_pairs(net)
    sig = pairs.eigenvalues
    lo, hi = float(sig.min()), float(sig.max())
    if isinstance(g, MonotoneLift):
        g.check_nondecreasing(lo, hi)
    gs = np.asarray(g(sig), dtype=np.float64)
    # sig is descending, so g(sig) must be nonincreasing along it.
    if np.any(np.diff(gs) > 1e-12 * max(1.0, float(np.abs(gs).max()))):
        raise NetworkValidationError("lift decreases on the spectrum of the network")
    values = pairs.reconstruct(gs)
    return net.with_values(0.5 * (values + values.T))


def implicit_counterfactual(net1: Network, net0: Network) -> np.ndarray:
    """``sum_r sigma_r0 phi_r1 phi_r1^T``: arm-0 spectrum placed on arm-1 eigenfunctions."""
    if net1.n != net0.n:
        raise NetworkValidationError("needs equal group sizes")
    p1 = eigen_pairs(net1)
    lam0 = spectrum(net0).eigenvalues
    return p1.reconstruct(lam0)
