"""Eigenvalue outer bounds on the joint distribution of potential outcomes.

All probabilities are fractions of ordered, unmasked dyads (self-dyads
included unless masked). For networks with masked cells the spectral
quantities are computed on the full embedding and divided by the unmasked
fraction, which both arms must share.
"""

import threading
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import NetworkValidationError
from .netmat import Network, Spectrum, format_number, spectrum, threshold_indicator

MAX_CELL_SUPPORT = 12


@dataclass(frozen=True)
class BoundInterval:
    lower: float
    upper: float
    lower_active: str
    upper_active: str
    lower_at: Optional[tuple] = None
    upper_at: Optional[tuple] = None

    def contains(self, x, tol=0.0) -> bool:
        return self.lower - tol <= x <= self.upper + tol

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def scaled(self, factor: float) -> "BoundInterval":
        return BoundInterval(self.lower * factor, self.upper * factor, self.lower_active,
                             self.upper_active, self.lower_at, self.upper_at)

    def to_dict(self, **extra):
        out = dict(extra)
        out.update(lower=self.lower, upper=self.upper,
                   lower_active=self.lower_active, upper_active=self.upper_active)
        return out


def _clip_interval(lo, hi):
    lo = min(max(lo, 0.0), 1.0)
    hi = min(max(hi, 0.0), 1.0)
    if lo > hi:
        # Only reachable with denoised spectra; widen instead of inventing a point.
        lo, hi = hi, lo
    return lo, hi


# ----------------------------------------------------------------------------
# eigenvalue pairing
# ----------------------------------------------------------------------------

def _padded(a, length):
    a = np.asarray(a, dtype=np.float64)
    if a.size < length:
        a = np.concatenate([a, np.zeros(length - a.size)])
    return np.sort(a)[::-1]


def paired_products(s1, s0, mode="co") -> float:
    """Inner product of two descending eigenvalue lists.

    The shorter list is padded with zeros and both are re-sorted descending.
    ``co`` pairs equal ranks, ``anti`` pairs rank ``r`` with rank ``L - r + 1``.
    """
    a = s1.eigenvalues if isinstance(s1, Spectrum) else s1
    b = s0.eigenvalues if isinstance(s0, Spectrum) else s0
    length = max(len(a), len(b))
    a = _padded(a, length)
    b = _padded(b, length)
    if mode == "co":
        return float(np.dot(a, b))
    if mode == "anti":
        return float(np.dot(a, b[::-1]))
    raise ValueError(f"mode must be 'co' or 'anti', got {mode!r}")


# ----------------------------------------------------------------------------
# indicator spectra with memoization
# ----------------------------------------------------------------------------

class IndicatorSpectra:
    """Lazily computed spectra of ``1{net <= y}`` for one network.

    The indicator only changes at support values, so entries are keyed by the
    number of support values at or below the threshold. Safe for concurrent
    readers.
    """

    def __init__(self, net: Network, denoise=None):
        # denoise: None, a threshold, "auto", or ("auto", constant)
        self.net = net
        self.denoise = denoise
        self.support = net.support()
        self._cache = {}
        self._lock = threading.Lock()

    def count(self, y) -> int:
        return int(np.searchsorted(self.support, y, side="right"))

    def count_below(self, y) -> int:
        """Number of support values strictly below ``y``."""
        return int(np.searchsorted(self.support, y, side="left"))

    def threshold_for(self, k):
        if k <= 0:
            return -np.inf
        return float(self.support[k - 1])

    def indicator(self, k) -> np.ndarray:
        y = self.threshold_for(k)
        ind = threshold_indicator(self.net, y)
        if self.denoise is not None:
            from .adjust import svt_denoise
            if isinstance(self.denoise, tuple):
                tau, constant = self.denoise
                ind = svt_denoise(ind, tau, binary=True, constant=constant)
            else:
                ind = svt_denoise(ind, self.denoise, binary=True)
        return ind.filled(0.0)

    def eigenvalues_by_count(self, k) -> np.ndarray:
        k = min(max(int(k), 0), len(self.support))
        with self._lock:
            hit = self._cache.get(k)
        if hit is not None:
            return hit
        if k == 0 and self.denoise is None:
            lam = np.zeros(self.net.n)
        else:
            ind = self.indicator(k)
            lam = np.linalg.eigvalsh(ind)[::-1] / self.net.n
        lam.flags.writeable = False
        with self._lock:
            self._cache[k] = lam
        return lam

    def eigenvalues(self, y) -> np.ndarray:
        return self.eigenvalues_by_count(self.count(y))

    def spectrum(self, y) -> Spectrum:
        return Spectrum(self.eigenvalues(y), self.net.n, threshold=float(y))

    def marginal(self, y) -> float:
        """Exact fraction of unmasked cells ``<= y``."""
        vals = self.net.unmasked_values()
        return float(np.count_nonzero(vals <= y)) / vals.size


def unmasked_fraction(net1: Network, net0: Network) -> float:
    w1, w0 = net1.unmasked_fraction, net0.unmasked_fraction
    if abs(w1 - w0) > 1e-12:
        raise NetworkValidationError(
            f"arms have different unmasked fractions ({w1:.6g} vs {w0:.6g}); "
            "bounds need both embeddings to mask the same measure")
    return w1


def _spectra_pair(net1, net0, denoise, spectra):
    if spectra is not None:
        return spectra
    return IndicatorSpectra(net1, denoise), IndicatorSpectra(net0, denoise)


# ----------------------------------------------------------------------------
# DPO bounds
# ----------------------------------------------------------------------------

def dpo_from_eigenvalues(lam1, lam0, omega=1.0):
    """Bounds on the overlap of two indicators from their spectra.

    Returns ``(lower, upper, lower_active, upper_active)`` already divided
    by ``omega`` but not clipped.
    """
    m1 = float(np.dot(lam1, lam1))
    m0 = float(np.dot(lam0, lam0))
    co = paired_products(lam1, lam0, "co")
    anti = paired_products(lam1, lam0, "anti")
    lows = {"sum_minus_one": m1 + m0 - omega, "anti_paired": anti, "zero": 0.0}
    ups = {"marginal1": m1, "marginal0": m0, "co_paired": co}
    la = max(lows, key=lambda k: lows[k])
    ua = min(ups, key=lambda k: ups[k])
    return lows[la] / omega, ups[ua] / omega, la, ua


def dpo_bounds(net1: Network, net0: Network, y1: float, y0: float, *,
               denoise=None, spectra=None) -> BoundInterval:
    """Outer bounds on ``F(y1, y0)``, the mass of dyads with ``Y1 <= y1`` and ``Y0 <= y0``.

    Lower bound: the largest of ``m1 + m0 - 1``, the anti-paired eigenvalue
    product, and 0. Upper bound: the smallest of ``m1``, ``m0``, and the
    co-paired product, where ``m_t`` is the sum of squared indicator
    eigenvalues.
    """
    omega = unmasked_fraction(net1, net0)
    s1, s0 = _spectra_pair(net1, net0, denoise, spectra)
    lo, hi, la, ua = dpo_from_eigenvalues(s1.eigenvalues(y1), s0.eigenvalues(y0), omega)
    lo, hi = _clip_interval(lo, hi)
    return BoundInterval(lo, hi, la, ua)


def frechet_hoeffding(net1: Network, net0: Network, y1: float, y0: float) -> BoundInterval:
    """Marginal-only bounds ``max(m1 + m0 - 1, 0) <= F <= min(m1, m0)``."""
    v1 = net1.unmasked_values()
    v0 = net0.unmasked_values()
    m1 = np.count_nonzero(v1 <= y1) / v1.size
    m0 = np.count_nonzero(v0 <= y0) / v0.size
    s = m1 + m0 - 1.0
    lo, la = (s, "sum_minus_one") if s > 0 else (0.0, "zero")
    hi, ua = (m1, "marginal1") if m1 <= m0 else (m0, "marginal0")
    return BoundInterval(float(lo), float(hi), la, ua)


def mean_difference(net1: Network, net0: Network) -> float:
    """Mean unmasked outcome in arm 1 minus the same in arm 0."""
    return float(net1.unmasked_values().mean() - net0.unmasked_values().mean())


# ----------------------------------------------------------------------------
# DTE bounds
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DteCurve:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def rows(self):
        return [(float(y), float(lo), float(hi)) for y, lo, hi in zip(self.grid, self.lower, self.upper)]


def dte_bounds(net1: Network, net0: Network, y: float, grid="full", *,
               denoise=None, spectra=None) -> BoundInterval:
    """Bounds on ``Delta(y)``, the mass of dyads with ``Y1 - Y0 <= y``.

    The sup (lower) and inf (upper) run over arm-1 thresholds ``y1``; the
    default grid is the arm-1 support together with the arm-0 support
    shifted by ``y``. For each ``y1`` the arm-0 event is chosen from the
    arm-0 support so that it implies the required sign of ``Y1 - Y0 - y``:
    ``{Y1 <= y1, Y0 >= a - y}`` with ``a`` the largest arm-1 value ``<= y1``
    for the lower bound, and ``{Y1 > y1, Y0 < a' - y}`` with ``a'`` the
    smallest arm-1 value ``> y1`` for the upper bound.
    """
    omega = unmasked_fraction(net1, net0)
    s1, s0 = _spectra_pair(net1, net0, denoise, spectra)
    supp1 = s1.support
    if isinstance(grid, str):
        if grid != "full":
            raise ValueError(f"unknown grid policy {grid!r}")
        y1_grid = np.union1d(supp1, s0.support + y)
    else:
        y1_grid = np.unique(np.asarray(grid, dtype=np.float64))
    if y1_grid.size == 0:
        raise NetworkValidationError("empty threshold grid for DTE bounds")

    best_lo, lo_active, lo_at = 0.0, "zero", None
    best_hi, hi_active, hi_at = 1.0, "zero", None
    for y1 in y1_grid:
        k1 = s1.count(y1)
        lam1 = s1.eigenvalues_by_count(k1)
        m1 = float(np.dot(lam1, lam1))
        if k1 > 0:
            a = supp1[k1 - 1]
            # {Y0 >= a - y}: the indicator below is {Y0 < a - y}.
            lam0 = s0.eigenvalues_by_count(s0.count_below(a - y))
            m0 = float(np.dot(lam0, lam0))
            co = paired_products(lam1, lam0, "co")
            terms = {"marginal_gap": m1 - m0, "co_gap": m1 - co}
            key = max(terms, key=lambda t: terms[t])
            val = terms[key] / omega
            if val > best_lo:
                best_lo, lo_active, lo_at = val, key, (float(y1), float(a - y))
        if k1 < len(supp1):
            b = supp1[k1]
            # {Y0 < b - y}
            lam0 = s0.eigenvalues_by_count(s0.count_below(b - y))
        else:
            # Every arm-1 value is <= y1; {Y1 > y1} is empty.
            continue
        m0 = float(np.dot(lam0, lam0))
        co = paired_products(lam1, lam0, "co")
        terms = {"marginal_gap": m1 - m0, "co_gap": co - m0}
        key = min(terms, key=lambda t: terms[t])
        val = 1.0 + terms[key] / omega
        if val < best_hi:
            best_hi, hi_active, hi_at = val, key, (float(y1), float(b - y))
    lo, hi = _clip_interval(best_lo, best_hi)
    return BoundInterval(lo, hi, lo_active, hi_active, lo_at, hi_at)


def dte_curve(net1: Network, net0: Network, grid, *, denoise=None) -> DteCurve:
    """Pointwise DTE bounds on a sorted grid, repaired to be nondecreasing."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be a sorted 1-d sequence")
    spectra = (IndicatorSpectra(net1, denoise), IndicatorSpectra(net0, denoise))
    pts = [dte_bounds(net1, net0, float(y), spectra=spectra) for y in grid]
    lower = np.maximum.accumulate(np.array([p.lower for p in pts]))
    upper = np.minimum.accumulate(np.array([p.upper for p in pts])[::-1])[::-1]
    upper = np.maximum(upper, lower)
    return DteCurve(grid=grid, lower=lower, upper=upper)


# ----------------------------------------------------------------------------
# pmf cell tables
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DpoCellTable:
    support1: np.ndarray
    support0: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    marginals1: np.ndarray
    marginals0: np.ndarray

    def cell(self, a, b) -> BoundInterval:
        i = int(np.flatnonzero(self.support1 == a)[0])
        j = int(np.flatnonzero(self.support0 == b)[0])
        return BoundInterval(float(self.lower[i, j]), float(self.upper[i, j]), "cell", "cell")

    @property
    def cells(self):
        return [[BoundInterval(float(lo), float(hi), "cell", "cell") for lo, hi in zip(rl, ru)]
                for rl, ru in zip(self.lower, self.upper)]

    def consistency_violations(self, tol=1e-12):
        """Rows/columns whose marginal is not bracketed by the cell bounds."""
        bad = []
        for i, m in enumerate(self.marginals1):
            if not self.lower[i].sum() - tol <= m <= self.upper[i].sum() + tol:
                bad.append(("row", float(self.support1[i])))
        for j, m in enumerate(self.marginals0):
            if not self.lower[:, j].sum() - tol <= m <= self.upper[:, j].sum() + tol:
                bad.append(("col", float(self.support0[j])))
        if np.any(self.lower > self.upper + tol) or np.any(self.lower < -tol) or np.any(self.upper > 1 + tol):
            bad.append(("cell", None))
        return bad

    def csv_lines(self):
        head = ["y1"]
        for b in self.support0:
            head += [f"lower[y0={format_number(b)}]", f"upper[y0={format_number(b)}]"]
        lines = [",".join(head)]
        for i, a in enumerate(self.support1):
            row = [format_number(a)]
            for j in range(len(self.support0)):
                row += [format_number(self.lower[i, j]), format_number(self.upper[i, j])]
            lines.append(",".join(row))
        return lines

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(self.csv_lines()) + "\n")


def _widen_to_marginals(lower, upper, m1, m0):
    # Lowering lowers / raising uppers only widens, so validity is preserved.
    for _ in range(4):
        for L, U, m in ((lower, upper, m1), (lower.T, upper.T, m0)):
            for i in range(L.shape[0]):
                s = L[i].sum()
                if s > m[i] and s > 0:
                    L[i] *= m[i] / s
                s = U[i].sum()
                if s < m[i]:
                    cap = np.minimum(m[i], 1.0) - U[i]
                    room = cap.sum()
                    if room > 0:
                        U[i] += cap * min(1.0, (m[i] - s) / room)
    return lower, upper


def pmf_cell_bounds(net1: Network, net0: Network, *, adjust=None, denoise=None) -> DpoCellTable:
    """Bounds on ``P(Y1 = a, Y0 = b)`` for every pair of support values.

    Each cell is a rectangle difference of ``F`` evaluated at four corners,
    combined by interval arithmetic, then clipped by the exactly identified
    marginals.

    Parameters
    ----------
    adjust : {None, "none", "reduction"}
        Use :func:`netdisrupt.adjust.adjusted_overlap_bounds` at each corner.
    denoise : None, float, or "auto"
        Singular value thresholding applied to each indicator matrix.
    """
    supp1, supp0 = net1.support(), net0.support()
    if len(supp1) > MAX_CELL_SUPPORT or len(supp0) > MAX_CELL_SUPPORT:
        raise NetworkValidationError(
            f"outcomes take {len(supp1)} and {len(supp0)} distinct values; cell tables allow at most "
            f"{MAX_CELL_SUPPORT}. Use dpo_bounds on chosen thresholds instead.")
    spectra = (IndicatorSpectra(net1, denoise), IndicatorSpectra(net0, denoise))
    use_adjust = adjust not in (None, "none")
    if use_adjust:
        from .adjust import adjusted_overlap_bounds

    k1, k0 = len(supp1), len(supp0)
    # F bounds on a (k1+1) x (k0+1) grid; index 0 is "below the support" where F = 0.
    Flo = np.zeros((k1 + 1, k0 + 1))
    Fhi = np.zeros((k1 + 1, k0 + 1))
    for i in range(1, k1 + 1):
        for j in range(1, k0 + 1):
            if use_adjust:
                iv = adjusted_overlap_bounds(net1, net0, supp1[i - 1], supp0[j - 1],
                                             denoise=denoise, spectra=spectra)
            else:
                iv = dpo_bounds(net1, net0, supp1[i - 1], supp0[j - 1], spectra=spectra)
            Flo[i, j], Fhi[i, j] = iv.lower, iv.upper

    v1, v0 = net1.unmasked_values(), net0.unmasked_values()
    m1 = np.array([np.count_nonzero(v1 == a) for a in supp1]) / v1.size
    m0 = np.array([np.count_nonzero(v0 == b) for b in supp0]) / v0.size

    lower = Flo[1:, 1:] - Fhi[:-1, 1:] - Fhi[1:, :-1] + Flo[:-1, :-1]
    upper = Fhi[1:, 1:] - Flo[:-1, 1:] - Flo[1:, :-1] + Fhi[:-1, :-1]
    lower = np.clip(lower, 0.0, 1.0)
    upper = np.clip(upper, 0.0, 1.0)
    upper = np.minimum(upper, np.minimum.outer(m1, m0))
    lower = np.maximum(lower, np.maximum(0.0, np.add.outer(m1, m0) - 1.0))
    swap = lower > upper
    if swap.any():
        lower[swap], upper[swap] = upper[swap].copy(), lower[swap].copy()
    table = DpoCellTable(supp1, supp0, lower, upper, m1, m0)
    if table.consistency_violations():
        if denoise is None:
            warnings.warn("cell bounds needed widening to match the marginals", RuntimeWarning)
        lower, upper = _widen_to_marginals(lower.copy(), upper.copy(), m1, m0)
        table = DpoCellTable(supp1, supp0, lower, upper, m1, m0)
    return table


# ----------------------------------------------------------------------------
# binary summaries
# ----------------------------------------------------------------------------

def binary_disruption(net1: Network, net0: Network, overlap: BoundInterval):
    """Destroyed and created link fractions implied by bounds on ``F(0, 0)``.

    For binary outcomes ``P(Y1=0, Y0=1) = P(Y1 <= 0) - F(0, 0)`` and
    ``P(Y1=1, Y0=0) = P(Y0 <= 0) - F(0, 0)``.
    """
    v1, v0 = net1.unmasked_values(), net0.unmasked_values()
    p1 = np.count_nonzero(v1 <= 0) / v1.size
    p0 = np.count_nonzero(v0 <= 0) / v0.size
    destroyed = BoundInterval(max(p1 - overlap.upper, 0.0), max(p1 - overlap.lower, 0.0),
                              overlap.upper_active, overlap.lower_active)
    created = BoundInterval(max(p0 - overlap.upper, 0.0), max(p0 - overlap.lower, 0.0),
                            overlap.upper_active, overlap.lower_active)
    return destroyed, created


def pair_count_factor(net: Network) -> float:
    """Multiply an ordered-dyad fraction by this to get unordered pair counts."""
    return (~net.mask).sum() / 2.0
