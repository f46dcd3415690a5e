"""Network representation, ingestion, and function-embedding spectra.

A network of ``N`` agents is stored as a symmetric ``N x N`` matrix. Its
function embedding on the unit square has eigenvalues equal to the matrix
eigenvalues divided by ``N`` and eigenfunctions equal to the unit eigenvectors
scaled by ``sqrt(N)``; everything in this module reports the embedded scale.
"""

import csv
import json
import math
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import NetworkValidationError, NumericalError

DIAGONAL_POLICIES = ("zero", "keep", "mask")
FORMATS = ("edge_list", "dense_csv", "json")
MAX_PATTERN_VERTICES = 5
SYMMETRY_RTOL = 1e-12


def _frozen(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Network:
    """Symmetric matrix of dyadic outcomes over labeled agents.

    Masked cells are structurally excluded dyads. They hold no outcome (the
    stored value is 0), are never below any threshold, and are left out of
    every count and mean.
    """

    labels: tuple
    values: np.ndarray
    mask: np.ndarray
    group: int = 0
    diagonal_policy: str = "keep"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise NetworkValidationError(f"network matrix must be square, got shape {values.shape}")
        n = values.shape[0]
        if n < 2:
            raise NetworkValidationError(f"network needs at least 2 agents, got {n}")
        mask = np.zeros((n, n), dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != (n, n):
            raise NetworkValidationError(f"mask shape {mask.shape} does not match matrix shape {(n, n)}")
        if not np.array_equal(mask, mask.T):
            i, j = np.argwhere(mask != mask.T)[0]
            raise NetworkValidationError(f"mask is not symmetric at ({i}, {j})")
        bad = np.isnan(values) & ~mask
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise NetworkValidationError(f"NaN outcome at ({i}, {j})")
        values = np.where(mask, 0.0, values)
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise NetworkValidationError(f"non-finite outcome at ({i}, {j})")
        scale = max(1.0, float(np.abs(values).max()))
        asym = np.abs(values - values.T) > SYMMETRY_RTOL * scale
        if asym.any():
            i, j = np.argwhere(asym)[0]
            raise NetworkValidationError(
                f"matrix is not symmetric: entry ({i}, {j}) = {values[i, j]!r} "
                f"but ({j}, {i}) = {values[j, i]!r}")
        values = 0.5 * (values + values.T)
        labels = tuple(str(x) for x in (range(n) if self.labels is None else self.labels))
        if len(labels) != n:
            raise NetworkValidationError(f"{len(labels)} labels for a {n}x{n} matrix")
        if len(set(labels)) != n:
            raise NetworkValidationError("agent labels are not unique")
        if self.group not in (0, 1):
            raise NetworkValidationError(f"group must be 0 or 1, got {self.group!r}")
        if self.diagonal_policy not in DIAGONAL_POLICIES:
            raise NetworkValidationError(f"unknown diagonal policy {self.diagonal_policy!r}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def has_mask(self) -> bool:
        return bool(self.mask.any())

    @property
    def unmasked_fraction(self) -> float:
        return float((~self.mask).sum()) / self.n ** 2

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Writable copy of the matrix with masked cells set to ``fill``."""
        return np.where(self.mask, fill, self.values)

    def unmasked_values(self) -> np.ndarray:
        return self.values[~self.mask]

    def support(self) -> np.ndarray:
        """Sorted distinct outcome values over unmasked cells."""
        return np.unique(self.unmasked_values())

    def is_binary(self) -> bool:
        return bool(np.isin(self.unmasked_values(), (0.0, 1.0)).all())

    def permuted(self, perm) -> "Network":
        """Relabel agents: new agent ``i`` is old agent ``perm[i]``."""
        p = np.asarray(perm, dtype=np.int64)
        return Network(labels=tuple(self.labels[k] for k in p),
                       values=self.values[np.ix_(p, p)],
                       mask=self.mask[np.ix_(p, p)],
                       group=self.group,
                       diagonal_policy=self.diagonal_policy)

    def with_values(self, values, mask=None) -> "Network":
        return Network(labels=self.labels, values=values,
                       mask=self.mask if mask is None else mask,
                       group=self.group, diagonal_policy=self.diagonal_policy)


def make_network(values, labels=None, mask=None, group=0, diagonal="keep") -> Network:
    """Build a :class:`Network` from an in-memory matrix.

    ``diagonal`` is one of ``"keep"`` (store self-dyads as given), ``"zero"``
    (overwrite them with 0), or ``"mask"`` (exclude them).
    """
    values = np.array(values, dtype=np.float64)
    if diagonal not in DIAGONAL_POLICIES:
        raise NetworkValidationError(f"unknown diagonal policy {diagonal!r}")
    if values.ndim == 2 and values.shape[0] == values.shape[1]:
        if diagonal == "zero":
            np.fill_diagonal(values, 0.0)
        elif diagonal == "mask":
            m = np.zeros(values.shape, dtype=bool) if mask is None else np.array(mask, dtype=bool)
            np.fill_diagonal(m, True)
            mask = m
    return Network(labels=labels, values=values, mask=mask, group=group, diagonal_policy=diagonal)


# ----------------------------------------------------------------------------
# ingestion
# ----------------------------------------------------------------------------

def _read_labels(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and r[0].strip()]
    labels = [r[0].strip() for r in rows]
    if labels and labels[0].lower() == "label":
        labels = labels[1:]
    return labels


def _parse_float(text, where):
    try:
        x = float(text)
    except ValueError:
        raise NetworkValidationError(f"cannot parse number {text!r} at {where}") from None
    if math.isnan(x):
        raise NetworkValidationError(f"NaN entry at {where}")
    return x


def _load_edge_list(path, labels):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[c.strip() for c in r] for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and rows[0][:2] == ["src", "dst"]:
        rows = rows[1:]
    if labels is None:
        seen = {}
        for r in rows:
            for lab in r[:2]:
                seen.setdefault(lab, None)
        labels = list(seen)
    index = {lab: k for k, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise NetworkValidationError("label manifest contains duplicates")
    n = len(labels)
    values = np.zeros((n, n))
    assigned = {}
    for line, r in enumerate(rows, start=1):
        if len(r) not in (2, 3):
            raise NetworkValidationError(f"{path}: row {line} needs 2 or 3 fields, got {len(r)}")
        a, b = r[0], r[1]
        for lab in (a, b):
            if lab not in index:
                raise NetworkValidationError(f"{path}: row {line} references undeclared label {lab!r}")
        w = _parse_float(r[2], f"{path} row {line}") if len(r) == 3 else 1.0
        i, j = index[a], index[b]
        key = (min(i, j), max(i, j))
        if key in assigned and assigned[key] != w:
            raise NetworkValidationError(
                f"{path}: conflicting duplicate edge ({a}, {b}): {assigned[key]!r} vs {w!r}")
        assigned[key] = w
        values[i, j] = values[j, i] = w
    return labels, values, None


def _load_dense_csv(path, labels):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    n = len(rows)
    values = np.empty((n, n))
    for i, r in enumerate(rows):
        if len(r) != n:
            raise NetworkValidationError(f"{path}: row {i + 1} has {len(r)} fields, expected {n}")
        for j, c in enumerate(r):
            values[i, j] = _parse_float(c.strip(), f"{path} cell ({i}, {j})")
    return labels, values, None


def _load_json(path, labels):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "matrix" not in doc:
        raise NetworkValidationError(f"{path}: missing 'matrix'")
    mask = np.array(doc["mask"], dtype=bool) if doc.get("mask") is not None else None
    raw = doc["matrix"]
    n = len(raw)
    values = np.zeros((n, n))
    for i, row in enumerate(raw):
        if len(row) != n:
            raise NetworkValidationError(f"{path}: matrix row {i} has {len(row)} entries, expected {n}")
        for j, x in enumerate(row):
            if x is None:
                if mask is None or not mask[i, j]:
                    raise NetworkValidationError(f"{path}: null entry at ({i}, {j}) outside the mask")
                continue
            if isinstance(x, float) and math.isnan(x):
                raise NetworkValidationError(f"{path}: NaN entry at ({i}, {j})")
            values[i, j] = float(x)
    return doc.get("labels", labels), values, mask


def load_network(path, format="edge_list", *, labels_path=None, labels=None,
                 diagonal="zero", group=0) -> Network:
    """Read a network from disk.

    Parameters
    ----------
    path : path-like
        Input file.
    format : {"edge_list", "dense_csv", "json"}
        ``edge_list`` is a CSV of ``src,dst[,weight]`` rows (absent dyads are
        0; without a weight column the network is unweighted). ``dense_csv``
        is ``N`` rows of ``N`` reals. ``json`` holds ``labels``, ``matrix``,
        and an optional boolean ``mask``.
    labels_path : path-like, optional
        Label manifest, one label per line. Required to declare isolated
        agents in an edge list.
    diagonal : {"zero", "keep", "mask"}
        Self-dyad handling; ingestion zeroes the diagonal by default.
    group : {0, 1}
        Experimental arm tag.
    """
    path = Path(path)
    if not path.exists():
        raise NetworkValidationError(f"input file not found: {path}")
    if format not in FORMATS:
        raise NetworkValidationError(f"unknown network format {format!r}; expected one of {FORMATS}")
    if labels is None and labels_path is not None:
        labels = _read_labels(labels_path)
    loader = {"edge_list": _load_edge_list, "dense_csv": _load_dense_csv, "json": _load_json}[format]
    labels, values, mask = loader(path, labels)
    return make_network(values, labels=labels, mask=mask, group=group, diagonal=diagonal)


def format_number(x) -> str:
    """Render a float with enough digits to round-trip."""
    return format(float(x), ".15g")


def write_dense_csv(path, matrix):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for row in np.asarray(matrix):
            fh.write(",".join(format_number(v) for v in row) + "\n")


# ----------------------------------------------------------------------------
# thresholds and spectra
# ----------------------------------------------------------------------------

def threshold_indicator(net: Network, y: float) -> Network:
    """Binary network with 1 where the outcome is ``<= y``; masked cells stay masked (and 0)."""
    ind = ((net.values <= y) & ~net.mask).astype(np.float64)
    return net.with_values(ind)


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    source_dim: int
    threshold: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(np.asarray(self.eigenvalues, dtype=np.float64)))

    def __len__(self):
        return len(self.eigenvalues)

    def sum_squares(self) -> float:
        return float(np.dot(self.eigenvalues, self.eigenvalues))


@dataclass(frozen=True, eq=False)
class EigenPair:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, scaled by sqrt(N)

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues))
        object.__setattr__(self, "eigenvectors", _frozen(self.eigenvectors))

    @property
    def n(self):
        return self.eigenvectors.shape[0]

    def reconstruct(self, eigenvalues=None) -> np.ndarray:
        """Matrix-scale reconstruction ``sum_r g_r phi_r phi_r^T`` (defaults to the stored eigenvalues)."""
        lam = self.eigenvalues if eigenvalues is None else np.asarray(eigenvalues)
        return (self.eigenvectors * lam) @ self.eigenvectors.T


def _eigh(matrix, name, vectors):
    try:
        if vectors:
            return np.linalg.eigh(matrix)
        return np.linalg.eigvalsh(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed on {name}: {exc}") from exc


def _describe(net):
    head = ", ".join(net.labels[:3])
    return f"{net.n}x{net.n} network [{head}{', ...' if net.n > 3 else ''}]"


def spectrum(net: Network, mask_fill: float = 0.0, threshold=None) -> Spectrum:
    """All ``N`` eigenvalues of the filled matrix divided by ``N``, descending."""
    lam = _eigh(net.filled(mask_fill), _describe(net), vectors=False)
    return Spectrum(eigenvalues=lam[::-1] / net.n, source_dim=net.n, threshold=threshold)


def indicator_spectrum(net: Network, y: float) -> Spectrum:
    """Spectrum of ``1{net <= y}``, tagged with the threshold."""
    return spectrum(threshold_indicator(net, y), 0.0, threshold=float(y))


def eigen_pairs(net: Network, mask_fill: float = 0.0) -> EigenPair:
    """Eigenvalues (descending, divided by ``N``) with eigenvectors scaled by ``sqrt(N)``."""
    lam, vec = _eigh(net.filled(mask_fill), _describe(net), vectors=True)
    n = net.n
    return EigenPair(eigenvalues=lam[::-1] / n, eigenvectors=vec[:, ::-1] * math.sqrt(n))


# ----------------------------------------------------------------------------
# bipartite symmetrization and homomorphism densities
# ----------------------------------------------------------------------------

def symmetrize_bipartite(rows: Sequence, cols: Sequence, B, group=0) -> Network:
    """Embed an ``m x n`` rectangular matrix as an ``(m+n)``-agent network.

    Off-diagonal blocks hold ``B`` and ``B.T``; the two within-side blocks are
    masked, which makes them behave as ``+inf`` under thresholding.
    """
    B = np.asarray(B, dtype=np.float64)
    rows = [str(r) for r in rows]
    cols = [str(c) for c in cols]
    if B.shape != (len(rows), len(cols)):
        raise NetworkValidationError(f"matrix shape {B.shape} does not match {len(rows)} rows x {len(cols)} cols")
    clash = sorted(set(rows) & set(cols))
    if clash:
        raise NetworkValidationError(f"labels appear on both sides: {clash[:5]}")
    m, k = B.shape
    values = np.zeros((m + k, m + k))
    values[:m, m:] = B
    values[m:, :m] = B.T
    mask = np.zeros((m + k, m + k), dtype=bool)
    mask[:m, :m] = True
    mask[m:, m:] = True
    return Network(labels=tuple(rows + cols), values=values, mask=mask, group=group, diagonal_policy="mask")


def homomorphism_density(pattern, net: Network, mask_fill: float = 0.0, n_vertices=None) -> float:
    """Normalized homomorphism count of a small multigraph into ``net``.

    ``pattern`` is a sequence of ``(u, v)`` vertex pairs (repeats allowed,
    loops allowed) over vertices ``0 .. k-1``. The result is
    ``N**-k * sum over all maps of prod over edges of A[map(u), map(v)]``,
    evaluated with einsum rather than by enumerating the ``N**k`` maps.
    """
    edges = [(int(u), int(v)) for u, v in pattern]
    verts = {x for e in edges for x in e}
    k = n_vertices if n_vertices is not None else (max(verts) + 1 if verts else 0)
    if k > MAX_PATTERN_VERTICES or (verts and max(verts) >= k):
        raise NetworkValidationError(
            f"pattern has {max(k, max(verts, default=-1) + 1)} vertices; the limit is {MAX_PATTERN_VERTICES}")
    if not edges:
        return 1.0
    A = net.filled(mask_fill)
    letters = string.ascii_lowercase
    subs = ",".join(letters[u] + letters[v] for u, v in edges)
    total = np.einsum(subs + "->", *([A] * len(edges)), optimize="greedy")
    # Isolated vertices contribute a factor N / N = 1.
    return float(total) / net.n ** len(verts)
