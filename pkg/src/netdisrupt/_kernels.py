"""Hot loops over permutations.

Two implementations of every kernel live here: a numba version and a pure
numpy version. The public names dispatch to numba unless numba is missing or
``NETDISRUPT_DISABLE_NUMBA`` is set to a truthy value at import time. Both
versions are always importable so tests and benchmarks can compare them.

Small inputs always take the numpy path (see ``NUMBA_MIN_N``).

All kernels compute the permuted overlap

    overlap(A, B, p) = sum_ij A[p[i], p[j]] * B[i, j]

without normalization.
"""

import itertools
import math
import os

import numpy as np

try:
    import numba
    from numba import njit, prange
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

_DISABLE = os.environ.get("NETDISRUPT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
USE_NUMBA = NUMBA_AVAILABLE and not _DISABLE

_CHUNK = 20000
# Below this size JIT compilation costs more than the numpy loop.
NUMBA_MIN_N = 8


# ----------------------------------------------------------------------------
# numpy path
# ----------------------------------------------------------------------------

def overlap_for_permutations_np(A, B, perms):
    perms = np.asarray(perms, dtype=np.int64)
    out = np.empty(perms.shape[0])
    for start in range(0, perms.shape[0], _CHUNK):
        p = perms[start:start + _CHUNK]
        permuted = A[p[:, :, None], p[:, None, :]]
        out[start:start + _CHUNK] = np.einsum("kij,ij->k", permuted, B)
    return out


def overlap_all_permutations_np(A, B):
    n = A.shape[0]
    out = np.empty(math.factorial(n))
    it = itertools.permutations(range(n))
    pos = 0
    while True:
        chunk = list(itertools.islice(it, _CHUNK))
        if not chunk:
            break
        out[pos:pos + len(chunk)] = overlap_for_permutations_np(A, B, np.array(chunk))
        pos += len(chunk)
    return out


# ----------------------------------------------------------------------------
# numba path
# ----------------------------------------------------------------------------

if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _next_permutation(a, lo):
        # In-place lexicographic successor of a[lo:]; False when a[lo:] is last.
        n = a.shape[0]
        i = n - 2
        while i >= lo and a[i] >= a[i + 1]:
            i -= 1
        if i < lo:
            return False
        j = n - 1
        while a[j] <= a[i]:
            j -= 1
        a[i], a[j] = a[j], a[i]
        left = i + 1
        right = n - 1
        while left < right:
            a[left], a[right] = a[right], a[left]
            left += 1
            right -= 1
        return True

    @njit(cache=True)
    def _overlap_one(A, B, p):
        n = p.shape[0]
        s = 0.0
        for i in range(n):
            pi = p[i]
            for j in range(n):
                s += A[pi, p[j]] * B[i, j]
        return s

    @njit(cache=True, parallel=True)
    def _overlap_all_permutations_nb(A, B):
        n = A.shape[0]
        block = 1
        for k in range(2, n):
            block *= k
        out = np.empty(n * block)
        # Cosets of the first element are independent; global order stays
        # lexicographic because each coset is enumerated lexicographically.
        for first in prange(n):
            p = np.empty(n, np.int64)
            p[0] = first
            k = 1
            for v in range(n):
                if v != first:
                    p[k] = v
                    k += 1
            for idx in range(block):
                out[first * block + idx] = _overlap_one(A, B, p)
                _next_permutation(p, 1)
        return out

    @njit(cache=True, parallel=True)
    def _overlap_for_permutations_nb(A, B, perms):
        m = perms.shape[0]
        out = np.empty(m)
        for k in prange(m):
            out[k] = _overlap_one(A, B, perms[k])
        return out


def overlap_all_permutations_nb(A, B):
    if not NUMBA_AVAILABLE:  # pragma: no cover
        raise RuntimeError("numba is not installed")
    return _overlap_all_permutations_nb(np.ascontiguousarray(A, dtype=np.float64),
                                        np.ascontiguousarray(B, dtype=np.float64))


def overlap_for_permutations_nb(A, B, perms):
    if not NUMBA_AVAILABLE:  # pragma: no cover
        raise RuntimeError("numba is not installed")
    return _overlap_for_permutations_nb(np.ascontiguousarray(A, dtype=np.float64),
                                        np.ascontiguousarray(B, dtype=np.float64),
                                        np.ascontiguousarray(perms, dtype=np.int64))


# ----------------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------------

def overlap_all_permutations(A, B):
    """Overlap of ``B`` with every relabeling of ``A``, in lexicographic order.

    Entry ``k`` corresponds to the ``k``-th permutation yielded by
    ``itertools.permutations(range(n))``.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if USE_NUMBA and A.shape[0] >= NUMBA_MIN_N:
        return overlap_all_permutations_nb(A, B)
    return overlap_all_permutations_np(A, B)


def overlap_for_permutations(A, B, perms):
    """Overlap of ``B`` with ``A`` relabeled by each row of ``perms``."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    perms = np.atleast_2d(np.asarray(perms, dtype=np.int64))
    if USE_NUMBA and perms.shape[0] * A.shape[0] ** 2 >= 10 ** 7:
        return overlap_for_permutations_nb(A, B, perms)
    return overlap_for_permutations_np(A, B, perms)


def nth_permutation(n, k):
    """The ``k``-th lexicographic permutation of ``range(n)`` (0-based)."""
    pool = list(range(n))
    out = []
    for i in range(n, 0, -1):
        f = math.factorial(i - 1)
        q, k = divmod(k, f)
        out.append(pool.pop(q))
    return np.array(out, dtype=np.int64)


def set_num_threads(count):
    """Forward a thread count to numba; silently ignored without numba."""
    if USE_NUMBA and count:
        numba.set_num_threads(max(1, min(int(count), numba.config.NUMBA_NUM_THREADS)))
