"""Operators on the t-copy Hilbert space: permutations, the symmetric
projector, the Haar moment, and distinct-tuple combinatorics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial, prod
from typing import Sequence

import numpy as np

from .registers import Partition, PureState, QuditRegister

COPY_DIM_CAP = 8192
MAX_ENUMERATED_COPIES = 6

HERMITIAN_TOL = 1e-9
TRACE_TOL = 1e-9
PSD_TOL = 1e-9


class SizeCapError(ValueError):
    """Raised when a dense copy-space object would exceed the memory cap."""


def check_copy_dim(total_dim: int) -> None:
    if total_dim > COPY_DIM_CAP:
        raise SizeCapError(
            f"copy-space dimension {total_dim} exceeds the dense cap {COPY_DIM_CAP}"
        )


@dataclass(frozen=True)
class CopySpace:
    """t copies of an N-dimensional space; copy 0 is the most significant digit."""

    base_dim: int
    copies: int

    def __post_init__(self):
        if self.base_dim < 1 or self.copies < 1:
            raise ValueError("base_dim and copies must be >= 1")

    @property
    def total_dim(self) -> int:
        return self.base_dim**self.copies


@dataclass(frozen=True, eq=False)
class MomentOperator:
    """Hermitian trace-one operator on a copy space, e.g. E[|psi><psi|^t]."""

    space: CopySpace
    matrix: np.ndarray
    label: str = ""

    def __init__(self, space: CopySpace, matrix: np.ndarray, label: str = ""):
        mat = np.asarray(matrix, dtype=np.complex128).copy()
        d = space.total_dim
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} does not match copy dimension {d}")
        herm = np.max(np.abs(mat - mat.conj().T))
        if herm > HERMITIAN_TOL:
            raise ValueError(f"moment operator is not Hermitian: max |M - M^H| = {herm:.3e}")
        trace = complex(np.trace(mat))
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValueError(f"moment operator trace is {trace}, expected 1")
        mat.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "label", label)

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue; the PSD invariant allows -1e-9 of rounding."""
        return float(np.linalg.eigvalsh(self.matrix)[0])


# ---- permutations of the copy index ------------------------------------

def all_permutations(t: int) -> list[tuple[int, ...]]:
    if t > MAX_ENUMERATED_COPIES:
        raise ValueError(f"refusing to enumerate S_{t}; cap is t <= {MAX_ENUMERATED_COPIES}")
    return list(itertools.permutations(range(t)))


def compose(sigma: Sequence[int], tau: Sequence[int]) -> tuple[int, ...]:
    """(sigma tau)(i) = sigma(tau(i))."""
    return tuple(sigma[tau[i]] for i in range(len(sigma)))


def invert(sigma: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(sigma)
    for i, s in enumerate(sigma):
        inv[s] = i
    return tuple(inv)


def cycle_count(sigma: Sequence[int]) -> int:
    seen = [False] * len(sigma)
    count = 0
    for start in range(len(sigma)):
        if seen[start]:
            continue
        count += 1
        j = start
        while not seen[j]:
            seen[j] = True
            j = sigma[j]
    return count


def _validate_permutation(sigma: Sequence[int], t: int) -> tuple[int, ...]:
    sig = tuple(int(s) for s in sigma)
    if sorted(sig) != list(range(t)):
        raise ValueError(f"{sig} is not a permutation of 0..{t - 1}")
    return sig


def copy_index_map(sigma: Sequence[int], space: CopySpace) -> np.ndarray:
    """Basis map of P_sigma: |x_0..x_{t-1}> -> |y> with y_i = x_{sigma^{-1}(i)}."""
    t = space.copies
    sig = _validate_permutation(sigma, t)
    inv = invert(sig)
    shape = (space.base_dim,) * t
    digits = np.unravel_index(np.arange(space.total_dim), shape)
    return np.ravel_multi_index([digits[inv[i]] for i in range(t)], shape)


def permutation_operator(sigma: Sequence[int], space: CopySpace) -> np.ndarray:
    """Dense matrix of the copy-permutation operator P_sigma."""
    check_copy_dim(space.total_dim)
    d = space.total_dim
    op = np.zeros((d, d), dtype=np.complex128)
    op[copy_index_map(sigma, space), np.arange(d)] = 1.0
    return op


def symmetric_projector(space: CopySpace) -> np.ndarray:
    """(1/t!) sum over S_t of P_sigma; projector of rank binom(N+t-1, t)."""
    check_copy_dim(space.total_dim)
    t = space.copies
    d = space.total_dim
    proj = np.zeros((d, d), dtype=np.complex128)
    cols = np.arange(d)
    for sigma in all_permutations(t):
        proj[copy_index_map(sigma, space), cols] += 1.0
    return proj / factorial(t)


def haar_moment(space: CopySpace) -> MomentOperator:
    """t-th moment of Haar random states: Pi_sym / binom(N+t-1, t)."""
    rank = comb(space.base_dim + space.copies - 1, space.copies)
    mat = symmetric_projector(space) / rank
    return MomentOperator(space, mat, label=f"haar(N={space.base_dim}, t={space.copies})")


# ---- distinct-tuple combinatorics ---------------------------------------

def p_dist(weights: Sequence[float] | np.ndarray, t: int) -> float:
    """Probability weight of ordered tuples of t pairwise-distinct indices.

    Equals t! * e_t(q) with e_t the elementary symmetric polynomial, computed
    by the stable prefix recurrence in O(len(q) * t); never enumerates tuples.
    """
    q = np.asarray(weights, dtype=np.float64)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("weights must be a nonempty 1-D vector")
    if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    if t < 1:
        raise ValueError("t must be >= 1")
    if t > q.size:
        return 0.0
    esp = np.zeros(t + 1)
    esp[0] = 1.0
    for i, value in enumerate(q):
        for j in range(min(t, i + 1), 0, -1):
            esp[j] += value * esp[j - 1]
    return float(min(1.0, max(0.0, factorial(t) * esp[t])))


def pure_overlap_trace_distance(p: float) -> float:
    """Trace distance (1/2)(1 - p^2) between a t-copy pure state and its
    normalized distinct-tuple projection with overlap p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {p}")
    return 0.5 * (1.0 - p * p)


# ---- copy-space layout over a partitioned register ----------------------

def region_block_permutation(register: QuditRegister, partition: Partition, t: int) -> np.ndarray:
    """Index permutation regrouping H^{tensor t} as tensor over regions of
    H_region^{tensor t}; new[i] = old[perm[i]]."""
    partition.validate(register)
    dims = list(register.site_dims) * t
    idx = np.arange(prod(dims)).reshape(dims)
    axes = []
    for region in partition.regions:
        for c in range(t):
            axes.extend(c * register.n_sites + s for s in region.sites)
    return idx.transpose(axes).reshape(-1)


def reorder_to_region_blocks(
    array: np.ndarray,
    register: QuditRegister,
    partition: Partition,
    t: int,
    inverse: bool = False,
) -> np.ndarray:
    """Apply the region-block index relabelling to a vector or square matrix."""
    perm = region_block_permutation(register, partition, t)
    if inverse:
        perm = np.argsort(perm)
    arr = np.asarray(array)
    if arr.ndim == 1:
        if arr.shape[0] != perm.size:
            raise ValueError("vector length does not match the copy-space dimension")
        return arr[perm]
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1] == perm.size:
        return arr[np.ix_(perm, perm)]
    raise ValueError(f"expected a vector or square matrix of dimension {perm.size}")


# ---- t-copy powers of pure states ----------------------------------------

def tcopy_vector(state: PureState, t: int) -> np.ndarray:
    """Amplitudes of |psi>^{tensor t} in the copy-major convention."""
    check_copy_dim(state.register.total_dim**t)
    vec = state.amplitudes
    for _ in range(t - 1):
        vec = np.kron(vec, state.amplitudes)
    return vec


def tcopy_density(state: PureState, t: int) -> np.ndarray:
    vec = tcopy_vector(state, t)
    return np.outer(vec, vec.conj())
