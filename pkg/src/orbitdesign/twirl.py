"""Exact and Monte Carlo averaging channels.

Haar twirls are evaluated exactly through Weingarten calculus (numerically
inverted Gram matrix over S_t); phase and permutation twirls are evaluated
exactly through collision-pattern combinatorics, so no channel here ever
enumerates the N! basis relabellings or approximates a group average.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .copyspace import (
    CopySpace,
    MomentOperator,
    all_permutations,
    check_copy_dim,
    compose,
    copy_index_map,
    cycle_count,
    invert,
    region_block_permutation,
    tcopy_vector,
)
from .registers import Partition, QuditRegister

MAX_WEINGARTEN_COPIES = 5
MAX_PATTERN_COPIES = 4

_MASK64 = (1 << 64) - 1


def _mix64(a: int, b: int) -> int:
    """splitmix64-style combiner for deriving child stream ids."""
    x = (a * 0x9E3779B97F4A7C15 + b + 1) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


@dataclass(frozen=True)
class RandomStream:
    """Deterministic, derivable RNG stream.

    Identical (master_seed, stream_id) pairs reproduce identical draws on any
    run and any thread schedule; child streams derived from distinct offsets
    are statistically independent.
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.master_seed & _MASK64, spawn_key=(self.stream_id & _MASK64,)
        )
        return np.random.default_rng(seq)

    def child(self, offset: int) -> "RandomStream":
        return RandomStream(self.master_seed, _mix64(self.stream_id, offset))


def _as_generator(stream: RandomStream | np.random.Generator) -> np.random.Generator:
    if isinstance(stream, RandomStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(stream)!r}")


# ---- samplers ------------------------------------------------------------

def sample_haar_unitary(dim: int, stream: RandomStream | np.random.Generator) -> np.ndarray:
    """Haar-random unitary: complex Ginibre, QR, then rescale each column of Q
    by the unit phase of the matching diagonal entry of R.

    The phase fix makes the factor the canonical (positive-diagonal-R) one and
    hence exactly Haar; plain QR output is biased by LAPACK's phase choices.
    """
    if dim < 1:
        raise ValueError("unitary dimension must be >= 1")
    rng = _as_generator(stream)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    phases = np.where(np.abs(diag) < 1e-300, 1.0, diag / np.abs(diag))
    return q * phases[None, :]


def sample_phase_unitary(dim: int, stream: RandomStream | np.random.Generator) -> np.ndarray:
    """Diagonal of a uniform phase unitary: i.i.d. e^{i theta}, theta ~ U[0, 2pi)."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    rng = _as_generator(stream)
    return np.exp(2j * np.pi * rng.random(dim))


def sample_binary_phase_unitary(dim: int, stream: RandomStream | np.random.Generator) -> np.ndarray:
    """Diagonal of a uniform +-1 phase unitary (random-subset-phase flavour)."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    rng = _as_generator(stream)
    return (1.0 - 2.0 * rng.integers(0, 2, size=dim)).astype(np.complex128)


def sample_permutation(dim: int, stream: RandomStream | np.random.Generator) -> np.ndarray:
    """Uniform permutation of [dim] as an index array (Fisher-Yates)."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    rng = _as_generator(stream)
    return rng.permutation(dim)


# ---- Weingarten calculus --------------------------------------------------

@dataclass(frozen=True)
class WeingartenTable:
    """Wg(sigma, d) for all sigma in S_t, from the inverted Gram matrix."""

    t: int
    d: int
    values: dict[tuple[int, ...], float]
    pseudo_inverse: bool = False

    def wg(self, sigma: Sequence[int]) -> float:
        return self.values[tuple(sigma)]


def weingarten_table(t: int, d: int) -> WeingartenTable:
    """Invert the Gram matrix G[sigma, tau] = d^{#cycles(sigma^{-1} tau)}.

    For d < t the permutation operators are linearly dependent and the Gram
    matrix is singular; the pseudo-inverse still yields a valid twirl kernel
    but individual Wg values are convention-dependent there.
    """
    if not 1 <= t <= MAX_WEINGARTEN_COPIES:
        raise ValueError(f"t must lie in [1, {MAX_WEINGARTEN_COPIES}], got {t}")
    if d < 1:
        raise ValueError("d must be >= 1")
    perms = all_permutations(t)
    gram = np.empty((len(perms), len(perms)))
    for i, sigma in enumerate(perms):
        sig_inv = invert(sigma)
        for j, tau in enumerate(perms):
            gram[i, j] = float(d) ** cycle_count(compose(sig_inv, tau))
    pseudo = d < t
    if pseudo:
        warnings.warn(
            f"Gram matrix is singular for d={d} < t={t}; using the pseudo-inverse",
            stacklevel=2,
        )
        inv = np.linalg.pinv(gram)
    else:
        inv = np.linalg.inv(gram)
    identity_index = perms.index(tuple(range(t)))
    values = {sigma: float(inv[i, identity_index]) for i, sigma in enumerate(perms)}
    return WeingartenTable(t=t, d=d, values=values, pseudo_inverse=pseudo)


def _weingarten_matrix(table: WeingartenTable, perms: list[tuple[int, ...]]) -> np.ndarray:
    w = np.empty((len(perms), len(perms)))
    for i, tau in enumerate(perms):
        tau_inv = invert(tau)
        for j, sigma in enumerate(perms):
            w[i, j] = table.wg(compose(tau_inv, sigma))
    return w


def _block_haar_twirl(x6: np.ndarray, block_dim: int, t: int, table: WeingartenTable) -> np.ndarray:
    """Haar twirl on the middle factor of an (L, B, R, L, B, R) tensor."""
    perms = all_permutations(t)
    space = CopySpace(block_dim, t)
    b_range = np.arange(space.total_dim)
    traced = []
    for sigma in perms:
        gather = copy_index_map(invert(sigma), space)
        traced.append(x6[:, b_range, :, :, gather, :].sum(axis=0))
    traced = np.stack(traced)
    coeffs = np.tensordot(_weingarten_matrix(table, perms), traced, axes=(1, 0))
    out = np.zeros_like(x6)
    for i, tau in enumerate(perms):
        scatter = copy_index_map(tau, space)
        out[:, scatter, :, :, b_range, :] += coeffs[i]
    return out


def exact_haar_twirl(x: np.ndarray, t: int, d: int) -> np.ndarray:
    """Exact Haar twirl E_U[U^{t} X U^{t dagger}] over the unitary group U(d).

    Evaluates sum over sigma, tau of Wg(sigma^{-1} tau, d) tr(X P_sigma^dag) P_tau.
    """
    x = np.asarray(x, dtype=np.complex128)
    dim = d**t
    check_copy_dim(dim)
    if x.shape != (dim, dim):
        raise ValueError(f"operator shape {x.shape} does not match d^t = {dim}")
    table = weingarten_table(t, d)
    x6 = x.reshape(1, dim, 1, 1, dim, 1)
    return _block_haar_twirl(x6, d, t, table).reshape(dim, dim)


def exact_local_twirl(
    rho_t: np.ndarray | MomentOperator,
    register: QuditRegister,
    partition: Partition,
    t: int,
) -> MomentOperator:
    """Independent exact Haar twirl on every region's copy block."""
    partition.validate(register)
    mat = rho_t.matrix if isinstance(rho_t, MomentOperator) else np.asarray(rho_t, np.complex128)
    dim = register.total_dim**t
    check_copy_dim(dim)
    if mat.shape != (dim, dim):
        raise ValueError(f"operator shape {mat.shape} does not match copy dimension {dim}")
    perm = region_block_permutation(register, partition, t)
    x = mat[np.ix_(perm, perm)]
    block_dims = [r.dim(register) ** t for r in partition.regions]
    for j, region in enumerate(partition.regions):
        left = int(np.prod(block_dims[:j], dtype=np.int64))
        right = int(np.prod(block_dims[j + 1 :], dtype=np.int64))
        x6 = x.reshape(left, block_dims[j], right, left, block_dims[j], right)
        table = weingarten_table(t, region.dim(register))
        x = _block_haar_twirl(x6, region.dim(register), t, table).reshape(dim, dim)
    inv = np.argsort(perm)
    out = x[np.ix_(inv, inv)]
    sites = "|".join(",".join(map(str, r.sites)) for r in partition.regions)
    return MomentOperator(
        CopySpace(register.total_dim, t), out, label=f"local_twirl(regions={sites}, t={t})"
    )


# ---- phase twirl -----------------------------------------------------------

def phase_class_ids(base_dim: int, t: int, mode: str = "continuous") -> np.ndarray:
    """Entry-class labels for phase averaging over t-copy basis tuples.

    continuous: tuples are equivalent iff their digit multisets agree (only
    those matrix entries survive uniform [0, 2pi) phases).
    binary: +-1 phases only see each digit's multiplicity mod 2, so tuples
    are grouped by the multiset of digits occurring an odd number of times.
    """
    if mode not in ("continuous", "binary"):
        raise ValueError(f"unknown phase mode {mode!r}")
    dim = base_dim**t
    check_copy_dim(dim)
    ids: dict[tuple[int, ...], int] = {}
    out = np.empty(dim, dtype=np.int64)
    for i, digits in enumerate(itertools.product(range(base_dim), repeat=t)):
        if mode == "continuous":
            key = tuple(sorted(digits))
        else:
            key = tuple(sorted(v for v in set(digits) if digits.count(v) % 2))
        out[i] = ids.setdefault(key, len(ids))
    return out


def phase_twirl(
    rho_t: np.ndarray, base_dim: int, t: int, mode: str = "continuous"
) -> np.ndarray:
    """Average over diagonal phase unitaries applied to all t copies.

    Keeps entry ((x_1..x_t), (y_1..y_t)) iff the phase average of its
    accumulated phase is 1 (see phase_class_ids for the two phase models);
    idempotent and trace preserving.
    """
    rho_t = np.asarray(rho_t, dtype=np.complex128)
    dim = base_dim**t
    if rho_t.shape != (dim, dim):
        raise ValueError(f"operator shape {rho_t.shape} does not match N^t = {dim}")
    ids = phase_class_ids(base_dim, t, mode)
    return np.where(ids[:, None] == ids[None, :], rho_t, 0.0)


# ---- permutation twirl ------------------------------------------------------

def _pattern_block_count(mask: int, n_pos: int) -> int:
    """Number of distinct values in a tuple whose pairwise-equality bits are
    packed in ``mask`` (bit order: (a,b) for a < b, lexicographic)."""
    parent = list(range(n_pos))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    bit = 0
    for a in range(n_pos):
        for b in range(a + 1, n_pos):
            if (mask >> bit) & 1:
                parent[find(a)] = find(b)
            bit += 1
    return len({find(i) for i in range(n_pos)})


def permutation_class_table(base_dim: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Joint collision patterns of (row tuple, column tuple) index pairs.

    Returns (class_ids, factors) where class_ids[i, j] labels the equality
    pattern of the 2t digits of entry (i, j) and factors[c] is the exact
    permutation-average weight (N - k)!/N! for a pattern with k distinct
    digits. The table is what makes the twirl exact at any N without touching
    the N! group elements.
    """
    if t > MAX_PATTERN_COPIES:
        raise ValueError(f"exact permutation twirl is limited to t <= {MAX_PATTERN_COPIES}")
    dim = base_dim**t
    check_copy_dim(dim)
    digits = np.stack(np.unravel_index(np.arange(dim), (base_dim,) * t), axis=1)
    n_pos = 2 * t
    mask = np.zeros((dim, dim), dtype=np.uint32)
    bit = 0
    for a in range(n_pos):
        for b in range(a + 1, n_pos):
            if a < t and b < t:
                eq = (digits[:, a] == digits[:, b])[:, None]
            elif a >= t and b >= t:
                eq = (digits[:, a - t] == digits[:, b - t])[None, :]
            else:
                eq = digits[:, a][:, None] == digits[:, b - t][None, :]
            mask |= eq.astype(np.uint32) << np.uint32(bit)
            bit += 1
    uniq, inverse = np.unique(mask, return_inverse=True)
    factors = np.empty(uniq.size)
    for c, pattern in enumerate(uniq):
        k = _pattern_block_count(int(pattern), n_pos)
        if k > base_dim:
            factors[c] = 0.0
        else:
            denom = 1.0
            for i in range(k):
                denom *= base_dim - i
            factors[c] = 1.0 / denom
    return inverse.reshape(dim, dim), factors


def permutation_twirl(
    rho_t: np.ndarray,
    base_dim: int,
    t: int,
    mode: str = "exact",
    samples: int = 0,
    stream: RandomStream | np.random.Generator | None = None,
) -> np.ndarray:
    """Average of P_p^{t} rho P_p^{t dagger} over basis relabellings p of [N].

    exact: groups entries by joint collision pattern and weights each class
    by the count of injective digit assignments (falling factorials).
    mc: plain average over ``samples`` uniform permutations.
    """
    rho_t = np.asarray(rho_t, dtype=np.complex128)
    dim = base_dim**t
    if rho_t.shape != (dim, dim):
        raise ValueError(f"operator shape {rho_t.shape} does not match N^t = {dim}")
    if mode == "exact":
        class_ids, factors = permutation_class_table(base_dim, t)
        sums = np.bincount(
            class_ids.ravel(), weights=rho_t.real.ravel(), minlength=factors.size
        ) + 1j * np.bincount(
            class_ids.ravel(), weights=rho_t.imag.ravel(), minlength=factors.size
        )
        return (factors * sums)[class_ids]
    if mode == "mc":
        if samples < 1:
            raise ValueError("mc mode needs samples >= 1")
        if stream is None:
            raise ValueError("mc mode needs a random stream")
        rng = _as_generator(stream)
        digits = np.stack(np.unravel_index(np.arange(dim), (base_dim,) * t), axis=1)
        acc = np.zeros_like(rho_t)
        for _ in range(samples):
            p = rng.permutation(base_dim)
            pinv = np.argsort(p)
            gather = np.ravel_multi_index(pinv[digits].T, (base_dim,) * t)
            acc += rho_t[np.ix_(gather, gather)]
        return acc / samples
    raise ValueError(f"unknown permutation twirl mode {mode!r}")


# ---- Monte Carlo moments ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class McMomentResult:
    """Empirical t-th moment plus the per-batch sub-moments used for
    dispersion estimates."""

    moment: MomentOperator
    batch_moments: tuple[np.ndarray, ...]
    batch_sizes: tuple[int, ...]
    samples: int


def mc_moment(
    spec,
    t: int,
    samples: int,
    stream: RandomStream,
    batches: int = 10,
) -> McMomentResult:
    """Empirical mean of |phi><phi|^{tensor t} over i.i.d. ensemble draws.

    Every sample owns a stream derived from its global index, so the result
    is identical for any batching or thread schedule. Batch sums are combined
    with a fixed-order pairwise tree for bit-stable accumulation.

    Memory scales as batches * N^{2t}; keep MC runs to modest copy dimensions.
    """
    from .ensembles import orbit_register, sample_state  # deferred: avoids import cycle

    if samples < 2:
        raise ValueError("need samples >= 2")
    if batches < 1:
        raise ValueError("need batches >= 1")
    if samples < batches:
        raise ValueError(f"samples ({samples}) must be >= batches ({batches})")
    register = orbit_register(spec)
    dim = register.total_dim**t
    check_copy_dim(dim)

    sizes = [samples // batches + (1 if i < samples % batches else 0) for i in range(batches)]
    chunk_rows = max(1, (1 << 22) // dim)
    batch_sums: list[np.ndarray] = []
    index = 0
    for size in sizes:
        acc = np.zeros((dim, dim), dtype=np.complex128)
        done = 0
        while done < size:
            rows = min(chunk_rows, size - done)
            block = np.empty((rows, dim), dtype=np.complex128)
            for r in range(rows):
                state = sample_state(spec, stream.child(index))
                block[r] = tcopy_vector(state, t)
                index += 1
            acc += block.conj().T @ block
            done += rows
        batch_sums.append(acc)

    def tree_sum(mats: list[np.ndarray]) -> np.ndarray:
        while len(mats) > 1:
            mats = [
                mats[i] + mats[i + 1] if i + 1 < len(mats) else mats[i]
                for i in range(0, len(mats), 2)
            ]
        return mats[0]

    total = tree_sum(list(batch_sums)) / samples
    total = 0.5 * (total + total.conj().T)
    moment = MomentOperator(
        CopySpace(register.total_dim, t), total, label=f"mc_moment(samples={samples}, t={t})"
    )
    batch_means = tuple(s / n for s, n in zip(batch_sums, sizes))
    return McMomentResult(
        moment=moment, batch_moments=batch_means, batch_sizes=tuple(sizes), samples=samples
    )
