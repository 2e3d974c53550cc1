"""Qudit registers, pure-state storage, and resource-state constructors.

Index convention used everywhere: basis states are labelled mixed-radix with
site 0 as the most significant digit, so ``amplitudes.reshape(site_dims)``
puts site ``i`` on axis ``i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import prod, sqrt
from typing import Sequence

import numpy as np

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class QuditRegister:
    """An ordered collection of qudits with per-site local dimensions."""

    site_dims: tuple[int, ...]

    def __init__(self, site_dims: Sequence[int]):
        dims = tuple(int(d) for d in site_dims)
        if not dims:
            raise ValueError("register needs at least one site")
        if any(d < 2 for d in dims):
            raise ValueError(f"every site dimension must be >= 2, got {dims}")
        object.__setattr__(self, "site_dims", dims)

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    @property
    def total_dim(self) -> int:
        return prod(self.site_dims)


@dataclass(frozen=True)
class Region:
    """A strictly increasing list of site indices into a register."""

    sites: tuple[int, ...]

    def __init__(self, sites: Sequence[int]):
        s = tuple(int(x) for x in sites)
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError(f"region sites must be strictly increasing, got {s}")
        object.__setattr__(self, "sites", s)

    def validate(self, register: QuditRegister) -> None:
        if not self.sites:
            raise ValueError("region is empty")
        if self.sites[-1] >= register.n_sites or self.sites[0] < 0:
            raise ValueError(f"region sites {self.sites} out of range for {register.n_sites} sites")

    def dim(self, register: QuditRegister) -> int:
        return prod(register.site_dims[s] for s in self.sites)


@dataclass(frozen=True)
class Partition:
    """Ordered disjoint regions covering all sites of a register."""

    regions: tuple[Region, ...]

    def __init__(self, regions: Sequence[Region | Sequence[int]]):
        regs = tuple(r if isinstance(r, Region) else Region(r) for r in regions)
        object.__setattr__(self, "regions", regs)

    def validate(self, register: QuditRegister) -> None:
        seen: set[int] = set()
        for r in self.regions:
            r.validate(register)
            if seen & set(r.sites):
                raise ValueError("partition regions overlap")
            seen |= set(r.sites)
        if seen != set(range(register.n_sites)):
            raise ValueError("partition must cover every site of the register")

    def __len__(self) -> int:
        return len(self.regions)


def complement_region(register: QuditRegister, region: Region) -> Region:
    rest = [s for s in range(register.n_sites) if s not in set(region.sites)]
    return Region(rest)


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized complex amplitude vector over a qudit register. Immutable."""

    register: QuditRegister
    amplitudes: np.ndarray

    def __init__(self, register: QuditRegister, amplitudes: np.ndarray):
        amps = np.asarray(amplitudes, dtype=np.complex128).copy()
        if amps.shape != (register.total_dim,):
            raise ValueError(
                f"amplitude vector has length {amps.shape}, register dimension is {register.total_dim}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: |norm - 1| = {abs(norm - 1.0):.3e}")
        amps.setflags(write=False)
        object.__setattr__(self, "register", register)
        object.__setattr__(self, "amplitudes", amps)


def _unrank(index: int, dims: Sequence[int]) -> list[int]:
    """Mixed-radix digits of ``index``, most significant digit first."""
    digits = []
    for d in reversed(dims):
        digits.append(index % d)
        index //= d
    return digits[::-1]


def _compose_index(register: QuditRegister, assignments: Sequence[tuple[Region, int]]) -> int:
    """Global basis index from per-region local indices; regions must cover."""
    digit = [-1] * register.n_sites
    for region, local in assignments:
        local_dims = [register.site_dims[s] for s in region.sites]
        for site, val in zip(region.sites, _unrank(local, local_dims)):
            digit[site] = val
    if any(v < 0 for v in digit):
        raise ValueError("assignments do not cover the register")
    index = 0
    for site, val in enumerate(digit):
        index = index * register.site_dims[site] + val
    return index


def basis_state(register: QuditRegister, index: int) -> PureState:
    """Computational basis state |index> in the mixed-radix convention."""
    if not 0 <= index < register.total_dim:
        raise ValueError(f"basis index {index} out of range for dimension {register.total_dim}")
    amps = np.zeros(register.total_dim, dtype=np.complex128)
    amps[index] = 1.0
    return PureState(register, amps)


def uniform_superposition(register: QuditRegister, support: int) -> PureState:
    """Equal-amplitude superposition over the first ``support`` basis states."""
    if not 1 <= support <= register.total_dim:
        raise ValueError(f"support {support} out of range for dimension {register.total_dim}")
    amps = np.zeros(register.total_dim, dtype=np.complex128)
    amps[:support] = 1.0 / sqrt(support)
    return PureState(register, amps)


def max_entangled_state(
    register: QuditRegister, bipartition: tuple[Region, Region], rank: int
) -> PureState:
    """Rank-K maximally entangled state across a bipartition.

    Returns (1/sqrt(K)) * sum_{z<K} |z>_A |z>_B where |z> is the z-th
    computational state of each region.
    """
    part = Partition(bipartition)
    part.validate(register)
    a, b = part.regions
    if rank < 1:
        raise ValueError("rank must be >= 1")
    if rank > min(a.dim(register), b.dim(register)):
        raise ValueError(
            f"rank {rank} exceeds a region dimension ({a.dim(register)}, {b.dim(register)})"
        )
    amps = np.zeros(register.total_dim, dtype=np.complex128)
    for z in range(rank):
        amps[_compose_index(register, [(a, z), (b, z)])] = 1.0 / sqrt(rank)
    return PureState(register, amps)


def bell_chain_state(
    register: QuditRegister, partition: Partition, ranks: Sequence[int]
) -> PureState:
    """Chain of maximally entangled pairs straddling consecutive regions.

    Pair i (rank ranks[i]) links regions i and i+1, so an interior region
    stores one digit of each neighbouring pair; the Schmidt rank across the
    cut between the first i+1 regions and the rest is exactly ranks[i].
    """
    partition.validate(register)
    regions = partition.regions
    l = len(regions)
    if l < 2:
        raise ValueError("bell chain needs at least 2 regions")
    ranks = [int(k) for k in ranks]
    if len(ranks) != l - 1:
        raise ValueError(f"need {l - 1} interface ranks for {l} regions, got {len(ranks)}")
    if any(k < 1 for k in ranks):
        raise ValueError("interface ranks must be >= 1")
    caps = [ranks[0]] + [ranks[i - 1] * ranks[i] for i in range(1, l - 1)] + [ranks[-1]]
    for region, cap in zip(regions, caps):
        if region.dim(register) < cap:
            raise ValueError(
                f"region {region.sites} has dimension {region.dim(register)} < required capacity {cap}"
            )
    amps = np.zeros(register.total_dim, dtype=np.complex128)
    weight = 1.0 / sqrt(prod(ranks))
    for zs in np.ndindex(*ranks):
        assignments = [(regions[0], zs[0])]
        for i in range(1, l - 1):
            assignments.append((regions[i], zs[i - 1] * ranks[i] + zs[i]))
        assignments.append((regions[-1], zs[-1]))
        amps[_compose_index(register, assignments)] = weight
    return PureState(register, amps)


def ghz_state(register: QuditRegister, partition: Partition, level: int) -> PureState:
    """d-level GHZ state (1/sqrt(d)) * sum_{x<d} |x>^{tensor over regions}."""
    partition.validate(register)
    if len(partition) < 2:
        raise ValueError("GHZ state needs at least 2 regions")
    min_dim = min(r.dim(register) for r in partition.regions)
    if not 2 <= level <= min_dim:
        raise ValueError(f"GHZ level {level} must lie in [2, {min_dim}]")
    amps = np.zeros(register.total_dim, dtype=np.complex128)
    for x in range(level):
        amps[_compose_index(register, [(r, x) for r in partition.regions])] = 1.0 / sqrt(level)
    return PureState(register, amps)


def _region_axes(register: QuditRegister, region: Region) -> tuple[list[int], list[int]]:
    inside = list(region.sites)
    outside = [s for s in range(register.n_sites) if s not in set(region.sites)]
    return inside, outside


def region_matrix(state: PureState, region: Region) -> np.ndarray:
    """Amplitudes reshaped to (region dimension, complement dimension)."""
    region.validate(state.register)
    inside, outside = _region_axes(state.register, region)
    tensor = state.amplitudes.reshape(state.register.site_dims)
    mat = tensor.transpose(inside + outside)
    return mat.reshape(region.dim(state.register), -1)


def _from_region_matrix(register: QuditRegister, region: Region, mat: np.ndarray) -> np.ndarray:
    inside, outside = _region_axes(register, region)
    order = inside + outside
    dims = [register.site_dims[s] for s in order]
    tensor = mat.reshape(dims).transpose(np.argsort(order))
    return tensor.reshape(register.total_dim)


def apply_local_unitary(state: PureState, region: Region, unitary: np.ndarray) -> PureState:
    """Apply a unitary supported on ``region``, identity elsewhere."""
    region.validate(state.register)
    u = np.asarray(unitary, dtype=np.complex128)
    d = region.dim(state.register)
    if u.shape != (d, d):
        raise ValueError(f"unitary has shape {u.shape}, region dimension is {d}")
    defect = np.max(np.abs(u.conj().T @ u - np.eye(d)))
    if defect > UNITARY_TOL:
        raise ValueError(f"matrix is not unitary: max |U^H U - I| = {defect:.3e}")
    mat = u @ region_matrix(state, region)
    return PureState(state.register, _from_region_matrix(state.register, region, mat))


def apply_region_permutation_phase(
    state: PureState,
    region: Region,
    perm: np.ndarray,
    phases: np.ndarray,
) -> PureState:
    """Apply the coherence-free unitary P*F on a region: phases first, then
    the basis relabelling z -> perm[z]."""
    region.validate(state.register)
    d = region.dim(state.register)
    perm = np.asarray(perm)
    phases = np.asarray(phases, dtype=np.complex128)
    if perm.shape != (d,) or phases.shape != (d,):
        raise ValueError("permutation/phase length must match the region dimension")
    mat = phases[:, None] * region_matrix(state, region)
    out = np.empty_like(mat)
    out[perm] = mat
    return PureState(state.register, _from_region_matrix(state.register, region, out))


def overlap(psi: PureState, phi: PureState) -> complex:
    """<psi|phi>, conjugating the first argument."""
    if psi.register != phi.register:
        raise ValueError("states live on different registers")
    return complex(np.vdot(psi.amplitudes, phi.amplitudes))


def random_state(register: QuditRegister, rng: np.random.Generator) -> PureState:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    v = rng.standard_normal(register.total_dim) + 1j * rng.standard_normal(register.total_dim)
    return PureState(register, v / np.linalg.norm(v))


def state_to_json(state: PureState) -> str:
    payload = {
        "site_dims": list(state.register.site_dims),
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }
    return json.dumps(payload)


def state_from_json(text: str) -> PureState:
    payload = json.loads(text)
    register = QuditRegister(payload["site_dims"])
    amps = np.array([complex(re, im) for re, im in payload["amplitudes"]])
    return PureState(register, amps)


def save_state(state: PureState, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(state_to_json(state))


def load_state(path: str) -> PureState:
    with open(path, "r", encoding="utf-8") as fh:
        return state_from_json(fh.read())
