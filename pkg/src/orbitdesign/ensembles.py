"""Declarative ensemble descriptions, their samplers, and exact-moment routes."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .copyspace import CopySpace, MomentOperator, check_copy_dim, tcopy_density, tcopy_vector
from .registers import (
    Partition,
    PureState,
    QuditRegister,
    Region,
    apply_local_unitary,
    apply_region_permutation_phase,
    bell_chain_state,
    ghz_state,
    load_state,
    max_entangled_state,
    state_from_json,
)
from .twirl import (
    RandomStream,
    _as_generator,
    phase_class_ids,
    phase_twirl,
    permutation_class_table,
    permutation_twirl,
    sample_binary_phase_unitary,
    sample_haar_unitary,
    sample_phase_unitary,
)

PHASE_MODES = ("binary", "continuous")


@dataclass(frozen=True, eq=False)
class EntOrbit:
    """Haar-random unitary on every region of a partition, applied to a fixed state."""

    state: PureState
    partition: Partition

    def __post_init__(self):
        self.partition.validate(self.state.register)


@dataclass(frozen=True, eq=False)
class CohOrbit:
    """Uniform permutation times uniform phases on the full register."""

    state: PureState


@dataclass(frozen=True, eq=False)
class GhzOrbit:
    """Entanglement orbit of the d-level GHZ state on a partition."""

    register: QuditRegister
    partition: Partition
    level: int

    def __post_init__(self):
        ghz_state(self.register, self.partition, self.level)


@dataclass(frozen=True, eq=False)
class MarkovOrbit:
    """Entanglement orbit of a Bell chain (pure Markov chain in factored form)."""

    register: QuditRegister
    partition: Partition
    ranks: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(k) for k in self.ranks))
        bell_chain_state(self.register, self.partition, self.ranks)


@dataclass(frozen=True, eq=False)
class EcOrbit:
    """Independent permutation+phase unitaries on each side of a rank-K
    maximally entangled state (subset-phase construction)."""

    register: QuditRegister
    bipartition: tuple[Region, Region]
    rank: int
    phase_mode: str = "binary"

    def __post_init__(self):
        if self.phase_mode not in PHASE_MODES:
            raise ValueError(f"phase_mode must be one of {PHASE_MODES}")
        max_entangled_state(self.register, self.bipartition, self.rank)


@dataclass(frozen=True, eq=False)
class WeightedOrbit:
    """Finite set of group elements applied to the base orbit's state
    according to explicit weights."""

    base: "EnsembleSpec"
    elements: tuple[np.ndarray, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.elements) != len(self.weights) or not self.elements:
            raise ValueError("need one weight per group element")
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must form a probability distribution")
        dim = orbit_register(self.base).total_dim
        for u in self.elements:
            if u.shape != (dim, dim):
                raise ValueError(f"group element shape {u.shape} does not match register dim {dim}")
            if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > 1e-10:
                raise ValueError("group elements must be unitary")


EnsembleSpec = Union[EntOrbit, CohOrbit, GhzOrbit, MarkovOrbit, EcOrbit, WeightedOrbit]


def variant_name(spec: EnsembleSpec) -> str:
    return {
        EntOrbit: "ent_orbit",
        CohOrbit: "coh_orbit",
        GhzOrbit: "ghz_orbit",
        MarkovOrbit: "markov_orbit",
        EcOrbit: "ec_orbit",
        WeightedOrbit: "weighted_orbit",
    }[type(spec)]


def orbit_register(spec: EnsembleSpec) -> QuditRegister:
    if isinstance(spec, (EntOrbit, CohOrbit)):
        return spec.state.register
    if isinstance(spec, (GhzOrbit, MarkovOrbit, EcOrbit)):
        return spec.register
    return orbit_register(spec.base)


def base_state(spec: EnsembleSpec) -> PureState:
    """The fixed resource state the orbit acts on."""
    if isinstance(spec, (EntOrbit, CohOrbit)):
        return spec.state
    if isinstance(spec, GhzOrbit):
        return ghz_state(spec.register, spec.partition, spec.level)
    if isinstance(spec, MarkovOrbit):
        return bell_chain_state(spec.register, spec.partition, spec.ranks)
    if isinstance(spec, EcOrbit):
        return max_entangled_state(spec.register, spec.bipartition, spec.rank)
    return base_state(spec.base)


def orbit_partition(spec: EnsembleSpec) -> Partition | None:
    if isinstance(spec, EntOrbit):
        return spec.partition
    if isinstance(spec, (GhzOrbit, MarkovOrbit)):
        return spec.partition
    if isinstance(spec, EcOrbit):
        return Partition(spec.bipartition)
    return None


def summarize(spec: EnsembleSpec) -> str:
    reg = orbit_register(spec)
    dims = ",".join(map(str, reg.site_dims))
    part = orbit_partition(spec)
    pieces = [f"dims=[{dims}]"]
    if part is not None:
        pieces.append("partition=" + "|".join(",".join(map(str, r.sites)) for r in part.regions))
    if isinstance(spec, GhzOrbit):
        pieces.append(f"level={spec.level}")
    if isinstance(spec, MarkovOrbit):
        pieces.append(f"ranks={list(spec.ranks)}")
    if isinstance(spec, EcOrbit):
        pieces.append(f"rank={spec.rank}")
        pieces.append(f"phases={spec.phase_mode}")
    if isinstance(spec, WeightedOrbit):
        pieces.append(f"elements={len(spec.elements)}")
    return f"{variant_name(spec)}({', '.join(pieces)})"


# ---- sampling ----------------------------------------------------------------

def _full_region(register: QuditRegister) -> Region:
    return Region(range(register.n_sites))


def sample_state(spec: EnsembleSpec, stream: RandomStream | np.random.Generator) -> PureState:
    """Draw one state from the ensemble; all randomness comes from ``stream``."""
    rng = _as_generator(stream)
    if isinstance(spec, (EntOrbit, GhzOrbit, MarkovOrbit)):
        state = base_state(spec)
        for region in orbit_partition(spec).regions:
            unitary = sample_haar_unitary(region.dim(state.register), rng)
            state = apply_local_unitary(state, region, unitary)
        return state
    if isinstance(spec, CohOrbit):
        dim = spec.state.register.total_dim
        perm = rng.permutation(dim)
        phases = sample_phase_unitary(dim, rng)
        return apply_region_permutation_phase(
            spec.state, _full_region(spec.state.register), perm, phases
        )
    if isinstance(spec, EcOrbit):
        state = base_state(spec)
        sample_phases = (
            sample_binary_phase_unitary if spec.phase_mode == "binary" else sample_phase_unitary
        )
        for region in spec.bipartition:
            d = region.dim(state.register)
            state = apply_region_permutation_phase(
                state, region, rng.permutation(d), sample_phases(d, rng)
            )
        return state
    if isinstance(spec, WeightedOrbit):
        pick = rng.choice(len(spec.elements), p=np.asarray(spec.weights))
        amps = spec.elements[pick] @ base_state(spec).amplitudes
        return PureState(orbit_register(spec), amps)
    raise TypeError(f"unknown ensemble spec {type(spec)!r}")


# ---- exact moments --------------------------------------------------------------

def _side_phase_perm_twirl(
    x4: np.ndarray, side: int, side_dim: int, t: int, phase_mode: str
) -> np.ndarray:
    """Phase then permutation twirl on one tensor factor of an
    (A-copies, B-copies, A-copies, B-copies) operator."""
    if side == 1:
        out = _side_phase_perm_twirl(x4.transpose(1, 0, 3, 2), 0, side_dim, t, phase_mode)
        return np.ascontiguousarray(out.transpose(1, 0, 3, 2))
    ids = phase_class_ids(side_dim, t, phase_mode)
    x4 = x4 * (ids[:, None] == ids[None, :])[:, None, :, None]
    class_ids, factors = permutation_class_table(side_dim, t)
    block = side_dim**t
    rest = x4.shape[1]
    flat = x4.transpose(0, 2, 1, 3).reshape(block * block, rest * rest)
    ids_flat = class_ids.ravel()
    sums = np.zeros((factors.size, rest * rest), dtype=np.complex128)
    for c in np.unique(ids_flat):
        sums[c] = flat[ids_flat == c].sum(axis=0)
    out = (factors[ids_flat, None] * sums[ids_flat]).reshape(block, block, rest, rest)
    return np.ascontiguousarray(out.transpose(0, 2, 1, 3))


def exact_moment(spec: EnsembleSpec, t: int) -> MomentOperator:
    """The true t-th moment E[|phi><phi|^{tensor t}] of the ensemble."""
    if t < 1:
        raise ValueError("t must be >= 1")
    register = orbit_register(spec)
    dim = register.total_dim**t
    check_copy_dim(dim)
    space = CopySpace(register.total_dim, t)
    label = f"exact_moment({summarize(spec)}, t={t})"

    if isinstance(spec, (EntOrbit, GhzOrbit, MarkovOrbit)):
        from .twirl import exact_local_twirl

        rho = tcopy_density(base_state(spec), t)
        twirled = exact_local_twirl(rho, register, orbit_partition(spec), t)
        return MomentOperator(space, twirled.matrix, label=label)

    if isinstance(spec, CohOrbit):
        rho = tcopy_density(spec.state, t)
        rho = phase_twirl(rho, register.total_dim, t, mode="continuous")
        rho = permutation_twirl(rho, register.total_dim, t, mode="exact")
        return MomentOperator(space, rho, label=label)

    if isinstance(spec, EcOrbit):
        from .copyspace import reorder_to_region_blocks

        part = Partition(spec.bipartition)
        rho = tcopy_density(base_state(spec), t)
        x = reorder_to_region_blocks(rho, register, part, t)
        dims = [r.dim(register) for r in spec.bipartition]
        x4 = x.reshape(dims[0] ** t, dims[1] ** t, dims[0] ** t, dims[1] ** t)
        x4 = _side_phase_perm_twirl(x4, 0, dims[0], t, spec.phase_mode)
        x4 = _side_phase_perm_twirl(x4, 1, dims[1], t, spec.phase_mode)
        out = reorder_to_region_blocks(x4.reshape(dim, dim), register, part, t, inverse=True)
        return MomentOperator(space, out, label=label)

    if isinstance(spec, WeightedOrbit):
        psi = base_state(spec)
        acc = np.zeros((dim, dim), dtype=np.complex128)
        for weight, unitary in zip(spec.weights, spec.elements):
            vec = tcopy_vector(PureState(register, unitary @ psi.amplitudes), t)
            acc += weight * np.outer(vec, vec.conj())
        return MomentOperator(space, acc, label=label)

    raise TypeError(f"unknown ensemble spec {type(spec)!r}")


# ---- finite test groups ------------------------------------------------------------

_PAULI_1Q = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def pauli_group_elements(n_qubits: int = 1) -> tuple[np.ndarray, ...]:
    """All 4^n Pauli strings (one representative per phase class)."""
    if n_qubits < 1 or n_qubits > 4:
        raise ValueError("pauli_group_elements supports 1..4 qubits")
    mats = []
    for labels in itertools.product("IXYZ", repeat=n_qubits):
        m = np.eye(1, dtype=np.complex128)
        for ch in labels:
            m = np.kron(m, _PAULI_1Q[ch])
        mats.append(m)
    return tuple(mats)


def permutation_matrices(dim: int) -> tuple[np.ndarray, ...]:
    """All dim! basis-permutation matrices (dim <= 5)."""
    if dim < 1 or dim > 5:
        raise ValueError("permutation_matrices supports dimensions 1..5")
    mats = []
    for perm in itertools.permutations(range(dim)):
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[list(perm), range(dim)] = 1.0
        mats.append(m)
    return tuple(mats)


def uniform_weights(count: int) -> tuple[float, ...]:
    return tuple([1.0 / count] * count)


# ---- serialization ------------------------------------------------------------------

def _state_to_jsonable(state: PureState) -> dict:
    return {
        "site_dims": list(state.register.site_dims),
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }


def _state_from_jsonable(obj: dict) -> PureState:
    if "path" in obj:
        return load_state(obj["path"])
    return state_from_json(json.dumps(obj))


def _matrix_to_jsonable(mat: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in mat]


def _matrix_from_jsonable(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def spec_to_jsonable(spec: EnsembleSpec) -> dict:
    if isinstance(spec, EntOrbit):
        return {
            "variant": "ent_orbit",
            "state": _state_to_jsonable(spec.state),
            "partition": [list(r.sites) for r in spec.partition.regions],
        }
    if isinstance(spec, CohOrbit):
        return {"variant": "coh_orbit", "state": _state_to_jsonable(spec.state)}
    if isinstance(spec, GhzOrbit):
        return {
            "variant": "ghz_orbit",
            "site_dims": list(spec.register.site_dims),
            "partition": [list(r.sites) for r in spec.partition.regions],
            "level": spec.level,
        }
    if isinstance(spec, MarkovOrbit):
        return {
            "variant": "markov_orbit",
            "site_dims": list(spec.register.site_dims),
            "partition": [list(r.sites) for r in spec.partition.regions],
            "ranks": list(spec.ranks),
        }
    if isinstance(spec, EcOrbit):
        return {
            "variant": "ec_orbit",
            "site_dims": list(spec.register.site_dims),
            "bipartition": [list(r.sites) for r in spec.bipartition],
            "rank": spec.rank,
            "phase_mode": spec.phase_mode,
        }
    if isinstance(spec, WeightedOrbit):
        return {
            "variant": "weighted_orbit",
            "base": spec_to_jsonable(spec.base),
            "elements": [_matrix_to_jsonable(u) for u in spec.elements],
            "weights": list(spec.weights),
        }
    raise TypeError(f"unknown ensemble spec {type(spec)!r}")


def spec_from_jsonable(obj: dict) -> EnsembleSpec:
    try:
        variant = obj["variant"]
    except (KeyError, TypeError):
        raise ValueError("ensemble spec needs a 'variant' tag") from None
    if variant == "ent_orbit":
        return EntOrbit(_state_from_jsonable(obj["state"]), Partition(obj["partition"]))
    if variant == "coh_orbit":
        return CohOrbit(_state_from_jsonable(obj["state"]))
    if variant == "ghz_orbit":
        return GhzOrbit(
            QuditRegister(obj["site_dims"]), Partition(obj["partition"]), int(obj["level"])
        )
    if variant == "markov_orbit":
        return MarkovOrbit(
            QuditRegister(obj["site_dims"]), Partition(obj["partition"]), tuple(obj["ranks"])
        )
    if variant == "ec_orbit":
        regions = tuple(Region(sites) for sites in obj["bipartition"])
        return EcOrbit(
            QuditRegister(obj["site_dims"]),
            regions,
            int(obj["rank"]),
            obj.get("phase_mode", "binary"),
        )
    if variant == "weighted_orbit":
        return WeightedOrbit(
            spec_from_jsonable(obj["base"]),
            tuple(_matrix_from_jsonable(m) for m in obj["elements"]),
            tuple(float(w) for w in obj["weights"]),
        )
    raise ValueError(f"unknown ensemble variant {variant!r}")


def spec_to_json(spec: EnsembleSpec) -> str:
    return json.dumps(spec_to_jsonable(spec))


def spec_from_json(text: str) -> EnsembleSpec:
    return spec_from_jsonable(json.loads(text))
