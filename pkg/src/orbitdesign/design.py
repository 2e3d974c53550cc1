"""Design-error reports: trace distance to the Haar moment, theoretical bound
evaluation, and the uniform-versus-weighted orbit comparison."""

from __future__ import annotations

import time
from dataclasses import dataclass
from math import comb, exp
from typing import Sequence

import numpy as np

from .copyspace import CopySpace, MomentOperator, haar_moment
from .ensembles import (
    CohOrbit,
    EcOrbit,
    EnsembleSpec,
    EntOrbit,
    GhzOrbit,
    MarkovOrbit,
    WeightedOrbit,
    base_state,
    exact_moment,
    orbit_partition,
    orbit_register,
    summarize,
    uniform_weights,
    variant_name,
)
from .entropy import renyi2_coherence, renyi2_entanglement
from .registers import Region
from .twirl import RandomStream, mc_moment

HERMITIAN_INPUT_TOL = 1e-6


def _as_matrix(op: MomentOperator | np.ndarray) -> np.ndarray:
    if isinstance(op, MomentOperator):
        return op.matrix
    return np.asarray(op, dtype=np.complex128)


def trace_distance(rho: MomentOperator | np.ndarray, sigma: MomentOperator | np.ndarray) -> float:
    """(1/2) ||rho - sigma||_1 via eigenvalues of the Hermitized difference."""
    a = _as_matrix(rho)
    b = _as_matrix(sigma)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator shapes {a.shape} and {b.shape} do not match")
    for name, m in (("rho", a), ("sigma", b)):
        defect = np.max(np.abs(m - m.conj().T))
        if defect > HERMITIAN_INPUT_TOL:
            raise ValueError(f"{name} is not Hermitian: max |M - M^H| = {defect:.3e}")
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    eigs = np.linalg.eigvalsh(diff)
    return float(min(1.0, max(0.0, 0.5 * np.sum(np.abs(eigs)))))


# ---- entropies and bounds -------------------------------------------------

def cumulative_cuts(spec: EnsembleSpec) -> list[Region]:
    """Regions A_1, A_1 u A_2, ... (all but the last union) of the partition."""
    part = orbit_partition(spec)
    if part is None or len(part) < 2:
        return []
    cuts = []
    sites: list[int] = []
    for region in part.regions[:-1]:
        sites = sorted(sites + list(region.sites))
        cuts.append(Region(sites))
    return cuts


def orbit_entropies(spec: EnsembleSpec) -> dict:
    """The resource entropies (nats) that control the spec's design error."""
    entropies: dict = {}
    if isinstance(spec, (EntOrbit, GhzOrbit, MarkovOrbit, EcOrbit)):
        state = base_state(spec)
        entropies["N2_cuts"] = [renyi2_entanglement(state, cut) for cut in cumulative_cuts(spec)]
    if isinstance(spec, (CohOrbit, EcOrbit)):
        entropies["C2"] = renyi2_coherence(base_state(spec))
    return entropies


def residual_scale(spec: EnsembleSpec, t: int) -> float | None:
    """Scale of the subleading error terms, reported separately from bounds.

    Partitioned orbits: t^2 * sum_i 1/min(dim A_i, dim A_i^c) over the
    cumulative cuts (the approximate-twirl residual per cut); GHZ: l*t^2/N;
    coherence: t^2/N; subset-phase: t^2*(1/dim_A + 1/dim_B).
    """
    register = orbit_register(spec)
    if isinstance(spec, (EntOrbit, MarkovOrbit)):
        total = register.total_dim
        scale = 0.0
        for cut in cumulative_cuts(spec):
            d_cut = cut.dim(register)
            scale += 1.0 / min(d_cut, total // d_cut)
        return t * t * scale
    if isinstance(spec, GhzOrbit):
        return len(spec.partition) * t * t / register.total_dim
    if isinstance(spec, CohOrbit):
        return t * t / register.total_dim
    if isinstance(spec, EcOrbit):
        da, db = (r.dim(register) for r in spec.bipartition)
        return t * t * (1.0 / da + 1.0 / db)
    return None


def bound_evaluate(spec: EnsembleSpec, t: int, entropies: dict) -> dict[str, float]:
    """Leading-term theoretical bound values with the derived constants.

    thm1: (3/4) t^2 e^{-N2} for bipartite entanglement orbits.
    thm2: t^2 sum_i e^{-N2(A_i)} for partitioned orbits with >= 3 regions
          (a proven bound only when the base state is a Markov chain).
    thm3: t^2/d for GHZ orbits.
    lem4: t^2 e^{-C2} for coherence orbits.
    thm8: t^2 e^{-N2} reference scale for subset-phase orbits.
    Residual scales are never folded in; see residual_scale.
    """
    bounds: dict[str, float] = {}
    if isinstance(spec, (EntOrbit, MarkovOrbit)):
        part = orbit_partition(spec)
        cuts = entropies.get("N2_cuts")
        if len(part) >= 2 and not cuts:
            raise ValueError("partitioned orbit needs N2 for its cumulative cuts")
        if cuts and len(cuts) == 1:
            bounds["thm1"] = 0.75 * t * t * exp(-cuts[0])
        if cuts and len(cuts) >= 2:
            bounds["thm2"] = t * t * sum(exp(-n2) for n2 in cuts)
    if isinstance(spec, GhzOrbit):
        bounds["thm3"] = t * t / spec.level
    if isinstance(spec, CohOrbit):
        if "C2" not in entropies:
            raise ValueError("coherence orbit needs C2")
        bounds["lem4"] = t * t * exp(-entropies["C2"])
    if isinstance(spec, EcOrbit):
        cuts = entropies.get("N2_cuts")
        if not cuts:
            raise ValueError("subset-phase orbit needs N2 across its bipartition")
        bounds["thm8"] = t * t * exp(-cuts[0])
    return bounds


# ---- reports -----------------------------------------------------------------

@dataclass
class DesignErrorReport:
    """Measured design error next to the theoretical bound values."""

    spec_summary: str
    variant: str
    n_sites: int
    t: int
    error: float
    method: str
    bounds: dict[str, float]
    entropies: dict
    residual_scale: float | None
    samples: int | None = None
    batches: int | None = None
    dispersion: float | None = None
    noise_floor: float | None = None
    small_sample_bias: bool | None = None
    seed: int | None = None
    timing_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "spec_summary": self.spec_summary,
            "variant": self.variant,
            "n_sites": self.n_sites,
            "t": self.t,
            "error": self.error,
            "method": self.method,
            "bounds": dict(self.bounds),
            "entropies": dict(self.entropies),
            "residual_scale": self.residual_scale,
            "samples": self.samples,
            "batches": self.batches,
            "dispersion": self.dispersion,
            "noise_floor": self.noise_floor,
            "small_sample_bias": self.small_sample_bias,
            "seed": self.seed,
            "timing_s": self.timing_s,
        }


def _haar_reference(spec: EnsembleSpec, t: int) -> MomentOperator:
    return haar_moment(CopySpace(orbit_register(spec).total_dim, t))


def design_error_exact(spec: EnsembleSpec, t: int) -> DesignErrorReport:
    """Trace distance of the exact ensemble moment from the Haar moment."""
    start = time.perf_counter()
    entropies = orbit_entropies(spec)
    moment = exact_moment(spec, t)
    error = trace_distance(moment, _haar_reference(spec, t))
    return DesignErrorReport(
        spec_summary=summarize(spec),
        variant=variant_name(spec),
        n_sites=orbit_register(spec).n_sites,
        t=t,
        error=error,
        method="exact",
        bounds=bound_evaluate(spec, t, entropies),
        entropies=entropies,
        residual_scale=residual_scale(spec, t),
        timing_s=time.perf_counter() - start,
    )


def design_error_mc(
    spec: EnsembleSpec,
    t: int,
    samples: int,
    stream: RandomStream,
    batches: int = 10,
) -> DesignErrorReport:
    """Monte Carlo design error with a batch-dispersion estimate.

    The dispersion is the standard deviation of the per-batch trace distances.
    The empirical trace distance is positively biased by sampling noise; the
    reported noise floor is the semicircle-law estimate
    (4/3pi) sqrt(sym_rank/samples) of that bias, and the run is flagged when
    the measured error is within a factor 4 of it.
    """
    start = time.perf_counter()
    entropies = orbit_entropies(spec)
    result = mc_moment(spec, t, samples, stream, batches=batches)
    haar = _haar_reference(spec, t)
    error = trace_distance(result.moment, haar)
    batch_distances = [trace_distance(0.5 * (m + m.conj().T), haar) for m in result.batch_moments]
    register = orbit_register(spec)
    sym_rank = comb(register.total_dim + t - 1, t)
    floor = (4.0 / (3.0 * np.pi)) * np.sqrt(sym_rank / samples)
    return DesignErrorReport(
        spec_summary=summarize(spec),
        variant=variant_name(spec),
        n_sites=register.n_sites,
        t=t,
        error=error,
        method="mc",
        bounds=bound_evaluate(spec, t, entropies),
        entropies=entropies,
        residual_scale=residual_scale(spec, t),
        samples=samples,
        batches=len(result.batch_moments),
        dispersion=float(np.std(batch_distances)),
        noise_floor=float(floor),
        small_sample_bias=bool(error < 4.0 * floor),
        seed=stream.master_seed,
        timing_s=time.perf_counter() - start,
    )


# ---- uniform optimality -------------------------------------------------------

@dataclass
class UniformOptimalityReport:
    """Design errors of weighted orbit variants against the uniform reference."""

    uniform_error: float
    weighted_errors: tuple[float, ...]
    tolerance: float
    holds: bool


def uniform_vs_weighted(
    base: WeightedOrbit,
    variants: Sequence[WeightedOrbit | Sequence[float]],
    t: int,
    mode: str = "exact",
    samples: int = 0,
    stream: RandomStream | None = None,
    tolerance: float = 1e-9,
) -> UniformOptimalityReport:
    """Compare the uniform distribution over a finite group of unitaries with
    arbitrarily weighted distributions over the same elements.

    Uniform weighting can never be further from the Haar moment, provided the
    element set is closed under composition (a finite group); in exact mode a
    violation beyond ``tolerance`` raises, since it would signal a bug.
    """
    if not isinstance(base, WeightedOrbit):
        raise TypeError("base must be a WeightedOrbit carrying the group element set")
    specs: list[WeightedOrbit] = []
    for variant in variants:
        if isinstance(variant, WeightedOrbit):
            if variant.elements is not base.elements and not all(
                np.array_equal(a, b) for a, b in zip(variant.elements, base.elements)
            ):
                raise ValueError("weighted variants must share the base orbit's element set")
            specs.append(variant)
        else:
            specs.append(WeightedOrbit(base.base, base.elements, tuple(float(w) for w in variant)))

    reference = WeightedOrbit(base.base, base.elements, uniform_weights(len(base.elements)))

    def error_of(spec: WeightedOrbit) -> float:
        if mode == "exact":
            return design_error_exact(spec, t).error
        if mode == "mc":
            if stream is None or samples < 2:
                raise ValueError("mc mode needs a stream and samples >= 2")
            return design_error_mc(spec, t, samples, stream).error
        raise ValueError(f"unknown mode {mode!r}")

    uniform_error = error_of(reference)
    weighted_errors = tuple(error_of(s) for s in specs)
    holds = all(uniform_error <= w + tolerance for w in weighted_errors)
    if mode == "exact" and not holds:
        worst = min(w - uniform_error for w in weighted_errors)
        raise RuntimeError(
            f"uniform orbit came out farther from Haar than a weighted one (margin {worst:.3e}); "
            "this should be impossible for a closed element set"
        )
    return UniformOptimalityReport(
        uniform_error=uniform_error,
        weighted_errors=weighted_errors,
        tolerance=tolerance,
        holds=holds,
    )
