"""Schmidt decomposition and second Renyi resource measures.

All entropies are in nats (natural logarithm).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log
from typing import Sequence

import numpy as np

from .registers import PureState, Region, complement_region, region_matrix

SPECTRUM_TOL = 1e-9
SV_CLAMP = 1e-12


@dataclass(frozen=True, eq=False)
class SchmidtSpectrum:
    """Descending Schmidt coefficients of a pure state across a cut."""

    coefficients: np.ndarray
    cut: tuple[Region, Region]

    def __init__(self, coefficients: np.ndarray, cut: tuple[Region, Region]):
        coeffs = np.asarray(coefficients, dtype=np.float64).copy()
        if np.any(coeffs < 0) or np.any(np.diff(coeffs) > 0):
            raise ValueError("Schmidt coefficients must be nonnegative and descending")
        total = float(np.sum(coeffs**2))
        if abs(total - 1.0) > SPECTRUM_TOL:
            raise ValueError(f"Schmidt coefficients are not normalized: sum of squares = {total}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "cut", cut)


@dataclass(frozen=True, eq=False)
class ProbDist:
    """Probability vector: nonnegative entries summing to one."""

    probabilities: np.ndarray

    def __init__(self, probabilities: Sequence[float] | np.ndarray):
        p = np.asarray(probabilities, dtype=np.float64).copy()
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probability vector must be 1-D and nonempty")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        total = float(p.sum())
        if abs(total - 1.0) > SPECTRUM_TOL:
            raise ValueError(f"probabilities must sum to 1, got {total}")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def __len__(self) -> int:
        return self.probabilities.size


def schmidt_spectrum(state: PureState, region: Region) -> SchmidtSpectrum:
    """Singular values of the amplitude matrix across (region, complement)."""
    region.validate(state.register)
    if len(region.sites) == state.register.n_sites:
        raise ValueError("region must be a proper subset of the register sites")
    mat = region_matrix(state, region)
    s = np.linalg.svd(mat, compute_uv=False)
    s = np.where(s < SV_CLAMP, 0.0, s)
    return SchmidtSpectrum(s, (region, complement_region(state.register, region)))


def renyi2_entanglement(state: PureState, region: Region) -> float:
    """Second Renyi entanglement entropy across a cut: -ln(sum lambda^4)."""
    lam = schmidt_spectrum(state, region).coefficients
    return max(0.0, float(-np.log(np.sum(lam**4))))


def renyi2_coherence(state: PureState) -> float:
    """Second Renyi coherence entropy: -ln(sum |c_x|^4) in the computational basis."""
    w = np.abs(state.amplitudes) ** 2
    return max(0.0, float(-np.log(np.sum(w**2))))


def _fwht(v: np.ndarray) -> np.ndarray:
    """Walsh-Hadamard transform, out[z] = sum_b (-1)^{popcount(b & z)} v[b]."""
    out = v.copy()
    n = out.size
    h = 1
    while h < n:
        out = out.reshape(-1, 2, h)
        top = out[:, 0, :] + out[:, 1, :]
        bot = out[:, 0, :] - out[:, 1, :]
        out = np.stack((top, bot), axis=1).reshape(n)
        h *= 2
    return out


def renyi2_stabilizer(state: PureState) -> float:
    """Second stabilizer Renyi entropy from all 4^n Pauli expectations.

    Writes each Pauli string as (x, z) bit masks; for fixed x the expectations
    over all z form a Walsh-Hadamard transform of conj(psi[b xor x]) * psi[b],
    so the full enumeration costs O(N^2 log N) instead of O(N^3).
    """
    if any(d != 2 for d in state.register.site_dims):
        raise ValueError("stabilizer entropy is defined for qubit registers only")
    n = state.register.n_sites
    dim = state.register.total_dim
    amps = state.amplitudes
    idx = np.arange(dim)
    total = 0.0
    for x in range(dim):
        vx = np.conj(amps[idx ^ x]) * amps
        expect = _fwht(vx)
        # global i^{|x & z|} phase drops out of |<P>|^2
        total += float(np.sum(np.abs(expect) ** 4)) / dim**2
    return max(0.0, -log(total) - log(dim))


def renyi_alpha(dist: ProbDist | Sequence[float], alpha: float) -> float:
    """Renyi-alpha entropy of a distribution; Shannon branch at alpha = 1."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not isinstance(dist, ProbDist):
        dist = ProbDist(dist)
    p = dist.probabilities
    if alpha == 1.0:
        nz = p[p > 0]
        return float(-np.sum(nz * np.log(nz)))
    return float(np.log(np.sum(p**alpha)) / (1.0 - alpha))


def spiked_distribution(length: int, delta: float) -> ProbDist:
    """The distribution {1 - delta, delta/(L-1), ..., delta/(L-1)}."""
    if length < 2 or not 0 < delta < 1:
        raise ValueError("need length >= 2 and delta in (0, 1)")
    p = np.full(length, delta / (length - 1))
    p[0] = 1.0 - delta
    return ProbDist(p)
