"""orbitdesign: approximate state designs from constant-resource orbits.

Builds ensembles of states from fixed resource states via resource-free local
operations, computes their t-th moments exactly (Weingarten calculus and
collision-pattern twirls) or by Monte Carlo, and compares the design error
against second-Renyi-entropy bounds.
"""

from .copyspace import (
    CopySpace,
    MomentOperator,
    SizeCapError,
    haar_moment,
    p_dist,
    permutation_operator,
    pure_overlap_trace_distance,
    reorder_to_region_blocks,
    symmetric_projector,
    tcopy_density,
    tcopy_vector,
)
from .design import (
    DesignErrorReport,
    UniformOptimalityReport,
    bound_evaluate,
    design_error_exact,
    design_error_mc,
    trace_distance,
    uniform_vs_weighted,
)
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
    pauli_group_elements,
    permutation_matrices,
    sample_state,
    spec_from_json,
    spec_to_json,
)
from .entropy import (
    ProbDist,
    SchmidtSpectrum,
    renyi2_coherence,
    renyi2_entanglement,
    renyi2_stabilizer,
    renyi_alpha,
    schmidt_spectrum,
)
from .registers import (
    Partition,
    PureState,
    QuditRegister,
    Region,
    apply_local_unitary,
    basis_state,
    bell_chain_state,
    ghz_state,
    load_state,
    max_entangled_state,
    overlap,
    random_state,
    save_state,
    state_from_json,
    state_to_json,
    uniform_superposition,
)
from .twirl import (
    RandomStream,
    WeingartenTable,
    exact_haar_twirl,
    exact_local_twirl,
    mc_moment,
    permutation_twirl,
    phase_twirl,
    sample_haar_unitary,
    sample_phase_unitary,
    weingarten_table,
)

__version__ = "0.1.0"
