import numpy as np
import pytest

from orbitdesign import (
    Partition,
    PureState,
    QuditRegister,
    Region,
    apply_local_unitary,
    basis_state,
    bell_chain_state,
    ghz_state,
    max_entangled_state,
    overlap,
    random_state,
    state_from_json,
    state_to_json,
    uniform_superposition,
)
from orbitdesign.entropy import renyi2_entanglement, schmidt_spectrum
from orbitdesign.twirl import RandomStream, sample_haar_unitary

RNG = np.random.default_rng(20240901)


def test_register_invariants():
    reg = QuditRegister([2, 3, 2])
    assert reg.total_dim == 12
    with pytest.raises(ValueError):
        QuditRegister([2, 1])
    with pytest.raises(ValueError):
        QuditRegister([])


def test_basis_state_examples():
    assert basis_state(QuditRegister([2, 2]), 0).amplitudes[0] == 1.0
    psi = basis_state(QuditRegister([2, 3]), 5)
    # site 0 most significant: index 5 = 1*3 + 2 -> |1> (x) |2>
    assert psi.amplitudes[5] == 1.0
    assert np.count_nonzero(psi.amplitudes) == 1
    with pytest.raises(ValueError):
        basis_state(QuditRegister([2]), 2)


def test_state_normalization_enforced():
    reg = QuditRegister([2])
    with pytest.raises(ValueError):
        PureState(reg, np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        PureState(reg, np.array([1.0, 0.0, 0.0]))


def test_state_is_immutable():
    psi = basis_state(QuditRegister([2, 2]), 1)
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 1.0


def test_max_entangled_bell():
    reg = QuditRegister([2, 2])
    bell = max_entangled_state(reg, (Region([0]), Region([1])), 2)
    expect = np.zeros(4, complex)
    expect[0] = expect[3] = 1 / np.sqrt(2)
    assert np.allclose(bell.amplitudes, expect)


def test_max_entangled_rank_one_is_product():
    reg = QuditRegister([2, 2])
    psi = max_entangled_state(reg, (Region([0]), Region([1])), 1)
    assert np.allclose(psi.amplitudes, basis_state(reg, 0).amplitudes)


def test_max_entangled_rank4_entropy():
    reg = QuditRegister([2, 2, 2, 2])
    psi = max_entangled_state(reg, (Region([0, 1]), Region([2, 3])), 4)
    assert renyi2_entanglement(psi, Region([0, 1])) == pytest.approx(np.log(4), abs=1e-12)


def test_max_entangled_rank_cap():
    reg = QuditRegister([2, 2])
    with pytest.raises(ValueError):
        max_entangled_state(reg, (Region([0]), Region([1])), 3)


def test_bell_chain_capacity_error():
    reg = QuditRegister([2, 2, 2])
    part = Partition([[0], [1], [2]])
    with pytest.raises(ValueError):
        bell_chain_state(reg, part, [2, 2])


def test_bell_chain_is_product_of_bell_pairs():
    reg = QuditRegister([2, 2, 2, 2])
    part = Partition([[0], [1, 2], [3]])
    chain = bell_chain_state(reg, part, [2, 2])
    # pair 0 lives on sites (0, 1), pair 1 on sites (2, 3)
    bell = np.zeros(4)
    bell[0] = bell[3] = 1 / np.sqrt(2)
    assert np.allclose(chain.amplitudes, np.kron(bell, bell))
    assert renyi2_entanglement(chain, Region([0])) == pytest.approx(np.log(2), abs=1e-12)


def test_bell_chain_schmidt_ranks():
    reg = QuditRegister([2, 2, 2, 2, 2, 2])
    part = Partition([[0], [1, 2, 3], [4, 5]])
    for ranks in ([2, 2], [2, 4], [1, 3]):
        chain = bell_chain_state(reg, part, ranks)
        cuts = [Region([0]), Region([0, 1, 2, 3])]
        for cut, expected in zip(cuts, ranks):
            coeffs = schmidt_spectrum(chain, cut).coefficients
            assert int(np.sum(coeffs > 1e-10)) == expected


def test_ghz_examples():
    reg = QuditRegister([2, 2, 2])
    part = Partition([[0], [1], [2]])
    psi = ghz_state(reg, part, 2)
    expect = np.zeros(8, complex)
    expect[0] = expect[7] = 1 / np.sqrt(2)
    assert np.allclose(psi.amplitudes, expect)
    with pytest.raises(ValueError):
        ghz_state(reg, part, 3)
    big = ghz_state(QuditRegister([2] * 6), Partition([[0, 1], [2, 3], [4, 5]]), 4)
    assert np.linalg.norm(big.amplitudes) == pytest.approx(1.0, abs=1e-12)
    assert np.count_nonzero(big.amplitudes) == 4


def test_ghz_two_regions_equals_max_entangled():
    reg = QuditRegister([2, 2, 2, 2])
    a, b = Region([0, 1]), Region([2, 3])
    for d in (2, 3, 4):
        g = ghz_state(reg, Partition([a, b]), d)
        m = max_entangled_state(reg, (a, b), d)
        assert np.array_equal(g.amplitudes, m.amplitudes)


def test_apply_local_unitary_examples():
    reg = QuditRegister([2, 2])
    psi = basis_state(reg, 0)
    same = apply_local_unitary(psi, Region([0]), np.eye(2))
    assert np.allclose(same.amplitudes, psi.amplitudes)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    flipped = apply_local_unitary(psi, Region([0]), x)
    assert np.allclose(flipped.amplitudes, basis_state(reg, 2).amplitudes)  # |10>
    haar = sample_haar_unitary(2, RandomStream(5))
    out = apply_local_unitary(psi, Region([1]), haar)
    assert np.linalg.norm(out.amplitudes) == pytest.approx(1.0, abs=1e-12)


def test_apply_local_unitary_errors():
    psi = basis_state(QuditRegister([2, 2]), 0)
    with pytest.raises(ValueError):
        apply_local_unitary(psi, Region([0]), np.eye(4))
    with pytest.raises(ValueError):
        apply_local_unitary(psi, Region([0]), np.array([[1, 0], [0, 2.0]]))


def test_local_unitaries_commute_on_disjoint_regions():
    reg = QuditRegister([2, 2, 2, 2])
    a, b = Region([0, 2]), Region([1, 3])
    gen = RandomStream(99).generator()
    for _ in range(100):
        psi = random_state(reg, gen)
        ua = sample_haar_unitary(4, gen)
        ub = sample_haar_unitary(4, gen)
        ab = apply_local_unitary(apply_local_unitary(psi, a, ua), b, ub)
        ba = apply_local_unitary(apply_local_unitary(psi, b, ub), a, ua)
        assert np.max(np.abs(ab.amplitudes - ba.amplitudes)) <= 1e-10


def test_overlap():
    reg = QuditRegister([2])
    zero, one = basis_state(reg, 0), basis_state(reg, 1)
    plus = PureState(reg, np.array([1, 1]) / np.sqrt(2))
    assert overlap(zero, zero) == pytest.approx(1.0)
    assert overlap(zero, one) == 0
    assert overlap(zero, plus) == pytest.approx(1 / np.sqrt(2))
    with pytest.raises(ValueError):
        overlap(zero, basis_state(QuditRegister([3]), 0))
    # conjugation on the first argument
    phased = PureState(reg, np.array([1j, 0]))
    assert overlap(phased, zero) == pytest.approx(-1j)


def test_partition_validation():
    reg = QuditRegister([2, 2, 2])
    with pytest.raises(ValueError):
        Partition([[0, 1], [1, 2]]).validate(reg)
    with pytest.raises(ValueError):
        Partition([[0], [2]]).validate(reg)
    with pytest.raises(ValueError):
        Region([1, 1])
    Partition([[0, 2], [1]]).validate(reg)


def test_all_constructors_normalized():
    reg = QuditRegister([2, 2, 2, 2])
    part = Partition([[0], [1, 2], [3]])
    states = [
        basis_state(reg, 5),
        uniform_superposition(reg, 7),
        max_entangled_state(reg, (Region([0, 1]), Region([2, 3])), 3),
        bell_chain_state(reg, part, [2, 2]),
        ghz_state(reg, part, 2),
        random_state(reg, RNG),
    ]
    for psi in states:
        assert abs(np.linalg.norm(psi.amplitudes) - 1.0) <= 1e-10


def test_json_round_trip_bit_exact():
    reg = QuditRegister([2, 3])
    gen = RandomStream(17).generator()
    psi = random_state(reg, gen)
    back = state_from_json(state_to_json(psi))
    assert back.register == psi.register
    assert np.array_equal(back.amplitudes, psi.amplitudes)
    # awkward exact binary values survive too
    amps = np.zeros(6, complex)
    amps[0] = np.nextafter(1.0, 0.0)
    amps[5] = np.sqrt(1.0 - abs(amps[0]) ** 2) * 1j
    psi2 = PureState(reg, amps / np.linalg.norm(amps))
    back2 = state_from_json(state_to_json(psi2))
    assert np.array_equal(back2.amplitudes, psi2.amplitudes)
