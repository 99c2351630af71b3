import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqma.errors import CapacityError, DegenerateBranchError, LayoutError
from dqma.primitives import KET0, PLUS
from dqma.qcore import (
    Povm,
    QuantumState,
    RegisterLayout,
    Unitary,
    apply_unitary,
    fidelity,
    measure_povm,
    partial_trace,
    postselect,
    random_mixed_state,
    random_pure_state,
    random_unitary,
    tensor,
    trace_distance,
)

seeds = st.integers(0, 2**32 - 1)


def lay(*sizes, prefix="R"):
    return RegisterLayout([(f"{prefix}{i}", q) for i, q in enumerate(sizes)])


def random_state(layout, rng, pure):
    if pure:
        return random_pure_state(layout, rng)
    return random_mixed_state(layout, rng, env_qubits=int(rng.integers(1, 4)))


# basic behaviour ------------------------------------------------------------


def test_basis_indexing_is_big_endian():
    s = QuantumState.basis(lay(1, 2), {"R0": 1, "R1": 2})
    assert s.data[0b110] == 1


def test_duplicate_names_rejected():
    with pytest.raises(LayoutError):
        RegisterLayout([("a", 1), ("a", 1)])


def test_capacity_caps():
    QuantumState.basis(lay(22))
    with pytest.raises(CapacityError):
        QuantumState.basis(lay(23))
    with pytest.raises(CapacityError):
        QuantumState.maximally_mixed(lay(12))


def test_invalid_state_rejected():
    with pytest.raises(ValueError):
        QuantumState(lay(1), [1, 1])
    with pytest.raises(ValueError):
        QuantumState(lay(1), [[0.5, 0], [0, 0.4]])
    with pytest.raises(ValueError):
        QuantumState(lay(1), [[1.5, 0], [0, -0.5]])


def test_trace_distance_zero_plus():
    a = QuantumState.single("q", KET0)
    b = QuantumState.single("q", PLUS)
    assert trace_distance(a, b) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    assert trace_distance(a.to_mixed(), b.to_mixed()) == pytest.approx(1 / np.sqrt(2), abs=1e-12)


def test_measure_and_postselect():
    s = QuantumState.single("q", KET0)
    z = Povm.projective("q", [[1, 0], [0, 1]])
    br = measure_povm(s, z)
    assert br[0].probability == pytest.approx(1.0)
    assert br[1].state is None
    with pytest.raises(DegenerateBranchError):
        postselect(s, z, 1)


def test_reorder_roundtrip(rng):
    s = random_pure_state(lay(1, 2, 1), rng)
    back = s.reorder(["R2", "R0", "R1"]).reorder(["R0", "R1", "R2"])
    assert np.allclose(back.data, s.data)


@settings(max_examples=200)
@given(seeds, st.booleans(), st.booleans())
def test_partial_trace_of_tensor(seed, pa, pb):
    rng = np.random.default_rng(seed)
    a = random_state(lay(1, 1, prefix="A"), rng, pa)
    b = random_state(lay(2, prefix="B"), rng, pb)
    red = partial_trace(tensor(a, b), a.layout.names)
    assert np.max(np.abs(red.data - a.density())) < 1e-10


@settings(max_examples=200)
@given(seeds)
def test_unitary_preserves_invariants(seed):
    rng = np.random.default_rng(seed)
    s = random_mixed_state(lay(1, 2), rng)
    u = Unitary(["R1", "R0"], random_unitary(8, rng))
    out = apply_unitary(s, u)
    out.validate()
    back = apply_unitary(out, u.dagger())
    assert np.max(np.abs(back.data - s.data)) < 1e-10


# Fuchs-van de Graaf ------------------------------------------------------------


@settings(max_examples=1000)
@given(seeds, st.integers(1, 3), st.booleans(), st.booleans())
def test_fidelity_trace_distance_sandwich(seed, q, pa, pb):
    rng = np.random.default_rng(seed)
    layout = lay(q)
    a, b = random_state(layout, rng, pa), random_state(layout, rng, pb)
    f, d = fidelity(a, b), trace_distance(a, b)
    assert 1 - f <= d + 1e-9
    assert d <= np.sqrt(max(1 - f * f, 0.0)) + 1e-9


# union bound for commuting projectors ------------------------------------------


@settings(max_examples=1000)
@given(seeds, st.integers(1, 3))
def test_union_bound(seed, q):
    rng = np.random.default_rng(seed)
    dim = 2**q
    basis = random_unitary(dim, rng)
    m1, m2 = rng.integers(0, 2, dim), rng.integers(0, 2, dim)
    p1 = (basis * m1) @ basis.conj().T
    p2 = (basis * m2) @ basis.conj().T
    assert np.allclose(p1 @ p2, p2 @ p1, atol=1e-10)
    rho = random_mixed_state(lay(q), rng).data
    eye = np.eye(dim)
    lhs = np.trace((eye - p1 @ p2) @ rho).real
    rhs = np.trace((eye - p1) @ rho).real + np.trace((eye - p2) @ rho).real
    assert lhs <= rhs + 1e-10


# fidelity against a fixed first factor ------------------------------------------


def _fid_matrix(a, b):
    la = RegisterLayout([("X", 1), ("Y", int(np.log2(a.shape[0])) - 1)])
    return fidelity(QuantumState(la, a, validate=False), QuantumState(la, b, validate=False))


@settings(max_examples=1000)
@given(seeds, st.integers(1, 2))
def test_fixed_factor_fidelity(seed, q):
    rng = np.random.default_rng(seed)
    layout = RegisterLayout([("X", 1), ("Y", q)])
    rho = random_mixed_state(layout, rng)
    x = random_pure_state(RegisterLayout([("X", 1)]), rng)
    xx = np.outer(x.data, x.data.conj())
    target = fidelity(x, partial_trace(rho, ["X"]))
    # candidates never beat the reduced-state fidelity
    for _ in range(3):
        cand = random_mixed_state(RegisterLayout([("Y", q)]), rng).data
        assert _fid_matrix(np.kron(xx, cand), rho.data) <= target + 1e-9
    # the conditional state on Y attains it
    dy = 2**q
    proj = np.kron(x.data.conj(), np.eye(dy))
    cond = proj @ rho.data @ proj.conj().T
    cond = cond / np.trace(cond).real
    assert abs(_fid_matrix(np.kron(xx, cond), rho.data) - target) < 1e-6


def test_fixed_factor_fidelity_many_candidates(rng):
    layout = RegisterLayout([("X", 1), ("Y", 1)])
    rho = random_mixed_state(layout, rng)
    x = random_pure_state(RegisterLayout([("X", 1)]), rng)
    xx = np.outer(x.data, x.data.conj())
    target = fidelity(x, partial_trace(rho, ["X"]))
    for _ in range(100):
        cand = random_mixed_state(RegisterLayout([("Y", 1)]), rng).data
        assert _fid_matrix(np.kron(xx, cand), rho.data) <= target + 1e-9
