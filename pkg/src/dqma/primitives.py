"""Reusable quantum subroutines: SWAP test, teleportation, the local
Pauli-basis tests for EPR pairs, and block permutation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dqma.errors import LayoutError
from dqma.qcore import (
    ZERO_PROB,
    Branch,
    Povm,
    QuantumState,
    Unitary,
    apply_operator_raw,
    apply_unitary,
    measure_povm,
)

SQRT_HALF = 1 / np.sqrt(2)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT_HALF

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) * SQRT_HALF
MINUS = np.array([1, -1], dtype=complex) * SQRT_HALF
PLUS_I = np.array([1, 1j], dtype=complex) * SQRT_HALF
MINUS_I = np.array([1, -1j], dtype=complex) * SQRT_HALF

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) * SQRT_HALF

# local measurement bases: outcome 0 is the +1 eigenvector
PAULI_BASES = {
    "Z": (KET0, KET1),
    "X": (PLUS, MINUS),
    "Y": (PLUS_I, MINUS_I),
}


def _proj(*vecs) -> np.ndarray:
    return sum(np.outer(v, v.conj()) for v in vecs)


def _swap_axes_raw(state: QuantumState, r1: str, r2: str, data=None) -> np.ndarray:
    """Apply the register SWAP on the left (vector) or on both sides (matrix)."""
    lay = state.layout
    data = state.data if data is None else data
    if lay[r1].qubits != lay[r2].qubits:
        raise ValueError(
            f"SWAP test needs equal register sizes ({r1}: {lay[r1].qubits}, {r2}: {lay[r2].qubits})"
        )
    i, j = lay.indices([r1, r2])
    dims = lay.dims
    if data.ndim == 1:
        return data.reshape(dims).swapaxes(i, j).reshape(-1)
    n = len(dims)
    t = data.reshape(dims + dims).swapaxes(i, j).swapaxes(i + n, j + n)
    return t.reshape(data.shape)


def swap_test_accept_prob(state: QuantumState, r1: str, r2: str) -> float:
    """Probability that the SWAP test on ``(r1, r2)`` accepts, ``tr(Π_sym ρ)``."""
    lay = state.layout
    if lay[r1].qubits != lay[r2].qubits:
        raise ValueError(
            f"SWAP test needs equal register sizes ({r1}: {lay[r1].qubits}, {r2}: {lay[r2].qubits})"
        )
    i, j = lay.indices([r1, r2])
    dims = lay.dims
    if state.is_pure:
        psi = state.data
        swapped = psi.reshape(dims).swapaxes(i, j).reshape(-1)
        tr_swap = np.vdot(psi, swapped).real
    else:
        # tr(SWAP ρ): permute row indices only, then trace
        n = len(dims)
        t = state.data.reshape(dims + dims).swapaxes(i, j)
        tr_swap = np.trace(t.reshape(state.data.shape)).real
    return float(min(max(0.5 + 0.5 * tr_swap, 0.0), 1.0))


def _symmetric_branch(state: QuantumState, r1: str, r2: str, sign: int):
    swapped = _swap_axes_raw(state, r1, r2) if state.is_pure else None
    if state.is_pure:
        v = 0.5 * (state.data + sign * swapped)
        w = float(np.vdot(v, v).real)
        if w < ZERO_PROB:
            return 0.0, None
        return w, QuantumState._trusted(state.layout, v / np.sqrt(w))
    lay = state.layout
    i, j = lay.indices([r1, r2])
    dims = lay.dims
    n = len(dims)
    rho = state.data
    # (I ± S) ρ (I ± S) / 4 expanded: ρ ± Sρ ± ρS + SρS
    t = rho.reshape(dims + dims)
    s_rho = t.swapaxes(i, j)
    rho_s = t.swapaxes(i + n, j + n)
    s_rho_s = s_rho.swapaxes(i + n, j + n)
    out = 0.25 * (t + sign * s_rho + sign * rho_s + s_rho_s)
    out = out.reshape(rho.shape)
    w = float(np.trace(out).real)
    if w < ZERO_PROB:
        return 0.0, None
    return w, QuantumState._trusted(lay, out / w)


def swap_test_execute(state: QuantumState, r1: str, r2: str, rng: np.random.Generator | None = None):
    """Symmetric/antisymmetric projective measurement on ``(r1, r2)``.

    Exact mode (``rng=None``) returns ``[accept_branch, reject_branch]`` with
    labels True/False; sampled mode returns the drawn branch.
    """
    p_acc, acc = _symmetric_branch(state, r1, r2, +1)
    p_rej, rej = _symmetric_branch(state, r1, r2, -1)
    branches = [Branch(True, p_acc, acc), Branch(False, p_rej, rej)]
    if rng is None:
        return branches
    return branches[0] if rng.random() < p_acc / (p_acc + p_rej) else branches[1]


def swap_projector(dim: int) -> np.ndarray:
    """``Π_sym = (I + SWAP)/2`` on two ``dim``-dimensional factors, as a dense matrix."""
    swap = np.zeros((dim * dim, dim * dim))
    for a in range(dim):
        for b in range(dim):
            swap[b * dim + a, a * dim + b] = 1.0
    return 0.5 * (np.eye(dim * dim) + swap)


# teleportation -------------------------------------------------------------


@dataclass(frozen=True)
class BellOutcome:
    """Bell-measurement result ``(m1, m2)`` sent classically by the sender."""

    m1: int
    m2: int

    def __post_init__(self):
        if self.m1 not in (0, 1) or self.m2 not in (0, 1):
            raise ValueError("Bell outcome bits must be 0 or 1")

    @property
    def bits(self) -> tuple[int, int]:
        return (self.m1, self.m2)


def bell_vector(m1: int, m2: int) -> np.ndarray:
    """``|β_{m1 m2}> = (|0,m2> + (-1)^{m1} |1,1-m2>)/√2``."""
    v = np.zeros(4, dtype=complex)
    v[m2] = SQRT_HALF
    v[2 + (1 - m2)] = SQRT_HALF * (-1) ** m1
    return v


# Bell outcome -> receiver correction Z^{m1} X^{m2}:
#   (0,0) Φ+ : I
#   (0,1) Ψ+ : X
#   (1,0) Φ- : Z
#   (1,1) Ψ- : Z·X
CORRECTIONS = {
    (0, 0): I2,
    (0, 1): X,
    (1, 0): Z,
    (1, 1): Z @ X,
}

BELL_POVM = Povm(
    ("src", "snd"),
    [(BellOutcome(a, b), np.outer(bell_vector(a, b), bell_vector(a, b).conj())) for a in (0, 1) for b in (0, 1)],
)


def teleport(state: QuantumState, source: str, pair: Sequence[str], rng: np.random.Generator | None = None):
    """Teleport the one-qubit register ``source`` onto ``pair[1]``.

    ``pair = (sender_half, receiver_half)``.  Each returned branch carries the
    :class:`BellOutcome` as its label and the corrected post-state; the
    ``source`` and sender half are left in the measured Bell state.
    """
    sender, receiver = pair
    lay = state.layout
    for r in (source, sender, receiver):
        if lay[r].qubits != 1:
            raise LayoutError(f"teleportation register {r!r} must be one qubit")
    povm = BELL_POVM.on(source, sender)
    branches = measure_povm(state, povm, rng)
    if rng is not None:
        branches = [branches]
    out = []
    for b in branches:
        post = b.state
        if post is not None:
            post = apply_unitary(post, Unitary(receiver, CORRECTIONS[b.label.bits], validate=False))
        out.append(Branch(b.label, b.probability, post))
    return out if rng is None else out[0]


# EPR pair verification -------------------------------------------------------


def epr_test_effects() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    e1 = _proj(np.kron(KET0, KET0), np.kron(KET1, KET1))
    e2 = _proj(np.kron(PLUS, PLUS), np.kron(MINUS, MINUS))
    e3 = _proj(np.kron(PLUS_I, MINUS_I), np.kron(MINUS_I, PLUS_I))
    return e1, e2, e3


def epr_test_povms(targets: Sequence[str] = ("q1", "q2")) -> tuple[Povm, Povm, Povm]:
    """Binary POVMs ``M_k = {E_k, I - E_k}``; label True is acceptance."""
    return tuple(Povm.binary(tuple(targets), e) for e in epr_test_effects())


def omega() -> np.ndarray:
    """Average acceptance effect of the three tests, ``(2/3)|Φ+><Φ+| + I/3``."""
    return (2 / 3) * np.outer(PHI_PLUS, PHI_PLUS.conj()) + np.eye(4) / 3


def local_basis_povm(basis: str, target: str) -> Povm:
    """Single-qubit projective measurement in the Z, X or Y basis (labels 0/1)."""
    return Povm.projective(target, PAULI_BASES[basis], labels=(0, 1))


def local_test_accepts(basis: str, a: int, b: int) -> bool:
    """Acceptance rule for the distributed EPR test.

    Z and X outcomes must agree; Y outcomes must differ.
    """
    return (a != b) if basis == "Y" else (a == b)


TEST_BASES = {1: "Z", 2: "X", 3: "Y"}


# block permutation ------------------------------------------------------------


def permute_blocks(state: QuantumState, blocks: Sequence[Sequence[str]], pi: Sequence[int]) -> QuantumState:
    """Move the content of block ``pi[j]`` into block ``j`` for every ``j``.

    Blocks are groups of register names with identical register sizes.  The
    layout (names, order, owners) is unchanged; only contents move.
    """
    blocks = [list(b) if not isinstance(b, str) else [b] for b in blocks]
    pi = list(pi)
    if sorted(pi) != list(range(len(blocks))):
        raise ValueError(f"{pi} is not a permutation of {len(blocks)} blocks")
    lay = state.layout
    shapes = [[lay[n].qubits for n in b] for b in blocks]
    if any(s != shapes[0] for s in shapes):
        raise ValueError("blocks must have equal register sizes")
    if all(j == p for j, p in enumerate(pi)):
        return state
    mapping = {}
    for j, p in enumerate(pi):
        for src, dst in zip(blocks[p], blocks[j]):
            mapping[src] = dst
    owners = {r.name: r.owner for r in lay}
    moved = state.relabel(mapping).reorder(lay.names)
    return moved.with_owners(owners)
