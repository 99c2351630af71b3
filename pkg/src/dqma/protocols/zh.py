"""Certifying an EPR pair between two nodes using only classical messages.

The prover gives ``N+1`` two-qubit registers, one qubit of each to ``V1``
and one to ``V2``.  ``V1`` swaps a uniformly chosen slot into the last
position, picks a Pauli basis per remaining slot, measures its halves and
broadcasts index, bases and outcomes.  ``V2`` applies the same swap,
measures in the announced bases and checks the correlations.  The last slot
is the output pair.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dqma.errors import CapacityError, ConfigError
from dqma.netsim import (
    Accounting,
    NodeProgram,
    ProtocolOutcome,
    ProverStrategy,
    Topology,
    run_round,
    sample_round,
    wilson_interval,
)
from dqma.primitives import (
    PAULI_BASES,
    PHI_PLUS,
    TEST_BASES,
    epr_test_effects,
    local_basis_povm,
    local_test_accepts,
    omega,
    permute_blocks,
)
from dqma.protocols.planner import zh_classical_bits
from dqma.qcore import (
    PURE_QUBIT_CAP,
    MIXED_QUBIT_CAP,
    QuantumState,
    RegisterLayout,
    apply_operator,
    fidelity,
    partial_trace,
)

V1, V2 = "V1", "V2"


def pair_names(slot: int, prefix: str = "E") -> tuple[str, str]:
    return f"{prefix}{slot}_1", f"{prefix}{slot}_2"


@dataclass(frozen=True)
class ZhInput:
    """``N`` test slots plus one output slot shared between ``V1`` and ``V2``."""

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("N must be at least 1")

    @property
    def slots(self) -> int:
        return self.N + 1

    @property
    def topology(self) -> Topology:
        return Topology([V1, V2], [(V1, V2)])

    def pairs(self) -> list[tuple[str, str]]:
        return [pair_names(s) for s in range(1, self.N + 2)]

    def certificate_layout(self) -> RegisterLayout:
        regs = []
        for a, b in self.pairs():
            regs += [(a, 1, V1), (b, 1, V2)]
        return RegisterLayout(regs)

    def to_dict(self) -> dict:
        return {"N": self.N}


# node programs (reused by the LOCC conversion) ----------------------------------


def _pack_bases(ks) -> int:
    v = 0
    for k in reversed(ks):
        v = 3 * v + k
    return v


def _unpack_bases(v: int, N: int) -> list[int]:
    out = []
    for _ in range(N):
        out.append(v % 3)
        v //= 3
    return out


def sender_local(ctx, pairs, tag) -> None:
    """``V1``: choose the swapped slot and the bases, measure the test halves."""
    N = len(pairs) - 1
    j = ctx.coin(N + 1)
    if j != N:
        ctx.permute([[pairs[j][0]], [pairs[N][0]]], [1, 0])
    ks = [ctx.coin(3) for _ in range(N)]
    outs = [ctx.measure(local_basis_povm(TEST_BASES[k + 1], pairs[i][0])) for i, k in enumerate(ks)]
    ctx.memory[tag] = (j, ks, outs)


def sender_send(ctx, dst, N, tag) -> None:
    j, ks, outs = ctx.memory[tag]
    ctx.send_bits(dst, ("zh", tag, "index", j), N.bit_length())
    ctx.send_bits(dst, ("zh", tag, "bases", _pack_bases(ks)), (3 ** N - 1).bit_length())
    ctx.send_bits(dst, ("zh", tag, "outcomes", tuple(outs)), N)


def _accepting_projector(basis: str, a: int) -> np.ndarray:
    b = (1 - a) if basis == "Y" else a
    v = PAULI_BASES[basis][b]
    return np.outer(v, v.conj())


def receiver_decide(ctx, src, pairs, tag) -> None:
    """``V2``: undo the same swap, then test each announced slot."""
    N = len(pairs) - 1
    got = {p[2]: p[3] for p in ctx.messages_from(src) if isinstance(p, tuple) and p[:2] == ("zh", tag)}
    if set(got) != {"index", "bases", "outcomes"}:
        ctx.reject()
        return
    j, ks, outs = got["index"], _unpack_bases(got["bases"], N), got["outcomes"]
    if j != N:
        ctx.permute([[pairs[j][1]], [pairs[N][1]]], [1, 0])
    for i, (k, a) in enumerate(zip(ks, outs)):
        basis = TEST_BASES[k + 1]
        if ctx._run.tape.exact:
            ctx.require([pairs[i][1]], _accepting_projector(basis, a))
        else:
            b = ctx.measure(local_basis_povm(basis, pairs[i][1]))
            if not local_test_accepts(basis, a, b):
                ctx.reject()
                return


def zh_programs(inp: ZhInput) -> dict:
    pairs = inp.pairs()
    tag = "E"
    return {
        V1: NodeProgram(local=lambda ctx: sender_local(ctx, pairs, tag),
                        send=lambda ctx: sender_send(ctx, V2, inp.N, tag)),
        V2: NodeProgram(decide=lambda ctx: receiver_decide(ctx, V1, pairs, tag)),
    }


# evaluators --------------------------------------------------------------------


def _prepare(inp: ZhInput, strategy: ProverStrategy) -> QuantumState:
    lay = inp.certificate_layout()
    st = strategy.state()
    if sorted(st.layout.names) != sorted(lay.names):
        raise ConfigError("strategy registers do not match the EPR-test layout")
    return st.reorder(lay.names).with_owners({r.name: r.owner for r in lay})


def _reference(inp: ZhInput) -> QuantumState:
    a, b = pair_names(inp.slots)
    return QuantumState(RegisterLayout([(a, 1, V1), (b, 1, V2)]), PHI_PLUS)


def _is_pairwise_product(inp: ZhInput, strategy: ProverStrategy) -> bool:
    return strategy.is_product_over([list(p) for p in inp.pairs()])


def _slot_states(inp: ZhInput, strategy: ProverStrategy) -> list[np.ndarray]:
    out = []
    for a, b in inp.pairs():
        blk = strategy.block_of(a)
        st = partial_trace(blk, [a, b]) if len(blk.layout) > 2 else blk.reorder([a, b])
        out.append(st.density())
    return out


def _averaged_product(inp: ZhInput, strategy: ProverStrategy):
    sig = _slot_states(inp, strategy)
    om = omega()
    passes = np.array([float(np.trace(om @ s).real) for s in sig])
    S = inp.slots
    total = 0.0
    out = np.zeros((4, 4), dtype=complex)
    for j in range(S):
        # slot j goes to the output position; the old last slot takes its place
        w = 1.0
        for i in range(S - 1):
            w *= passes[S - 1 if i == j else i]
        total += w
        out += w * sig[j]
    return total / S, out


def _averaged_general(inp: ZhInput, state: QuantumState):
    S = inp.slots
    pairs = inp.pairs()
    if state.num_qubits > (PURE_QUBIT_CAP if state.is_pure else MIXED_QUBIT_CAP):
        raise CapacityError(f"EPR test with N={inp.N} on an entangled certificate exceeds the simulation cap")
    root = np.linalg.cholesky(omega())  # any factor with K^dag K = Omega works for the trace
    k_op = root.conj().T
    total = 0.0
    out = np.zeros((4, 4), dtype=complex)
    for j in range(S):
        st = state if j == S - 1 else permute_blocks(state, [list(pairs[j]), list(pairs[-1])], [1, 0])
        w = 1.0
        for i in range(S - 1):
            p, st = apply_operator(st, list(pairs[i]), k_op)
            w *= p
            if st is None:
                break
        if st is None:
            continue
        total += w
        out += w * partial_trace(st, list(pairs[-1])).reorder(list(pairs[-1])).density()
    return total / S, out


def run_zh_locc(N: int, strategy: ProverStrategy, mode: str = "exact", *, method: str = "auto",
                seed: int = 0, trials: int = 10000, keep_transcripts: int = 1) -> ProtocolOutcome:
    """Run the EPR test.

    Exact methods: ``averaged`` (closed-form average of the three tests per
    slot, exact for any certificate) and ``enumerate`` (replay of the node
    programs over every coin and outcome).  Sampled methods: ``vectorized``
    (pairwise-product certificates only; samples the joint local outcome
    distribution of every slot) and ``trajectory`` (node programs).
    """
    inp = ZhInput(N)
    acct = Accounting(s_c=inp.slots, s_m=0, s_tm=0, classical_bits=zh_classical_bits(N))
    ref = _reference(inp)
    product = _is_pairwise_product(inp, strategy)
    if mode == "exact":
        if method == "auto":
            method = "averaged"
        if method == "averaged":
            if product:
                p, out = _averaged_product(inp, strategy)
            else:
                p, out = _averaged_general(inp, _prepare(inp, strategy))
            res = ProtocolOutcome(accept_probability=float(min(p, 1.0)), mode="exact", accounting=acct,
                                  branches=inp.slots, extra={"method": "averaged"})
            if p > 0:
                res.output_state = QuantumState._trusted(ref.layout, out / np.trace(out).real)
                res.output_fidelity = fidelity(ref, res.output_state)
        elif method == "enumerate":
            state = _prepare(inp, strategy)
            res = run_round(state, inp.topology, zh_programs(inp), "exact", outputs=list(inp.pairs()[-1]),
                            reference=ref, locc=True, keep_transcripts=keep_transcripts)
            res.extra["method"] = "enumerate"
        else:
            raise ConfigError(f"unknown exact method {method!r}")
        res.extra["classical_bits_formula"] = zh_classical_bits(N)
        return res
    if method == "auto":
        method = "vectorized" if product else "trajectory"
    if method == "vectorized":
        if not product:
            raise ConfigError("vectorized sampling needs a pairwise-product certificate")
        res = _sample_vectorized(inp, strategy, trials, seed)
        res.accounting = acct
        # one genuine node-program trajectory as the transcript sample
        if keep_transcripts:
            one = run_round(_prepare(inp, strategy), inp.topology, zh_programs(inp), "sample", seed=seed,
                            trial=0, locc=True) if inp.slots * 2 <= PURE_QUBIT_CAP else None
            if one is not None:
                res.transcripts = one.transcripts
    elif method == "trajectory":
        res = sample_round(_prepare(inp, strategy), inp.topology, zh_programs(inp), trials, seed,
                           outputs=list(inp.pairs()[-1]), reference=ref, locc=True,
                           keep_transcripts=keep_transcripts)
        res.extra["method"] = "trajectory"
    else:
        raise ConfigError(f"unknown sampled method {method!r}")
    res.extra["classical_bits_formula"] = zh_classical_bits(N)
    return res


def _outcome_tables(sig: list[np.ndarray]) -> np.ndarray:
    """``T[s, k, 2a+b]``: probability of local outcomes ``(a, b)`` in basis ``k``."""
    T = np.zeros((len(sig), 3, 4))
    for s, rho in enumerate(sig):
        for k in range(3):
            vecs = PAULI_BASES[TEST_BASES[k + 1]]
            for a in (0, 1):
                for b in (0, 1):
                    v = np.kron(vecs[a], vecs[b])
                    T[s, k, 2 * a + b] = max(0.0, float(np.real(np.vdot(v, rho @ v))))
        T[s] /= T[s].sum(axis=1, keepdims=True)
    return T


def _sample_vectorized(inp: ZhInput, strategy: ProverStrategy, trials: int, seed: int) -> ProtocolOutcome:
    sig = _slot_states(inp, strategy)
    T = _outcome_tables(sig)
    S, N = inp.slots, inp.N
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    j = rng.integers(0, S, size=trials)
    ks = rng.integers(0, 3, size=(trials, N))
    # slot occupying test position i after the swap
    src = np.broadcast_to(np.arange(N), (trials, N)).copy()
    hit = j[:, None] == np.arange(N)[None, :]
    src[hit] = S - 1
    probs = T[src, ks]  # (trials, N, 4)
    u = rng.random((trials, N, 1))
    outcome = (u > np.cumsum(probs, axis=2)).sum(axis=2)
    outcome = np.minimum(outcome, 3)
    a, b = outcome // 2, outcome % 2
    ok = np.where(ks == 2, a != b, a == b).all(axis=1)
    succ = int(ok.sum())
    lo, hi = wilson_interval(succ, trials)
    res = ProtocolOutcome(accept_probability=succ / trials, mode="sample", ci=(lo, hi), trials=trials,
                          branches=trials, extra={"method": "vectorized"})
    if succ:
        counts = np.bincount(j[ok], minlength=S)
        out = sum(c * sig[s] for s, c in enumerate(counts)) / succ
        ref = _reference(inp)
        res.output_state = QuantumState._trusted(ref.layout, out)
        res.output_fidelity = fidelity(ref, res.output_state)
    return res


def epr_test_identity_error() -> float:
    """Largest entry of ``(E1+E2+E3)/3 - Omega``."""
    e = sum(epr_test_effects()) / 3
    return float(np.max(np.abs(e - omega())))
