"""Converting a protocol with quantum messages into one with classical messages only.

Every planned qubit from ``u`` to ``v`` gets its own block of ``N+1``
prover-supplied EPR pairs.  The block is checked by the classical EPR test
and its output pair then carries the qubit by teleportation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dqma.errors import ConfigError, LayoutError, LocalityViolation
from dqma.netsim import (
    NodeProgram,
    ProtocolOutcome,
    ProverStrategy,
    Topology,
    run_round,
    sample_round,
)
from dqma.primitives import BELL_POVM, CORRECTIONS, PHI_PLUS
from dqma.protocols import zh
from dqma.protocols.planner import epr_copies, locc_epsilon, zh_classical_bits
from dqma.qcore import QuantumState, RegisterLayout, Unitary


@dataclass
class BaseProtocol:
    """A one-round protocol with quantum messages.

    ``plan[(u, v)]`` is the number of one-qubit registers ``u`` may send to
    ``v``.  Receiving programs should test ``ctx.owns(name)`` rather than read
    ``ctx.received``, so they work unchanged after conversion.
    """

    topology: Topology
    certificate: RegisterLayout
    honest: ProverStrategy
    programs: dict
    plan: dict
    outputs: list = field(default_factory=list)
    name: str = "base"

    def __post_init__(self):
        for (u, v), c in self.plan.items():
            if not self.topology.has_edge(u, v):
                raise ConfigError(f"planned messages on non-edge ({u}, {v})")
            if c < 0:
                raise ConfigError("planned qubit counts must be non-negative")

    @property
    def s_tm(self) -> int:
        return sum(self.plan.values())

    @property
    def s_m(self) -> int:
        return max((self.plan.get((u, v), 0) + self.plan.get((v, u), 0) for u, v in self.topology.sorted_edges()),
                   default=0)

    @property
    def s_c(self) -> int:
        per: dict = {}
        for r in self.certificate:
            per[r.owner] = per.get(r.owner, 0) + r.qubits
        return max(per.values(), default=0)

    def prepare(self, strategy: ProverStrategy | None = None) -> QuantumState:
        st = (strategy or self.honest).state()
        return st.reorder(self.certificate.names).with_owners({r.name: r.owner for r in self.certificate})

    def run(self, strategy: ProverStrategy | None = None, mode: str = "exact", seed: int = 0,
            trials: int = 1000) -> ProtocolOutcome:
        state = self.prepare(strategy)
        if mode == "exact":
            return run_round(state, self.topology, self.programs, "exact", outputs=self.outputs,
                             plan=self.plan)
        return sample_round(state, self.topology, self.programs, trials, seed, outputs=self.outputs,
                            plan=self.plan)


def swap_equality_base(psi_a, psi_b=None) -> BaseProtocol:
    """Two nodes; ``a`` sends its one-qubit certificate to ``b``, which SWAP-tests it
    against its own."""
    psi_a = np.asarray(psi_a, dtype=complex)
    psi_b = psi_a if psi_b is None else np.asarray(psi_b, dtype=complex)
    topo = Topology(["a", "b"], [("a", "b")])
    lay = RegisterLayout([("Ma", 1, "a"), ("Mb", 1, "b")])
    honest = ProverStrategy("honest", [QuantumState.single("Ma", psi_a, "a"), QuantumState.single("Mb", psi_b, "b")])

    def send(ctx):
        ctx.send("b", "Ma")

    def decide(ctx):
        if ctx.owns("Ma"):
            ctx.require_swap("Ma", "Mb")
        else:
            ctx.reject()

    progs = {"a": NodeProgram(send=send), "b": NodeProgram(decide=decide)}
    return BaseProtocol(topo, lay, honest, progs, {("a", "b"): 1}, name="swap-equality")


class _Teleporting:
    """Context proxy: quantum sends become teleportations over verified pairs."""

    def __init__(self, ctx, inst: "LoccInstance"):
        self._ctx = ctx
        self._inst = inst

    def __getattr__(self, item):
        return getattr(self._ctx, item)

    def send(self, dst, names):
        if isinstance(names, str):
            names = [names]
        ctx, inst = self._ctx, self._inst
        key = (ctx.node, dst)
        used = ctx.memory.setdefault(("tele_used", dst), 0)
        for name in names:
            if ctx._run.state.layout[name].qubits != 1:
                raise LayoutError(f"teleported register {name!r} must be one qubit")
            if used >= inst.base.plan.get(key, 0):
                raise LocalityViolation(f"{ctx.node} -> {dst} exceeds its declared {inst.base.plan.get(key, 0)} qubits")
            used += 1
            half = inst.pairs(ctx.node, dst, used)[-1][0]
            out = ctx.measure(BELL_POVM.on(name, half))
            ctx.rename(name, f"{name}~sent")
            ctx.send_bits(dst, ("tele", name, used, out.m1, out.m2), 2)
        ctx.memory[("tele_used", dst)] = used


@dataclass
class LoccInstance:
    """The converted protocol for a base protocol and ``N`` test pairs per block."""

    base: BaseProtocol
    N: int
    epsilon: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("N must be at least 1")
        self._index = {}
        for (u, v), c in sorted(self.base.plan.items()):
            for b in range(1, c + 1):
                for s, (x, y) in enumerate(self.pairs(u, v, b), 1):
                    self._index[x] = (u, v, b, s)
                    self._index[y] = (u, v, b, s)

    @property
    def topology(self) -> Topology:
        return self.base.topology

    @property
    def directed(self) -> list[tuple[str, str, int]]:
        return [(u, v, c) for (u, v), c in sorted(self.base.plan.items()) if c > 0]

    def pairs(self, u: str, v: str, block: int) -> list[tuple[str, str]]:
        return [(f"Q{u}>{v}#{block}.{s}_1", f"Q{u}>{v}#{block}.{s}_2") for s in range(1, self.N + 2)]

    def certificate_layout(self) -> RegisterLayout:
        regs = [(r.name, r.qubits, r.owner) for r in self.base.certificate]
        for u, v, c in self.directed:
            for b in range(1, c + 1):
                for x, y in self.pairs(u, v, b):
                    regs += [(x, 1, u), (y, 1, v)]
        return RegisterLayout(regs)

    def honest_strategy(self) -> ProverStrategy:
        blocks = list(self.base.honest.blocks)
        for u, v, c in self.directed:
            for b in range(1, c + 1):
                for x, y in self.pairs(u, v, b):
                    blocks.append(QuantumState(RegisterLayout([(x, 1, u), (y, 1, v)]), PHI_PLUS))
        return ProverStrategy("honest", blocks)

    # hooks used by the adversary families
    def is_epr_block(self, block: QuantumState) -> bool:
        return all(n in self._index for n in block.layout.names)

    def slot_of(self, block: QuantumState) -> int:
        return self._index[block.layout.names[0]][3]

    def block_on_edge(self, block: QuantumState, edge) -> bool:
        u, v = edge[0], edge[1]
        return self._index[block.layout.names[0]][:2] == (u, v)

    # accounting
    def declared_accounting(self) -> dict:
        per = {u: 0 for u in self.topology.nodes}
        for r in self.base.certificate:
            per[r.owner] += r.qubits
        for u, v, c in self.directed:
            per[u] += c * (self.N + 1)
            per[v] += c * (self.N + 1)
        bits = zh_classical_bits(self.N) + 2
        per_edge = {}
        for u, v, c in self.directed:
            e = frozenset((u, v))
            per_edge[e] = per_edge.get(e, 0) + c * bits
        return {"s_c": max(per.values()), "s_m": 0, "s_tm": 0, "classical_bits": max(per_edge.values(), default=0)}

    def programs(self) -> dict:
        progs = {}
        for u in self.topology.nodes:
            progs[u] = self._program(u)
        return progs

    def _program(self, u: str) -> NodeProgram:
        base = self.base.programs.get(u) or NodeProgram()
        outgoing = [(v, c) for (a, v, c) in self.directed if a == u]
        incoming = [(w, c) for (w, b, c) in self.directed if b == u]
        N = self.N

        def tag(a, b, blk):
            return f"{a}>{b}#{blk}"

        def local(ctx):
            for v, c in outgoing:
                for blk in range(1, c + 1):
                    zh.sender_local(ctx, self.pairs(u, v, blk), tag(u, v, blk))
            if base.local:
                base.local(_Teleporting(ctx, self))

        def send(ctx):
            for v, c in outgoing:
                for blk in range(1, c + 1):
                    zh.sender_send(ctx, v, N, tag(u, v, blk))
            if base.send:
                base.send(_Teleporting(ctx, self))

        def decide(ctx):
            for w, c in incoming:
                for blk in range(1, c + 1):
                    zh.receiver_decide(ctx, w, self.pairs(w, u, blk), tag(w, u, blk))
                for p in ctx.messages_from(w):
                    if isinstance(p, tuple) and p[0] == "tele":
                        _, name, blk, m1, m2 = p
                        half = self.pairs(w, u, blk)[-1][1]
                        ctx.apply(Unitary(half, CORRECTIONS[(m1, m2)], validate=False))
                        ctx.rename(half, name)
            if base.decide:
                return base.decide(_Teleporting(ctx, self))
            return None

        return NodeProgram(local, send, decide)

    def prepare(self, strategy: ProverStrategy | None = None) -> QuantumState:
        lay = self.certificate_layout()
        st = (strategy or self.honest_strategy()).state()
        if sorted(st.layout.names) != sorted(lay.names):
            raise ConfigError("strategy registers do not match the converted certificate layout")
        return st.reorder(lay.names).with_owners({r.name: r.owner for r in lay})

    def run(self, strategy: ProverStrategy | None = None, mode: str = "exact", *, seed: int = 0,
            trials: int = 1000, keep_transcripts: int = 1) -> ProtocolOutcome:
        state = self.prepare(strategy)
        kw = dict(outputs=self.base.outputs, locc=True, keep_transcripts=keep_transcripts)
        if mode == "exact":
            res = run_round(state, self.topology, self.programs(), "exact", **kw)
        else:
            res = sample_round(state, self.topology, self.programs(), trials, seed, **kw)
        res.extra["declared_accounting"] = self.declared_accounting()
        res.extra["N"] = self.N
        res.extra["epsilon"] = self.epsilon
        return res


def locc_convert(base: BaseProtocol, gamma: float | None = None, N: int | None = None, *,
                 delta: float | None = None, constant: float = 1.0) -> LoccInstance:
    """Converted protocol; ``N`` is given directly or derived from ``gamma`` and ``delta``
    through ``epsilon = gamma^2 / s_tm``."""
    eps = None
    if N is None:
        if gamma is None or delta is None:
            raise ConfigError("give N, or both gamma and delta")
        if base.s_tm == 0:
            raise ConfigError("base protocol sends no qubits; nothing to convert")
        eps = locc_epsilon(gamma, base.s_tm)
        N = epr_copies(eps, delta, constant)
    elif gamma is not None and base.s_tm:
        eps = locc_epsilon(gamma, base.s_tm)
    return LoccInstance(base, int(N), eps, delta)

