"""One-round distributed verification on a network.

A run starts from the global certificate state (plus any privately prepared
registers), then executes the three stages of the model for every node:

1. ``local``  -- local operations, coin flips, measurements;
2. ``send``   -- quantum registers and classical payloads to neighbours;
3. ``decide`` -- local operations on everything held, then accept/reject.

Node programs only see a :class:`NodeContext`, which refuses to touch a
register the node does not currently own.  Exact mode enumerates every coin
and measurement branch by replaying the programs along each choice path;
sampled mode follows one trajectory drawn from per-node random streams.
"""
from __future__ import annotations

import json
import os
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import binomtest

from dqma.errors import LayoutError, LocalityViolation
from dqma.qcore import (
    ZERO_PROB,
    Povm,
    QuantumState,
    RegisterLayout,
    Unitary,
    apply_operator,
    apply_unitary,
    fidelity,
    measure_povm,
    partial_trace,
    tensor,
)
from dqma.primitives import permute_blocks, swap_test_execute

WORKERS_ENV = "DQMA_WORKERS"


# topology -------------------------------------------------------------------


@dataclass
class Topology:
    nodes: list[str]
    edges: set[frozenset]

    def __init__(self, nodes: Sequence[str], edges):
        self.nodes = [str(n) for n in nodes]
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node ids")
        self.edges = set()
        for u, v in edges:
            u, v = str(u), str(v)
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if u not in self.nodes or v not in self.nodes:
                raise ValueError(f"edge ({u}, {v}) references an unknown node")
            self.edges.add(frozenset((u, v)))
        if not self._connected():
            raise ValueError("topology must be connected")

    @classmethod
    def line(cls, r: int) -> "Topology":
        """Path ``v0 - v1 - ... - vr``."""
        if r < 1:
            raise ValueError("a line needs r >= 1")
        nodes = [f"v{j}" for j in range(r + 1)]
        return cls(nodes, [(nodes[j], nodes[j + 1]) for j in range(r)])

    def _connected(self) -> bool:
        if not self.nodes:
            return False
        seen = {self.nodes[0]}
        todo = deque(seen)
        while todo:
            u = todo.popleft()
            for v in self.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return len(seen) == len(self.nodes)

    def neighbors(self, u: str) -> list[str]:
        return [v for v in self.nodes if frozenset((u, v)) in self.edges]

    def has_edge(self, u: str, v: str) -> bool:
        return frozenset((u, v)) in self.edges

    @property
    def max_degree(self) -> int:
        return max(len(self.neighbors(u)) for u in self.nodes)

    def sorted_edges(self) -> list[tuple[str, str]]:
        order = {n: i for i, n in enumerate(self.nodes)}
        return sorted((tuple(sorted(e, key=order.get)) for e in self.edges), key=lambda e: (order[e[0]], order[e[1]]))

    def to_json(self) -> str:
        return json.dumps({"nodes": self.nodes, "edges": [list(e) for e in self.sorted_edges()]})

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        doc = json.loads(text)
        return cls(doc["nodes"], [tuple(e) for e in doc["edges"]])


# prover, transcripts, outcomes --------------------------------------------------


@dataclass
class ProverStrategy:
    """Certificate generator; the certificate is the tensor product of ``blocks``."""

    kind: str
    blocks: list[QuantumState]
    params: dict = field(default_factory=dict)

    def state(self) -> QuantumState:
        out = self.blocks[0]
        for b in self.blocks[1:]:
            out = tensor(out, b)
        return out

    @property
    def register_names(self) -> list[str]:
        return [n for b in self.blocks for n in b.layout.names]

    def block_of(self, name: str) -> QuantumState:
        for b in self.blocks:
            if name in b.layout:
                return b
        raise LayoutError(f"certificate has no register {name!r}")

    def is_product_over(self, groups: Sequence[Sequence[str]]) -> bool:
        """True when every block lies inside one of the register groups."""
        where = {n: i for i, g in enumerate(groups) for n in g}
        for b in self.blocks:
            if len({where.get(n, -1) for n in b.layout.names}) != 1:
                return False
        return True


def distribute_certificates(topology: Topology, strategy: ProverStrategy, layout: RegisterLayout) -> QuantumState:
    """Global certificate state in ``layout`` order, owners taken from ``layout``."""
    for r in layout:
        if r.owner not in topology.nodes:
            raise LayoutError(f"certificate register {r.name!r} has no owner in the topology")
    state = strategy.state()
    if sorted(state.layout.names) != sorted(layout.names):
        raise LayoutError(
            f"strategy {strategy.kind!r} produced registers {sorted(state.layout.names)}, expected {sorted(layout.names)}"
        )
    for r in layout:
        if state.layout[r.name].qubits != r.qubits:
            raise LayoutError(f"strategy register {r.name!r} has the wrong size")
    return state.reorder(layout.names).with_owners({r.name: r.owner for r in layout})


@dataclass
class Transcript:
    seed: int | None
    trial: int | None
    coins: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)
    measurements: list = field(default_factory=list)
    decisions: dict = field(default_factory=dict)
    accepted: bool | None = None
    output_fidelity: float | None = None
    s_c: int = 0
    s_m: int = 0
    s_tm: int = 0
    classical_bits: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if hasattr(o, "bits"):
        return list(o.bits)
    return str(o)


@dataclass
class Accounting:
    """Resource counts: certificate size, per-edge quantum message size,
    total qubits sent, per-edge classical bits."""

    s_c: int = 0
    s_m: int = 0
    s_tm: int = 0
    classical_bits: int = 0

    def merge(self, other: "Accounting") -> None:
        self.s_c = max(self.s_c, other.s_c)
        self.s_m = max(self.s_m, other.s_m)
        self.s_tm = max(self.s_tm, other.s_tm)
        self.classical_bits = max(self.classical_bits, other.classical_bits)


@dataclass
class ProtocolOutcome:
    accept_probability: float
    mode: str
    ci: tuple[float, float] | None = None
    trials: int | None = None
    output_state: QuantumState | None = None
    output_fidelity: float | None = None
    transcripts: list = field(default_factory=list)
    accounting: Accounting = field(default_factory=Accounting)
    branches: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def reject_probability(self) -> float:
        return 1.0 - self.accept_probability

    def conditional_output(self) -> QuantumState:
        from dqma.errors import DegenerateBranchError

        if self.output_state is None:
            raise DegenerateBranchError("acceptance probability is zero; the conditional output is undefined")
        return self.output_state

    def summary(self) -> dict:
        d = {
            "mode": self.mode,
            "accept_probability": self.accept_probability,
            "ci": list(self.ci) if self.ci else None,
            "trials": self.trials,
            "output_fidelity": self.output_fidelity,
            "branches": self.branches,
            "accounting": asdict(self.accounting),
        }
        d.update(self.extra)
        return d


# node programs ------------------------------------------------------------------


@dataclass
class NodeProgram:
    """The three stages of one node; each is ``callable(ctx)`` or None.

    ``decide`` may return a bool; returning None means accept unless the
    program called ``ctx.reject()``.
    """

    local: Callable | None = None
    send: Callable | None = None
    decide: Callable | None = None


class _Abort(Exception):
    """Raised inside an exact-mode replay when a node rejects."""


class _Tape:
    """Choice path for replay-based branch enumeration."""

    def __init__(self, prefix: tuple, stack: list | None, rngs: dict | None, nature):
        self.prefix = prefix
        self.path: list[int] = []
        self.stack = stack
        self.rngs = rngs
        self.nature = nature
        self.weight = 1.0

    @property
    def exact(self) -> bool:
        return self.rngs is None

    def choose(self, probs: Sequence[float], node: str | None = None) -> int:
        """Pick one option index; ``probs`` may contain zeros (never chosen)."""
        pos = len(self.path)
        if self.exact:
            live = [i for i, p in enumerate(probs) if p > ZERO_PROB]
            if pos < len(self.prefix):
                i = self.prefix[pos]
            else:
                i = live[0]
                for sib in reversed(live[1:]):
                    self.stack.append(tuple(self.path) + (sib,))
            self.weight *= probs[i]
        else:
            rng = self.rngs[node] if node is not None else self.nature
            p = np.asarray(probs, dtype=float)
            i = int(rng.choice(len(p), p=p / p.sum()))
        self.path.append(i)
        return i


class _RunState:
    def __init__(self, state: QuantumState, topology: Topology, tape: _Tape, locc: bool,
                 plan: Mapping | None, transcript: Transcript):
        self.state = state
        self.topology = topology
        self.tape = tape
        self.locc = locc
        self.plan = plan
        self.transcript = transcript
        self.owner = {r.name: r.owner for r in state.layout}
        self.quantum_sent = defaultdict(int)
        self.bits_sent = defaultdict(int)
        self.inbox = defaultdict(list)
        self.received = defaultdict(list)
        self.decisions: dict[str, bool] = {}


class NodeContext:
    """A node's restricted view of the run."""

    def __init__(self, run: _RunState, node: str):
        self._run = run
        self.node = node
        self.memory: dict = {}

    # bookkeeping
    @property
    def registers(self) -> list[str]:
        return [n for n in self._run.state.layout.names if self._run.owner.get(n) == self.node]

    def owns(self, name: str) -> bool:
        return self._run.owner.get(name) == self.node

    def _check(self, names: Sequence[str]) -> None:
        for n in names:
            if n not in self._run.owner:
                raise LayoutError(f"unknown register {n!r}")
            if self._run.owner[n] != self.node:
                raise LocalityViolation(
                    f"node {self.node} accessed register {n!r} owned by {self._run.owner[n]}"
                )

    @property
    def inbox(self) -> list:
        """Classical messages received, as ``(sender, payload)`` pairs."""
        return list(self._run.inbox[self.node])

    @property
    def received(self) -> list:
        """Quantum registers received, as ``(sender, names)`` pairs."""
        return list(self._run.received[self.node])

    def messages_from(self, sender: str) -> list:
        return [p for s, p in self._run.inbox[self.node] if s == sender]

    # randomness
    def coin(self, k: int) -> int:
        """Uniform private coin in ``range(k)``."""
        i = self._run.tape.choose([1.0 / k] * k, self.node)
        self._run.transcript.coins.setdefault(self.node, []).append(i)
        return i

    # quantum operations
    def apply(self, u: Unitary) -> None:
        self._check(u.targets)
        self._run.state = apply_unitary(self._run.state, u)

    def measure(self, povm: Povm):
        self._check(povm.targets)
        run = self._run
        branches = measure_povm(run.state, povm)
        i = run.tape.choose([b.probability for b in branches])
        run.state = branches[i].state
        label = branches[i].label
        run.transcript.measurements.append({"node": self.node, "registers": list(povm.targets), "outcome": label})
        return label

    def swap_test(self, r1: str, r2: str) -> bool:
        self._check([r1, r2])
        run = self._run
        branches = swap_test_execute(run.state, r1, r2)
        i = run.tape.choose([b.probability for b in branches])
        run.state = branches[i].state
        run.transcript.measurements.append({"node": self.node, "registers": [r1, r2], "outcome": branches[i].label})
        return branches[i].label

    def require(self, targets: Sequence[str], effect) -> bool:
        """Binary test ``{effect, I - effect}``; rejects on the second outcome.

        In exact mode only the passing branch is followed, since a rejecting
        branch cannot contribute to acceptance.
        """
        self._check(targets)
        run = self._run
        if run.tape.exact:
            p, post = apply_operator(run.state, targets, _psd_sqrt_cached(effect))
            if post is None:
                self.reject()
                return False
            run.tape.weight *= p
            run.state = post
            run.transcript.measurements.append({"node": self.node, "registers": list(targets), "outcome": True})
            return True
        ok = self.measure(Povm.binary(tuple(targets), effect))
        if not ok:
            self.reject()
        return ok

    def require_swap(self, r1: str, r2: str) -> bool:
        """SWAP test that rejects on the antisymmetric outcome (see :meth:`require`)."""
        self._check([r1, r2])
        run = self._run
        if run.tape.exact:
            acc = swap_test_execute(run.state, r1, r2)[0]
            if acc.state is None:
                self.reject()
                return False
            run.tape.weight *= acc.probability
            run.state = acc.state
            run.transcript.measurements.append({"node": self.node, "registers": [r1, r2], "outcome": True})
            return True
        ok = self.swap_test(r1, r2)
        if not ok:
            self.reject()
        return ok

    def permute(self, blocks: Sequence[Sequence[str]], pi: Sequence[int]) -> None:
        """Move the content of local block ``pi[j]`` into block ``j``."""
        self._check([n for b in blocks for n in ([b] if isinstance(b, str) else b)])
        self._run.state = permute_blocks(self._run.state, blocks, pi)

    def rename(self, old: str, new: str) -> None:
        self._check([old])
        run = self._run
        if new in run.owner:
            raise LayoutError(f"register {new!r} already exists")
        run.state = run.state.relabel({old: new})
        run.owner[new] = run.owner.pop(old)

    def discard(self, names: Sequence[str]) -> None:
        """Trace out local registers that are no longer needed."""
        self._check(names)
        run = self._run
        keep = [n for n in run.state.layout.names if n not in set(names)]
        if not keep:
            raise LayoutError("cannot discard every register")
        run.state = partial_trace(run.state, keep)
        for n in names:
            run.owner.pop(n)

    # communication
    def _edge_ok(self, dst: str) -> None:
        if not self._run.topology.has_edge(self.node, dst):
            raise LocalityViolation(f"{self.node} -> {dst} is not an edge")

    def send(self, dst: str, names: Sequence[str] | str) -> None:
        if isinstance(names, str):
            names = [names]
        self._check(names)
        self._edge_ok(dst)
        run = self._run
        if run.locc:
            raise LocalityViolation(f"quantum message {self.node} -> {dst} in an LOCC protocol")
        qubits = sum(run.state.layout[n].qubits for n in names)
        key = (self.node, dst)
        run.quantum_sent[key] += qubits
        if run.plan is not None and run.quantum_sent[key] > run.plan.get(key, 0):
            raise LocalityViolation(f"{self.node} -> {dst} exceeds its declared {run.plan.get(key, 0)} qubits")
        for n in names:
            run.owner[n] = dst
        run.received[dst].append((self.node, list(names)))
        run.transcript.messages.append(
            {"sender": self.node, "receiver": dst, "registers": list(names), "qubits": qubits, "payload": None, "bits": 0}
        )

    def send_bits(self, dst: str, payload, nbits: int) -> None:
        self._edge_ok(dst)
        run = self._run
        run.bits_sent[(self.node, dst)] += nbits
        run.inbox[dst].append((self.node, payload))
        run.transcript.messages.append(
            {"sender": self.node, "receiver": dst, "registers": [], "qubits": 0, "payload": payload, "bits": nbits}
        )

    # decisions
    def reject(self) -> None:
        self._run.decisions[self.node] = False
        if self._run.tape.exact:
            raise _Abort()

    def accept(self) -> None:
        self._run.decisions.setdefault(self.node, True)


_SQRT_CACHE: dict = {}


def _psd_sqrt_cached(effect):
    effect = np.asarray(effect, dtype=complex)
    key = (effect.shape, effect.tobytes())
    m = _SQRT_CACHE.get(key)
    if m is None:
        from dqma.qcore import _psd_sqrt

        m = effect if np.allclose(effect @ effect, effect, atol=1e-12) else _psd_sqrt(effect)
        if len(_SQRT_CACHE) < 256:
            _SQRT_CACHE[key] = m
    return m


def node_rngs(seed: int, trial: int, nodes: Sequence[str]):
    """Independent streams per node plus one for measurement outcomes."""
    rngs = {
        n: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, i)))
        for i, n in enumerate(nodes)
    }
    nature = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, len(nodes))))
    return rngs, nature


def _certificate_size(state: QuantumState, certificate: Sequence[str]) -> int:
    per = defaultdict(int)
    for n in certificate:
        r = state.layout[n]
        per[r.owner] += r.qubits
    return max(per.values(), default=0)


def _execute(state, topology, programs, tape, locc, plan, outputs, transcript, certificate):
    run = _RunState(state, topology, tape, locc, plan, transcript)
    ctxs = {u: NodeContext(run, u) for u in topology.nodes}
    accepted = True
    try:
        for stage in ("local", "send"):
            for u in topology.nodes:
                prog = programs.get(u)
                fn = getattr(prog, stage, None) if prog is not None else None
                if fn is not None:
                    fn(ctxs[u])
        for u in topology.nodes:
            prog = programs.get(u)
            fn = prog.decide if prog is not None else None
            verdict = fn(ctxs[u]) if fn is not None else None
            if verdict is False:
                ctxs[u].reject()
            elif run.decisions.get(u) is not False:
                run.decisions[u] = True
        accepted = all(run.decisions.get(u, True) for u in topology.nodes)
    except _Abort:
        accepted = False
    acct = Accounting(
        s_c=_certificate_size(state, certificate),
        s_m=max((run.quantum_sent[(u, v)] + run.quantum_sent[(v, u)] for u, v in topology.sorted_edges()), default=0),
        s_tm=sum(run.quantum_sent.values()),
        classical_bits=max((run.bits_sent[(u, v)] + run.bits_sent[(v, u)] for u, v in topology.sorted_edges()), default=0),
    )
    transcript.decisions = {u: run.decisions.get(u, True) for u in topology.nodes} if accepted else dict(run.decisions)
    transcript.accepted = accepted
    transcript.s_c, transcript.s_m, transcript.s_tm, transcript.classical_bits = acct.s_c, acct.s_m, acct.s_tm, acct.classical_bits
    out_state = None
    if accepted and outputs:
        for n in outputs:
            if n not in run.owner:
                raise LayoutError(f"output register {n!r} does not exist at the end of the run")
        out_state = partial_trace(run.state, outputs)
    return accepted, out_state, acct


def run_round(
    state: QuantumState,
    topology: Topology,
    programs: Mapping[str, NodeProgram],
    mode: str = "exact",
    *,
    seed: int = 0,
    trial: int = 0,
    outputs: Sequence[str] = (),
    reference: QuantumState | None = None,
    locc: bool = False,
    plan: Mapping | None = None,
    certificate: Sequence[str] | None = None,
    keep_transcripts: int = 1,
) -> ProtocolOutcome:
    """Execute one verification round.

    ``state`` holds every register (certificates and privately prepared
    ones); register owners give the initial placement.  ``certificate`` lists
    the prover-supplied registers for the certificate-size count (default:
    all).  ``outputs`` are the registers whose conditional state is
    returned; ``reference`` is a pure state on them for the output fidelity.
    """
    for r in state.layout:
        if r.owner not in topology.nodes:
            raise LayoutError(f"register {r.name!r} is not owned by a node of the topology")
    certificate = list(state.layout.names if certificate is None else certificate)
    if mode == "exact":
        stack = [()]
        total = 0.0
        out_acc = None
        out_layout = None
        acct = Accounting()
        transcripts = []
        leaves = 0
        while stack:
            prefix = stack.pop()
            tape = _Tape(prefix, stack, None, None)
            tr = Transcript(seed=None, trial=None)
            accepted, out, a = _execute(state, topology, programs, tape, locc, plan, outputs, tr, certificate)
            leaves += 1
            acct.merge(a)
            if accepted:
                total += tape.weight
                if out is not None:
                    out_layout = out.layout
                    dm = out.density() * tape.weight
                    out_acc = dm if out_acc is None else out_acc + dm
                if len(transcripts) < keep_transcripts:
                    transcripts.append(tr)
        total = min(total, 1.0)
        out_state = None
        if out_acc is not None and total > ZERO_PROB:
            out_state = QuantumState._trusted(out_layout, out_acc / np.trace(out_acc).real)
        fid = fidelity(reference, out_state) if (reference is not None and out_state is not None) else None
        return ProtocolOutcome(
            accept_probability=float(total), mode="exact", output_state=out_state, output_fidelity=fid,
            transcripts=transcripts, accounting=acct, branches=leaves,
        )
    if mode not in ("sample", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    rngs, nature = node_rngs(seed, trial, topology.nodes)
    tape = _Tape((), None, rngs, nature)
    tr = Transcript(seed=seed, trial=trial)
    accepted, out, acct = _execute(state, topology, programs, tape, locc, plan, outputs, tr, certificate)
    fid = fidelity(reference, out) if (reference is not None and out is not None) else None
    tr.output_fidelity = fid
    return ProtocolOutcome(
        accept_probability=1.0 if accepted else 0.0, mode="sample", trials=1, output_state=out,
        output_fidelity=fid, transcripts=[tr], accounting=acct, branches=1,
    )


# Monte Carlo ----------------------------------------------------------------------


@dataclass
class Estimate:
    p_hat: float
    ci_low: float
    ci_high: float
    trials: int
    successes: int

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def contains(self, p: float) -> bool:
        return self.ci_low <= p <= self.ci_high


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def estimate_acceptance(run: Callable[[int, int], bool], trials: int, seed: int, workers: int | None = None) -> Estimate:
    """Monte Carlo acceptance estimate with a Wilson 95% interval.

    ``run(seed, trial)`` executes one independent trajectory and returns
    whether all nodes accepted.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: bool(run(seed, t)), range(trials)))
    else:
        results = [bool(run(seed, t)) for t in range(trials)]
    k = sum(results)
    lo, hi = wilson_interval(k, trials)
    return Estimate(k / trials, lo, hi, trials, k)


def sample_round(state: QuantumState, topology: Topology, programs: Mapping[str, NodeProgram], trials: int,
                 seed: int, *, outputs: Sequence[str] = (), reference: QuantumState | None = None,
                 locc: bool = False, plan: Mapping | None = None, certificate: Sequence[str] | None = None,
                 keep_transcripts: int = 1, workers: int | None = None) -> ProtocolOutcome:
    """Repeat sampled trajectories; trial ``t`` uses the streams of ``(seed, t)``.

    The output state is the average of the accepted trajectories' outputs.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")

    def one(t: int) -> ProtocolOutcome:
        return run_round(state, topology, programs, "sample", seed=seed, trial=t, outputs=outputs,
                         locc=locc, plan=plan, certificate=certificate)

    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, range(trials)))
    else:
        runs = [one(t) for t in range(trials)]
    acct = Accounting()
    k = 0
    acc_out = None
    out_layout = None
    for res in runs:
        acct.merge(res.accounting)
        if res.accept_probability == 1.0:
            k += 1
            if res.output_state is not None:
                out_layout = res.output_state.layout
                dm = res.output_state.density()
                acc_out = dm if acc_out is None else acc_out + dm
    out_state = None
    if acc_out is not None:
        out_state = QuantumState._trusted(out_layout, acc_out / k)
    fid = fidelity(reference, out_state) if (reference is not None and out_state is not None) else None
    lo, hi = wilson_interval(k, trials)
    return ProtocolOutcome(
        accept_probability=k / trials, mode="sample", ci=(lo, hi), trials=trials, output_state=out_state,
        output_fidelity=fid, transcripts=[r.transcripts[0] for r in runs[:keep_transcripts]], accounting=acct,
        branches=trials,
    )
