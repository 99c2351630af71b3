"""State generation along a line: the single-column verification round and
the multi-column protocol with per-node random permutations.

Node ``v_l`` holds ``n``-qubit certificate registers ``R{l}_{c}`` for columns
``c = 1..m+k+1``; ``v0`` prepares its own copies ``R0_{c}`` of ``|psi>``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from dqma.errors import CapacityError, ConfigError
from dqma.netsim import (
    NodeProgram,
    ProtocolOutcome,
    ProverStrategy,
    Topology,
    run_round,
    sample_round,
)
from dqma.qcore import (
    ALGEBRA_TOL,
    MIXED_QUBIT_CAP,
    PURE_QUBIT_CAP,
    QuantumState,
    RegisterLayout,
    Unitary,
    apply_unitary,
    fidelity,
    partial_trace,
    random_pure_state,
    random_unitary,
    tensor,
    trace_distance,
)
from dqma.primitives import swap_test_accept_prob


def reg(l: int, c: int) -> str:
    return f"R{l}_{c}"


def node(l: int) -> str:
    return f"v{l}"


def _encode_complex(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [a.real.tolist(), a.imag.tolist()]


def _decode_complex(x) -> np.ndarray:
    if isinstance(x, dict):
        x = [x["re"], x["im"]]
    if len(x) == 2 and isinstance(x[0], list) and np.asarray(x[0]).shape == np.asarray(x[1]).shape and np.asarray(x[0]).ndim >= 1:
        arr = np.asarray(x[0], dtype=float) + 1j * np.asarray(x[1], dtype=float)
        return arr
    return np.asarray(x, dtype=complex)


@dataclass
class SgdiInput:
    """Inputs of a state-generation instance on the line ``v0 .. vr``.

    ``psi`` is ``v0``'s ``n``-qubit state, ``unitaries[l-1]`` is ``U_l`` held by
    ``v_l``.  ``k`` verification columns and ``m`` spare columns; column 1 is
    the output column.  ``coin_at_end`` makes ``v_r`` flip its own test coin
    instead of always testing.
    """

    r: int
    n: int
    psi: np.ndarray
    unitaries: list
    k: int = 1
    m: int = 0
    coin_at_end: bool = False

    def __post_init__(self):
        if self.r < 1 or self.n < 1:
            raise ConfigError("need r >= 1 and n >= 1")
        if self.k < 0 or self.m < 0:
            raise ConfigError("need k >= 0 and m >= 0")
        self.psi = np.asarray(self.psi, dtype=complex).reshape(-1)
        dim = 2 ** self.n
        if self.psi.shape != (dim,):
            raise ConfigError(f"psi must have dimension {dim}")
        if abs(np.linalg.norm(self.psi) - 1) > 1e-9:
            raise ConfigError("psi must be normalized")
        self.unitaries = [np.asarray(u, dtype=complex) for u in self.unitaries]
        if len(self.unitaries) != self.r:
            raise ConfigError(f"expected {self.r} unitaries, got {len(self.unitaries)}")
        for j, u in enumerate(self.unitaries, 1):
            if u.shape != (dim, dim) or not np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-9):
                raise ConfigError(f"U_{j} is not a {dim}x{dim} unitary")

    @property
    def columns(self) -> int:
        return self.m + self.k + 1

    @property
    def topology(self) -> Topology:
        return Topology.line(self.r)

    def phi(self, l: int) -> np.ndarray:
        """``U_l ... U_1 |psi>``."""
        v = self.psi
        for u in self.unitaries[:l]:
            v = u @ v
        return v

    def phi_state(self, l: int, name: str | None = None, owner: str | None = None) -> QuantumState:
        return QuantumState.single(name or reg(l, 1), self.phi(l), owner or node(l))

    def certificate_layout(self, columns: int | None = None) -> RegisterLayout:
        K = self.columns if columns is None else columns
        return RegisterLayout([(reg(l, c), self.n, node(l)) for l in range(1, self.r + 1) for c in range(1, K + 1)])

    def single_column(self) -> "SgdiInput":
        return SgdiInput(self.r, self.n, self.psi, self.unitaries, k=0, m=0, coin_at_end=self.coin_at_end)

    @classmethod
    def random(cls, r: int, n: int, rng: np.random.Generator, k: int = 1, m: int = 0, **kw) -> "SgdiInput":
        psi = random_pure_state(RegisterLayout.of(("x", n)), rng).data
        us = [random_unitary(2 ** n, rng) for _ in range(r)]
        return cls(r, n, psi, us, k=k, m=m, **kw)

    def to_dict(self) -> dict:
        return {
            "r": self.r, "n": self.n, "k": self.k, "m": self.m, "coin_at_end": self.coin_at_end,
            "psi": _encode_complex(self.psi), "unitaries": [_encode_complex(u) for u in self.unitaries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SgdiInput":
        return cls(
            int(d["r"]), int(d["n"]), _decode_complex(d["psi"]), [_decode_complex(u) for u in d["unitaries"]],
            k=int(d.get("k", 1)), m=int(d.get("m", 0)), coin_at_end=bool(d.get("coin_at_end", False)),
        )


# node programs ---------------------------------------------------------------


def line_programs(inp: SgdiInput, verify: list[int], permute_columns: int = 0) -> dict:
    """Programs running the single-column round on every column in ``verify``.

    With ``permute_columns = K > 1`` each ``v_l`` (``l >= 1``) first applies a
    uniformly random permutation to its ``K`` columns.
    """
    r = inp.r
    perms = list(itertools.permutations(range(permute_columns))) if permute_columns > 1 else None
    last_coin = inp.coin_at_end

    def make(l: int) -> NodeProgram:
        def local(ctx):
            if perms is not None and l >= 1:
                pi = perms[ctx.coin(len(perms))]
                ctx.permute([reg(l, c) for c in range(1, permute_columns + 1)], pi)
            for c in verify:
                ctx.memory[c] = ctx.coin(2) if (l < r or last_coin) else 1

        def send(ctx):
            if l == r:
                return
            for c in verify:
                if ctx.memory[c] == 0:
                    ctx.send(node(l + 1), reg(l, c))

        def decide(ctx):
            if l == 0:
                return None
            u = Unitary(reg(l - 1, 0), inp.unitaries[l - 1], validate=False)
            for c in verify:
                incoming = reg(l - 1, c)
                if ctx.memory[c] == 1 and ctx.owns(incoming):
                    ctx.apply(u.on(incoming))
                    ctx.require_swap(incoming, reg(l, c))
            return None

        return NodeProgram(local, send, decide)

    return {node(l): make(l) for l in range(r + 1)}


def _check_cap(qubits: int, pure: bool, what: str) -> None:
    cap = PURE_QUBIT_CAP if pure else MIXED_QUBIT_CAP
    if qubits > cap:
        raise CapacityError(f"{what} needs {qubits} qubits, over the {'pure' if pure else 'mixed'} cap of {cap}")


def _copies(inp: SgdiInput, cols) -> list[QuantumState]:
    return [QuantumState.single(reg(0, c), inp.psi, node(0)) for c in cols]


def _finish(out: ProtocolOutcome, inp: SgdiInput, s_c: int, s_m: int) -> ProtocolOutcome:
    if out.output_state is not None:
        ref = QuantumState.single(out.output_state.layout.names[0], inp.phi(inp.r), node(inp.r))
        out.output_fidelity = fidelity(ref, out.output_state)
    out.extra.setdefault("declared_accounting", {"s_c": s_c, "s_m": s_m})
    return out


# single column ---------------------------------------------------------------


def run_sgdiv(inp: SgdiInput, strategy: ProverStrategy, mode: str = "exact", *, seed: int = 0,
              trials: int = 1000, keep_transcripts: int = 1) -> ProtocolOutcome:
    """One verification round on column 1 (certificate registers ``R{l}_1``)."""
    lay = inp.certificate_layout(1)
    cert = strategy.state()
    if sorted(cert.layout.names) != sorted(lay.names):
        raise ConfigError(f"strategy registers {cert.layout.names} do not match {lay.names}")
    cert = cert.reorder(lay.names).with_owners({r.name: r.owner for r in lay})
    state = tensor(*_copies(inp, [1]), cert)
    _check_cap(state.num_qubits, state.is_pure, "single-column round")
    out_reg = [reg(inp.r, 1)]
    kw = dict(outputs=out_reg, certificate=lay.names, keep_transcripts=keep_transcripts)
    progs = line_programs(inp, [1])
    if mode == "exact":
        res = run_round(state, inp.topology, progs, "exact", **kw)
    else:
        res = sample_round(state, inp.topology, progs, trials, seed, **kw)
    return _finish(res, inp, inp.n, inp.n)


@dataclass
class ChainDiagnostics:
    """Certificate-side quantities of a single-column round.

    ``alphas[j-1]`` is the rejection probability of ``v_j``'s SWAP test given
    that it tests, ``distances[nu-1] = D(phi_nu, rho_nu)``.
    """

    alphas: list
    distances: list
    chain_bounds: list
    infidelity: float
    rejection_bound: float
    fidelities: list = field(default_factory=list)

    def chain_holds(self, tol: float = 1e-9) -> bool:
        return all(d <= b + tol for d, b in zip(self.distances, self.chain_bounds))

    def to_dict(self) -> dict:
        return {
            "alphas": self.alphas, "distances": self.distances, "chain_bounds": self.chain_bounds,
            "infidelity": self.infidelity, "rejection_bound": self.rejection_bound,
        }


def chain_diagnostics(inp: SgdiInput, strategy: ProverStrategy, column: int = 1) -> ChainDiagnostics:
    cert = strategy.state()
    r = inp.r
    alphas, distances, bounds, fids = [], [], [], []
    running = 0.0
    for j in range(1, r + 1):
        if j == 1:
            left = QuantumState.single("a", inp.psi)
            right = partial_trace(cert, [reg(1, column)]).relabel({reg(1, column): "b"})
            pair = tensor(left, right)
        else:
            pair = partial_trace(cert, [reg(j - 1, column), reg(j, column)]).reorder(
                [reg(j - 1, column), reg(j, column)]).relabel({reg(j - 1, column): "a", reg(j, column): "b"})
        pair = apply_unitary(pair, Unitary("a", inp.unitaries[j - 1], validate=False))
        alpha = max(0.0, 1.0 - swap_test_accept_prob(pair, "a", "b"))
        alphas.append(alpha)
        running += 3 * math.sqrt(alpha)
        bounds.append(running)
        rho = partial_trace(cert, [reg(j, column)])
        target = QuantumState.single(reg(j, column), inp.phi(j))
        distances.append(trace_distance(target, rho.with_owners({reg(j, column): None})))
        fids.append(float(np.real(np.vdot(inp.phi(j), rho.density() @ inp.phi(j)))))
    infid = max(0.0, 1.0 - fids[-1])
    return ChainDiagnostics(alphas, distances, bounds, infid, infid ** 2 / (72 * r * r), fids)


# many columns -------------------------------------------------------------------


def _block_columns(strategy: ProverStrategy, r: int, K: int):
    """Map original register name -> (node, column) and list blocks by names."""
    where = {}
    for l in range(1, r + 1):
        for c in range(1, K + 1):
            where[reg(l, c)] = (l, c)
    for n in strategy.register_names:
        if n not in where:
            raise ConfigError(f"strategy register {n!r} is not a certificate register")
    return where


class _ColumnEvaluator:
    """Exact acceptance of a set of verified columns after the permutations."""

    def __init__(self, inp: SgdiInput, strategy: ProverStrategy):
        self.inp = inp
        self.strategy = strategy
        self.cache: dict = {}

    def component(self, assignment: tuple, verify: tuple, with_output: bool):
        """``assignment``: tuple of ``(new_col, ((l, orig_col), ...))`` for one
        connected group of new columns.  Returns ``(accept, unnormalized
        output density or None)``."""
        key = (assignment, verify, with_output)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        inp = self.inp
        rename = {}
        for new_col, origs in assignment:
            for l, oc in origs:
                rename[reg(l, oc)] = reg(l, new_col)
        blocks = []
        for b in self.strategy.blocks:
            keep = [n for n in b.layout.names if n in rename]
            if keep:
                blocks.append(partial_trace(b, keep) if len(keep) < len(b.layout) else b)
        cert = tensor(*blocks) if len(blocks) > 1 else blocks[0]
        cert = cert.relabel({n: rename[n] for n in cert.layout.names})
        cert = cert.with_owners({n: node(int(n[1:].split("_")[0])) for n in cert.layout.names})
        state = tensor(*_copies(inp, verify), cert) if verify else cert
        _check_cap(state.num_qubits, state.is_pure, "column group")
        outputs = [reg(inp.r, 1)] if with_output else []
        res = run_round(state, inp.topology, line_programs(inp, list(verify)), "exact", outputs=outputs,
                        keep_transcripts=0)
        out = None
        if with_output and res.output_state is not None:
            out = res.output_state.density() * res.accept_probability
        value = (res.accept_probability, out)
        self.cache[key] = value
        return value


def _groups(strategy: ProverStrategy, perms: tuple, relevant: list[int], r: int) -> list[list[int]]:
    """Connected groups of relevant new columns under the certificate blocks."""
    # original (l, c) -> new column
    to_new = {}
    for l in range(1, r + 1):
        pi = perms[l - 1]
        for j, src in enumerate(pi):
            to_new[(l, src + 1)] = j + 1
    parent = {c: c for c in relevant}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    rel = set(relevant)
    for b in strategy.blocks:
        cols = set()
        for n in b.layout.names:
            l, c = (int(t) for t in n[1:].split("_"))
            nc = to_new[(l, c)]
            if nc in rel:
                cols.add(nc)
        cols = sorted(cols)
        for c in cols[1:]:
            parent[find(c)] = find(cols[0])
    out: dict = {}
    for c in relevant:
        out.setdefault(find(c), []).append(c)
    return list(out.values())


def _factorized_exact(inp: SgdiInput, strategy: ProverStrategy) -> ProtocolOutcome:
    r, K = inp.r, inp.columns
    verify = list(range(2, inp.k + 2))
    relevant = [1] + verify
    perm_list = list(itertools.permutations(range(K)))
    ev = _ColumnEvaluator(inp, strategy)
    total = 0.0
    out_acc = None
    count = 0
    for perms in itertools.product(perm_list, repeat=r):
        count += 1
        weight = 1.0
        out = None
        for grp in _groups(strategy, perms, relevant, r):
            assignment = tuple(
                (j, tuple((l, perms[l - 1][j - 1] + 1) for l in range(1, r + 1))) for j in grp
            )
            ver = tuple(c for c in grp if c != 1)
            acc, dm = ev.component(assignment, ver, 1 in grp)
            if 1 in grp:
                out = dm
            else:
                weight *= acc
            if weight == 0.0:
                break
        if weight == 0.0 or out is None:
            continue
        total += weight * float(np.trace(out).real)
        contrib = weight * out
        out_acc = contrib if out_acc is None else out_acc + contrib
    p = total / count
    out_state = None
    if out_acc is not None and total > 0:
        lay = RegisterLayout([(reg(r, 1), inp.n, node(r))])
        out_state = QuantumState._trusted(lay, out_acc / np.trace(out_acc).real)
    return ProtocolOutcome(accept_probability=min(p, 1.0), mode="exact", output_state=out_state,
                           branches=count, extra={"method": "factorized"})


def _monolithic_state(inp: SgdiInput, strategy: ProverStrategy) -> tuple[QuantumState, RegisterLayout]:
    lay = inp.certificate_layout()
    cert = strategy.state()
    if sorted(cert.layout.names) != sorted(lay.names):
        raise ConfigError("strategy registers do not match the certificate layout")
    cert = cert.reorder(lay.names).with_owners({r.name: r.owner for r in lay})
    qubits = cert.num_qubits + inp.k * inp.n
    _check_cap(qubits, cert.is_pure, "monolithic multi-column run")
    return tensor(*_copies(inp, range(2, inp.k + 2)), cert) if inp.k else cert, lay


def run_sgdi(inp: SgdiInput, strategy: ProverStrategy, mode: str = "exact", *, method: str = "auto",
             seed: int = 0, trials: int = 1000, keep_transcripts: int = 1) -> ProtocolOutcome:
    """Multi-column protocol: permute, verify columns ``2..k+1``, output column 1.

    ``method`` is ``monolithic`` (one global simulation including the
    permutation coins), ``factorized`` (exact per-permutation evaluation
    that simulates only connected groups of columns) or ``auto``.
    """
    K = inp.columns
    acct = {"s_c": K * inp.n, "s_m": inp.k * inp.n}
    _block_columns(strategy, inp.r, K)
    verify = list(range(2, inp.k + 2))
    if mode == "exact":
        if method == "auto":
            method = "factorized"
        if method == "factorized":
            res = _factorized_exact(inp, strategy)
            res.accounting.s_c, res.accounting.s_m = acct["s_c"], acct["s_m"]
            res.accounting.s_tm = inp.r * inp.k * inp.n
            return _finish(res, inp, acct["s_c"], acct["s_m"])
        if method != "monolithic":
            raise ConfigError(f"unknown method {method!r}")
        state, lay = _monolithic_state(inp, strategy)
        res = run_round(state, inp.topology, line_programs(inp, verify, K), "exact",
                        outputs=[reg(inp.r, 1)], certificate=lay.names, keep_transcripts=keep_transcripts)
        res.extra["method"] = "monolithic"
        return _finish(res, inp, acct["s_c"], acct["s_m"])
    state, lay = _monolithic_state(inp, strategy)
    res = sample_round(state, inp.topology, line_programs(inp, verify, K), trials, seed,
                       outputs=[reg(inp.r, 1)], certificate=lay.names, keep_transcripts=keep_transcripts)
    res.extra["method"] = "monolithic"
    return _finish(res, inp, acct["s_c"], acct["s_m"])
