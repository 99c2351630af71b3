"""Malicious-prover families.

A family is a ``kind`` plus parameters; :func:`realize` turns it into a
concrete certificate for a protocol descriptor.  Supported descriptors are
:class:`~dqma.protocols.sgdi.SgdiInput`, :class:`~dqma.protocols.zh.ZhInput`
and :class:`~dqma.protocols.locc.LoccInstance`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from dqma.errors import ConfigError
from dqma.netsim import ProverStrategy
from dqma.primitives import PHI_PLUS
from dqma.qcore import QuantumState, RegisterLayout, random_pure_state, tensor

KINDS = ("honest", "all_zeros", "orthogonal_at", "interpolate", "entangled_pair", "epr_corrupt", "random_product")

NAMED_PAIRS = {
    "00": np.array([1, 0, 0, 0], dtype=complex),
    "11": np.array([0, 0, 0, 1], dtype=complex),
    "phi_plus": PHI_PLUS,
    "phi_minus": np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2),
    "psi_plus": np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2),
    "psi_minus": np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2),
}


@dataclass
class AdversaryFamily:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown adversary kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.kind == "interpolate":
            t = self.params.get("t")
            if t is None or not 0.0 <= float(t) <= 1.0:
                raise ConfigError("interpolate needs t in [0, 1]")
            if "target" not in self.params:
                raise ConfigError("interpolate needs a target family")

    @classmethod
    def from_dict(cls, d) -> "AdversaryFamily":
        if isinstance(d, str):
            return cls(d)
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("adversary entry needs a 'kind' field")
        params = {k: v for k, v in d.items() if k != "kind"}
        if isinstance(params.get("params"), dict):
            params.update(params.pop("params"))
        return cls(d["kind"], params)

    @classmethod
    def from_json(cls, text: str) -> "AdversaryFamily":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


# helpers ------------------------------------------------------------------------


def orthogonal_vector(v: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to ``v`` by Gram-Schmidt on the first usable basis vector."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    for i in range(len(v)):
        e = np.zeros(len(v), dtype=complex)
        e[i] = 1
        w = e - np.vdot(v, e) * v
        nrm = np.linalg.norm(w)
        if nrm > 1e-6:
            return w / nrm
    raise ValueError("no orthogonal vector in dimension 1")


def _zeros_like(block: QuantumState) -> QuantumState:
    return QuantumState.basis(block.layout)


def _same(a: QuantumState, b: QuantumState) -> bool:
    return a.layout.names == b.layout.names and a.is_pure == b.is_pure and np.array_equal(a.data, b.data)


def _sgdi_honest(inp, columns: int) -> ProverStrategy:
    from dqma.protocols.sgdi import node, reg

    blocks = [QuantumState.single(reg(l, c), inp.phi(l), node(l))
              for l in range(1, inp.r + 1) for c in range(1, columns + 1)]
    return ProverStrategy("honest", blocks)


def _descriptor_kind(desc) -> str:
    from dqma.protocols.locc import LoccInstance
    from dqma.protocols.sgdi import SgdiInput
    from dqma.protocols.zh import ZhInput

    if isinstance(desc, SgdiInput):
        return "sgdi"
    if isinstance(desc, ZhInput):
        return "zh"
    if isinstance(desc, LoccInstance):
        return "locc"
    raise ConfigError(f"no adversary support for descriptor {type(desc).__name__}")


def honest_strategy(desc, columns: int | None = None) -> ProverStrategy:
    kind = _descriptor_kind(desc)
    if kind == "sgdi":
        return _sgdi_honest(desc, desc.columns if columns is None else columns)
    if kind == "zh":
        from dqma.protocols.zh import V1, V2

        blocks = [QuantumState(RegisterLayout([(a, 1, V1), (b, 1, V2)]), PHI_PLUS) for a, b in desc.pairs()]
        return ProverStrategy("honest", blocks)
    return desc.honest_strategy()


def _epr_blocks(desc, honest: ProverStrategy) -> list[int]:
    """Indices of the honest blocks that are EPR slots, with their slot number."""
    kind = _descriptor_kind(desc)
    if kind == "zh":
        return list(range(len(honest.blocks)))
    return [i for i, b in enumerate(honest.blocks) if desc.is_epr_block(b)]


def _slot_of(desc, block: QuantumState) -> int:
    kind = _descriptor_kind(desc)
    if kind == "zh":
        return int(block.layout.names[0][1:].split("_")[0])
    return desc.slot_of(block)


# realization ----------------------------------------------------------------------


def realize(family: AdversaryFamily | dict | str, desc, columns: int | None = None) -> ProverStrategy:
    """Concrete certificate of ``family`` for the protocol described by ``desc``.

    For state-generation inputs ``columns`` restricts the certificate to the
    first columns (1 for the single-column round).
    """
    if not isinstance(family, AdversaryFamily):
        family = AdversaryFamily.from_dict(family)
    kind = _descriptor_kind(desc)
    honest = honest_strategy(desc, columns)
    p = family.params
    k = family.kind
    if k == "honest":
        return ProverStrategy("honest", list(honest.blocks), dict(p))
    if k == "all_zeros":
        which = range(len(honest.blocks)) if kind != "locc" else _epr_blocks(desc, honest)
        blocks = list(honest.blocks)
        for i in which:
            blocks[i] = _zeros_like(blocks[i])
        return ProverStrategy("all_zeros", blocks, dict(p))
    if k == "random_product":
        rng = np.random.default_rng(int(p.get("seed", 0)))
        which = range(len(honest.blocks)) if kind != "locc" else _epr_blocks(desc, honest)
        blocks = list(honest.blocks)
        for i in which:
            blocks[i] = random_pure_state(blocks[i].layout, rng)
        return ProverStrategy("random_product", blocks, dict(p))
    if k == "orthogonal_at":
        if kind != "sgdi":
            raise ConfigError("orthogonal_at applies to state-generation inputs")
        return _orthogonal_at(desc, honest, p)
    if k == "entangled_pair":
        if kind != "sgdi":
            raise ConfigError("entangled_pair applies to state-generation inputs")
        return _entangled_pair(desc, honest, p)
    if k == "epr_corrupt":
        if kind == "sgdi":
            raise ConfigError("epr_corrupt applies to EPR-test and LOCC descriptors")
        return _epr_corrupt(desc, honest, p)
    if k == "interpolate":
        target = realize(AdversaryFamily.from_dict(p["target"]), desc, columns)
        return _interpolate(honest, target, float(p["t"]), p)
    raise ConfigError(f"unhandled adversary kind {k!r}")


def _sgdi_node_col(desc, p, honest) -> tuple[int, int]:
    l = p.get("node", desc.r)
    if isinstance(l, str):
        l = int(l.lstrip("v"))
    c = int(p.get("column", 1))
    cols = len(honest.blocks) // desc.r
    if not 1 <= l <= desc.r:
        raise ConfigError(f"node v{l} holds no certificate (valid: v1..v{desc.r})")
    if not 1 <= c <= cols:
        raise ConfigError(f"column {c} does not exist (valid: 1..{cols})")
    return l, c


def _orthogonal_at(desc, honest, p) -> ProverStrategy:
    from dqma.protocols.sgdi import node, reg

    l, c = _sgdi_node_col(desc, p, honest)
    blocks = [QuantumState.single(reg(l, c), orthogonal_vector(desc.phi(l)), node(l))
              if b.layout.names == [reg(l, c)] else b for b in honest.blocks]
    return ProverStrategy("orthogonal_at", blocks, dict(p))


def _entangled_pair(desc, honest, p) -> ProverStrategy:
    """``cos(t)|phi_l phi_{l+1}> + sin(t)|phi_l^perp phi_{l+1}^perp>`` on a column."""
    from dqma.protocols.sgdi import node, reg

    nodes = p.get("nodes", [1, 2])
    nodes = [int(str(x).lstrip("v")) for x in nodes]
    if len(nodes) != 2 or nodes[1] != nodes[0] + 1 or not (1 <= nodes[0] and nodes[1] <= desc.r):
        raise ConfigError(f"entangled_pair needs two adjacent certificate nodes in v1..v{desc.r}, got {nodes}")
    c = int(p.get("column", 1))
    if not 1 <= c <= len(honest.blocks) // desc.r:
        raise ConfigError(f"column {c} does not exist")
    theta = float(p.get("theta", np.pi / 4))
    a, b = nodes
    pa, pb = desc.phi(a), desc.phi(b)
    vec = np.cos(theta) * np.kron(pa, pb) + np.sin(theta) * np.kron(orthogonal_vector(pa), orthogonal_vector(pb))
    lay = RegisterLayout([(reg(a, c), desc.n, node(a)), (reg(b, c), desc.n, node(b))])
    pair = QuantumState(lay, vec)
    skip = {reg(a, c), reg(b, c)}
    blocks = [b_ for b_ in honest.blocks if b_.layout.names[0] not in skip] + [pair]
    return ProverStrategy("entangled_pair", blocks, dict(p))


def _pair_vector(spec) -> np.ndarray:
    if isinstance(spec, str):
        if spec not in NAMED_PAIRS:
            raise ConfigError(f"unknown replacement pair {spec!r}; expected one of {sorted(NAMED_PAIRS)}")
        return NAMED_PAIRS[spec]
    v = np.asarray(spec, dtype=complex).reshape(-1)
    if v.shape != (4,) or abs(np.linalg.norm(v) - 1) > 1e-9:
        raise ConfigError("replacement must be a normalized 4-vector")
    return v


def _epr_corrupt(desc, honest, p) -> ProverStrategy:
    slots = p.get("slots", p.get("blocks"))
    if slots is None:
        raise ConfigError("epr_corrupt needs a 'slots' list")
    slots = [int(s) for s in slots]
    rep = _pair_vector(p.get("replacement", "00"))
    which = _epr_blocks(desc, honest)
    max_slot = max(_slot_of(desc, honest.blocks[i]) for i in which)
    for s in slots:
        if not 1 <= s <= max_slot:
            raise ConfigError(f"slot {s} does not exist (valid: 1..{max_slot})")
    edge = p.get("edge")
    blocks = list(honest.blocks)
    for i in which:
        b = blocks[i]
        if _slot_of(desc, b) not in slots:
            continue
        if edge is not None and not desc.block_on_edge(b, edge):
            continue
        blocks[i] = QuantumState(b.layout, rep)
    return ProverStrategy("epr_corrupt", blocks, dict(p))


def _interpolate(honest: ProverStrategy, target: ProverStrategy, t: float, p) -> ProverStrategy:
    """``(1-t) honest + t target`` as a density matrix on the registers where they differ."""
    if t == 0.0:
        return ProverStrategy("interpolate", list(honest.blocks), dict(p))
    diff: set[str] = set()
    tb = {tuple(b.layout.names): b for b in target.blocks}
    for b in honest.blocks:
        other = tb.get(tuple(b.layout.names))
        if other is None or not _same(b, other):
            diff |= set(b.layout.names)
    for b in target.blocks:
        if tuple(b.layout.names) not in {tuple(h.layout.names) for h in honest.blocks}:
            diff |= set(b.layout.names)
    # close under both block structures
    changed = True
    while changed:
        changed = False
        for b in honest.blocks + target.blocks:
            names = set(b.layout.names)
            if names & diff and not names <= diff:
                diff |= names
                changed = True
    if not diff:
        return ProverStrategy("interpolate", list(honest.blocks), dict(p))
    order = [n for b in honest.blocks for n in b.layout.names if n in diff]
    hb = [b for b in honest.blocks if set(b.layout.names) <= diff]
    tgt = [b for b in target.blocks if set(b.layout.names) <= diff]
    h_state = (tensor(*hb) if len(hb) > 1 else hb[0]).reorder(order)
    t_state = (tensor(*tgt) if len(tgt) > 1 else tgt[0]).reorder(order)
    t_state = t_state.with_owners({r.name: r.owner for r in h_state.layout})
    mixed = QuantumState(h_state.layout, (1 - t) * h_state.density() + t * t_state.density())
    rest = [b for b in honest.blocks if not set(b.layout.names) <= diff]
    return ProverStrategy("interpolate", rest + [mixed], dict(p))


def builtin_families(desc) -> list[AdversaryFamily]:
    """A spread of probes for soundness sweeps on state-generation inputs."""
    r = desc.r
    fams = [AdversaryFamily("honest"), AdversaryFamily("all_zeros")]
    for l in range(1, r + 1):
        fams.append(AdversaryFamily("orthogonal_at", {"node": l, "column": 1}))
    for t in (0.25, 0.5, 0.75, 1.0):
        fams.append(AdversaryFamily("interpolate", {"t": t, "target": {"kind": "orthogonal_at", "node": r}}))
    for l in range(1, r):
        for theta in (np.pi / 6, np.pi / 4, np.pi / 3):
            fams.append(AdversaryFamily("entangled_pair", {"nodes": [l, l + 1], "theta": float(theta)}))
    for s in range(3):
        fams.append(AdversaryFamily("random_product", {"seed": s}))
    return fams
