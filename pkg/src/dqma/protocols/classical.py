"""Classical certificate schemes for set equality on a line.

Certificates are plain Python data; neighbours exchange them in the single
round, so every check below only reads a node's own input, its own
certificate and its neighbours' certificates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dqma.ff import SetEqInstance


@dataclass
class ClassicalOutcome:
    decisions: dict
    verdict: bool | None
    truth: bool
    certificate_bits: int
    notes: dict = field(default_factory=dict)

    @property
    def all_accept(self) -> bool:
        return all(self.decisions.values())

    @property
    def accepted(self) -> bool:
        """Every node accepts and ``v_r`` declares the multisets equal."""
        return self.all_accept and bool(self.verdict)

    def summary(self) -> dict:
        return {
            "decisions": self.decisions, "verdict": self.verdict, "truth": self.truth,
            "accepted": self.accepted, "certificate_bits": self.certificate_bits,
        }


# counting scheme ------------------------------------------------------------


def _counts(rows, universe: int) -> tuple[int, ...]:
    c = [0] * universe
    for row in rows:
        for x in row:
            c[x] += 1
    return tuple(c)


def honest_counting_certificates(inst: SetEqInstance) -> list[tuple[tuple, tuple]]:
    """Certificate of ``v_i``: per-element counts over the inputs of ``v_0..v_i``."""
    return [(_counts(inst.a[: i + 1], inst.universe), _counts(inst.b[: i + 1], inst.universe))
            for i in range(inst.r + 1)]


def counting_bits(inst: SetEqInstance) -> int:
    per_count = max(1, math.ceil(math.log2(inst.ell * (inst.r + 1) + 1)))
    return 2 * inst.universe * per_count


def run_classical_seteq_counting(inst: SetEqInstance, certificates=None) -> ClassicalOutcome:
    certs = honest_counting_certificates(inst) if certificates is None else certificates
    U = inst.universe
    decisions = {}
    for i in range(inst.r + 1):
        ok = len(certs[i]) == 2 and all(len(c) == U for c in certs[i])
        if ok:
            own_a, own_b = _counts([inst.a[i]], U), _counts([inst.b[i]], U)
            prev = ((0,) * U, (0,) * U) if i == 0 else certs[i - 1]
            if len(prev) != 2 or any(len(c) != U for c in prev):
                ok = False
            else:
                want_a = tuple(x + y for x, y in zip(prev[0], own_a))
                want_b = tuple(x + y for x, y in zip(prev[1], own_b))
                ok = tuple(certs[i][0]) == want_a and tuple(certs[i][1]) == want_b
        decisions[f"v{i}"] = ok
    last = certs[inst.r]
    verdict = tuple(last[0]) == tuple(last[1]) if decisions[f"v{inst.r}"] else None
    return ClassicalOutcome(decisions, verdict, inst.equal(), counting_bits(inst))


def fuzz_counting_certificates(inst: SetEqInstance, rng: np.random.Generator, edits: int | None = None):
    """Honest certificates with a few random count edits."""
    certs = [[list(a), list(b)] for a, b in honest_counting_certificates(inst)]
    edits = int(rng.integers(1, 4)) if edits is None else edits
    for _ in range(edits):
        i = int(rng.integers(inst.r + 1))
        side = int(rng.integers(2))
        u = int(rng.integers(inst.universe))
        certs[i][side][u] = max(0, certs[i][side][u] + int(rng.choice([-2, -1, 1, 2])))
    return [(tuple(a), tuple(b)) for a, b in certs]


# trivial scheme ---------------------------------------------------------------


def honest_trivial_certificates(inst: SetEqInstance):
    """Every node gets all the input lists of both sides."""
    full = (tuple(tuple(row) for row in inst.a), tuple(tuple(row) for row in inst.b))
    return [full for _ in range(inst.r + 1)]


def trivial_bits(inst: SetEqInstance) -> int:
    return 2 * inst.ell * (inst.r + 1) * max(1, math.ceil(math.log2(max(inst.universe, 2))))


def run_classical_seteq_trivial(inst: SetEqInstance, certificates=None) -> ClassicalOutcome:
    certs = honest_trivial_certificates(inst) if certificates is None else certificates
    decisions = {}
    verdicts = {}
    for i in range(inst.r + 1):
        a_rows, b_rows = certs[i]
        ok = (len(a_rows) == inst.r + 1 and len(b_rows) == inst.r + 1
              and tuple(a_rows[i]) == tuple(inst.a[i]) and tuple(b_rows[i]) == tuple(inst.b[i])
              and all(0 <= x < inst.universe for rows in (a_rows, b_rows) for row in rows for x in row))
        for j in (i - 1, i + 1):
            if 0 <= j <= inst.r and certs[j] != certs[i]:
                ok = False
        decisions[f"v{i}"] = ok
        if ok:
            verdicts[i] = _counts(a_rows, inst.universe) == _counts(b_rows, inst.universe)
    verdict = verdicts.get(inst.r)
    return ClassicalOutcome(decisions, verdict, inst.equal(), trivial_bits(inst))
