"""Set equality on a line via fingerprint-state generation.

Each side (A and B) is a state-generation instance whose initial state is
the fingerprint of ``v0``'s list polynomial and whose unitaries multiply in
the list polynomials of ``v1..vr``.  ``v_r`` ends with a SWAP test between
the two generated fingerprints.
"""
from __future__ import annotations

import numpy as np

from dqma.errors import ConfigError
from dqma.ff import (
    SetEqInstance,
    fingerprint_qubits,
    fingerprint_vector,
    g_permutation,
    permutation_matrix,
)
from dqma.netsim import ProtocolOutcome
from dqma.protocols.sgdi import SgdiInput, run_sgdi
from dqma.qcore import QuantumState


def side_input(instance: SetEqInstance, side: str, k: int = 1, m: int = 0) -> SgdiInput:
    """State-generation input for one side (``"A"`` or ``"B"``)."""
    r = instance.r
    psi = fingerprint_vector(instance.poly(side, 0), r)
    us = [permutation_matrix(g_permutation(instance.poly(side, j), r)) for j in range(1, r + 1)]
    return SgdiInput(r, fingerprint_qubits(instance.p, r), psi, us, k=k, m=m)


def joint_input(instance: SetEqInstance, k: int = 1, m: int = 0) -> SgdiInput:
    """Both sides in one register ``R_A (x) R_B``."""
    a, b = side_input(instance, "A", k, m), side_input(instance, "B", k, m)
    us = [np.kron(ua, ub) for ua, ub in zip(a.unitaries, b.unitaries)]
    return SgdiInput(instance.r, 2 * a.n, np.kron(a.psi, b.psi), us, k=k, m=m)


def _joint_swap_accept(state: QuantumState, n: int) -> float:
    """SWAP-test acceptance between the two halves of a ``2n``-qubit register."""
    d = 2 ** n
    rho = state.density().reshape(d, d, d, d)
    return float(0.5 + 0.5 * np.einsum("ijji->", rho).real)


def _final_swap(out_a: QuantumState, out_b: QuantumState) -> float:
    """``1/2 + 1/2 tr(rho_A rho_B)`` for independent outputs."""
    return float(0.5 + 0.5 * np.trace(out_a.density() @ out_b.density()).real)


def run_seteq(instance: SetEqInstance, strategy=None, mode: str = "exact", k: int = 1, m: int = 0, *,
              method: str = "split", repetitions: int = 1, seed: int = 0, trials: int = 1000) -> ProtocolOutcome:
    """Run the set-equality protocol.

    ``method="split"``: ``strategy`` is ``None`` (honest on both sides) or a
    pair ``(strategy_A, strategy_B)``; ``None`` entries mean honest.  This is
    exact only when at most one side deviates from honest, which is
    enforced.  ``method="joint"``: ``strategy`` is a certificate on the joint
    register (``None`` for honest).

    Acceptance is the product of the generation acceptance and the final
    SWAP test, raised to ``repetitions`` (parallel independent copies).
    """
    from dqma.adversary import honest_strategy

    if repetitions < 1:
        raise ConfigError("repetitions must be at least 1")
    if method == "split":
        sa, sb = (None, None) if strategy is None else strategy
        if sa is not None and sb is not None and sa.kind != "honest" and sb.kind != "honest":
            raise ConfigError("split simulation is exact only when one side is honest; use method='joint'")
        ia, ib = side_input(instance, "A", k, m), side_input(instance, "B", k, m)
        sa = sa or honest_strategy(ia)
        sb = sb or honest_strategy(ib)
        ra = run_sgdi(ia, sa, mode, seed=seed, trials=trials)
        rb = run_sgdi(ib, sb, mode, seed=seed + 1, trials=trials)
        gen = ra.accept_probability * rb.accept_probability
        if ra.output_state is None or rb.output_state is None:
            final = 0.0
        else:
            final = _final_swap(ra.output_state, rb.output_state)
        n = ia.n
        parts = {"A": ra.summary(), "B": rb.summary()}
        branches = ra.branches + rb.branches
    elif method == "joint":
        ij = joint_input(instance, k, m)
        sj = strategy or honest_strategy(ij)
        rj = run_sgdi(ij, sj, mode, seed=seed, trials=trials)
        gen = rj.accept_probability
        n = ij.n // 2
        final = 0.0 if rj.output_state is None else _joint_swap_accept(rj.output_state, n)
        parts = {"joint": rj.summary()}
        branches = rj.branches
    else:
        raise ConfigError(f"unknown method {method!r}")
    once = gen * final
    res = ProtocolOutcome(accept_probability=float(once ** repetitions), mode=mode, branches=branches)
    res.accounting.s_c = (m + k + 1) * 2 * n
    res.accounting.s_m = k * 2 * n
    res.extra.update({
        "method": method,
        "generation_accept": gen,
        "final_swap_accept": final,
        "single_run_accept": once,
        "repetitions": repetitions,
        "equal": instance.equal(),
        "p": instance.p,
        "completeness_bound": 1 - 2 * instance.ell * (instance.r + 1) / instance.p,
        "soundness_bound": 0.5 + 2 * (instance.ell * (instance.r + 1) / instance.p) ** 2,
        "parts": parts,
    })
    return res
