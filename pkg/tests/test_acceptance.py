"""Acceptance criteria, each at its stated tolerance and runtime budget."""
import itertools
import math

import numpy as np

from dqma.adversary import builtin_families, honest_strategy, realize
from dqma.ff import (
    case1_width,
    case2_ell,
    injection_f,
    random_instance,
    reduction_case1,
    reduction_case2,
    reduction_case3,
)
from dqma.primitives import PLUS, epr_test_effects, swap_test_execute
from dqma.protocols import (
    SgdiInput,
    chain_diagnostics,
    definetti_term,
    locc_convert,
    plan_parameters,
    run_classical_seteq_counting,
    run_seteq,
    run_sgdiv,
    run_zh_locc,
    swap_equality_base,
)
from dqma.protocols.classical import fuzz_counting_certificates
from dqma.protocols.zh import ZhInput
from dqma.qcore import (
    QuantumState,
    RegisterLayout,
    fidelity,
    partial_trace,
    random_mixed_state,
    random_pure_state,
    random_unitary,
    tensor,
    trace_distance,
)


def _random_state(layout, rng):
    if rng.random() < 0.5:
        return random_pure_state(layout, rng)
    return random_mixed_state(layout, rng, env_qubits=int(rng.integers(1, 4)))


def test_c01_swap_formula(criterion):
    with criterion(1, "SWAP acceptance = 1/2 + 1/2 tr(s1 s2)", 10) as c:
        rng = np.random.default_rng(101)
        worst = 0.0
        for _ in range(1000):
            q = int(rng.integers(1, 3))
            s1 = _random_state(RegisterLayout([("A", q)]), rng)
            s2 = _random_state(RegisterLayout([("B", q)]), rng)
            acc = swap_test_execute(tensor(s1, s2), "A", "B")[0].probability
            want = 0.5 + 0.5 * np.trace(s1.density() @ s2.density()).real
            worst = max(worst, abs(acc - want))
        c.detail = f"1000 inputs, max deviation {worst:.2e}"
        assert worst < 1e-10


def _near_symmetric_pair(rng):
    """Two-qubit-pair input whose SWAP acceptance spans (1/2, 1]."""
    layout = RegisterLayout([("A", 1), ("B", 1), ("E", 2)])
    v = random_pure_state(layout, rng).data.reshape(2, 2, 4)
    sym, anti = v + v.transpose(1, 0, 2), v - v.transpose(1, 0, 2)
    eps = [0.0, 1e-4, 1e-2, 0.1, 0.5, 1.0, 3.0][int(rng.integers(7))]
    w = sym / max(np.linalg.norm(sym), 1e-300) + eps * anti / max(np.linalg.norm(anti), 1e-300)
    state = QuantumState(layout, (w / np.linalg.norm(w)).reshape(-1))
    return state if rng.random() < 0.5 else partial_trace(state, ["A", "B", "E"]).to_mixed()


def test_c02_swap_closeness(criterion):
    with criterion(2, "SWAP closeness D(r1,r2) <= 2/sqrt(z) + 1/z", 30) as c:
        rng = np.random.default_rng(202)
        violations, exact_ones = 0, 0
        for _ in range(500):
            s = _near_symmetric_pair(rng)
            acc = swap_test_execute(s, "A", "B")[0].probability
            d = trace_distance(partial_trace(s, ["A"]), partial_trace(s, ["B"]).relabel({"B": "A"}))
            if 1 - acc <= 1e-15:
                exact_ones += 1
                violations += d > 1e-7
                continue
            z = 1 / (1 - acc)
            violations += d > 2 / math.sqrt(z) + 1 / z
        c.detail = f"500 inputs ({exact_ones} with acceptance 1), {violations} violations"
        assert violations == 0


def test_c03_sgdiv_completeness(criterion):
    with criterion(3, "honest single-column round accepts with output fidelity 1", 120) as c:
        rng = np.random.default_rng(303)
        worst_acc, worst_fid, runs = 0.0, 0.0, 0
        for r in (1, 2, 3, 4):
            for n in (1, 2):
                for _ in range(20):
                    inp = SgdiInput.random(r, n, rng)
                    res = run_sgdiv(inp, honest_strategy(inp, 1))
                    worst_acc = max(worst_acc, abs(res.accept_probability - 1))
                    worst_fid = max(worst_fid, abs(res.output_fidelity - 1))
                    runs += 1
        c.detail = f"{runs} runs, max |acc-1| {worst_acc:.1e}, max |fid-1| {worst_fid:.1e}"
        assert worst_acc < 1e-9 and worst_fid < 1e-9


_SOUNDNESS_CACHE = {}


def _soundness_sweep():
    if _SOUNDNESS_CACHE:
        return _SOUNDNESS_CACHE["rows"]
    rows = []
    for r in (1, 2, 3):
        for n, seed in ((1, 0), (1, 1), (2, 2)):
            inp = SgdiInput.random(r, n, np.random.default_rng(400 + 10 * r + seed))
            for fam in builtin_families(inp):
                strat = realize(fam, inp, 1)
                res = run_sgdiv(inp, strat)
                diag = chain_diagnostics(inp, strat)
                rows.append((r, fam.kind, res.reject_probability, diag))
    _SOUNDNESS_CACHE["rows"] = rows
    return rows


def test_c04_rejection_bound(criterion):
    with criterion(4, "rejection >= (1 - <phi_r|rho_r|phi_r>)^2 / (72 r^2)", 300) as c:
        rows = _soundness_sweep()
        bad = [(r, k, rej, d.rejection_bound) for r, k, rej, d in rows if rej < d.rejection_bound - 1e-12]
        tight = min(rej - d.rejection_bound for r, k, rej, d in rows)
        c.detail = f"{len(rows)} instances over r in 1..3, {len(bad)} violations, min slack {tight:.3g}"
        assert len(rows) >= 50 and not bad


def test_c05_chain_inequality(criterion):
    with criterion(5, "D(phi_j, rho_j) <= 3 sum sqrt(alpha) per run", 300) as c:
        rows = _soundness_sweep()
        bad = [(r, k) for r, k, _, d in rows if not d.chain_holds(1e-9)]
        c.detail = f"{len(rows)} runs, {len(bad)} violations"
        assert not bad


def test_c06_omega(criterion):
    with criterion(6, "(E1+E2+E3)/3 = 2/3 |phi+><phi+| + I/3", 1) as c:
        e1, e2, e3 = epr_test_effects()
        phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
        err = np.max(np.abs((e1 + e2 + e3) / 3 - (2 / 3) * np.outer(phi, phi) - np.eye(4) / 3))
        c.detail = f"max entry error {err:.1e}"
        assert err < 1e-12


def test_c07_epr_test(criterion):
    with criterion(7, "EPR test: honest passes, all-zeros passes with (2/3)^N", 60) as c:
        honest = run_zh_locc(3, honest_strategy(ZhInput(3)), method="enumerate")
        assert abs(honest.accept_probability - 1) < 1e-12 and abs(honest.output_fidelity - 1) < 1e-12
        worst, misses = 0.0, []
        for N in range(1, 9):
            strat = realize("all_zeros", ZhInput(N))
            exact = run_zh_locc(N, strat).accept_probability
            worst = max(worst, abs(exact - (2 / 3) ** N))
            est = run_zh_locc(N, strat, "sample", seed=7000 + N, trials=100_000)
            if not est.ci[0] <= (2 / 3) ** N <= est.ci[1]:
                misses.append(N)
        for N in (1, 2, 3):
            enum = run_zh_locc(N, realize("all_zeros", ZhInput(N)), method="enumerate").accept_probability
            worst = max(worst, abs(enum - (2 / 3) ** N))
        c.detail = f"exact max error {worst:.1e} for N<=8; sampled CI misses at N={misses}"
        assert worst < 1e-12 and not misses


def test_c08_classical_tally(criterion):
    with criterion(8, "EPR test classical bits = ceil(log(N+1)) + ceil(log 3^N) + N", 60) as c:
        bad = []
        for N in range(1, 9):
            want = math.ceil(math.log2(N + 1)) + math.ceil(N * math.log2(3)) + N
            res = run_zh_locc(N, honest_strategy(ZhInput(N)), "sample", method="trajectory", trials=1, seed=N)
            sent = sum(m["bits"] for m in res.transcripts[0].messages)
            if not (sent == res.accounting.classical_bits == want):
                bad.append((N, sent, want))
        c.detail = f"N = 1..8 checked against the transcript, mismatches {bad}"
        assert not bad


def test_c09_seteq_bounds(criterion):
    with criterion(9, "set equality completeness and soundness bounds at l=1, r=1", 300) as c:
        rng = np.random.default_rng(909)
        viol, runs, worst_gap = 0, 0, math.inf
        for p in (5, 7, 11, 13):
            for _ in range(20):
                eq = random_instance(rng, 1, 1, p, True, p=p, c_tilde=0.5)
                res = run_seteq(eq)
                viol += res.accept_probability < res.extra["completeness_bound"] - 1e-12
                worst_gap = min(worst_gap, res.accept_probability - res.extra["completeness_bound"])
                ne = random_instance(rng, 1, 1, p, False, p=p, c_tilde=0.5)
                res = run_seteq(ne)
                bound = 0.5 + 2 * (2 / p) ** 2
                viol += res.extra["final_swap_accept"] > bound + 1e-12
                worst_gap = min(worst_gap, bound - res.extra["final_swap_accept"])
                runs += 2
        c.detail = f"{runs} instances with |U| = p, {viol} violations, min slack {worst_gap:.3g}"
        assert viol == 0


def test_c10_classical_counting(criterion):
    with criterion(10, "counting certificates: complete and never wrong when accepted", 30) as c:
        rng = np.random.default_rng(1010)
        wrong, honest_fail, accepted = 0, 0, 0
        fuzzed = 0
        while fuzzed < 10_000:
            inst = random_instance(rng, int(rng.integers(1, 6)), int(rng.integers(1, 9)),
                                   int(rng.integers(2, 17)), bool(rng.integers(2)))
            honest = run_classical_seteq_counting(inst)
            honest_fail += not (honest.all_accept and honest.verdict == inst.equal())
            for _ in range(50):
                out = run_classical_seteq_counting(inst, fuzz_counting_certificates(inst, rng))
                fuzzed += 1
                if out.all_accept:
                    accepted += 1
                    wrong += out.verdict != inst.equal()
        c.detail = f"{fuzzed} fuzzed certificates ({accepted} accepted), {wrong} wrong verdicts, {honest_fail} honest failures"
        assert wrong == 0 and honest_fail == 0


def _bitstrings(n):
    return ["".join(b) for b in itertools.product("01", repeat=n)]


def test_c11_reductions(criterion):
    with criterion(11, "reduction generators encode equality exactly", 60) as c:
        bad, checked = 0, 0
        for universe, ell in ((2, 4), (3, 12), (5, 20), (3, 48)):
            n = (universe - 1) * case1_width(universe, ell)
            assert n <= 8
            strings = _bitstrings(n)
            for x in strings:
                for y in strings:
                    bad += reduction_case1(x, y, universe, ell, r=1, c_tilde=0.01).equal() != (x == y)
                    checked += 1
        for n in range(1, 9):
            ell = case2_ell(n)
            strings = _bitstrings(n)
            images = {injection_f(x, ell) for x in strings}
            bad += len(images) != len(strings)
            for x in strings:
                for y in strings:
                    bad += reduction_case2(x, y, r=1, c_tilde=0.01).equal() != (x == y)
                    checked += 1
        for r, n in ((3, 8), (5, 4), (7, 2)):
            k = (r - 1) // 2
            tuples = list(itertools.product(_bitstrings(n), repeat=k))
            for xs in tuples:
                for ys in tuples:
                    bad += reduction_case3(list(xs), list(ys), r, c_tilde=0.01).equal() != (xs == ys)
                    checked += 1
        c.detail = f"{checked} pairs over the three generators, {bad} mismatches"
        assert bad == 0


def test_c12_locc_conversion(criterion):
    with criterion(12, "converted protocol matches base with classical messages only", None) as c:
        notes = []
        for N in (1, 2, 3):
            base = swap_equality_base(PLUS)
            inst = locc_convert(base, N=N)
            conv = inst.run(keep_transcripts=10)
            gap = abs(conv.accept_probability - base.run().accept_probability)
            qubits = sum(m["qubits"] for t in conv.transcripts for m in t.messages)
            s_c = 1 + (N + 1)
            bits = math.ceil(math.log2(N + 1)) + math.ceil(N * math.log2(3)) + N + 2
            acct = conv.accounting
            ok = (gap < 1e-9 and qubits == 0 and acct.s_tm == 0 and acct.s_m == 0
                  and acct.s_c == s_c == inst.declared_accounting()["s_c"]
                  and acct.classical_bits == bits == inst.declared_accounting()["classical_bits"])
            notes.append(f"N={N} gap {gap:.1e}")
            assert ok, (N, gap, qubits, acct)
        c.detail = ", ".join(notes)


def test_c13_planner(criterion):
    with criterion(13, "planner reference values and de Finetti term", None) as c:
        plan = plan_parameters(r=1, n=1, c=1, eta=0)
        assert (plan.k, plan.m) == (144, 82944)
        worst = 0.0
        for K, N, d in ((2, 10, 4), (145, 83090, 4.0), (5, 6, 2**10), (3, 1000, 7.5)):
            worst = max(worst, abs(definetti_term(K, N, d) - math.sqrt(2 * (K - 1) ** 2 * math.log(d) / (N - K))))
        c.detail = f"k=144, m=82944, de Finetti max error {worst:.1e}"
        assert worst < 1e-12


def _fid(a, b, layout):
    return fidelity(QuantumState(layout, a, validate=False), QuantumState(layout, b, validate=False))


def test_c14_lemma_properties(criterion):
    with criterion(14, "fidelity/distance, union bound, fixed-factor fidelity properties", None) as c:
        rng = np.random.default_rng(1414)
        v1 = v2 = v3 = 0
        for _ in range(1000):
            layout = RegisterLayout([("X", int(rng.integers(1, 4)))])
            a, b = _random_state(layout, rng), _random_state(layout, rng)
            f, d = fidelity(a, b), trace_distance(a, b)
            v1 += not (1 - f <= d + 1e-9 and d <= math.sqrt(max(1 - f * f, 0)) + 1e-9)
        for _ in range(1000):
            q = int(rng.integers(1, 4))
            basis = random_unitary(2**q, rng)
            p1 = (basis * rng.integers(0, 2, 2**q)) @ basis.conj().T
            p2 = (basis * rng.integers(0, 2, 2**q)) @ basis.conj().T
            rho = random_mixed_state(RegisterLayout([("X", q)]), rng).data
            eye = np.eye(2**q)
            lhs = np.trace((eye - p1 @ p2) @ rho).real
            rhs = np.trace((eye - p1) @ rho).real + np.trace((eye - p2) @ rho).real
            v2 += lhs > rhs + 1e-10
        for i in range(1000):
            q = int(rng.integers(1, 3))
            layout = RegisterLayout([("X", 1), ("Y", q)])
            rho = random_mixed_state(layout, rng)
            x = random_pure_state(RegisterLayout([("X", 1)]), rng)
            xx = np.outer(x.data, x.data.conj())
            target = fidelity(x, partial_trace(rho, ["X"]))
            cands = 100 if i < 10 else 3
            for _ in range(cands):
                cand = random_mixed_state(RegisterLayout([("Y", q)]), rng).data
                v3 += _fid(np.kron(xx, cand), rho.data, layout) > target + 1e-9
            proj = np.kron(x.data.conj(), np.eye(2**q))
            cond = proj @ rho.data @ proj.conj().T
            cond /= np.trace(cond).real
            v3 += abs(_fid(np.kron(xx, cond), rho.data, layout) - target) > 1e-6
        c.detail = f"violations over 1000 cases each: {v1}, {v2}, {v3}"
        assert v1 == v2 == v3 == 0
