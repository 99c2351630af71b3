import math

import numpy as np
import pytest

from dqma.adversary import AdversaryFamily, honest_strategy, realize
from dqma.errors import ConfigError, LocalityViolation
from dqma.ff import SetEqInstance, random_instance
from dqma.protocols import (
    SgdiInput,
    chain_diagnostics,
    definetti_term,
    locc_convert,
    plan_parameters,
    run_classical_seteq_counting,
    run_classical_seteq_trivial,
    run_seteq,
    run_sgdi,
    run_sgdiv,
    run_zh_locc,
    swap_equality_base,
    zh_classical_bits,
)
from dqma.protocols.classical import fuzz_counting_certificates
from dqma.protocols.zh import ZhInput
from dqma.primitives import PLUS
from dqma.qcore import fidelity


# single-column round ------------------------------------------------------------


@pytest.mark.parametrize("r", [1, 2, 3])
def test_sgdiv_honest(r, rng):
    inp = SgdiInput.random(r, 1, rng)
    res = run_sgdiv(inp, honest_strategy(inp, 1))
    assert res.accept_probability == pytest.approx(1.0, abs=1e-9)
    assert res.output_fidelity == pytest.approx(1.0, abs=1e-9)
    assert res.accounting.s_c == 1 and res.accounting.s_m == 1


def test_sgdiv_r1_orthogonal(rng):
    inp = SgdiInput.random(1, 1, rng)
    res = run_sgdiv(inp, realize({"kind": "orthogonal_at", "node": 1}, inp, 1))
    # v0 sends with probability 1/2 and the test then accepts with probability 1/2
    assert res.accept_probability == pytest.approx(0.75, abs=1e-12)


def test_sgdiv_sampled_calibration(rng):
    inp = SgdiInput.random(2, 1, rng)
    strat = realize({"kind": "orthogonal_at", "node": 2}, inp, 1)
    exact = run_sgdiv(inp, strat).accept_probability
    est = run_sgdiv(inp, strat, "sample", seed=4, trials=3000)
    assert est.ci[0] <= exact <= est.ci[1]


def test_chain_diagnostics_honest(rng):
    inp = SgdiInput.random(3, 1, rng)
    d = chain_diagnostics(inp, honest_strategy(inp, 1))
    assert max(d.alphas) < 1e-12 and max(d.distances) < 1e-7
    assert d.chain_holds()


def test_sgdi_input_validation(rng):
    with pytest.raises(ConfigError):
        SgdiInput(2, 1, [1, 0], [np.eye(2)])
    with pytest.raises(ConfigError):
        SgdiInput(1, 1, [1, 1], [np.eye(2)])
    inp = SgdiInput.random(2, 1, rng, k=1, m=1)
    again = SgdiInput.from_dict(inp.to_dict())
    assert np.allclose(again.phi(2), inp.phi(2))


# many columns ----------------------------------------------------------------


@pytest.mark.parametrize("k,m", [(1, 0), (1, 1), (2, 1)])
def test_sgdi_honest_perfect(k, m, rng):
    inp = SgdiInput.random(2, 1, rng, k=k, m=m)
    res = run_sgdi(inp, honest_strategy(inp))
    assert res.accept_probability == pytest.approx(1.0, abs=1e-9)
    assert res.output_fidelity == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("family", [
    {"kind": "orthogonal_at", "node": 2, "column": 2},
    {"kind": "orthogonal_at", "node": 1, "column": 1},
    {"kind": "entangled_pair", "nodes": [1, 2], "theta": 0.7},
    {"kind": "random_product", "seed": 3},
])
def test_sgdi_factorized_matches_monolithic(family, rng):
    inp = SgdiInput.random(2, 1, rng, k=1, m=1)
    strat = realize(family, inp)
    a = run_sgdi(inp, strat, method="factorized")
    b = run_sgdi(inp, strat, method="monolithic")
    assert a.accept_probability == pytest.approx(b.accept_probability, abs=1e-10)
    if a.output_state is not None:
        assert a.output_fidelity == pytest.approx(b.output_fidelity, abs=1e-9)


def test_sgdi_bad_column_hurts_output_only_in_slot_one(rng):
    inp = SgdiInput.random(1, 1, rng, k=1, m=1)
    bad = realize({"kind": "orthogonal_at", "node": 1, "column": 3}, inp)
    res = run_sgdi(inp, bad)
    # the bad column is output (slot 1) with probability 1/3 under v1's permutation
    assert res.output_fidelity < 1 - 1e-3
    assert res.accept_probability < 1


def test_sgdi_no_verification_columns(rng):
    inp = SgdiInput.random(2, 1, rng, k=0, m=1)
    res = run_sgdi(inp, realize("all_zeros", inp))
    assert res.accept_probability == pytest.approx(1.0)


def test_sgdi_sampled_matches_exact(rng):
    inp = SgdiInput.random(1, 1, rng, k=1, m=0)
    strat = realize({"kind": "orthogonal_at", "node": 1, "column": 2}, inp)
    exact = run_sgdi(inp, strat).accept_probability
    est = run_sgdi(inp, strat, "sample", seed=2, trials=2000)
    assert est.ci[0] <= exact <= est.ci[1]


# set equality ------------------------------------------------------------------


def small_instance(equal, a=None, b=None):
    if a is None:
        a, b = ([[0], [1]], [[1], [0]]) if equal else ([[0], [1]], [[1], [2]])
    return SetEqInstance(r=1, ell=1, universe=3, a=a, b=b, p=3, c_tilde=0.5)


@pytest.mark.parametrize("equal", [True, False])
def test_seteq_split_matches_joint(equal):
    inst = small_instance(equal)
    s = run_seteq(inst, method="split")
    j = run_seteq(inst, method="joint")
    assert s.accept_probability == pytest.approx(j.accept_probability, abs=1e-10)
    assert s.extra["final_swap_accept"] == pytest.approx(j.extra["final_swap_accept"], abs=1e-10)


def test_seteq_one_sided_adversary_split_matches_joint():
    from dqma.protocols.seteq import joint_input, side_input

    inst = small_instance(False)
    fam = {"kind": "orthogonal_at", "node": 1, "column": 2}
    sa = realize(fam, side_input(inst, "A"))
    s = run_seteq(inst, (sa, None), method="split")
    ia, ib = side_input(inst, "A"), side_input(inst, "B")
    from dqma.netsim import ProverStrategy
    from dqma.qcore import QuantumState

    blocks = []
    for ba, bb in zip(sa.blocks, honest_strategy(ib).blocks):
        name = ba.layout.names[0]
        blocks.append(QuantumState.single(name, np.kron(ba.data, bb.data), ba.layout.owner(name)))
    j = run_seteq(inst, ProverStrategy("joint", blocks), method="joint")
    assert s.accept_probability == pytest.approx(j.accept_probability, abs=1e-10)
    assert joint_input(inst).n == 2 * ia.n


def test_seteq_both_sides_adversarial_rejected_in_split():
    from dqma.protocols.seteq import side_input

    inst = small_instance(True)
    sa = realize("all_zeros", side_input(inst, "A"))
    with pytest.raises(ConfigError):
        run_seteq(inst, (sa, sa), method="split")


def test_seteq_bounds_and_repetition():
    inst = SetEqInstance(r=1, ell=1, universe=3, a=[[2], [2]], b=[[2], [2]], p=7, c_tilde=0.5)
    res = run_seteq(inst, repetitions=3)
    assert res.extra["single_run_accept"] >= 1 - 4 / 7
    assert res.accept_probability == pytest.approx(res.extra["single_run_accept"] ** 3)


# EPR test --------------------------------------------------------------------


def test_zh_honest():
    res = run_zh_locc(3, honest_strategy(ZhInput(3)))
    assert res.accept_probability == pytest.approx(1.0)
    assert res.output_fidelity == pytest.approx(1.0)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_zh_averaged_matches_enumerate(N):
    inp = ZhInput(N)
    for fam in ("all_zeros", {"kind": "random_product", "seed": 1},
                {"kind": "epr_corrupt", "slots": [1], "replacement": "psi_minus"}):
        strat = realize(fam, inp)
        a = run_zh_locc(N, strat, method="averaged")
        b = run_zh_locc(N, strat, method="enumerate")
        assert a.accept_probability == pytest.approx(b.accept_probability, abs=1e-10)
        if a.output_state is not None:
            assert a.output_fidelity == pytest.approx(b.output_fidelity, abs=1e-8)


def test_zh_general_certificate_matches_enumerate():
    inp = ZhInput(2)
    strat = realize({"kind": "interpolate", "t": 0.5, "target": "random_product"}, inp)
    a = run_zh_locc(2, strat, method="averaged")
    b = run_zh_locc(2, strat, method="enumerate")
    assert a.accept_probability == pytest.approx(b.accept_probability, abs=1e-10)


def test_zh_trajectory_sampling():
    strat = realize("all_zeros", ZhInput(2))
    est = run_zh_locc(2, strat, "sample", method="trajectory", seed=5, trials=2000)
    assert est.ci[0] <= (2 / 3) ** 2 <= est.ci[1]
    assert est.accounting.classical_bits == zh_classical_bits(2)


def test_zh_vectorized_needs_product():
    strat = realize({"kind": "interpolate", "t": 0.5, "target": "random_product"}, ZhInput(1))
    with pytest.raises(ConfigError):
        run_zh_locc(1, strat, "sample", method="vectorized")


# LOCC conversion ---------------------------------------------------------------


@pytest.mark.parametrize("N", [1, 2])
def test_locc_honest_matches_base(N):
    base = swap_equality_base(PLUS)
    inst = locc_convert(base, N=N)
    conv = inst.run()
    assert conv.accept_probability == pytest.approx(base.run().accept_probability, abs=1e-9)
    assert conv.accounting.s_tm == 0 and conv.accounting.s_m == 0
    declared = inst.declared_accounting()
    assert conv.accounting.s_c == declared["s_c"] == 1 + (N + 1)
    assert conv.accounting.classical_bits == declared["classical_bits"] == zh_classical_bits(N) + 2


def test_locc_unequal_base_matches():
    base = swap_equality_base(PLUS, [1, 0])
    inst = locc_convert(base, N=1)
    assert inst.run().accept_probability == pytest.approx(base.run().accept_probability, abs=1e-9)


def test_locc_corrupted_pairs_lower_acceptance():
    inst = locc_convert(swap_equality_base(PLUS), N=1)
    res = inst.run(realize("all_zeros", inst))
    assert res.accept_probability < 1 - 1e-3


def test_locc_from_gamma():
    inst = locc_convert(swap_equality_base(PLUS), gamma=0.5, delta=0.5)
    assert inst.epsilon == pytest.approx(0.25)
    assert inst.N == math.ceil(4 * math.log(2))
    with pytest.raises(ConfigError):
        locc_convert(swap_equality_base(PLUS), gamma=0.5)


def test_base_plan_enforced():
    base = swap_equality_base(PLUS)
    base.plan[("a", "b")] = 0
    with pytest.raises(LocalityViolation):
        base.run()


# classical schemes -----------------------------------------------------------


def test_classical_counting(rng):
    for equal in (True, False):
        inst = random_instance(rng, 3, 4, 6, equal, c_tilde=0.1)
        out = run_classical_seteq_counting(inst)
        assert out.all_accept and out.verdict == equal
        for _ in range(50):
            fuzz = run_classical_seteq_counting(inst, fuzz_counting_certificates(inst, rng))
            if fuzz.accepted:
                assert inst.equal()
            if fuzz.all_accept:
                assert fuzz.verdict == equal


def test_classical_trivial(rng):
    inst = random_instance(rng, 2, 3, 5, True, c_tilde=0.1)
    out = run_classical_seteq_trivial(inst)
    assert out.accepted and out.truth
    certs = [((tuple([0] * 3),) * 3, (tuple([0] * 3),) * 3)] * 3
    assert not run_classical_seteq_trivial(inst, certs).all_accept


# planner --------------------------------------------------------------------


def test_planner_reference_values():
    plan = plan_parameters(1, 1)
    assert (plan.k, plan.m) == (144, 82944)
    assert plan.certificate_size == 82944 + 144 + 1
    assert plan.threshold == pytest.approx(1.0)


def test_definetti_term():
    assert definetti_term(3, 10, 16) == pytest.approx(math.sqrt(2 * 4 * math.log(16) / 7), abs=1e-12)
    with pytest.raises(ValueError):
        definetti_term(5, 5, 4)


def test_zh_bits():
    for N in range(1, 12):
        assert zh_classical_bits(N) == math.ceil(math.log2(N + 1)) + math.ceil(math.log2(3**N)) + N
