import numpy as np
import pytest

from dqma.errors import LayoutError, LocalityViolation
from dqma.netsim import (
    NodeProgram,
    ProverStrategy,
    Topology,
    estimate_acceptance,
    run_round,
    sample_round,
)
from dqma.primitives import KET0, PLUS
from dqma.qcore import QuantumState, RegisterLayout, tensor

EDGE = Topology(["a", "b"], [("a", "b")])


def two_node_state(vec_a=KET0, vec_b=KET0):
    return tensor(QuantumState.single("A", vec_a, "a"), QuantumState.single("B", vec_b, "b"))


def compare_program():
    def send(ctx):
        ctx.send("b", "A")

    def decide(ctx):
        ctx.require_swap("A", "B")

    return {"a": NodeProgram(send=send), "b": NodeProgram(decide=decide)}


def test_line_topology():
    t = Topology.line(3)
    assert t.nodes == ["v0", "v1", "v2", "v3"]
    assert t.has_edge("v1", "v2") and not t.has_edge("v0", "v2")
    assert Topology.from_json(t.to_json()).sorted_edges() == t.sorted_edges()


def test_trivial_accept():
    res = run_round(two_node_state(), EDGE, {})
    assert res.accept_probability == 1.0


def test_send_and_compare_honest():
    res = run_round(two_node_state(), EDGE, compare_program(), outputs=["B"])
    assert res.accept_probability == pytest.approx(1.0)
    assert res.accounting.s_tm == 1 and res.accounting.s_m == 1


def test_send_and_compare_mismatch():
    res = run_round(two_node_state(PLUS, KET0), EDGE, compare_program())
    assert res.accept_probability == pytest.approx(0.5 + 0.25)


def test_foreign_register_access():
    def bad(ctx):
        ctx.swap_test("A", "B")

    with pytest.raises(LocalityViolation):
        run_round(two_node_state(), EDGE, {"a": NodeProgram(decide=bad)})


def test_send_along_non_edge():
    topo = Topology(["a", "b", "c"], [("a", "b"), ("b", "c")])
    state = tensor(two_node_state(), QuantumState.single("C", KET0, "c"))

    def send(ctx):
        ctx.send("c", "A")

    with pytest.raises(LocalityViolation):
        run_round(state, topo, {"a": NodeProgram(send=send)})


def test_plan_overflow():
    with pytest.raises(LocalityViolation):
        run_round(two_node_state(), EDGE, compare_program(), plan={("a", "b"): 0})


def test_quantum_send_in_locc_mode():
    with pytest.raises(LocalityViolation):
        run_round(two_node_state(), EDGE, compare_program(), locc=True)


def test_unowned_register():
    state = QuantumState.basis(RegisterLayout([("A", 1, "z")]))
    with pytest.raises(LayoutError):
        run_round(state, EDGE, {})


def test_exact_enumerates_coins():
    def decide(ctx):
        if ctx.coin(4) == 0:
            ctx.reject()

    res = run_round(two_node_state(), EDGE, {"a": NodeProgram(decide=decide)})
    assert res.accept_probability == pytest.approx(0.75)
    assert res.branches == 4


def test_sampled_calibrates_to_exact():
    state = two_node_state(PLUS, KET0)
    exact = run_round(state, EDGE, compare_program()).accept_probability
    est = sample_round(state, EDGE, compare_program(), 4000, seed=7)
    assert est.ci[0] <= exact <= est.ci[1]


def test_sampled_determinism():
    state = two_node_state(PLUS, KET0)
    a = sample_round(state, EDGE, compare_program(), 300, seed=3)
    b = sample_round(state, EDGE, compare_program(), 300, seed=3, workers=4)
    assert a.accept_probability == b.accept_probability
    assert [t.to_dict() for t in a.transcripts] == [t.to_dict() for t in b.transcripts]


def test_estimate_acceptance_examples():
    est = estimate_acceptance(lambda s, t: True, 100, 0)
    assert est.p_hat == 1.0 and est.ci_high == 1.0
    fair = estimate_acceptance(lambda s, t: np.random.default_rng([s, t]).random() < 0.5, 10_000, 1)
    assert fair.contains(0.5)


def test_strategy_product():
    strat = ProverStrategy("honest", [QuantumState.single("A", KET0, "a"), QuantumState.single("B", PLUS, "b")])
    assert strat.register_names == ["A", "B"]
    assert strat.state().num_qubits == 2
