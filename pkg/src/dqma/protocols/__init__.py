from dqma.protocols.classical import run_classical_seteq_counting, run_classical_seteq_trivial
from dqma.protocols.locc import BaseProtocol, LoccInstance, locc_convert, swap_equality_base
from dqma.protocols.planner import PlannerOutput, definetti_term, plan_parameters, zh_classical_bits
from dqma.protocols.seteq import run_seteq
from dqma.protocols.sgdi import SgdiInput, chain_diagnostics, run_sgdi, run_sgdiv
from dqma.protocols.zh import ZhInput, run_zh_locc

__all__ = [
    "BaseProtocol", "LoccInstance", "PlannerOutput", "SgdiInput", "ZhInput",
    "chain_diagnostics", "definetti_term", "locc_convert", "plan_parameters", "run_classical_seteq_counting",
    "run_classical_seteq_trivial", "run_seteq", "run_sgdi", "run_sgdiv", "run_zh_locc", "swap_equality_base",
    "zh_classical_bits",
]
