"""Parameter formulas and closed-form resource counts for every protocol."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass


def _ceil(x: float) -> int:
    # guard against 144.00000000000003 style round-off
    return math.ceil(x - 1e-9)


def sgdi_columns(r: int, n: int, c: float = 1.0, eta: float = 0.0) -> tuple[int, int]:
    """``k = ceil(144 c r^(2+eta))`` and ``m = ceil(2 c n k^2 (r+1)^(1+eta))``."""
    k = _ceil(144 * c * r ** (2 + eta))
    m = _ceil(2 * c * n * k * k * (r + 1) ** (1 + eta))
    return k, m


def definetti_term(K: int, N: int, d: float) -> float:
    """``sqrt(2 (K-1)^2 ln d / (N - K))`` for K of N subsystems of dimension d."""
    if K >= N:
        raise ValueError(f"de Finetti bound needs K < N (got K={K}, N={N})")
    if K < 0 or d < 1:
        raise ValueError("need K >= 0 and d >= 1")
    return math.sqrt(2 * (K - 1) ** 2 * math.log(d) / (N - K))


def soundness_threshold(r: int, c: float = 1.0, eta: float = 0.0) -> float:
    """Acceptance / infidelity threshold ``1/(c r^eta)^(1/4)`` of the SGDI guarantee."""
    return 1.0 / (c * r ** eta) ** 0.25


def epr_copies(epsilon: float, delta: float, constant: float = 1.0) -> int:
    """``N = ceil((C/eps) ln(1/delta))``; the constant C is a configuration knob."""
    if not (0 < epsilon <= 1 and 0 < delta < 1):
        raise ValueError("need 0 < epsilon <= 1 and 0 < delta < 1")
    return max(1, math.ceil(constant / epsilon * math.log(1 / delta)))


def zh_classical_bits(N: int) -> int:
    """Bits V1 sends: swap index, the N basis choices packed in base 3, N outcomes."""
    if N < 1:
        raise ValueError("N must be at least 1")
    index_bits = N.bit_length()           # ceil(log2(N+1))
    choice_bits = (3 ** N - 1).bit_length()  # ceil(log2(3^N))
    return index_bits + choice_bits + N


def sgdi_accounting(n: int, k: int, m: int) -> dict:
    return {"s_c": (m + k + 1) * n, "s_m": k * n}


def sgdiv_accounting(n: int) -> dict:
    return {"s_c": n, "s_m": n}


def locc_epsilon(gamma: float, s_tm: int) -> float:
    return gamma * gamma / s_tm


@dataclass
class PlannerOutput:
    r: int
    n: int
    c: float
    eta: float
    k: int
    m: int
    threshold: float
    definetti_K: int
    definetti_N: int
    definetti_d: float
    definetti: float
    epsilon: float | None
    delta: float | None
    N: int | None
    N_constant: float
    certificate_size: int
    message_size: int

    def as_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("r", self.r), ("n", self.n), ("c", self.c), ("eta", self.eta),
            ("k", self.k), ("m", self.m),
            ("columns m+k+1", self.m + self.k + 1),
            ("certificate qubits/node", self.certificate_size),
            ("message qubits/edge", self.message_size),
            ("soundness threshold", f"{self.threshold:.6g}"),
            ("de Finetti K", self.definetti_K), ("de Finetti N", self.definetti_N),
            ("de Finetti d", f"{self.definetti_d:.6g}"),
            ("de Finetti term", f"{self.definetti:.6g}"),
            ("epsilon", self.epsilon), ("delta", self.delta),
            ("EPR copies N", self.N), ("N constant", self.N_constant),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def plan_parameters(r: int, n: int, c: float = 1.0, eta: float = 0.0, epsilon: float | None = None,
                    delta: float | None = None, d: float | None = None, K: int | None = None,
                    total: int | None = None, N_constant: float = 1.0) -> PlannerOutput:
    """Parameters of the state-generation protocol and the EPR test.

    The de Finetti term defaults to the one used in the SGDI analysis:
    ``K = k+1`` of ``m+k+1`` columns, each of dimension ``2^(n(r+1))``.
    """
    if r < 1 or n < 1 or c <= 0 or eta < 0:
        raise ValueError("need r >= 1, n >= 1, c > 0, eta >= 0")
    k, m = sgdi_columns(r, n, c, eta)
    K = k + 1 if K is None else int(K)
    total = m + k + 1 if total is None else int(total)
    d = 2.0 ** (n * (r + 1)) if d is None else float(d)
    term = definetti_term(K, total, d)
    N = epr_copies(epsilon, delta, N_constant) if (epsilon is not None and delta is not None) else None
    acct = sgdi_accounting(n, k, m)
    return PlannerOutput(
        r=r, n=n, c=c, eta=eta, k=k, m=m, threshold=soundness_threshold(r, c, eta),
        definetti_K=K, definetti_N=total, definetti_d=d, definetti=term,
        epsilon=epsilon, delta=delta, N=N, N_constant=N_constant,
        certificate_size=acct["s_c"], message_size=acct["s_m"],
    )
