"""Prime-field arithmetic and the Set Equality fingerprinting machinery.

Each node ``v_j`` of a line holds two lists ``a_j``, ``b_j`` of ``ell``
universe elements.  The list polynomial of ``a_j`` is ``prod_i (s - a_{j,i})``
over ``Z_p``; the global product over all nodes agrees for the ``a`` and
``b`` sides at every ``s`` exactly when the two multisets coincide.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sympy import isprime, nextprime

from dqma.qcore import QuantumState, Register, RegisterLayout, Unitary

DEFAULT_C_TILDE = 4.0


@dataclass(frozen=True)
class FieldElement:
    value: int
    p: int

    def __post_init__(self):
        if not isprime(self.p):
            raise ValueError(f"modulus {self.p} is not prime")
        object.__setattr__(self, "value", int(self.value) % self.p)

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.p != self.p:
                raise ValueError(f"modulus mismatch: {self.p} vs {other.p}")
            return other.value
        return int(other)

    def __add__(self, other):
        return FieldElement(self.value + self._coerce(other), self.p)

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElement(self.value - self._coerce(other), self.p)

    def __rsub__(self, other):
        return FieldElement(self._coerce(other) - self.value, self.p)

    def __mul__(self, other):
        return FieldElement(self.value * self._coerce(other), self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value, self.p)

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse")
        return FieldElement(pow(self.value, self.p - 2, self.p), self.p)

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.p == other.p and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.p
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.p))

    def __int__(self):
        return self.value


@dataclass(frozen=True)
class ListPolynomial:
    """``prod_i (s - root_i)`` over ``Z_p``."""

    roots: tuple[int, ...]
    p: int

    def __post_init__(self):
        if len(self.roots) < 1:
            raise ValueError("a list polynomial needs at least one root")
        if not isprime(self.p):
            raise ValueError(f"modulus {self.p} is not prime")
        object.__setattr__(self, "roots", tuple(int(r) % self.p for r in self.roots))

    @property
    def ell(self) -> int:
        return len(self.roots)

    def __call__(self, s: int) -> int:
        acc = 1
        for a in self.roots:
            acc = acc * (s - a) % self.p
        return acc


def eval_list_poly(poly: ListPolynomial, s: FieldElement | int) -> FieldElement:
    if isinstance(s, FieldElement):
        if s.p != poly.p:
            raise ValueError(f"modulus mismatch: polynomial over Z_{poly.p}, point over Z_{s.p}")
        s = s.value
    return FieldElement(poly(int(s)), poly.p)


def smallest_prime_at_least(n: float) -> int:
    n = max(2, math.ceil(n))
    return n if isprime(n) else int(nextprime(n))


@dataclass
class SetEqInstance:
    """Per-node input lists for Set Equality on the line ``v_0 ... v_r``."""

    r: int
    ell: int
    universe: int
    a: list[list[int]]
    b: list[list[int]]
    p: int = 0
    c_tilde: float = DEFAULT_C_TILDE

    def __post_init__(self):
        self.a = [list(map(int, row)) for row in self.a]
        self.b = [list(map(int, row)) for row in self.b]
        if self.r < 1:
            raise ValueError("line length r must be at least 1")
        if self.ell < 1:
            raise ValueError("list length ell must be at least 1")
        if len(self.a) != self.r + 1 or len(self.b) != self.r + 1:
            raise ValueError(f"need r+1 = {self.r + 1} lists per side")
        for side, rows in (("a", self.a), ("b", self.b)):
            for j, row in enumerate(rows):
                if len(row) != self.ell:
                    raise ValueError(f"{side}-list of node {j} has {len(row)} entries, expected {self.ell}")
                if any(not 0 <= x < self.universe for x in row):
                    raise ValueError(f"{side}-list of node {j} has entries outside [0, {self.universe})")
        floor = self.c_tilde * self.ell * (self.r + 1) * self.universe
        if not self.p:
            self.p = smallest_prime_at_least(max(floor, self.universe))
        if not isprime(self.p):
            raise ValueError(f"p = {self.p} is not prime")
        if self.p < self.universe or self.p < floor - 1e-9:
            raise ValueError(
                f"p = {self.p} too small: need p >= {self.universe} and p >= c~*ell*(r+1)*|U| = {floor:g}"
            )

    def multiset(self, side: str) -> Counter:
        rows = self.a if side in ("a", "A") else self.b
        return Counter(x for row in rows for x in row)

    def equal(self) -> bool:
        return self.multiset("a") == self.multiset("b")

    def poly(self, side: str, j: int) -> ListPolynomial:
        rows = self.a if side in ("a", "A") else self.b
        return ListPolynomial(tuple(rows[j]), self.p)

    def to_json(self) -> str:
        doc = {
            "r": self.r,
            "ell": self.ell,
            "universe": self.universe,
            "p": self.p,
            "c_tilde": self.c_tilde,
            "lists": [{"a": a, "b": b} for a, b in zip(self.a, self.b)],
        }
        return json.dumps(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "SetEqInstance":
        lists = doc["lists"]
        return cls(
            r=int(doc["r"]),
            ell=int(doc["ell"]),
            universe=int(doc["universe"]),
            a=[n["a"] for n in lists],
            b=[n["b"] for n in lists],
            p=int(doc.get("p", 0)),
            c_tilde=float(doc.get("c_tilde", DEFAULT_C_TILDE)),
        )

    @classmethod
    def from_json(cls, text: str) -> "SetEqInstance":
        return cls.from_dict(json.loads(text))


def random_instance(rng: np.random.Generator, r: int, ell: int, universe: int, equal: bool,
                    p: int = 0, c_tilde: float = DEFAULT_C_TILDE) -> SetEqInstance:
    """Random instance; equal ones redistribute one multiset across both sides."""
    total = ell * (r + 1)
    a_all = rng.integers(0, universe, size=total).tolist()
    if equal:
        b_all = list(rng.permutation(a_all))
    else:
        b_all = list(a_all)
        i = int(rng.integers(total))
        b_all[i] = int((b_all[i] + 1 + rng.integers(universe - 1)) % universe) if universe > 1 else b_all[i]
        b_all = list(rng.permutation(b_all))
    a = [a_all[j * ell:(j + 1) * ell] for j in range(r + 1)]
    b = [[int(x) for x in b_all[j * ell:(j + 1) * ell]] for j in range(r + 1)]
    return SetEqInstance(r=r, ell=ell, universe=universe, a=a, b=b, p=p, c_tilde=c_tilde)


def global_poly_eval(instance: SetEqInstance, side: str, s: FieldElement | int) -> FieldElement:
    """``p_A(s)`` or ``p_B(s)``: product of every node's list polynomial."""
    if isinstance(s, FieldElement):
        s = s.value
    acc = 1
    for j in range(instance.r + 1):
        acc = acc * instance.poly(side, j)(s) % instance.p
    return FieldElement(acc, instance.p)


# fingerprint registers --------------------------------------------------------


def field_qubits(p: int) -> int:
    return (p - 1).bit_length()


def counter_qubits(r: int) -> int:
    """Qubits for a counter holding ``0..r``."""
    return max(1, r.bit_length())


def fingerprint_qubits(p: int, r: int) -> int:
    return 2 * field_qubits(p) + counter_qubits(r)


def fingerprint_layout(p: int, r: int, prefix: str = "R", owner: str | None = None) -> RegisterLayout:
    q = field_qubits(p)
    return RegisterLayout([
        Register(f"{prefix}.s", q, owner),
        Register(f"{prefix}.t", q, owner),
        Register(f"{prefix}.flag", counter_qubits(r), owner),
    ])


def _pack(s: int, t: int, nu: int, q: int, c: int) -> int:
    return (s << (q + c)) | (t << c) | nu


def fingerprint_vector(poly: ListPolynomial, r: int) -> np.ndarray:
    """Amplitudes of ``|F|^{-1/2} sum_s |s>|poly(s)>|0>`` on the packed register."""
    p = poly.p
    q, c = field_qubits(p), counter_qubits(r)
    vec = np.zeros(1 << (2 * q + c), dtype=complex)
    amp = 1 / np.sqrt(p)
    for s in range(p):
        vec[_pack(s, poly(s), 0, q, c)] = amp
    return vec


def build_fingerprint_state(poly: ListPolynomial, r: int, prefix: str = "R", owner: str | None = None) -> QuantumState:
    """Fingerprint state on three registers ``prefix.s``, ``prefix.t``, ``prefix.flag``."""
    layout = fingerprint_layout(poly.p, r, prefix, owner)
    return QuantumState(layout, fingerprint_vector(poly, r))


def g_permutation(poly: ListPolynomial, r: int) -> np.ndarray:
    """Basis map of the G unitary as an index array ``image[x]``.

    Defined part: multiply the value register by ``poly(s)`` when it is
    nonzero; otherwise raise the flag to 1; flags ``1..r-1`` are incremented.
    Leftover basis states are matched to unused images in increasing order.
    """
    p = poly.p
    q, c = field_qubits(p), counter_qubits(r)
    size = 1 << (2 * q + c)
    image = np.full(size, -1, dtype=np.int64)
    hit = np.zeros(size, dtype=bool)
    for s in range(p):
        a = poly(s)
        for t in range(p):
            src = _pack(s, t, 0, q, c)
            dst = _pack(s, a * t % p, 0, q, c) if a else _pack(s, t, 1, q, c)
            image[src] = dst
            for nu in range(1, r):
                image[_pack(s, t, nu, q, c)] = _pack(s, t, nu + 1, q, c)
    defined = image >= 0
    hit[image[defined]] = True
    if np.count_nonzero(hit) != np.count_nonzero(defined):
        raise AssertionError("G map is not injective on its defined part")
    free_src = np.flatnonzero(~defined)
    free_dst = np.flatnonzero(~hit)
    image[free_src] = free_dst
    return image


def permutation_matrix(image: np.ndarray) -> np.ndarray:
    m = np.zeros((image.size, image.size), dtype=complex)
    m[image, np.arange(image.size)] = 1.0
    return m


def build_g_unitary(poly: ListPolynomial, r: int, targets: Sequence[str] | str | None = None) -> Unitary:
    """The G unitary on ``(s, t, flag)``; by default on ``R.s, R.t, R.flag``."""
    if targets is None:
        targets = ("R.s", "R.t", "R.flag")
    return Unitary(targets, permutation_matrix(g_permutation(poly, r)), validate=False)


def decode_basis(index: int, p: int, r: int) -> tuple[int, int, int]:
    q, c = field_qubits(p), counter_qubits(r)
    return index >> (q + c), (index >> c) & ((1 << q) - 1), index & ((1 << c) - 1)


# lower-bound reduction instance generators ------------------------------------


def _bits_to_int(bits: str) -> int:
    return int(bits, 2) if bits else 0


def _check_bits(*strings: str) -> None:
    for s in strings:
        if any(ch not in "01" for ch in s):
            raise ValueError(f"not a bitstring: {s!r}")


def case1_width(universe: int, ell: int) -> int:
    """Substring width ``floor(log2(ell/|U|))`` used by the first reduction."""
    return int(math.floor(math.log2(ell / universe)))


def reduction_case1(x: str, y: str, universe: int, ell: int, r: int = 3, c_tilde: float = DEFAULT_C_TILDE) -> SetEqInstance:
    """Encode equality of ``x``, ``y`` as multiplicities of universe elements.

    Universe element ``u_i`` is the integer ``i - 1``; the padding element
    ``u_|U|`` is ``universe - 1``.
    """
    _check_bits(x, y)
    if not universe < ell:
        raise ValueError("the counting reduction needs |U| < ell")
    w = case1_width(universe, ell)
    if w < 1:
        raise ValueError("ell must be at least 2|U| so that substrings are non-empty")
    n = (universe - 1) * w
    if len(x) != n or len(y) != n:
        raise ValueError(f"x and y must have exactly (|U|-1)*floor(log2(ell/|U|)) = {n} bits")
    pad = universe - 1

    def encode(bits: str) -> list[int]:
        out = []
        for i in range(universe - 1):
            out += [i] * _bits_to_int(bits[i * w:(i + 1) * w])
        return out + [pad] * (ell - len(out))

    filler = [pad] * ell
    a = [encode(x)] + [filler] * r
    b = [filler] * r + [encode(y)]
    return SetEqInstance(r=r, ell=ell, universe=universe, a=a, b=b, c_tilde=c_tilde)


def case2_ell(n: int) -> int:
    """Smallest ``ell`` with ``C(3 ell, ell) >= 2^n``."""
    ell = 1
    while math.comb(3 * ell, ell) < (1 << n):
        ell += 1
    return ell


def unrank_weight_string(rank: int, length: int, weight: int) -> str:
    """The ``rank``-th string of the given length and Hamming weight (lex order)."""
    if not 0 <= rank < math.comb(length, weight):
        raise ValueError("rank out of range")
    out = []
    for pos in range(length):
        rest = length - pos - 1
        # strings starting with '0' here come first
        zeros_first = math.comb(rest, weight)
        if rank < zeros_first:
            out.append("0")
        else:
            rank -= zeros_first
            out.append("1")
            weight -= 1
    return "".join(out)


def injection_f(x: str, ell: int) -> str:
    return unrank_weight_string(_bits_to_int(x), 3 * ell, ell)


def _support(s: str, offset: int = 0) -> list[int]:
    return [offset + i + 1 for i, ch in enumerate(s) if ch == "1"]


def reduction_case2(x: str, y: str, r: int = 3, c_tilde: float = DEFAULT_C_TILDE) -> SetEqInstance:
    """Encode ``x``, ``y`` as weight-``ell`` subsets of ``{1..3 ell}`` at the line ends."""
    _check_bits(x, y)
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    ell = case2_ell(len(x))
    zeros = [0] * ell
    a = [_support(injection_f(x, ell))] + [zeros] * r
    b = [zeros] * r + [_support(injection_f(y, ell))]
    return SetEqInstance(r=r, ell=ell, universe=3 * ell + 1, a=a, b=b, c_tilde=c_tilde)


def reduction_case3(x_list: Sequence[str], y_list: Sequence[str], r: int, c_tilde: float = DEFAULT_C_TILDE) -> SetEqInstance:
    """``k = (r-1)/2`` independent equality pairs on disjoint shifted universes.

    Pair ``i`` sits at nodes ``v_i`` (x side) and ``v_{r-i}`` (y side); the two
    middle nodes hold only zeros.
    """
    if r % 2 == 0:
        raise ValueError("the parallel reduction needs an odd line length r = 2k+1")
    k = (r - 1) // 2
    if len(x_list) != k or len(y_list) != k:
        raise ValueError(f"need exactly k = {k} pairs for r = {r}")
    _check_bits(*x_list, *y_list)
    lengths = {len(s) for s in list(x_list) + list(y_list)}
    if len(lengths) != 1:
        raise ValueError("all strings must have the same length")
    ell = case2_ell(lengths.pop())
    zeros = [0] * ell
    a = [list(zeros) for _ in range(r + 1)]
    b = [list(zeros) for _ in range(r + 1)]
    for i, (x, y) in enumerate(zip(x_list, y_list)):
        a[i] = _support(injection_f(x, ell), 3 * i * ell)
        b[r - i] = _support(injection_f(y, ell), 3 * i * ell)
    return SetEqInstance(r=r, ell=ell, universe=3 * k * ell + 1, a=a, b=b, c_tilde=c_tilde)


def case3_universe(i: int, ell: int) -> set[int]:
    return {0} | set(range(3 * i * ell + 1, 3 * i * ell + 3 * ell + 1))
