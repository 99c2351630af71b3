"""Dense state-vector / density-matrix simulation over named qubit registers.

Registers are the unit of addressing: every tensor factor of a state is a
named register of one or more qubits, owned by a network node.  Operations
never mutate their inputs; they return new :class:`QuantumState` values.

Ordering convention: registers are laid out big-endian in layout order, and
qubits inside a register are big-endian as well, so the basis index of a
register holding the integer ``x`` is simply ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import unitary_group

from dqma.errors import CapacityError, DegenerateBranchError, LayoutError

PURE_QUBIT_CAP = 22
MIXED_QUBIT_CAP = 11

ALGEBRA_TOL = 1e-10
PSD_TOL = 1e-9
OPTIMUM_TOL = 1e-6
# below this an outcome is treated as impossible
ZERO_PROB = 1e-12


@dataclass(frozen=True)
class Register:
    name: str
    qubits: int
    owner: str | None = None

    @property
    def dim(self) -> int:
        return 1 << self.qubits


class RegisterLayout:
    """Ordered, uniquely named qubit registers with node ownership."""

    __slots__ = ("registers", "_index")

    def __init__(self, registers: Iterable[Register | tuple]):
        regs = []
        for r in registers:
            if not isinstance(r, Register):
                r = Register(*r)
            if r.qubits < 1:
                raise LayoutError(f"register {r.name!r} must have at least one qubit")
            regs.append(r)
        self.registers: tuple[Register, ...] = tuple(regs)
        self._index = {r.name: i for i, r in enumerate(self.registers)}
        if len(self._index) != len(self.registers):
            seen, dup = set(), []
            for r in self.registers:
                if r.name in seen:
                    dup.append(r.name)
                seen.add(r.name)
            raise LayoutError(f"duplicate register names: {sorted(set(dup))}")

    @classmethod
    def of(cls, *specs) -> "RegisterLayout":
        """``RegisterLayout.of(("A", 1, "u"), ("B", 2, "v"))``."""
        return cls(specs)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.registers]

    @property
    def dims(self) -> list[int]:
        return [r.dim for r in self.registers]

    @property
    def total_qubits(self) -> int:
        return sum(r.qubits for r in self.registers)

    @property
    def dim(self) -> int:
        return 1 << self.total_qubits

    def __len__(self) -> int:
        return len(self.registers)

    def __contains__(self, name) -> bool:
        return name in self._index

    def __iter__(self):
        return iter(self.registers)

    def __getitem__(self, name: str) -> Register:
        try:
            return self.registers[self._index[name]]
        except KeyError:
            raise LayoutError(f"unknown register {name!r}") from None

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise LayoutError(f"unknown register {name!r}") from None

    def indices(self, names: Sequence[str]) -> list[int]:
        idx = [self.index(n) for n in names]
        if len(set(idx)) != len(idx):
            raise LayoutError(f"register listed twice in {list(names)}")
        return idx

    def owner(self, name: str) -> str | None:
        return self[name].owner

    def select(self, names: Sequence[str]) -> "RegisterLayout":
        return RegisterLayout([self[n] for n in names])

    def rename(self, mapping: Mapping[str, str]) -> "RegisterLayout":
        return RegisterLayout(
            [Register(mapping.get(r.name, r.name), r.qubits, r.owner) for r in self.registers]
        )

    def with_owners(self, owners: Mapping[str, str]) -> "RegisterLayout":
        return RegisterLayout(
            [Register(r.name, r.qubits, owners.get(r.name, r.owner)) for r in self.registers]
        )

    def same_shape(self, other: "RegisterLayout") -> bool:
        """Same names and sizes in the same order; ownership is ignored."""
        return [(r.name, r.qubits) for r in self.registers] == [
            (r.name, r.qubits) for r in other.registers
        ]

    def __eq__(self, other) -> bool:
        return isinstance(other, RegisterLayout) and self.registers == other.registers

    def __hash__(self) -> int:
        return hash(self.registers)

    def __repr__(self) -> str:
        body = ", ".join(
            f"{r.name}:{r.qubits}" + (f"@{r.owner}" if r.owner is not None else "")
            for r in self.registers
        )
        return f"RegisterLayout({body})"


def _check_cap(layout: RegisterLayout, pure: bool) -> None:
    cap = PURE_QUBIT_CAP if pure else MIXED_QUBIT_CAP
    if layout.total_qubits > cap:
        kind = "pure" if pure else "mixed"
        raise CapacityError(
            f"{kind} state on {layout.total_qubits} qubits exceeds the {cap}-qubit cap "
            f"(registers: {layout.names})"
        )


class QuantumState:
    """Immutable pure or mixed state over a :class:`RegisterLayout`."""

    __slots__ = ("layout", "data", "is_pure")

    def __init__(self, layout: RegisterLayout, data, *, validate: bool = True):
        data = np.array(data, dtype=complex)
        if data.ndim == 1:
            is_pure = True
            expected = (layout.dim,)
        elif data.ndim == 2:
            is_pure = False
            expected = (layout.dim, layout.dim)
        else:
            raise ValueError("state data must be a vector or a square matrix")
        _check_cap(layout, is_pure)
        if data.shape != expected:
            raise LayoutError(f"data shape {data.shape} does not match layout {layout}")
        data.flags.writeable = False
        self.layout = layout
        self.data = data
        self.is_pure = is_pure
        if validate:
            self.validate()

    @classmethod
    def _trusted(cls, layout: RegisterLayout, data) -> "QuantumState":
        obj = cls.__new__(cls)
        data = np.asarray(data, dtype=complex)
        is_pure = data.ndim == 1
        _check_cap(layout, is_pure)
        if not data.flags.owndata:
            data = data.copy()
        data.flags.writeable = False
        obj.layout = layout
        obj.data = data
        obj.is_pure = is_pure
        return obj

    def validate(self, psd: bool = True) -> None:
        if self.is_pure:
            norm = np.vdot(self.data, self.data).real
            if abs(norm - 1.0) > ALGEBRA_TOL:
                raise ValueError(f"state vector norm^2 is {norm}, expected 1")
            return
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > ALGEBRA_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > ALGEBRA_TOL:
            raise ValueError(f"density matrix trace is {tr}, expected 1")
        if psd:
            lo = np.linalg.eigvalsh(rho).min()
            if lo < -PSD_TOL:
                raise ValueError(f"density matrix has eigenvalue {lo} < 0")

    # constructors ---------------------------------------------------------

    @classmethod
    def basis(cls, layout: RegisterLayout, values: Mapping[str, int] | Sequence[int] | None = None):
        """Computational basis state; ``values`` gives each register's integer."""
        if values is None:
            values = {}
        if not isinstance(values, Mapping):
            values = dict(zip(layout.names, values))
        idx = 0
        for r in layout:
            v = int(values.get(r.name, 0))
            if not 0 <= v < r.dim:
                raise ValueError(f"value {v} out of range for register {r.name!r}")
            idx = (idx << r.qubits) | v
        vec = np.zeros(layout.dim, dtype=complex)
        vec[idx] = 1.0
        return cls._trusted(layout, vec)

    @classmethod
    def maximally_mixed(cls, layout: RegisterLayout) -> "QuantumState":
        return cls._trusted(layout, np.eye(layout.dim, dtype=complex) / layout.dim)

    @classmethod
    def single(cls, name: str, vector, owner: str | None = None) -> "QuantumState":
        """State on a single register; qubit count inferred from the data."""
        data = np.asarray(vector, dtype=complex)
        q = int(np.log2(data.shape[0]))
        if 1 << q != data.shape[0]:
            raise ValueError("dimension must be a power of two")
        return cls(RegisterLayout([Register(name, q, owner)]), data)

    # views ----------------------------------------------------------------

    @property
    def num_qubits(self) -> int:
        return self.layout.total_qubits

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def to_mixed(self) -> "QuantumState":
        if not self.is_pure:
            return self
        return QuantumState._trusted(self.layout, self.density())

    def probability_of(self, values: Mapping[str, int]) -> float:
        """Probability of observing the given register values (others summed)."""
        keep = list(values)
        red = partial_trace(self, keep) if keep != self.layout.names else self.to_mixed()
        idx = 0
        for r in red.layout:
            idx = (idx << r.qubits) | int(values[r.name])
        return float(red.data[idx, idx].real)

    def relabel(self, mapping: Mapping[str, str]) -> "QuantumState":
        return QuantumState._trusted(self.layout.rename(mapping), self.data)

    def with_owners(self, owners: Mapping[str, str]) -> "QuantumState":
        return QuantumState._trusted(self.layout.with_owners(owners), self.data)

    def reorder(self, names: Sequence[str]) -> "QuantumState":
        """Same physical state with registers listed in ``names`` order."""
        if sorted(names) != sorted(self.layout.names):
            raise LayoutError("reorder must list every register exactly once")
        perm = self.layout.indices(names)
        dims = self.layout.dims
        new_layout = self.layout.select(names)
        if self.is_pure:
            t = self.data.reshape(dims).transpose(perm)
            return QuantumState._trusted(new_layout, t.reshape(-1))
        nreg = len(dims)
        t = self.data.reshape(dims + dims).transpose(perm + [p + nreg for p in perm])
        return QuantumState._trusted(new_layout, t.reshape(new_layout.dim, new_layout.dim))

    def __repr__(self) -> str:
        kind = "pure" if self.is_pure else "mixed"
        return f"QuantumState({kind}, {self.layout})"


@dataclass(frozen=True)
class Unitary:
    targets: tuple[str, ...]
    matrix: np.ndarray

    def __init__(self, targets: Sequence[str] | str, matrix, *, validate: bool = True):
        if isinstance(targets, str):
            targets = (targets,)
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("unitary matrix must be square")
        if validate:
            err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
            if err > ALGEBRA_TOL:
                raise ValueError(f"matrix is not unitary (max |U†U - I| = {err:.3g})")
        object.__setattr__(self, "targets", tuple(targets))
        object.__setattr__(self, "matrix", m)

    def dagger(self) -> "Unitary":
        return Unitary(self.targets, self.matrix.conj().T, validate=False)

    def on(self, *targets: str) -> "Unitary":
        return Unitary(targets, self.matrix, validate=False)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


class Povm:
    """Labelled POVM effects on a group of target registers.

    ``kraus`` holds the Lüders operators ``E^{1/2}`` used for post-measurement
    states.
    """

    def __init__(self, targets: Sequence[str] | str, effects, *, validate: bool = True):
        if isinstance(targets, str):
            targets = (targets,)
        self.targets = tuple(targets)
        if isinstance(effects, Mapping):
            items = list(effects.items())
        else:
            items = list(effects)
        self.labels = [lab for lab, _ in items]
        self.effects = [np.asarray(e, dtype=complex) for _, e in items]
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("POVM outcome labels must be unique")
        if validate:
            total = sum(self.effects)
            if np.max(np.abs(total - np.eye(total.shape[0]))) > ALGEBRA_TOL:
                raise ValueError("POVM effects do not sum to the identity")
            for lab, e in zip(self.labels, self.effects):
                if np.max(np.abs(e - e.conj().T)) > ALGEBRA_TOL:
                    raise ValueError(f"effect {lab!r} is not Hermitian")
                if np.linalg.eigvalsh(e).min() < -PSD_TOL:
                    raise ValueError(f"effect {lab!r} is not positive semidefinite")
        self.kraus = []
        for e in self.effects:
            if np.allclose(e @ e, e, atol=ALGEBRA_TOL):
                self.kraus.append(e)
            else:
                self.kraus.append(_psd_sqrt(e))

    @classmethod
    def binary(cls, targets, effect, labels=(True, False)) -> "Povm":
        e = np.asarray(effect, dtype=complex)
        return cls(targets, [(labels[0], e), (labels[1], np.eye(e.shape[0]) - e)])

    @classmethod
    def projective(cls, targets, basis_vectors, labels=None) -> "Povm":
        vecs = [np.asarray(v, dtype=complex) for v in basis_vectors]
        labels = list(range(len(vecs))) if labels is None else list(labels)
        return cls(targets, [(lab, np.outer(v, v.conj())) for lab, v in zip(labels, vecs)])

    def effect(self, label) -> np.ndarray:
        return self.effects[self.labels.index(label)]

    def on(self, *targets: str) -> "Povm":
        p = Povm.__new__(Povm)
        p.targets = tuple(targets)
        p.labels, p.effects, p.kraus = self.labels, self.effects, self.kraus
        return p


@dataclass(frozen=True)
class Branch:
    """One measurement outcome: label, its probability and the post-state.

    ``state`` is None for branches whose probability is below ``ZERO_PROB``.
    """

    label: object
    probability: float
    state: QuantumState | None


# raw-array kernels ----------------------------------------------------------


def _target_axes(layout: RegisterLayout, targets: Sequence[str], op: np.ndarray) -> list[int]:
    axes = layout.indices(targets)
    d = 1
    for a in axes:
        d *= layout.registers[a].dim
    if op.shape != (d, d):
        raise LayoutError(
            f"operator of shape {op.shape} does not act on registers {list(targets)} (dim {d})"
        )
    return axes


def _left_apply(t: np.ndarray, axes: list[int], op: np.ndarray) -> np.ndarray:
    """Contract ``op`` into tensor ``t`` along ``axes`` (axes keep their place)."""
    k = len(axes)
    front = list(range(k))
    t = np.moveaxis(t, axes, front)
    shape = t.shape
    t = (op @ t.reshape(op.shape[1], -1)).reshape(shape)
    return np.moveaxis(t, front, axes)


def apply_operator_raw(layout: RegisterLayout, data: np.ndarray, targets: Sequence[str], op) -> np.ndarray:
    """``op`` on the target factor of a vector (``op ψ``) or matrix (``op ρ op†``)."""
    op = np.asarray(op, dtype=complex)
    axes = _target_axes(layout, targets, op)
    dims = layout.dims
    if data.ndim == 1:
        return _left_apply(data.reshape(dims), axes, op).reshape(-1)
    n = len(dims)
    t = data.reshape(dims + dims)
    t = _left_apply(t, axes, op)
    t = _left_apply(t, [a + n for a in axes], op.conj())
    return t.reshape(data.shape)


def _reduce_raw(layout: RegisterLayout, data: np.ndarray, keep: Sequence[str]) -> np.ndarray:
    dims = layout.dims
    keep_axes = layout.indices(keep)
    rest = [i for i in range(len(dims)) if i not in keep_axes]
    dk = int(np.prod([dims[i] for i in keep_axes], dtype=np.int64))
    if data.ndim == 1:
        m = data.reshape(dims).transpose(keep_axes + rest).reshape(dk, -1)
        return m @ m.conj().T
    n = len(dims)
    t = data.reshape(dims + dims).transpose(
        keep_axes + rest + [i + n for i in keep_axes] + [i + n for i in rest]
    )
    dr = data.shape[0] // dk
    return np.einsum("iaja->ij", t.reshape(dk, dr, dk, dr))


# public operations -----------------------------------------------------------


def tensor(a: QuantumState, b: QuantumState, *more: QuantumState) -> QuantumState:
    """Tensor product; pure inputs give a pure output, otherwise mixed."""
    if more:
        out = tensor(a, b)
        for m in more:
            out = tensor(out, m)
        return out
    clash = set(a.layout.names) & set(b.layout.names)
    if clash:
        raise LayoutError(f"register name collision in tensor: {sorted(clash)}")
    layout = RegisterLayout(a.layout.registers + b.layout.registers)
    if a.is_pure and b.is_pure:
        return QuantumState._trusted(layout, np.kron(a.data, b.data))
    return QuantumState._trusted(layout, np.kron(a.density(), b.density()))


def apply_unitary(state: QuantumState, u: Unitary) -> QuantumState:
    data = apply_operator_raw(state.layout, state.data, u.targets, u.matrix)
    return QuantumState._trusted(state.layout, data)


def apply_operator(state: QuantumState, targets: Sequence[str], op) -> tuple[float, QuantumState | None]:
    """Apply a (contractive) operator and renormalise.

    Returns ``(weight, state)`` where ``weight`` is the squared norm (pure) or
    trace (mixed) after the operator; the state is None when the weight is
    zero.
    """
    data = apply_operator_raw(state.layout, state.data, targets, op)
    if data.ndim == 1:
        w = float(np.vdot(data, data).real)
        if w < ZERO_PROB:
            return 0.0, None
        return w, QuantumState._trusted(state.layout, data / np.sqrt(w))
    w = float(np.trace(data).real)
    if w < ZERO_PROB:
        return 0.0, None
    return w, QuantumState._trusted(state.layout, data / w)


def partial_trace(state: QuantumState, keep: Sequence[str]) -> QuantumState:
    """Reduced (mixed) state on ``keep``, in the order given."""
    keep = list(keep)
    if not keep:
        raise ValueError("partial_trace needs at least one register to keep")
    red = _reduce_raw(state.layout, state.data, keep)
    return QuantumState._trusted(state.layout.select(keep), red)


def _require_same_layout(a: QuantumState, b: QuantumState) -> None:
    if not a.layout.same_shape(b.layout):
        raise LayoutError(f"layouts differ: {a.layout} vs {b.layout}")


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """Root fidelity ``tr sqrt(sqrt(a) b sqrt(a))``."""
    _require_same_layout(a, b)
    if a.is_pure and b.is_pure:
        f = abs(np.vdot(a.data, b.data))
    elif a.is_pure or b.is_pure:
        psi, rho = (a.data, b.data) if a.is_pure else (b.data, a.data)
        f = np.sqrt(max(np.vdot(psi, rho @ psi).real, 0.0))
    else:
        s = _psd_sqrt(a.data)
        w = np.linalg.eigvalsh(s @ b.data @ s)
        f = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    return float(min(max(f, 0.0), 1.0))


def trace_distance(a: QuantumState, b: QuantumState) -> float:
    _require_same_layout(a, b)
    if a.is_pure and b.is_pure:
        ov = abs(np.vdot(a.data, b.data)) ** 2
        return float(np.sqrt(max(1.0 - ov, 0.0)))
    w = np.linalg.eigvalsh(a.density() - b.density())
    return float(min(0.5 * np.sum(np.abs(w)), 1.0))


def overlap(state: QuantumState, target: QuantumState) -> float:
    """``<φ|ρ|φ>`` for a pure target; the squared fidelity in general."""
    return fidelity(target, state) ** 2


def measure_povm(state: QuantumState, povm: Povm, rng: np.random.Generator | None = None):
    """Measure ``povm`` on its target registers.

    With ``rng=None`` (exact mode) every outcome is returned as a
    :class:`Branch`; otherwise one outcome is sampled and its branch returned.
    """
    branches = []
    for lab, k in zip(povm.labels, povm.kraus):
        p, post = apply_operator(state, povm.targets, k)
        branches.append(Branch(lab, p, post))
    if rng is None:
        return branches
    probs = np.array([b.probability for b in branches])
    probs = probs / probs.sum()
    i = rng.choice(len(branches), p=probs)
    return branches[i]


def postselect(state: QuantumState, povm: Povm, label) -> tuple[float, QuantumState]:
    """Probability of ``label`` and the Lüders state conditioned on it."""
    k = povm.kraus[povm.labels.index(label)]
    p, post = apply_operator(state, povm.targets, k)
    if post is None:
        raise DegenerateBranchError(f"outcome {label!r} has probability ~0; cannot condition on it")
    return p, post


# random states for property tests ------------------------------------------


def random_pure_state(layout: RegisterLayout, rng: np.random.Generator) -> QuantumState:
    """Haar-random pure state (normalised complex Gaussian vector)."""
    v = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    return QuantumState._trusted(layout, v / np.linalg.norm(v))


def random_mixed_state(layout: RegisterLayout, rng: np.random.Generator, env_qubits: int | None = None) -> QuantumState:
    """Reduced state of a Haar-random purification with ``env_qubits`` extra qubits."""
    e = layout.total_qubits if env_qubits is None else env_qubits
    d, de = layout.dim, 1 << e
    m = rng.normal(size=(d, de)) + 1j * rng.normal(size=(d, de))
    rho = m @ m.conj().T
    return QuantumState._trusted(layout, rho / np.trace(rho).real)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.ones((1, 1), complex)


def embed(op, layout: RegisterLayout, targets: Sequence[str]) -> np.ndarray:
    """Full-space matrix of ``op`` acting on ``targets`` (identity elsewhere)."""
    op = np.asarray(op, dtype=complex)
    axes = _target_axes(layout, targets, op)
    dims = layout.dims
    eye = np.eye(layout.dim, dtype=complex).reshape(dims + dims)
    return _left_apply(eye, axes, op).reshape(layout.dim, layout.dim)
