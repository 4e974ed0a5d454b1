"""Dense complex linear algebra for a handful of photonic qubits.

States live on a composite space built from named two-level subsystems.
The canonical order is (A_path, A_pol, B_pol) with labels ordered
a<b (or c<d after the fiber beam splitter) and H<V.  Index ``k`` of a
composite vector enumerates the tensor product in row-major order, so the
last subsystem varies fastest.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 64
ATOL = 1e-9

KINDS = ("unitary", "isometry", "projector")


@dataclass(frozen=True)
class Subsystem:
    name: str
    labels: tuple[str, ...]

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"label {label!r} not in {self.name} {self.labels}") from None


A_PATH = Subsystem("A_path", ("a", "b"))
A_PATH_OUT = Subsystem("A_path", ("c", "d"))
A_POL = Subsystem("A_pol", ("H", "V"))
B_POL = Subsystem("B_pol", ("H", "V"))

CANONICAL_BASIS = (A_PATH, A_POL, B_POL)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.setflags(write=False)
    return out


def _dims(basis: Sequence[Subsystem]) -> int:
    return int(np.prod([s.dim for s in basis])) if basis else 1


class StateVector:
    """Ket over a composite basis.  Immutable; need not be normalized."""

    __slots__ = ("amplitudes", "basis")

    def __init__(self, amplitudes, basis: Sequence[Subsystem]):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        basis = tuple(basis)
        if amps.size != _dims(basis):
            raise ValueError(f"{amps.size} amplitudes for basis of dim {_dims(basis)}")
        if amps.size > MAX_DIM:
            raise ValueError(f"composite dimension {amps.size} exceeds cap {MAX_DIM}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitude")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "basis", basis)

    def __setattr__(self, key, value):
        raise AttributeError("StateVector is immutable")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n, self.basis)

    def labels(self) -> list[tuple[str, ...]]:
        """Composite labels in index order, e.g. ('a', 'H', 'V')."""
        grids = [s.labels for s in self.basis]
        return [tuple(x) for x in np.array(np.meshgrid(*grids, indexing="ij")).reshape(len(grids), -1).T]

    def amplitude(self, *labels: str) -> complex:
        idx = tuple(s.index(l) for s, l in zip(self.basis, labels, strict=True))
        return complex(self.amplitudes.reshape([s.dim for s in self.basis])[idx])

    def _check_same_basis(self, other: "StateVector"):
        if self.basis != other.basis:
            raise ValueError("states live on different bases")

    def __add__(self, other: "StateVector") -> "StateVector":
        self._check_same_basis(other)
        return StateVector(self.amplitudes + other.amplitudes, self.basis)

    def __sub__(self, other: "StateVector") -> "StateVector":
        self._check_same_basis(other)
        return StateVector(self.amplitudes - other.amplitudes, self.basis)

    def __mul__(self, c: complex) -> "StateVector":
        return StateVector(self.amplitudes * complex(c), self.basis)

    __rmul__ = __mul__

    def __repr__(self):
        names = "⊗".join(s.name for s in self.basis)
        return f"StateVector({names}, {np.round(self.amplitudes, 6)})"


def ket(subsystem: Subsystem, label: str) -> StateVector:
    amps = np.zeros(subsystem.dim, dtype=complex)
    amps[subsystem.index(label)] = 1.0
    return StateVector(amps, (subsystem,))


def tensor(*states: StateVector) -> StateVector:
    """Kronecker product of states in argument order."""
    if not states:
        raise ValueError("tensor() needs at least one state")
    dim = int(np.prod([s.dim for s in states]))
    if dim > MAX_DIM:
        raise ValueError(f"composite dimension {dim} exceeds cap {MAX_DIM}")
    amps = reduce(np.kron, (s.amplitudes for s in states))
    basis = sum((s.basis for s in states), ())
    names = [b.name for b in basis]
    if len(set(names)) != len(names):
        raise ValueError(f"repeated subsystem in tensor product: {names}")
    return StateVector(amps, basis)


@dataclass(frozen=True, eq=False)
class ElementOperator:
    """Linear map from ``inputs`` to ``outputs`` with a checked kind.

    The kind invariant is verified numerically on construction:
    unitary U†U = UU† = 1, isometry V†V = 1, projector P² = P = P†.
    """

    matrix: np.ndarray
    kind: str
    inputs: tuple[Subsystem, ...]
    outputs: tuple[Subsystem, ...] = None
    name: str = ""

    def __post_init__(self):
        outputs = self.inputs if self.outputs is None else tuple(self.outputs)
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", outputs)
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if m.shape != (_dims(outputs), _dims(self.inputs)):
            raise ValueError(f"matrix shape {m.shape} does not match inputs/outputs")
        if not np.all(np.isfinite(m)):
            raise ValueError("non-finite operator entry")
        check = {
            "unitary": is_unitary,
            "isometry": is_isometry,
            "projector": is_projector,
        }[self.kind]
        if not check(m):
            raise ValueError(f"{self.name or 'operator'} fails the {self.kind} invariant")

    @property
    def acts_on(self) -> frozenset[str]:
        return frozenset(s.name for s in self.inputs)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def dagger(self) -> np.ndarray:
        return self.matrix.conj().T


def is_isometry(m: np.ndarray, atol: float = ATOL) -> bool:
    m = np.asarray(m)
    return np.allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=atol, rtol=0)


def is_unitary(m: np.ndarray, atol: float = ATOL) -> bool:
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and is_isometry(m, atol) and np.allclose(
        m @ m.conj().T, np.eye(m.shape[0]), atol=atol, rtol=0
    )


def is_projector(m: np.ndarray, atol: float = ATOL) -> bool:
    m = np.asarray(m)
    return (
        m.shape[0] == m.shape[1]
        and np.allclose(m, m.conj().T, atol=atol, rtol=0)
        and np.allclose(m @ m, m, atol=atol, rtol=0)
    )


def _locate(target: Sequence[str], basis: Sequence[Subsystem]) -> int:
    names = [s.name for s in basis]
    for t in target:
        if t not in names:
            raise ValueError(f"unknown subsystem {t!r}; basis has {names}")
    start = names.index(target[0])
    if names[start:start + len(target)] != list(target):
        raise ValueError(f"subsystems {list(target)} are not contiguous in {names}")
    return start


def lift_to_composite(
    op: ElementOperator,
    basis: Sequence[Subsystem],
    target: str | Sequence[str] | None = None,
) -> ElementOperator:
    """Embed ``op`` into ``basis`` with identity on every other subsystem.

    ``target`` names the subsystem(s) the operator acts on and defaults to
    ``op.inputs``.  A retargeted operator keeps the labels found in
    ``basis``.  The target subsystems are replaced in place by the
    operator's outputs, so an isometry like the PBS can grow the basis.
    """
    basis = tuple(basis)
    if target is None:
        target = [s.name for s in op.inputs]
        inputs, outputs = op.inputs, op.outputs
    else:
        target = [target] if isinstance(target, str) else list(target)
        start = _locate(target, basis)
        inputs = basis[start:start + len(target)]
        if _dims(inputs) != op.cols:
            raise ValueError(f"operator of width {op.cols} cannot act on {target}")
        outputs = inputs if op.outputs == op.inputs else op.outputs
    start = _locate(target, basis)
    found = basis[start:start + len(target)]
    if found != tuple(inputs):
        raise ValueError(f"basis labels {found} do not match operator inputs {inputs}")
    left = np.eye(_dims(basis[:start]))
    right = np.eye(_dims(basis[start + len(target):]))
    out_basis = basis[:start] + tuple(outputs) + basis[start + len(target):]
    if _dims(out_basis) > MAX_DIM:
        raise ValueError(f"composite dimension {_dims(out_basis)} exceeds cap {MAX_DIM}")
    matrix = np.kron(np.kron(left, op.matrix), right)
    return ElementOperator(matrix, op.kind, basis, out_basis, name=op.name)


def apply(op: ElementOperator, s: StateVector) -> StateVector:
    """Return op·s, lifting ``op`` onto the state's basis when needed."""
    if op.inputs != s.basis:
        if op.cols == s.dim and len(op.inputs) == len(s.basis):
            raise ValueError(f"operator inputs {op.inputs} do not match state basis {s.basis}")
        op = lift_to_composite(op, s.basis)
    if op.cols != s.dim:
        raise ValueError(f"dimension mismatch: operator has {op.cols} columns, state dim {s.dim}")
    return StateVector(op.matrix @ s.amplitudes, op.outputs)


def born_probability(p: ElementOperator, s: StateVector) -> float:
    """⟨s|P|s⟩ for a projector ``p``."""
    if p.kind != "projector":
        raise ValueError(f"born_probability needs a projector, got {p.kind}")
    if p.inputs != s.basis:
        p = lift_to_composite(p, s.basis)
    value = float(np.real(np.vdot(s.amplitudes, p.matrix @ s.amplitudes)))
    return _clamp_probability(value)


def _clamp_probability(value: float) -> float:
    if value < -ATOL or value > 1 + ATOL:
        raise ValueError(f"probability {value} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


class DensityOperator:
    """Normalized mixed state.  Hermitian, unit trace, positive semidefinite."""

    __slots__ = ("matrix", "basis")

    def __init__(self, matrix, basis: Sequence[Subsystem]):
        m = np.asarray(matrix, dtype=complex)
        basis = tuple(basis)
        d = _dims(basis)
        if m.shape != (d, d):
            raise ValueError(f"density matrix shape {m.shape} does not match basis dim {d}")
        if not np.allclose(m, m.conj().T, atol=ATOL, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > ATOL:
            raise ValueError(f"density matrix trace {np.trace(m).real} != 1")
        if np.linalg.eigvalsh(m).min() < -ATOL:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "basis", basis)

    def __setattr__(self, key, value):
        raise AttributeError("DensityOperator is immutable")

    @classmethod
    def from_state(cls, s: StateVector) -> "DensityOperator":
        a = s.normalized().amplitudes
        return cls(np.outer(a, a.conj()), s.basis)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def evolve(self, op: ElementOperator) -> "DensityOperator":
        """ρ → OρO† for a unitary or isometry."""
        if op.kind == "projector":
            raise ValueError("evolve() is trace preserving; use probability() for projectors")
        if op.inputs != self.basis:
            op = lift_to_composite(op, self.basis)
        return DensityOperator(op.matrix @ self.matrix @ op.dagger(), op.outputs)

    def probability(self, p: ElementOperator) -> float:
        if p.kind != "projector":
            raise ValueError(f"probability needs a projector, got {p.kind}")
        if p.inputs != self.basis:
            p = lift_to_composite(p, self.basis)
        return _clamp_probability(float(np.real(np.trace(p.matrix @ self.matrix))))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def partial_trace(self, keep: Iterable[str]) -> "DensityOperator":
        keep = list(keep)
        names = [s.name for s in self.basis]
        n = len(names)
        dims = [s.dim for s in self.basis]
        keep_idx = [names.index(k) for k in keep]
        t = self.matrix.reshape(dims + dims)
        for i in sorted(set(range(n)) - set(keep_idx), reverse=True):
            m = t.ndim // 2
            t = np.trace(t, axis1=i, axis2=i + m)
        # remaining axes are in basis order; permute to the requested order
        remaining = sorted(keep_idx)
        perm = [remaining.index(k) for k in keep_idx]
        k = len(remaining)
        t = np.transpose(t, perm + [p + k for p in perm])
        kb = tuple(self.basis[i] for i in keep_idx)
        d = _dims(kb)
        return DensityOperator(t.reshape(d, d), kb)


def dephase_mix(s: StateVector, visibility: float, subsystem: str = "A_path") -> DensityOperator:
    """V·|s⟩⟨s| + (1−V)·D(|s⟩⟨s|).

    D zeroes every coherence between different labels of ``subsystem``, so
    interference terms along that subsystem scale linearly with V while
    its populations are untouched.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must be in [0, 1], got {visibility}")
    rho = DensityOperator.from_state(s).matrix
    names = [b.name for b in s.basis]
    if subsystem not in names:
        raise ValueError(f"unknown subsystem {subsystem!r}; basis has {names}")
    k = names.index(subsystem)
    dims = [b.dim for b in s.basis]
    label_of = np.unravel_index(np.arange(s.dim), dims)[k]
    same = label_of[:, None] == label_of[None, :]
    mixed = np.where(same, rho, 0.0)
    return DensityOperator(visibility * rho + (1 - visibility) * mixed, s.basis)


def schmidt_coefficients(s: StateVector, left: Sequence[str]) -> np.ndarray:
    """Schmidt coefficients of a pure state across ``left`` | rest, descending."""
    names = [b.name for b in s.basis]
    left_idx = [names.index(n) for n in left]
    right_idx = [i for i in range(len(names)) if i not in left_idx]
    dims = [b.dim for b in s.basis]
    t = s.normalized().amplitudes.reshape(dims).transpose(left_idx + right_idx)
    dl = int(np.prod([dims[i] for i in left_idx]))
    return np.linalg.svd(t.reshape(dl, -1), compute_uv=False)
