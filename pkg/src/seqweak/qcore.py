"""
Dense state-vector algebra for small qubit registers.

Wire 0 is the most significant bit of a basis-state index, so a ket written
left to right as |system>|ancilla>|meter> has the system on wire 0.
Values are immutable once built; every function here is pure.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import sqrt
from typing import Sequence, Union

import numpy as np

from .exceptions import InvalidDistributionError, WireError

NORM_TOL = 1e-12
UNITARY_TOL = 1e-12

_SQRT2_INV = 1 / sqrt(2)

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.setflags(write=False)
    return out


def _wire_count(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise WireError(f"dimension {dim} is not a power of two >= 2")
    return n


@dataclass(frozen=True, eq=False)
class Ket:
    """Amplitude vector over an ordered qubit register.

    ``normalized`` records whether the vector is a physical state or an
    unnormalized branch; it is checked at construction.
    """

    amplitudes: np.ndarray
    normalized: bool = True
    wires: int = field(init=False)

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "wires", _wire_count(amps.size))
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        if self.normalized and abs(self.norm() - 1.0) > NORM_TOL:
            raise ValueError(f"ket tagged normalized has norm {self.norm():.15g}")

    @classmethod
    def unnormalized(cls, amplitudes) -> "Ket":
        return cls(amplitudes, normalized=False)

    @classmethod
    def basis(cls, bits: str) -> "Ket":
        """Computational basis ket from a bit string, e.g. ``Ket.basis("010")``."""
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probability(self) -> float:
        """Squared norm; for a projected branch this is its probability."""
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalize(self) -> "Ket":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return Ket(self.amplitudes / nrm)

    def inner(self, other: "Ket") -> complex:
        """<self|other>."""
        if self.wires != other.wires:
            raise WireError("inner product of kets on different registers")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    def __repr__(self):
        tag = "" if self.normalized else ", unnormalized"
        return f"Ket({np.array2string(self.amplitudes, precision=6)}{tag})"


@dataclass(frozen=True, eq=False)
class MatrixOp:
    """Square operator on ``len(targets)`` wires.

    ``targets`` is the default placement used by :func:`apply_gate`; when
    ``unitary`` is set the matrix is checked for U^dagger U = I.
    """

    matrix: np.ndarray
    targets: tuple[int, ...] = ()
    unitary: bool = False
    name: str = ""

    def __post_init__(self):
        mat = _frozen(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise WireError(f"operator must be square, got shape {mat.shape}")
        k = _wire_count(mat.shape[0])
        targets = tuple(self.targets) if self.targets else tuple(range(k))
        if len(targets) != k:
            raise WireError(f"{k}-wire operator given {len(targets)} target wires")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "targets", targets)
        if self.unitary and not is_unitary(mat):
            raise ValueError(f"operator {self.name!r} tagged unitary is not unitary")

    @property
    def wires(self) -> int:
        return len(self.targets)

    @property
    def dagger(self) -> "MatrixOp":
        return MatrixOp(self.matrix.conj().T, self.targets, self.unitary, self.name + "^dag")

    def __matmul__(self, other: "MatrixOp") -> "MatrixOp":
        return MatrixOp(self.matrix @ other.matrix, self.targets, self.unitary and other.unitary)

    def __add__(self, other: "MatrixOp") -> "MatrixOp":
        return MatrixOp(self.matrix + other.matrix, self.targets)

    def __sub__(self, other: "MatrixOp") -> "MatrixOp":
        return MatrixOp(self.matrix - other.matrix, self.targets)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __repr__(self):
        label = self.name or "MatrixOp"
        return f"{label}(targets={self.targets})\n{np.array2string(self.matrix, precision=6)}"


def is_unitary(matrix, atol: float = UNITARY_TOL) -> bool:
    mat = np.asarray(matrix)
    return bool(np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]), rtol=0, atol=atol))


class Basis(enum.Enum):
    Z = "Z"
    X = "X"

    def kets(self) -> tuple[Ket, Ket]:
        """The two basis kets, outcome 0 first: (|0>, |1>) or (|+>, |->)."""
        if self is Basis.Z:
            return ZERO, ONE
        return PLUS, MINUS

    def projector(self, outcome: int) -> np.ndarray:
        vec = self.kets()[outcome].amplitudes
        return np.outer(vec, vec.conj())


ZERO = Ket([1, 0])
ONE = Ket([0, 1])
PLUS = Ket([_SQRT2_INV, _SQRT2_INV])
MINUS = Ket([_SQRT2_INV, -_SQRT2_INV])


def tensor(a: Union[Ket, MatrixOp], b: Union[Ket, MatrixOp]):
    """Kronecker product, ``a``'s wires first."""
    if isinstance(a, Ket) and isinstance(b, Ket):
        return Ket(np.kron(a.amplitudes, b.amplitudes), normalized=a.normalized and b.normalized)
    if isinstance(a, MatrixOp) and isinstance(b, MatrixOp):
        return MatrixOp(np.kron(a.matrix, b.matrix), unitary=a.unitary and b.unitary)
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def kron(*parts):
    """Left fold of :func:`tensor` over one or more kets or operators."""
    out = parts[0]
    for part in parts[1:]:
        out = tensor(out, part)
    return out


def _check_wires(wires: Sequence[int], n: int) -> list[int]:
    wires = [int(w) for w in wires]
    if len(set(wires)) != len(wires):
        raise WireError(f"repeated wire in {wires}")
    for w in wires:
        if not 0 <= w < n:
            raise WireError(f"wire {w} outside a {n}-wire register")
    return wires


def apply_matrix(amplitudes: np.ndarray, matrix: np.ndarray, wires: Sequence[int], n: int) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to ``wires`` of a flat n-wire amplitude array."""
    k = len(wires)
    psi = np.asarray(amplitudes).reshape([2] * n)
    op = np.asarray(matrix).reshape([2] * (2 * k))
    # contract the operator's input legs with the listed wires, then put its
    # output legs back where those wires were
    out = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), list(wires)))
    out = np.moveaxis(out, list(range(k)), list(wires))
    return out.reshape(-1)


def apply_gate(state: Ket, gate: MatrixOp, wires: Sequence[int] | None = None) -> Ket:
    """Embed ``gate`` on ``wires`` (default: its own targets) with identity elsewhere."""
    wires = _check_wires(gate.targets if wires is None else wires, state.wires)
    if len(wires) != gate.wires:
        raise WireError(f"{gate.wires}-wire gate applied to {len(wires)} wires")
    amps = apply_matrix(state.amplitudes, gate.matrix, wires, state.wires)
    keep_tag = state.normalized and gate.unitary
    return Ket(amps, normalized=keep_tag)


def project_wire(state: Ket, wire: int, basis: Basis, outcome: int) -> tuple[Ket, float]:
    """Project one wire onto a basis ket without renormalizing.

    Returns the unnormalized branch (same register) and its probability.
    """
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    (wire,) = _check_wires([wire], state.wires)
    amps = apply_matrix(state.amplitudes, basis.projector(outcome), [wire], state.wires)
    branch = Ket.unnormalized(amps)
    return branch, branch.probability()


def contract_wire(state: Ket, wire: int, bra: Ket) -> Ket:
    """Apply <bra| to one wire and drop it from the register."""
    (wire,) = _check_wires([wire], state.wires)
    if state.wires < 2:
        raise WireError("cannot drop the only wire of a register")
    psi = np.moveaxis(state.amplitudes.reshape([2] * state.wires), wire, 0)
    out = np.tensordot(bra.amplitudes.conj(), psi, axes=(0, 0))
    return Ket.unnormalized(out.reshape(-1))


def fidelity(u: Ket, v: Ket) -> float:
    """|<u|v>| / (|u| |v|): 1 exactly when the kets agree up to scale and global phase."""
    denom = u.norm() * v.norm()
    if denom == 0.0:
        raise ValueError("fidelity undefined for a zero vector")
    return abs(u.inner(v)) / denom


def bloch_vector(state: Ket) -> np.ndarray:
    """(<sigma_x>, <sigma_y>, <sigma_z>) of a single-qubit ket, normalized internally."""
    if state.wires != 1:
        raise WireError("Bloch vector needs a one-wire ket")
    c0, c1 = state.amplitudes / state.norm()
    cross = np.conj(c0) * c1
    return np.array([2 * cross.real, 2 * cross.imag, abs(c0) ** 2 - abs(c1) ** 2])


# --- sampling ---------------------------------------------------------------

_BLOCK = 4  # Philox-4x64 emits four 64-bit words per counter step


def uniform_draws(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform doubles in [0, 1) for draw indices ``start .. start+count-1``.

    Draw ``i`` is a pure function of ``(seed, i)``: it is word ``i`` of the
    Philox stream keyed by ``seed``, so any split of an index range into
    chunks reproduces the same values.
    """
    if start < 0 or count < 0:
        raise ValueError("draw indices must be nonnegative")
    bitgen = np.random.Philox(key=int(seed) & ((1 << 64) - 1))
    block, offset = divmod(int(start), _BLOCK)
    bitgen.advance(block)
    raw = bitgen.random_raw(offset + count)[offset:]
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _checked_cdf(probabilities) -> np.ndarray:
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDistributionError("probabilities must be a non-empty 1-D sequence")
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise InvalidDistributionError("probabilities must be finite and nonnegative")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise InvalidDistributionError(f"probabilities sum to {total!r}, not 1")
    return np.cumsum(p)


def _pick(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    # scale u by the exact total so float rounding in the cdf never yields an
    # index past the last nonzero bin
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    return np.minimum(idx, cdf.size - 1)


def sample_outcome(probabilities, seed: int, draw_index: int) -> int:
    """Outcome index for one draw; deterministic in ``(seed, draw_index)``."""
    cdf = _checked_cdf(probabilities)
    return int(_pick(cdf, uniform_draws(seed, draw_index, 1))[0])


def sample_outcomes(probabilities, seed: int, start: int, count: int) -> np.ndarray:
    """Vectorised :func:`sample_outcome` over draw indices ``start .. start+count-1``."""
    cdf = _checked_cdf(probabilities)
    return _pick(cdf, uniform_draws(seed, start, count))
