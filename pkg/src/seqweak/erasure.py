"""
Variable-strength measurement of a single path operator by erasure.

Register layout: wire 0 system, wire 1 ancilla, wire 2 meter.  The circuit is

    |psi>|0>|0>  --CNOT(0->1)-->  --C_ij R(g)-->  ancilla measured in X
                 --> system post-selected on <Phi|  --> meter read out

An X-basis ancilla result of |+> erases the Z record ("success"); |-> flips
the sign of the |1> component of the pre-selection ("fail"), which a
sigma_z on the system turns into a success run of the partner path.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateBranchError
from .qcore import (
    I2,
    MINUS,
    ONE,
    PLUS,
    SIGMA_X,
    SIGMA_Z,
    ZERO,
    Ket,
    MatrixOp,
    apply_gate,
    bloch_vector,
    contract_wire,
    kron,
    sample_outcomes,
)
from .tsvf import SelectionAngles

SYSTEM, ANCILLA, METER = 0, 1, 2
BRANCH_TOL = 1e-24


class PathLabel(enum.Enum):
    """Path named by its (X result at t2, Z result at t1)."""

    A = ("+", 0)
    B = ("+", 1)
    C = ("-", 0)
    D = ("-", 1)

    @property
    def x_sign(self) -> str:
        return self.value[0]

    @property
    def z_bit(self) -> int:
        return self.value[1]

    @property
    def x_ket(self) -> Ket:
        return PLUS if self.x_sign == "+" else MINUS

    @property
    def z_ket(self) -> Ket:
        return ZERO if self.z_bit == 0 else ONE

    def swapped(self) -> "PathLabel":
        """Partner path after a sigma_z correction: A <-> C, B <-> D."""
        return PathLabel(("-" if self.x_sign == "+" else "+", self.z_bit))

    @classmethod
    def parse(cls, text: "str | PathLabel") -> "PathLabel":
        if isinstance(text, cls):
            return text
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown path {text!r}; expected one of A, B, C, D") from None


@dataclass(frozen=True)
class Strength:
    """Normalized coupling strength; s = 1 rotates the meter to an orthogonal pointer."""

    s: float

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise ValueError(f"strength must lie in [0, 1], got {self.s}")

    @property
    def g(self) -> float:
        return self.s * math.pi / 2

    @classmethod
    def from_g(cls, g: float) -> "Strength":
        if not 0.0 <= g <= math.pi / 2 + 1e-15:
            raise ValueError(f"rotation angle must lie in [0, pi/2], got {g}")
        return cls(min(1.0, g / (math.pi / 2)))


def rotation(g: float) -> np.ndarray:
    """R(g) = exp(i g sigma_x)."""
    return math.cos(g) * I2 + 1j * math.sin(g) * SIGMA_X


class Gates(NamedTuple):
    cnot: MatrixOp
    rotation: MatrixOp
    controlled: MatrixOp
    family: dict  # (x_sign, z_bit) -> meter operator R_ij^kl(g)


def build_gates(strength: Strength, path: PathLabel) -> Gates:
    g = strength.g
    cnot = MatrixOp(
        np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
        targets=(SYSTEM, ANCILLA),
        unitary=True,
        name="CNOT",
    )
    rot = MatrixOp(rotation(g), targets=(METER,), unitary=True, name="R")
    proj = kron(_proj(path.x_ket), _proj(path.z_ket))
    controlled = MatrixOp(
        np.kron(proj, rot.matrix) + np.kron(np.eye(4) - proj, I2),
        targets=(SYSTEM, ANCILLA, METER),
        unitary=True,
        name=f"C{path.x_sign}{path.z_bit}R",
    )
    family = {
        other.value: rot if other is path else MatrixOp(I2, targets=(METER,), unitary=True, name="I")
        for other in PathLabel
    }
    return Gates(cnot, rot, controlled, family)


def _proj(ket: Ket) -> MatrixOp:
    return MatrixOp(np.outer(ket.amplitudes, ket.amplitudes.conj()))


def _orthogonal(ket: Ket) -> Ket:
    a, b = ket.amplitudes
    return Ket([-np.conj(b), np.conj(a)])


@dataclass(frozen=True)
class Branch:
    """One erasure result, after the ancilla has been measured and discarded.

    ``state`` is the unnormalized (system, meter) ket, ``meter`` the
    unnormalized meter ket after post-selecting the system on <Phi|.
    Probabilities are joint with the erasure result.
    """

    outcome: str
    path: PathLabel
    state: Ket
    probability: float
    meter: Ket
    postselect_probability: float
    reject_probability: float

    @property
    def conditional_postselection(self) -> float:
        """P(Phi | this erasure result)."""
        if self.probability < BRANCH_TOL:
            raise DegenerateBranchError(f"{self.outcome} branch has zero probability")
        return self.postselect_probability / self.probability

    def meter_probabilities(self) -> tuple[float, float]:
        """Z-readout probabilities of the meter given this branch and successful post-selection."""
        if self.postselect_probability < BRANCH_TOL:
            raise DegenerateBranchError(f"{self.outcome} branch never passes post-selection")
        c = self.meter.amplitudes
        p0, p1 = abs(c[0]) ** 2, abs(c[1]) ** 2
        total = p0 + p1
        return p0 / total, p1 / total

    def normalized_meter(self) -> Ket:
        if self.postselect_probability < BRANCH_TOL:
            raise DegenerateBranchError(f"{self.outcome} branch never passes post-selection")
        return self.meter.normalize()


def _branch(outcome: str, path: PathLabel, state: Ket, post: Ket) -> Branch:
    meter = contract_wire(state, 0, post)
    rejected = contract_wire(state, 0, _orthogonal(post))
    return Branch(outcome, path, state, state.probability(), meter, meter.probability(), rejected.probability())


@dataclass(frozen=True)
class ProtocolOutcome:
    angles: SelectionAngles
    path: PathLabel
    strength: Strength
    psi1: Ket
    psi2: Ket
    psi3: Ket
    success: Branch
    fail: Branch
    corrected: bool = False

    @property
    def post(self) -> Ket:
        return self.angles.post


def run_protocol(angles: SelectionAngles, path: PathLabel, strength: Strength) -> ProtocolOutcome:
    path = PathLabel.parse(path)
    gates = build_gates(strength, path)
    psi1 = kron(angles.pre, ZERO, ZERO)
    psi2 = apply_gate(psi1, gates.cnot)
    psi3 = apply_gate(psi2, gates.controlled)
    post = angles.post
    success = _branch("success", path, contract_wire(psi3, ANCILLA, PLUS), post)
    fail = _branch("fail", path, contract_wire(psi3, ANCILLA, MINUS), post)
    if max(success.postselect_probability, fail.postselect_probability) < BRANCH_TOL:
        raise DegenerateBranchError("neither erasure branch can pass post-selection")
    return ProtocolOutcome(angles, path, strength, psi1, psi2, psi3, success, fail)


def correct_failed_erasure(outcome: ProtocolOutcome) -> ProtocolOutcome:
    """Apply sigma_z to the system of the fail branch and relabel its path (A<->C, B<->D)."""
    if outcome.corrected:
        return outcome
    fixed = apply_gate(outcome.fail.state, MatrixOp(SIGMA_Z, targets=(SYSTEM,), unitary=True))
    branch = _branch("fail", outcome.fail.path.swapped(), fixed, outcome.post)
    return replace(outcome, fail=branch, corrected=True)


def closed_form_meter(angles: SelectionAngles, path: PathLabel, g: float) -> Ket:
    """Post-selected meter of the success branch written out term by term.

    With psi = alpha|0> + beta|1> and Phi = gamma|+> + delta|->, the meter is
    1/2 [alpha gamma* R^{+0} + alpha delta* R^{-0} + beta gamma* R^{+1}
    - beta delta* R^{-1}] |0>, where only the measured path carries R(g).
    """
    alpha, beta = angles.pre.amplitudes
    # post = gamma|+> + delta|->
    gamma, delta = np.conj(PLUS.amplitudes) @ angles.post.amplitudes, np.conj(MINUS.amplitudes) @ angles.post.amplitudes
    weights = {
        ("+", 0): alpha * np.conj(gamma),
        ("-", 0): alpha * np.conj(delta),
        ("+", 1): beta * np.conj(gamma),
        ("-", 1): -beta * np.conj(delta),
    }
    pointer = rotation(g) @ ZERO.amplitudes
    out = np.zeros(2, dtype=complex)
    for key, w in weights.items():
        out += w * (pointer if key == PathLabel.parse(path).value else ZERO.amplitudes)
    return Ket.unnormalized(0.5 * out)


def estimate_weak_value(outcome: ProtocolOutcome, strength: Strength | None = None, branch: str = "success") -> complex:
    """Weak value of the measured path inferred from the post-selected meter.

    The pointer rotation angle about sigma_x, atan2(<sigma_y>, <sigma_z>) / 2,
    divided by g gives the real part; -<sigma_x> / (2g) gives the imaginary
    part.  For small g the rotation angle equals arcsin(<sigma_y>) / 2.
    """
    g = (strength or outcome.strength).g
    if g <= 0:
        raise ValueError("weak-value estimate needs a nonzero coupling")
    br = outcome.success if branch == "success" else outcome.fail
    x, y, z = bloch_vector(br.normalized_meter())
    return complex(math.atan2(y, z) / (2 * g), -x / (2 * g))


# --- shot sampling ----------------------------------------------------------

ERASURE = ("success", "fail")
POSTSELECTION = ("phi", "phi_perp")
OUTCOMES = tuple((e, p, m) for e in ERASURE for p in POSTSELECTION for m in (0, 1))


def joint_distribution(outcome: ProtocolOutcome) -> np.ndarray:
    """Exact probabilities over :data:`OUTCOMES` (erasure, post-selection, meter bit)."""
    post = outcome.post
    perp = _orthogonal(post)
    probs = []
    for br in (outcome.success, outcome.fail):
        for bra in (post, perp):
            meter = contract_wire(br.state, 0, bra).amplitudes
            probs.extend([abs(meter[0]) ** 2, abs(meter[1]) ** 2])
    probs = np.array(probs)
    return probs / probs.sum()


@dataclass
class ShotTally:
    seed: int
    shots: int = 0
    counts: Counter = field(default_factory=Counter)

    def __post_init__(self):
        self.counts = Counter(self.counts)

    def merge(self, other: "ShotTally") -> "ShotTally":
        if other.seed != self.seed:
            raise ValueError("cannot merge tallies drawn with different seeds")
        return ShotTally(self.seed, self.shots + other.shots, self.counts + other.counts)

    def count(self, erasure: str | None = None, post: str | None = None, meter: int | None = None) -> int:
        return sum(
            n
            for (e, p, m), n in self.counts.items()
            if (erasure is None or e == erasure) and (post is None or p == post) and (meter is None or m == meter)
        )

    def meter_one_frequency(self, erasure: str = "success", post: str = "phi") -> float:
        """Fraction of shots with this erasure and post-selection result that read meter 1."""
        kept = self.count(erasure, post)
        if kept == 0:
            raise DegenerateBranchError(f"no shots with erasure={erasure}, post={post}")
        return self.count(erasure, post, 1) / kept

    def as_dict(self) -> dict:
        return {f"{e}/{p}/{m}": self.counts.get((e, p, m), 0) for e, p, m in OUTCOMES}


def _tally_range(probs: np.ndarray, seed: int, start: int, count: int) -> ShotTally:
    idx = sample_outcomes(probs, seed, start, count)
    hist = np.bincount(idx, minlength=len(OUTCOMES))
    counts = Counter({OUTCOMES[i]: int(n) for i, n in enumerate(hist) if n})
    return ShotTally(seed, count, counts)


def sample_protocol(
    angles: SelectionAngles,
    path: PathLabel,
    strength: Strength,
    shots: int,
    seed: int,
    chunk_size: int | None = None,
    workers: int | None = None,
) -> ShotTally:
    """Draw ``shots`` runs of the protocol from its exact joint distribution.

    Shot ``k`` uses draw index ``k`` of ``seed``, so the tally does not
    depend on ``chunk_size`` or ``workers``.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = joint_distribution(run_protocol(angles, path, strength))
    chunk = shots if not chunk_size else int(chunk_size)
    starts = range(0, shots, chunk)
    jobs = [(s, min(chunk, shots - s)) for s in starts]
    if workers and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _tally_range(probs, seed, *job), jobs))
    else:
        parts = [_tally_range(probs, seed, *job) for job in jobs]
    total = ShotTally(seed)
    for part in parts:
        total = total.merge(part)
    return total
