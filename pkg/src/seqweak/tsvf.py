"""
Pre/post-selected qubit: ABL probabilities, weak values and the closed forms
for the Z-then-X sequential measurement.

The pre-selection is cos(theta)|0> + sin(theta)|1>, the post-selection
cos(phi)|+> + sin(phi)|->.  Between them a Z measurement is followed by an X
measurement; the four sequential operators are

    A = |+><+| |0><0|,   B = |+><+| |1><1|,
    C = |-><-| |0><0|,   D = |-><-| |1><1|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .exceptions import ForbiddenSelectionError, OrthogonalSelectionError
from .qcore import I2, MINUS, ONE, PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z, ZERO, Ket, MatrixOp
from .table import ScenarioTable

OVERLAP_TOL = 1e-12
ABL_DENOM_TOL = 1e-24
PATHS = ("A", "B", "C", "D")
SCHEMES = ("sequence", "modular", "distinctPath")

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SelectionAngles:
    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("selection angles must be finite")

    @property
    def pre(self) -> Ket:
        return Ket([math.cos(self.theta), math.sin(self.theta)])

    @property
    def post(self) -> Ket:
        c, s = math.cos(self.phi), math.sin(self.phi)
        return Ket(c * PLUS.amplitudes + s * MINUS.amplitudes)

    def tsv(self) -> "TwoStateVector":
        return TwoStateVector(self.pre, self.post)


@dataclass(frozen=True)
class TwoStateVector:
    """The pair <Phi| |psi>; ``post`` holds the ket |Phi>."""

    pre: Ket
    post: Ket

    def __post_init__(self):
        if not (self.pre.normalized and self.post.normalized):
            raise ValueError("pre- and post-selected kets must be normalized")
        if self.pre.wires != self.post.wires:
            raise ValueError("pre- and post-selection live on different registers")

    @property
    def overlap(self) -> complex:
        return self.post.inner(self.pre)

    def amplitude(self, op) -> complex:
        """<Phi| op |psi>."""
        return complex(np.vdot(self.post.amplitudes, np.asarray(op) @ self.pre.amplitudes))


class AmplitudeQuad(NamedTuple):
    a: float
    b: float
    c: float
    d: float

    @property
    def total(self) -> float:
        """a + b + c + d, which equals <Phi|psi>."""
        return self.a + self.b + self.c + self.d


def transition_amplitudes(angles: SelectionAngles) -> AmplitudeQuad:
    ct, st = math.cos(angles.theta), math.sin(angles.theta)
    cp, sp = math.cos(angles.phi), math.sin(angles.phi)
    return AmplitudeQuad(ct * cp / _SQRT2, st * cp / _SQRT2, ct * sp / _SQRT2, -st * sp / _SQRT2)


# --- operators --------------------------------------------------------------


def _outer(u: Ket, v: Ket) -> np.ndarray:
    return np.outer(u.amplitudes, v.amplitudes.conj())


def _sequential(later: Ket, earlier: Ket) -> np.ndarray:
    # |x><x| |z><z|
    return _outer(later, later) @ _outer(earlier, earlier)


PATH_OPERATORS: dict[str, MatrixOp] = {
    "A": MatrixOp(_sequential(PLUS, ZERO), name="A"),
    "B": MatrixOp(_sequential(PLUS, ONE), name="B"),
    "C": MatrixOp(_sequential(MINUS, ZERO), name="C"),
    "D": MatrixOp(_sequential(MINUS, ONE), name="D"),
}

_NAMED = {
    "I": MatrixOp(I2, name="I"),
    "X": MatrixOp(SIGMA_X, name="X"),
    "Y": MatrixOp(SIGMA_Y, name="Y"),
    "Z": MatrixOp(SIGMA_Z, name="Z"),
    "P0": MatrixOp(_outer(ZERO, ZERO), name="P0"),
    "P1": MatrixOp(_outer(ONE, ONE), name="P1"),
    "Pplus": MatrixOp(_outer(PLUS, PLUS), name="Pplus"),
    "Pminus": MatrixOp(_outer(MINUS, MINUS), name="Pminus"),
    "ME": MatrixOp(0.5 * (I2 - 1j * SIGMA_Y), name="ME"),
    "MO": MatrixOp(0.5 * (I2 + 1j * SIGMA_Y), name="MO"),
    "SXZ": MatrixOp(-1j * SIGMA_Y, name="SXZ"),
    **PATH_OPERATORS,
}


def named_operator(name: str) -> MatrixOp:
    """Look up a single-qubit operator by name (A-D, ME, MO, SXZ, I, X, Y, Z, P0, P1, Pplus, Pminus)."""
    try:
        return _NAMED[name]
    except KeyError:
        raise KeyError(f"unknown operator {name!r}; choose from {sorted(_NAMED)}") from None


def operator_names() -> list[str]:
    return sorted(_NAMED)


@dataclass(frozen=True)
class KrausSet:
    """Labeled measurement operators for one scheme.

    ``complete`` asserts sum K^dag K = I and is verified on construction.
    Sets without it are still valid for :func:`abl_probability`, which only
    normalizes over the listed outcomes.
    """

    outcomes: tuple[tuple[str, MatrixOp], ...]
    complete: bool = False

    def __post_init__(self):
        outcomes = tuple((str(label), op) for label, op in self.outcomes)
        object.__setattr__(self, "outcomes", outcomes)
        labels = [label for label, _ in outcomes]
        if not labels:
            raise ValueError("a Kraus set needs at least one outcome")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate outcome labels in {labels}")
        dims = {op.matrix.shape for _, op in outcomes}
        if len(dims) != 1:
            raise ValueError(f"mixed operator dimensions {sorted(dims)}")
        if self.complete and not self.is_complete():
            raise ValueError("Kraus set tagged complete does not satisfy sum K^dag K = I")

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.outcomes]

    def __getitem__(self, label: str) -> MatrixOp:
        for lab, op in self.outcomes:
            if lab == label:
                return op
        raise KeyError(f"no outcome {label!r} in {self.labels}")

    def completeness_sum(self) -> np.ndarray:
        return sum(op.matrix.conj().T @ op.matrix for _, op in self.outcomes)

    def is_complete(self, atol: float = 1e-12) -> bool:
        total = self.completeness_sum()
        return bool(np.allclose(total, np.eye(total.shape[0]), rtol=0, atol=atol))


def path_set(path: str) -> KrausSet:
    """Two-outcome set {X, 1 - X} that clicks only on one path."""
    op = PATH_OPERATORS[path]
    return KrausSet(((path, op), ("not " + path, MatrixOp(I2 - op.matrix, name="1-" + path))))


def sequential_kraus_sets() -> dict[str, KrausSet]:
    """The scheme Kraus sets keyed ``sequence``, ``modular`` and ``A``..``D``."""
    sets = {
        "sequence": KrausSet(tuple(PATH_OPERATORS.items()), complete=True),
        "modular": KrausSet((("ME", _NAMED["ME"]), ("MO", _NAMED["MO"])), complete=True),
    }
    sets.update({p: path_set(p) for p in PATHS})
    return sets


# --- ABL and weak values ----------------------------------------------------


def abl_distribution(tsv: TwoStateVector, kraus: KrausSet) -> dict[str, float]:
    weights = {label: abs(tsv.amplitude(op)) ** 2 for label, op in kraus.outcomes}
    denom = sum(weights.values())
    if denom < ABL_DENOM_TOL:
        raise ForbiddenSelectionError(
            f"every outcome of {kraus.labels} has vanishing amplitude for this pre/post pair"
        )
    return {label: w / denom for label, w in weights.items()}


def abl_probability(tsv: TwoStateVector, kraus: KrausSet, label: str) -> float:
    """|<Phi|K_k|psi>|^2 / sum_j |<Phi|K_j|psi>|^2."""
    if label not in kraus.labels:
        raise KeyError(f"no outcome {label!r} in {kraus.labels}")
    return abl_distribution(tsv, kraus)[label]


def weak_value(tsv: TwoStateVector, op) -> complex:
    """<Phi|op|psi> / <Phi|psi>."""
    overlap = tsv.overlap
    if abs(overlap) < OVERLAP_TOL:
        raise OrthogonalSelectionError("pre- and post-selected states are orthogonal")
    return tsv.amplitude(op) / overlap


def _guard_total(quad: AmplitudeQuad) -> float:
    total = quad.total
    if abs(total) < OVERLAP_TOL:
        raise OrthogonalSelectionError("pre- and post-selected states are orthogonal")
    return total


def closed_form_weak_values(angles: SelectionAngles) -> dict[str, float]:
    """Weak values of A-D and of the modular operators from the transition amplitudes."""
    quad = transition_amplitudes(angles)
    total = _guard_total(quad)
    a, b, c, d = quad
    return {
        "A": a / total,
        "B": b / total,
        "C": c / total,
        "D": d / total,
        "ME": (a + d) / total,
        "MO": (b + c) / total,
        "SXZ": (a + d - b - c) / total,
    }


def _ratio(num: float, den: float, what: str) -> float:
    if den < ABL_DENOM_TOL:
        raise ForbiddenSelectionError(f"{what}: no outcome is possible for this pre/post pair")
    return num / den


def closed_form_probabilities(angles: SelectionAngles, scheme: str) -> dict[str, float]:
    """Closed-form outcome probabilities for one scheme.

    ``distinctPath`` returns the click probability of each of the four
    separate one-path measurements, so its values do not sum to one.
    """
    a, b, c, d = transition_amplitudes(angles)
    if scheme == "sequence":
        den = a * a + b * b + c * c + d * d
        return {k: _ratio(v * v, den, scheme) for k, v in zip(PATHS, (a, b, c, d))}
    if scheme == "modular":
        even, odd = (a + d) ** 2, (b + c) ** 2
        return {"ME": _ratio(even, even + odd, scheme), "MO": _ratio(odd, even + odd, scheme)}
    if scheme == "distinctPath":
        quad = (a, b, c, d)
        total = sum(quad)
        out = {}
        for path, x in zip(PATHS, quad):
            rest = total - x
            out[path] = _ratio(x * x, x * x + rest * rest, f"path {path}")
        return out
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def scheme_kraus_sets(scheme: str) -> dict[str, KrausSet]:
    """Kraus set(s) that realise ``scheme``, keyed by the label whose probability is reported."""
    sets = sequential_kraus_sets()
    if scheme == "distinctPath":
        return {p: sets[p] for p in PATHS}
    if scheme in ("sequence", "modular"):
        return {label: sets[scheme] for label in sets[scheme].labels}
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def scenario_probabilities(angles: SelectionAngles, scheme: str) -> ScenarioTable:
    table = ScenarioTable()
    for label, p in closed_form_probabilities(angles, scheme).items():
        table.add(angles.theta, angles.phi, scheme, label, "probability", p)
    return table


# --- the deterministic-path condition ---------------------------------------


@dataclass(frozen=True)
class GoldenRoot:
    """One solution of cot^2 + cot - 1 = 0 with theta = phi = arccot(cot)."""

    sign: int
    cot: float
    angles: SelectionAngles

    @property
    def residual(self) -> float:
        return self.cot ** 2 + self.cot - 1.0


def deterministic_angles() -> list[GoldenRoot]:
    """Both roots, positive cotangent first."""
    roots = []
    for sign in (+1, -1):
        cot = (-1 + sign * math.sqrt(5.0)) / 2
        theta = math.atan2(1.0, cot)  # arccot into (0, pi)
        roots.append(GoldenRoot(sign, cot, SelectionAngles(theta, theta)))
    return roots


def golden_angles(sign: int = +1) -> SelectionAngles:
    for root in deterministic_angles():
        if root.sign == sign:
            return root.angles
    raise ValueError("sign must be +1 or -1")


def resch_steinberg_rhs(tsv: TwoStateVector, first, second, g: float) -> float:
    """(g^2/2) Re[{A2 A1}_w + {A1}_w conj({A2}_w)] for A1 at t1 and A2 at t2."""
    a1, a2 = np.asarray(first), np.asarray(second)
    joint = weak_value(tsv, a2 @ a1)
    w1, w2 = weak_value(tsv, a1), weak_value(tsv, a2)
    return 0.5 * g * g * (joint + w1 * np.conj(w2)).real


def weak_values_table(angles: SelectionAngles, labels: Iterable[str] = ("A", "B", "C", "D")) -> ScenarioTable:
    tsv = angles.tsv()
    table = ScenarioTable()
    for label in labels:
        w = weak_value(tsv, named_operator(label))
        table.add(angles.theta, angles.phi, "weakValue", label, "weakValueRe", w.real)
        table.add(angles.theta, angles.phi, "weakValue", label, "weakValueIm", w.imag)
    return table
