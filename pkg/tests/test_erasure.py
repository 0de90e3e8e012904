import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from seqweak.erasure import (
    OUTCOMES,
    PathLabel,
    ShotTally,
    Strength,
    build_gates,
    closed_form_meter,
    correct_failed_erasure,
    estimate_weak_value,
    joint_distribution,
    rotation,
    run_protocol,
    sample_protocol,
)
from seqweak.exceptions import DegenerateBranchError, ForbiddenSelectionError
from seqweak.qcore import MINUS, ONE, PLUS, SIGMA_X, ZERO, Ket, fidelity, is_unitary
from seqweak.tsvf import SelectionAngles, abl_probability, golden_angles, path_set, weak_value, named_operator

from conftest import angles as angle_st, couplings, paths as path_st

GOLDEN = golden_angles(+1)
HALF_PI = math.pi / 2


def circuit_oracle(angles, path, g):
    """Whole-register matrices built with np.kron only; returns (success, fail) system-meter kets."""
    i2 = np.eye(2)
    p0, p1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    cnot = np.kron(p0, i2) + np.kron(p1, SIGMA_X)
    xk = {"+": PLUS.amplitudes, "-": MINUS.amplitudes}[path.x_sign]
    zk = (ZERO if path.z_bit == 0 else ONE).amplitudes
    proj = np.kron(np.outer(xk, xk), np.outer(zk, zk))
    rg = np.array([[math.cos(g), 1j * math.sin(g)], [1j * math.sin(g), math.cos(g)]])
    ctrl = np.kron(proj, rg) + np.kron(np.eye(4) - proj, i2)
    psi1 = np.kron(np.kron(angles.pre.amplitudes, [1, 0]), [1, 0])
    psi3 = ctrl @ np.kron(cnot, i2) @ psi1
    out = []
    for anc in (PLUS.amplitudes, MINUS.amplitudes):
        bra = np.kron(np.kron(i2, anc.conj()[None, :]), i2)
        out.append(bra @ psi3)
    return out


def meter_oracle(state, post):
    return np.kron(post.amplitudes.conj()[None, :], np.eye(2)) @ state


class TestLabels:
    def test_bijection(self):
        assert {p.value for p in PathLabel} == {("+", 0), ("+", 1), ("-", 0), ("-", 1)}
        assert PathLabel.A.value == ("+", 0)
        assert PathLabel.D.value == ("-", 1)

    def test_swap(self):
        assert PathLabel.A.swapped() is PathLabel.C
        assert PathLabel.B.swapped() is PathLabel.D
        assert all(p.swapped().swapped() is p for p in PathLabel)

    def test_parse(self):
        assert PathLabel.parse("c") is PathLabel.C
        with pytest.raises(ValueError):
            PathLabel.parse("E")

    def test_strength(self):
        assert Strength(1).g == pytest.approx(HALF_PI)
        assert Strength.from_g(0.3).g == pytest.approx(0.3, abs=1e-15)
        with pytest.raises(ValueError):
            Strength(1.5)
        with pytest.raises(ValueError):
            Strength.from_g(2.0)
        assert Strength(0.2).g < Strength(0.4).g


class TestGates:
    def test_r_zero_identity(self):
        np.testing.assert_allclose(rotation(0.0), np.eye(2), atol=0)

    def test_r_half_pi(self):
        np.testing.assert_allclose(rotation(HALF_PI) @ ZERO.amplitudes, [0, 1j], atol=1e-16)

    @given(couplings, path_st)
    def test_unitary(self, g, path):
        gates = build_gates(Strength.from_g(g), PathLabel[path])
        for op in (gates.cnot, gates.rotation, gates.controlled, *gates.family.values()):
            assert is_unitary(op.matrix, atol=1e-12)

    def test_cnot_rules(self):
        cnot = build_gates(Strength(0.5), PathLabel.A).cnot.matrix
        for xi in (ZERO, ONE, PLUS, MINUS):
            np.testing.assert_allclose(cnot @ np.kron(ZERO.amplitudes, xi.amplitudes), np.kron(ZERO.amplitudes, xi.amplitudes))
            np.testing.assert_allclose(
                cnot @ np.kron(ONE.amplitudes, xi.amplitudes), np.kron(ONE.amplitudes, SIGMA_X @ xi.amplitudes)
            )

    def test_controlled_rotation_only_on_its_branch(self):
        g = 0.7
        ctrl = build_gates(Strength.from_g(g), PathLabel.A).controlled.matrix
        untouched = np.kron(np.kron(MINUS.amplitudes, ZERO.amplitudes), ZERO.amplitudes)
        np.testing.assert_allclose(ctrl @ untouched, untouched, atol=1e-15)
        hit = np.kron(np.kron(PLUS.amplitudes, ZERO.amplitudes), ZERO.amplitudes)
        expected = np.kron(np.kron(PLUS.amplitudes, ZERO.amplitudes), rotation(g) @ ZERO.amplitudes)
        np.testing.assert_allclose(ctrl @ hit, expected, atol=1e-15)

    def test_family(self):
        gates = build_gates(Strength.from_g(0.4), PathLabel.C)
        np.testing.assert_allclose(gates.family[("-", 0)].matrix, rotation(0.4))
        for key in (("+", 0), ("+", 1), ("-", 1)):
            np.testing.assert_allclose(gates.family[key].matrix, np.eye(2))


class TestRunProtocol:
    @given(angle_st, angle_st, couplings, path_st)
    def test_matches_oracle(self, theta, phi, g, path):
        sel = SelectionAngles(theta, phi)
        lab = PathLabel[path]
        try:
            out = run_protocol(sel, lab, Strength.from_g(g))
        except DegenerateBranchError:
            return
        succ, fail = circuit_oracle(sel, lab, g)
        assert np.max(np.abs(out.success.state.amplitudes - succ)) <= 1e-14
        assert np.max(np.abs(out.fail.state.amplitudes - fail)) <= 1e-14
        assert np.max(np.abs(out.success.meter.amplitudes - meter_oracle(succ, sel.post))) <= 1e-14

    @given(angle_st, angle_st, couplings, path_st)
    def test_branch_completeness(self, theta, phi, g, path):
        out = run_protocol(SelectionAngles(theta, phi), PathLabel[path], Strength.from_g(g))
        assert abs(out.success.probability + out.fail.probability - 1) <= 1e-12
        for br in (out.success, out.fail):
            assert abs(br.postselect_probability + br.reject_probability - br.probability) <= 1e-12

    @given(angle_st, angle_st, couplings, path_st)
    def test_step5_closed_forms(self, theta, phi, g, path):
        sel = SelectionAngles(theta, phi)
        out = run_protocol(sel, PathLabel[path], Strength.from_g(g))
        closed = closed_form_meter(sel, PathLabel[path], g).amplitudes
        assert np.max(np.abs(out.success.meter.amplitudes - closed)) <= 1e-14

    def test_step5_golden_cases_written_in_theta(self):
        # alpha = gamma = cos, beta = delta = sin
        c, s = math.cos(GOLDEN.theta), math.sin(GOLDEN.theta)
        g = 0.37
        zero, ptr = ZERO.amplitudes, rotation(g) @ ZERO.amplitudes
        cases = {
            "A": c * c * ptr + (2 * c * s - s * s) * zero,
            "B": (c * c + c * s - s * s) * zero + c * s * ptr,
            "C": (c * c + c * s - s * s) * zero + c * s * ptr,
            "D": (2 * c * s + c * c) * zero - s * s * ptr,
        }
        for path, expected in cases.items():
            got = run_protocol(GOLDEN, PathLabel[path], Strength.from_g(g)).success.meter.amplitudes
            np.testing.assert_allclose(got, 0.5 * expected, atol=1e-15)

    def test_states_reproduce(self):
        sel = SelectionAngles(0.4, 1.3)
        out = run_protocol(sel, PathLabel.B, Strength(0.3))
        gates = build_gates(Strength(0.3), PathLabel.B)
        psi2 = gates.cnot.matrix @ out.psi1.amplitudes.reshape(4, 2)
        assert np.max(np.abs(psi2.reshape(-1) - out.psi2.amplitudes)) <= 1e-14
        assert np.max(np.abs(gates.controlled.matrix @ out.psi2.amplitudes - out.psi3.amplitudes)) <= 1e-14

    @pytest.mark.parametrize("path", "BC")
    @pytest.mark.parametrize("g", [0.01, 0.3, 1.0, HALF_PI])
    def test_golden_bc_pointer_exactly_at_g(self, path, g):
        meter = run_protocol(GOLDEN, PathLabel[path], Strength.from_g(g)).success.meter
        assert fidelity(meter, Ket(rotation(g) @ ZERO.amplitudes)) == pytest.approx(1.0, abs=1e-14)
        # the |0> coefficient cos^2 + cos sin - sin^2 vanishes
        c, s = math.cos(GOLDEN.theta), math.sin(GOLDEN.theta)
        assert abs(c * c + c * s - s * s) <= 1e-15

    def test_trivial_path_a_strong(self):
        out = run_protocol(SelectionAngles(0, 0), PathLabel.A, Strength(1))
        meter = out.success.normalized_meter().amplitudes
        np.testing.assert_allclose(meter / meter[1] * 1j, [0, 1j], atol=1e-15)
        assert fidelity(out.success.meter, Ket([0, 1j])) == pytest.approx(1, abs=1e-15)
        assert out.success.meter_probabilities()[1] == pytest.approx(1.0, abs=1e-15)

    def test_golden_path_a_strong(self):
        p1 = run_protocol(GOLDEN, PathLabel.A, Strength(1)).success.meter_probabilities()[1]
        assert p1 == pytest.approx(abl_probability(GOLDEN.tsv(), path_set("A"), "A"), abs=1e-12)
        assert p1 == pytest.approx(0.7236068, abs=5e-8)

    @given(angle_st, angle_st, path_st)
    def test_zero_strength(self, theta, phi, path):
        sel = SelectionAngles(theta, phi)
        out = run_protocol(sel, PathLabel[path], Strength(0))
        assert out.success.probability == pytest.approx(0.5, abs=1e-15)
        assume(out.success.postselect_probability > 1e-20)
        assert out.success.meter_probabilities()[1] <= 1e-15

    @given(angle_st, angle_st, path_st)
    def test_strong_limit_equals_abl(self, theta, phi, path):
        sel = SelectionAngles(theta, phi)
        try:
            expected = abl_probability(sel.tsv(), path_set(path), path)
            out = run_protocol(sel, PathLabel[path], Strength(1))
        except (ForbiddenSelectionError, DegenerateBranchError):
            return
        assert abs(out.success.meter_probabilities()[1] - expected) <= 1e-10

    def test_unpostselectable(self):
        # psi = |0>, Phi = -|1>: the success branch never reaches Phi at g = 0,
        # and the fail branch is the same up to beta -> -beta
        with pytest.raises(DegenerateBranchError):
            run_protocol(SelectionAngles(0.0, 3 * math.pi / 4), PathLabel.B, Strength(0))


class TestCorrection:
    @pytest.mark.parametrize("path,partner", [("A", "C"), ("B", "D"), ("C", "A"), ("D", "B")])
    def test_swap_pairs(self, path, partner):
        sel = SelectionAngles(0.8, 2.1)
        st_ = Strength(0.6)
        fixed = correct_failed_erasure(run_protocol(sel, PathLabel[path], st_))
        fresh = run_protocol(sel, PathLabel[partner], st_)
        assert fixed.fail.path is PathLabel[partner]
        assert fixed.path is PathLabel[path]
        assert fidelity(fixed.fail.state, fresh.success.state) >= 1 - 1e-12
        np.testing.assert_allclose(fixed.fail.state.amplitudes, fresh.success.state.amplitudes, atol=1e-14)

    def test_zero_strength(self):
        sel = SelectionAngles(0.3, 0.9)
        out = correct_failed_erasure(run_protocol(sel, PathLabel.A, Strength(0)))
        assert out.fail.meter_probabilities()[1] <= 1e-30
        assert out.success.meter_probabilities()[1] <= 1e-30

    def test_idempotent(self):
        out = correct_failed_erasure(run_protocol(GOLDEN, PathLabel.B, Strength(0.5)))
        assert correct_failed_erasure(out) is out

    @given(angle_st, angle_st, couplings, path_st)
    def test_equivalence(self, theta, phi, g, path):
        sel = SelectionAngles(theta, phi)
        fixed = correct_failed_erasure(run_protocol(sel, PathLabel[path], Strength.from_g(g)))
        fresh = run_protocol(sel, PathLabel[path].swapped(), Strength.from_g(g))
        assert fidelity(fixed.fail.state, fresh.success.state) >= 1 - 1e-12


class TestEstimate:
    @pytest.mark.parametrize("g", [1e-3, 0.05, 0.5, 1.2, HALF_PI])
    def test_golden_c_exact(self, g):
        est = estimate_weak_value(run_protocol(GOLDEN, PathLabel.C, Strength.from_g(g)))
        assert abs(est - 1.0) <= 1e-10

    def test_golden_a_weak(self):
        est = estimate_weak_value(run_protocol(GOLDEN, PathLabel.A, Strength.from_g(0.01)))
        assert abs(est - 0.618034) <= 5e-4
        assert abs(est.imag) <= 1e-12

    def test_trivial_a_weak(self):
        sel = SelectionAngles(0, 0)
        est = estimate_weak_value(run_protocol(sel, PathLabel.A, Strength.from_g(0.01)))
        assert abs(est - 1.0) <= 5e-4

    def test_zero_coupling_rejected(self):
        with pytest.raises(ValueError):
            estimate_weak_value(run_protocol(GOLDEN, PathLabel.A, Strength(0)))

    @given(angle_st, angle_st, path_st)
    def test_second_order_convergence(self, theta, phi, path):
        sel = SelectionAngles(theta, phi)
        tsv = sel.tsv()
        assume(abs(tsv.overlap) > 0.3)
        w = weak_value(tsv, named_operator(path))
        errs = [abs(estimate_weak_value(run_protocol(sel, PathLabel[path], Strength.from_g(g))) - w) for g in (0.02, 0.01)]
        # O(g^2) with an O(1) constant for well-conditioned pairs
        assert errs[1] <= errs[0] / 3 + 1e-12
        assert errs[0] <= 0.02 * (1 + abs(w)) ** 3


class TestSampling:
    def test_trivial_path_a(self):
        tally = sample_protocol(SelectionAngles(0, 0), PathLabel.A, Strength(1), 10_000, 3)
        assert tally.count("success", "phi") > 0
        assert tally.count("success", "phi", 0) == 0

    def test_golden_b_certain(self):
        tally = sample_protocol(GOLDEN, PathLabel.B, Strength(1), 100_000, 7)
        assert tally.shots == 100_000
        assert tally.meter_one_frequency() == 1.0

    def test_golden_a_frequency(self):
        tally = sample_protocol(GOLDEN, PathLabel.A, Strength(1), 100_000, 11)
        p = 0.7236067977
        n = tally.count("success", "phi")
        band = 3 * math.sqrt(p * (1 - p) / n)
        assert abs(tally.meter_one_frequency() - p) <= band

    def test_golden_a_frequency_1e5_kept(self):
        # only ~2.5% of runs pass erasure and post-selection here, so draw
        # enough runs to keep about 1e5; the 3 sigma band is then 0.0045
        out = run_protocol(GOLDEN, PathLabel.A, Strength(1))
        shots = math.ceil(1e5 / out.success.postselect_probability)
        tally = sample_protocol(GOLDEN, PathLabel.A, Strength(1), shots, 7)
        assert tally.count("success", "phi") >= 0.98e5
        assert abs(tally.meter_one_frequency() - 0.7236068) <= 0.0045

    def test_counts_sum(self):
        tally = sample_protocol(SelectionAngles(0.4, 0.2), PathLabel.D, Strength(0.3), 5000, 1)
        assert sum(tally.counts.values()) == 5000
        assert sum(tally.as_dict().values()) == 5000

    def test_joint_distribution_marginals(self):
        out = run_protocol(SelectionAngles(0.4, 0.2), PathLabel.D, Strength(0.3))
        probs = dict(zip(OUTCOMES, joint_distribution(out)))
        assert sum(v for k, v in probs.items() if k[0] == "success") == pytest.approx(out.success.probability, abs=1e-12)
        assert sum(v for k, v in probs.items() if k[:2] == ("success", "phi")) == pytest.approx(
            out.success.postselect_probability, abs=1e-12
        )

    @pytest.mark.parametrize("chunk,workers", [(1000, None), (333, 4), (7919, 3)])
    def test_chunking_invariant(self, chunk, workers):
        args = (SelectionAngles(0.9, 0.3), PathLabel.C, Strength(0.7), 20_000, 5)
        whole = sample_protocol(*args)
        split = sample_protocol(*args, chunk_size=chunk, workers=workers)
        assert whole.counts == split.counts

    def test_merge(self):
        a = ShotTally(1, 2, {("success", "phi", 1): 2})
        b = ShotTally(1, 3, {("fail", "phi", 0): 3})
        m = a.merge(b)
        assert m.shots == 5 and m.count() == 5
        with pytest.raises(ValueError):
            a.merge(ShotTally(2))

    def test_bad_shots(self):
        with pytest.raises(ValueError):
            sample_protocol(GOLDEN, PathLabel.A, Strength(1), 0, 1)
