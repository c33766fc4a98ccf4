import json
import math

import numpy as np
import pytest

from mergelab.linalg import LinearMap, PureState, fidelity_sq
from mergelab.measure import KrausFamily, build_b_measurement, is_complete
from mergelab.protocols import (
    Correct,
    Direction,
    Measure,
    Message,
    Protocol,
    ProtocolError,
    bell_vectors,
    build_elimination_protocol,
    build_one_way,
    build_two_way,
    classify,
    decode_superposition,
    discriminate,
    elimination_instance,
    enumerate_branches,
    flag_controlled_measurement,
    flag_fourier_measurement,
    identity_protocol,
    initial_state,
    simulate,
)
from mergelab.states import GammaParams


def random_alpha(rng, d=3):
    a = rng.normal(size=d) + 1j * rng.normal(size=d)
    return a / np.linalg.norm(a)


@pytest.fixture(scope="module")
def two_way_report(two_way, instance):
    return simulate(two_way, instance)


@pytest.fixture(scope="module")
def one_way_report(one_way, instance):
    return simulate(one_way, instance)


class TestTwoWay:
    def test_exact(self, two_way_report):
        assert two_way_report.min_fidelity_sq == pytest.approx(1.0, abs=1e-9)
        assert two_way_report.total_prob == pytest.approx(1.0, abs=1e-9)

    def test_cost_and_direction(self, two_way, two_way_report):
        assert two_way.resource_k == 1
        assert two_way_report.cost_bits == 0.0
        assert two_way_report.direction is Direction.TWO_WAY
        assert classify(two_way) is Direction.TWO_WAY

    def test_branch_count(self, two_way_report):
        assert 0 < len(two_way_report.branches) <= 99
        assert all(len(b.transcript) == 2 for b in two_way_report.branches)

    def test_reference_maximally_mixed_before_correction(self, two_way, instance):
        leaves, _ = enumerate_branches(two_way, instance.psi, upto=len(two_way.steps) - 1)
        for leaf in leaves:
            rho = leaf.state().reduced(["R"]).matrix
            assert np.max(np.abs(rho - np.eye(3) / 3)) <= 1e-9
            assert "A" not in leaf.labels

    def test_final_states_pure(self, two_way_report):
        assert all(abs(b.purity - 1) <= 1e-9 for b in two_way_report.branches)

    def test_completion_independence(self, instance):
        p = build_two_way(completion_order=list(range(11))[::-1])
        assert simulate(p, instance).min_fidelity_sq == pytest.approx(1.0, abs=1e-9)

    def test_random_gammas(self):
        from conftest import random_valid_gammas
        from mergelab.states import build_instance

        rng = np.random.default_rng(77)
        for _ in range(2):
            g = random_valid_gammas(rng)
            assert simulate(build_two_way(g), build_instance(g)).min_fidelity_sq == pytest.approx(1.0, abs=1e-9)


class TestOneWay:
    def test_exact(self, one_way_report):
        assert one_way_report.min_fidelity_sq == pytest.approx(1.0, abs=1e-9)
        assert one_way_report.total_prob == pytest.approx(1.0, abs=1e-9)

    def test_cost_and_direction(self, one_way, one_way_report):
        assert one_way.resource_k == 2
        assert one_way_report.cost_bits == 1.0
        assert one_way_report.direction is Direction.ONE_WAY_AB

    def test_resource_consumed(self, one_way_report):
        # every branch ends on exactly (R, Bp, B) in a pure state
        for b in one_way_report.branches:
            assert abs(b.purity - 1) <= 1e-9
            assert isinstance(b.final_state, PureState)

    def test_completion_independence(self, instance):
        p = build_one_way(completion_order=list(range(24))[::-1])
        assert simulate(p, instance).min_fidelity_sq == pytest.approx(1.0, abs=1e-9)

    def test_flag_measurements_complete(self):
        assert is_complete(flag_controlled_measurement())[0]
        assert is_complete(flag_fourier_measurement())[0]

    def test_bell_basis(self):
        b = bell_vectors()
        assert np.allclose(b.conj() @ b.T, np.eye(4))


class TestClassify:
    def test_no_messages_is_one_way(self):
        assert classify(identity_protocol()) is Direction.ONE_WAY_AB

    def test_b_to_a_only(self):
        p = Protocol(1, (Message("B", "A"),))
        assert classify(p) is Direction.ONE_WAY_BA


class TestSimulation:
    def test_identity_protocol_fidelity(self, instance):
        rep = simulate(identity_protocol(), instance)
        # oracle: trace out A, put B' in |0>, overlap with the target
        psi = instance.psi.tensor()
        rho_rb = np.einsum("rab,sac->rbsc", psi, psi.conj())
        t = psi[:, 0, :]  # target amplitudes with B' = 0
        want = np.einsum("rb,rbsc,sc->", t.conj(), rho_rb, t).real
        assert rep.min_fidelity_sq == pytest.approx(want, abs=1e-12)
        assert rep.min_fidelity_sq < 1

    def test_incomplete_family_rejected(self, instance):
        bad = KrausFamily((LinearMap(np.eye(11) / 2, (11,), (11,)),), ("B",))
        with pytest.raises(ProtocolError):
            simulate(Protocol(1, (Measure("B", bad),)), instance)

    def test_non_isometry_rejected(self, instance):
        with pytest.raises(ProtocolError):
            simulate(Protocol(1, (Correct("B", LinearMap(np.eye(11) * 2, (11,), (11,))),)), instance)

    def test_nonlocal_operation_rejected(self, instance):
        with pytest.raises(ProtocolError):
            simulate(Protocol(1, (Measure("A", build_b_measurement("B")),)), instance)

    def test_unknown_outcome_key_rejected(self, instance):
        steps = (Measure("B", build_b_measurement()), Message("B", "A"),
                 Correct("A", {(0,): LinearMap(np.eye(11), (11,), (11,), ("A",), ("A",))}))
        with pytest.raises(ProtocolError):
            simulate(Protocol(1, steps), instance)

    def test_conditioning_needs_a_message(self, instance):
        # A never learns j, so a table keyed by j cannot be used
        steps = (Measure("B", build_b_measurement()),
                 Correct("A", {(j,): LinearMap(np.eye(11), (11,), (11,), ("A",), ("A",)) for j in range(3)}))
        with pytest.raises(ProtocolError):
            simulate(Protocol(1, steps), instance)

    def test_dimension_mismatch(self, instance):
        with pytest.raises(ValueError):
            simulate(Protocol(1, (Correct("B", LinearMap(np.eye(3), (3,), (3,))),)), instance)

    def test_threads_do_not_change_report(self, two_way, instance):
        a = simulate(two_way, instance, threads=1).to_json()
        b = simulate(two_way, instance, threads=4).to_json()
        assert json.dumps(a) == json.dumps(b)

    def test_epsilon(self, instance):
        rep = simulate(identity_protocol(), instance)
        assert rep.epsilon_achieved == pytest.approx(math.sqrt(1 - rep.min_fidelity_sq))

    def test_resource_attached_only_for_k_above_one(self, instance):
        assert initial_state(identity_protocol(1), instance.psi).dims == (3, 11, 11)
        assert initial_state(identity_protocol(2), instance.psi).dims == (3, 11, 11, 2, 2)


class TestApplications:
    @pytest.mark.parametrize("alpha", [(1, 0, 0), tuple(np.ones(3) / np.sqrt(3))])
    def test_decode_examples(self, two_way, one_way, alpha):
        for p in (two_way, one_way):
            assert decode_superposition(p, alpha) == pytest.approx(1.0, abs=1e-9)

    def test_decode_random(self, two_way, one_way):
        rng = np.random.default_rng(99)
        for _ in range(20):
            a = random_alpha(rng)
            assert decode_superposition(two_way, a) == pytest.approx(1.0, abs=1e-9)
            assert decode_superposition(one_way, a) == pytest.approx(1.0, abs=1e-9)

    def test_decode_rejects_unnormalized(self, two_way):
        with pytest.raises(ValueError):
            decode_superposition(two_way, [1, 1, 0])

    @pytest.mark.parametrize("l", [0, 1, 2])
    def test_discriminate(self, two_way, one_way, l):
        for p in (two_way, one_way):
            res = discriminate(p, l)
            assert res.outcome == l
            assert res.probability == pytest.approx(1.0, abs=1e-9)

    def test_elimination_discriminates_but_loses_coherence(self):
        p, inst = build_elimination_protocol(), elimination_instance()
        assert classify(p) is Direction.ONE_WAY_AB
        for l in range(3):
            res = discriminate(p, l, inst)
            assert res.outcome == l and res.probability == pytest.approx(1.0, abs=1e-12)
        alpha = np.array([1, 0, 1]) / np.sqrt(2)
        assert decode_superposition(p, alpha, inst) < 1 - 1e-3
        assert simulate(p, inst).min_fidelity_sq < 1 - 1e-3


class TestJson:
    def test_protocol_serializes(self, one_way):
        obj = json.loads(json.dumps(one_way.to_json()))
        assert obj["resourceK"] == 2 and obj["direction"] == "one-way-AB"
        assert [s["type"] for s in obj["steps"]] == ["correct", "correct", "measure", "measure", "message", "correct"]

    def test_report_serializes(self, two_way_report):
        obj = json.loads(json.dumps(two_way_report.to_json(include_states=True)))
        assert obj["direction"] == "two-way"
        assert len(obj["branches"]) == len(two_way_report.branches)
        assert sum(b["prob"] for b in obj["branches"]) == pytest.approx(1.0)
