import numpy as np
import pytest

from mergelab.linalg import LinearMap, PureState
from mergelab.measure import (
    KrausFamily,
    a_measurement_vectors,
    apply,
    build_a_measurement,
    build_b_measurement,
    conditioning_shift,
    fourier_vectors,
    is_complete,
    rank_one_family,
)
from mergelab.states import GammaParams, pauli_x

from conftest import random_valid_gammas


def family_of(*mats):
    d = mats[0].shape[1]
    return KrausFamily(tuple(LinearMap(m, (d,), (d,), ("q",), ("q",)) for m in mats), ("q",))


class TestCompleteness:
    def test_identity(self):
        ok, res = is_complete(family_of(np.eye(2)))
        assert ok and res == 0

    def test_scaled_pauli_fails(self):
        ok, _ = is_complete(family_of(pauli_x(2).matrix / 2))
        assert not ok

    def test_b_measurement(self):
        assert is_complete(build_b_measurement())[0]

    @pytest.mark.parametrize("j", [0, 1, 2])
    def test_a_measurement(self, j):
        ok, res = is_complete(build_a_measurement(j))
        assert ok and res <= 1e-10

    def test_a_measurement_random_gammas(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            g = random_valid_gammas(rng)
            for j in range(3):
                assert is_complete(build_a_measurement(j, g))[0]


class TestApply:
    def test_b_outcomes_uniform(self, instance):
        f = build_b_measurement()
        for j in range(3):
            prob, post = apply(f, j, instance.psi)
            assert prob == pytest.approx(1 / 3, abs=1e-12)
            assert post.dims == (3, 11, 11)

    def test_identity_family(self, instance):
        f = KrausFamily((LinearMap(np.eye(11), (11,), (11,)),), ("B",))
        prob, post = apply(f, 0, instance.psi)
        assert prob == pytest.approx(1.0)
        assert np.allclose(post.amplitudes, instance.psi.amplitudes)

    def test_zero_branch(self):
        f = family_of(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
        prob, post = apply(f, 0, PureState.basis(1, 2, "q"))
        assert prob == 0 and post is None

    def test_label_mismatch(self):
        with pytest.raises(KeyError):
            apply(family_of(np.eye(2)), 0, PureState.basis(0, 2, "other"))

    def test_branch_probabilities_sum_to_one(self, instance):
        total = 0.0
        fb = build_b_measurement()
        for j in range(3):
            pj, post = apply(fb, j, instance.psi)
            fa = build_a_measurement(j)
            for k in range(33):
                pk, post_k = apply(fa, k, post)
                total += pj * pk
                if post_k is not None:
                    assert "A" not in post_k.labels
        assert total == pytest.approx(1.0, abs=1e-10)


class TestBMeasurement:
    def test_m0_keeps_first_nine_block_vector(self):
        assert np.allclose(build_b_measurement()[0].matrix @ np.eye(11)[2], np.eye(11)[2])

    def test_m1_kills_it(self):
        assert np.allclose(build_b_measurement()[1].matrix @ np.eye(11)[2], 0)

    def test_m2_scales_two_block(self):
        assert np.allclose(build_b_measurement()[2].matrix @ np.eye(11)[0], np.sqrt(1 / 3) * np.eye(11)[0])


class TestFourierVectors:
    def test_uniform_vector(self):
        assert np.allclose(fourier_vectors()[(0, 4, 8)][0], (np.eye(9)[0] + np.eye(9)[4] + np.eye(9)[8]) / np.sqrt(3))

    def test_each_triple_orthonormal(self):
        for vecs in fourier_vectors().values():
            v = np.array(vecs)
            assert np.allclose(v.conj() @ v.T, np.eye(3), atol=1e-12)

    def test_triples_disjoint(self):
        all_vecs = np.array([w for vecs in fourier_vectors().values() for w in vecs])
        assert np.allclose(all_vecs.conj() @ all_vecs.T, np.eye(9), atol=1e-12)

    def test_half_period_phase_is_not_orthonormal(self):
        # exp(i pi n t / 3) would be the alternative reading; it fails orthogonality
        v = np.array([[np.exp(1j * np.pi * n * t / 3) for t in range(3)] for n in range(3)]) / np.sqrt(3)
        assert np.max(np.abs(v.conj() @ v.T - np.eye(3))) > 0.1


class TestAMeasurement:
    def test_first_vector(self):
        g = GammaParams()
        v = a_measurement_vectors(g)[0]
        want = np.zeros(11, dtype=complex)
        want[0] = np.sqrt(3 / 36)
        want[2 + 0] += np.sqrt(1 / 36)
        want[2 + 4] += np.sqrt(1 / 36)
        want[2 + 6] += -np.conj(g.gamma2) * np.sqrt(1 / 36)
        assert np.allclose(v, want)

    def test_fourier_entry(self):
        v = a_measurement_vectors(GammaParams())[24]
        assert np.allclose(v[:2], 0)
        assert np.allclose(v[2:], np.sqrt(28 / 36) * fourier_vectors()[(0, 4, 8)][0])

    def test_outcome_count_and_consumption(self):
        f = build_a_measurement(0)
        assert len(f) == 33
        assert all(op.codomain_dims == () for op in f.operators)
        assert f.outcome_labels == tuple(range(33))

    def test_bras_conjugate_the_kets(self):
        g = GammaParams()
        op = build_a_measurement(0, g)[0]
        assert np.allclose(op.matrix[0], np.conj(a_measurement_vectors(g)[0]))

    @pytest.mark.parametrize("j", [1, 2])
    def test_conditioning_relation(self, j):
        # M_{k|j} = M_{k|0} (I_2 (+) X_9^{-3j})
        base = build_a_measurement(0).stacked()
        shifted = build_a_measurement(j).stacked()
        inv = conditioning_shift(j).conj().T
        assert np.max(np.abs(shifted - base @ inv)) <= 1e-12

    def test_literal_zero_block_relation_is_incomplete(self):
        # the variant with 0 on the two-dimensional block drops that block entirely
        base = build_a_measurement(0).stacked()
        shift = conditioning_shift(1)
        shift[:2, :2] = 0
        ops = base @ shift
        s = np.einsum("kij,kil->jl", ops.conj(), ops)
        assert np.max(np.abs(s - np.eye(11))) > 0.5

    def test_bad_conditioning_index(self):
        with pytest.raises(ValueError):
            build_a_measurement(3)


class TestKrausFamily:
    def test_operators_must_share_shape(self):
        with pytest.raises(ValueError):
            KrausFamily((LinearMap(np.eye(2), (2,), (2,)), LinearMap(np.eye(3), (3,), (3,))), ("q",))

    def test_json_roundtrip(self):
        f = build_b_measurement()
        back = KrausFamily.from_json(f.to_json())
        assert np.array_equal(back.stacked(), f.stacked())
        assert back.acts_on == ("B",)

    def test_rank_one_family_conjugates(self):
        f = rank_one_family(np.array([[1j, 0], [0, 1]]), ("q",), (2,))
        assert np.allclose(f[0].matrix, [[-1j, 0]])
