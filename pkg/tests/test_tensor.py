import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcinit.errors import (
    AxisOutOfRange,
    DimensionMismatch,
    DuplicateAxis,
    InvalidDummySpec,
    UnboundAxis,
)
from tcinit.tensor import (
    DenseTensor,
    DummySpec,
    apply_activation,
    build_dummy,
    contract,
    multi_contract,
    reversal_matrix,
    tensor_stats,
    transformation_matrix,
)


def naive_contract(a, axes_a, b, axes_b):
    """Loop-based contraction oracle, independent of tensordot."""
    free_a = [ax for ax in range(a.ndim) if ax not in axes_a]
    free_b = [ax for ax in range(b.ndim) if ax not in axes_b]
    out_shape = [a.shape[ax] for ax in free_a] + [b.shape[ax] for ax in free_b]
    out = np.zeros(out_shape)
    for idx_a in np.ndindex(*a.shape):
        for free_idx_b in np.ndindex(*[b.shape[ax] for ax in free_b]):
            idx_b = [0] * b.ndim
            for ax, val in zip(free_b, free_idx_b):
                idx_b[ax] = val
            for ax_a, ax_b in zip(axes_a, axes_b):
                idx_b[ax_b] = idx_a[ax_a]
            pos = tuple(idx_a[ax] for ax in free_a) + free_idx_b
            out[pos] += a[idx_a] * b[tuple(idx_b)]
    return out


def direct_conv(a, b, stride=1, padding=0):
    """Sliding-window 1-D convolution oracle (integer-indexed sum)."""
    padded = np.concatenate([np.zeros(padding), a, np.zeros(padding)])
    beta = len(b)
    n_out = (len(a) + 2 * padding - beta) // stride + 1
    return np.array(
        [np.dot(padded[i * stride : i * stride + beta], b) for i in range(n_out)]
    )


class TestDenseTensor:
    def test_shape_data_consistency(self):
        t = DenseTensor((2, 3), np.arange(6.0))
        assert t.rank == 2
        assert t.size == 6
        with pytest.raises(ValueError):
            DenseTensor((2, 3), np.arange(5.0))

    def test_scalar_allowed(self):
        t = DenseTensor((), np.array([4.0]))
        assert t.rank == 0 and t.array == 4.0

    def test_data_is_read_only(self):
        t = DenseTensor.from_array(np.ones(3))
        with pytest.raises(ValueError):
            t.data[0] = 2.0


class TestContract:
    def test_matrix_product(self):
        a = np.arange(6.0).reshape(2, 3)
        b = np.arange(12.0).reshape(3, 4)
        out = contract(DenseTensor.from_array(a), [1], DenseTensor.from_array(b), [0])
        assert out.shape == (2, 4)
        assert np.array_equal(out.array, a @ b)

    def test_free_axis_order(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((2, 3, 4))
        b = rng.standard_normal((4, 5, 6))
        out = contract(DenseTensor.from_array(a), [2], DenseTensor.from_array(b), [0])
        assert out.shape == (2, 3, 5, 6)

    def test_dot_product(self):
        a = DenseTensor.from_array([1.0, 2.0, 3.0])
        b = DenseTensor.from_array([4.0, 5.0, 6.0])
        out = contract(a, [0], b, [0])
        assert out.shape == ()
        assert out.array == 32.0

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 4, 2))
        b = rng.standard_normal((2, 4, 5))
        got = contract(
            DenseTensor.from_array(a), [1, 2], DenseTensor.from_array(b), [1, 0]
        )
        want = naive_contract(a, [1, 2], b, [1, 0])
        assert np.allclose(got.array, want, atol=1e-12)

    def test_errors(self):
        a = DenseTensor.from_array(np.ones((2, 3)))
        b = DenseTensor.from_array(np.ones((4, 5)))
        with pytest.raises(DimensionMismatch):
            contract(a, [1], b, [0])
        with pytest.raises(AxisOutOfRange):
            contract(a, [5], b, [0])
        with pytest.raises(DuplicateAxis):
            contract(a, [0, 0], b, [0, 1])
        with pytest.raises(DimensionMismatch):
            contract(a, [0, 1], b, [0])

    @given(st.floats(min_value=-4, max_value=4))
    def test_bilinear_in_first_argument(self, scalar):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        lhs = contract(
            DenseTensor.from_array(scalar * a), [1], DenseTensor.from_array(b), [0]
        ).array
        rhs = scalar * contract(
            DenseTensor.from_array(a), [1], DenseTensor.from_array(b), [0]
        ).array
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


class TestMultiContract:
    def test_single_pair_reduces_to_contract(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 5))
        ta, tb = DenseTensor.from_array(a), DenseTensor.from_array(b)
        got = multi_contract(
            [ta, tb], [[(0, 1), (1, 0)]], [(0, 0), (1, 1)]
        )
        assert got == contract(ta, [1], tb, [0])

    def test_hyperedge_three_vectors(self):
        a = np.array([1.0, 2.0])
        b = np.array([3.0, 4.0])
        c = np.array([5.0, 6.0])
        got = multi_contract(
            [DenseTensor.from_array(v) for v in (a, b, c)],
            [[(0, 0), (1, 0), (2, 0)]],
            [],
        )
        assert got.array == pytest.approx(np.sum(a * b * c))

    def test_chain_equals_pairwise(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((2, 3))
        b = rng.standard_normal((3, 4))
        c = rng.standard_normal((4, 5))
        ts = [DenseTensor.from_array(v) for v in (a, b, c)]
        got = multi_contract(
            ts, [[(0, 1), (1, 0)], [(1, 1), (2, 0)]], [(0, 0), (2, 1)]
        )
        want = contract(contract(ts[0], [1], ts[1], [0]), [1], ts[2], [0])
        assert np.allclose(got.array, want.array, rtol=1e-10)

    def test_order_independence(self):
        rng = np.random.default_rng(4)
        shapes = [(4, 3), (3, 5, 2), (2, 6), (6, 4)]
        ts = [DenseTensor.from_array(rng.standard_normal(s)) for s in shapes]
        groups = [
            [(0, 1), (1, 0)],
            [(1, 2), (2, 0)],
            [(2, 1), (3, 0)],
            [(3, 1), (0, 0)],
        ]
        got = multi_contract(ts, groups, [(1, 1)])
        # Pairwise in a different order: ((t2 t3) t0) t1.
        s1 = contract(ts[2], [1], ts[3], [0])  # [2, 4]
        s2 = contract(s1, [1], ts[0], [0])  # [2, 3]
        want = multi_contract(
            [s2, ts[1]], [[(0, 0), (1, 2)], [(0, 1), (1, 0)]], [(1, 1)]
        )
        assert np.allclose(got.array, want.array, rtol=1e-10)

    def test_unbound_axis(self):
        a = DenseTensor.from_array(np.ones((2, 3)))
        with pytest.raises(UnboundAxis):
            multi_contract([a], [], [(0, 0)])

    def test_group_dimension_mismatch(self):
        a = DenseTensor.from_array(np.ones((2, 3)))
        b = DenseTensor.from_array(np.ones((4,)))
        with pytest.raises(DimensionMismatch):
            multi_contract([a, b], [[(0, 1), (1, 0)]], [(0, 0)])


class TestDummy:
    def test_spec_invariants(self):
        spec = DummySpec(alpha=5, beta=3, stride=2, padding=1)
        assert spec.alpha_prime == 3
        with pytest.raises(InvalidDummySpec):
            DummySpec(alpha=2, beta=5, stride=1, padding=0)
        with pytest.raises(InvalidDummySpec):
            DummySpec(alpha=3, beta=2, stride=0, padding=0)

    def test_enumerated_entries(self):
        d = build_dummy(DummySpec(alpha=3, beta=2)).array
        assert d.shape == (3, 2, 2)
        expected = {(0, 0, 0), (1, 0, 1), (1, 1, 0), (2, 1, 1)}
        nonzero = set(zip(*np.nonzero(d)))
        assert nonzero == expected

    def test_small_convolution(self):
        a = DenseTensor.from_array([1.0, 2.0, 3.0])
        b = DenseTensor.from_array([1.0, 1.0])
        d = build_dummy(DummySpec(alpha=3, beta=2))
        out = contract(contract(a, [0], d, [0]), [1], b, [0])
        assert np.array_equal(out.array, [3.0, 5.0])

    @pytest.mark.parametrize("stride", [1, 2, 3])
    @pytest.mark.parametrize("beta", [1, 2, 3, 5])
    def test_convolution_equivalence(self, stride, beta):
        rng = np.random.default_rng(beta * 10 + stride)
        for alpha in range(3, 13):
            for padding in range(0, beta):
                if alpha + 2 * padding < beta:
                    continue
                a = rng.standard_normal(alpha)
                b = rng.standard_normal(beta)
                d = build_dummy(DummySpec(alpha, beta, stride, padding))
                via_pattern = contract(
                    contract(DenseTensor.from_array(a), [0], d, [0]),
                    [1],
                    DenseTensor.from_array(b),
                    [0],
                ).array
                direct = direct_conv(a, b, stride, padding)
                assert np.allclose(via_pattern, direct, atol=1e-12)

    @given(
        alpha=st.integers(1, 10),
        beta=st.integers(1, 6),
        stride=st.integers(1, 3),
        padding=st.integers(0, 4),
    )
    @settings(max_examples=60)
    def test_binary_and_unique(self, alpha, beta, stride, padding):
        if alpha + 2 * padding < beta:
            return
        d = build_dummy(DummySpec(alpha, beta, stride, padding)).array
        assert set(np.unique(d)) <= {0.0, 1.0}
        # each (output, window) pair selects at most one input position
        assert d.sum(axis=0).max() <= 1


class TestSpecialMatrices:
    def test_reversal(self):
        r = reversal_matrix(3)
        b = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(r.array @ b, [3.0, 2.0, 1.0])
        assert np.array_equal(reversal_matrix(1).array, [[1.0]])

    def test_reversal_involution(self):
        r = reversal_matrix(5).array
        assert np.array_equal(r @ r, np.eye(5))

    def test_transformation_expands_with_zeros(self):
        t = transformation_matrix(3, 2)
        y = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(y @ t.array, [1.0, 0.0, 2.0, 0.0, 3.0])

    def test_transformation_identity_for_unit_stride(self):
        assert np.array_equal(transformation_matrix(4, 1).array, np.eye(4))

    def test_transformation_row_column_sums(self):
        m = transformation_matrix(5, 3).array
        assert m.shape == (5, 13)
        assert np.array_equal(m.sum(axis=1), np.ones(5))
        assert set(np.unique(m.sum(axis=0))) <= {0.0, 1.0}

    def test_transformation_orthonormal_rows(self):
        m = transformation_matrix(6, 2).array
        assert np.array_equal(m @ m.T, np.eye(6))


class TestActivations:
    def test_identity(self):
        x = DenseTensor.from_array([-1.0, 0.5])
        assert apply_activation(x, "identity") == x

    def test_relu(self):
        x = DenseTensor.from_array([-1.0, 0.0, 2.0])
        assert np.array_equal(apply_activation(x, "relu").array, [0.0, 0.0, 2.0])

    def test_tanh_preserves_symmetry(self):
        rng = np.random.default_rng(5)
        x = DenseTensor.from_array(rng.standard_normal(200_000))
        out = apply_activation(x, "tanh")
        assert abs(out.array.mean()) < 5e-3

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            apply_activation(DenseTensor.from_array([1.0]), "gelu")


class TestStats:
    def test_constant(self):
        s = tensor_stats(DenseTensor.from_array(np.full(10, 3.0)))
        assert s.variance == 0.0

    def test_hand_values(self):
        s = tensor_stats(DenseTensor.from_array([-1.0, 1.0]))
        assert s.mean == 0.0 and s.variance == 1.0

    def test_saturation(self):
        s = tensor_stats(DenseTensor.from_array(np.zeros(8)))
        assert s.saturation_fraction == 0.0
        s = tensor_stats(DenseTensor.from_array([0.5, -0.995, 1.2, 0.0]))
        assert s.saturation_fraction == 0.5
