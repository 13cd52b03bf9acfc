"""Dense tensors, generalized contraction and the special binary tensors.

The value type is :class:`DenseTensor`, a thin immutable wrapper around a
row-major float64 ndarray.  Convolution is expressed as contraction with a
binary index-pattern tensor built by :func:`build_dummy`: the pattern has a
one at ``(j, j', k)`` exactly when ``j = stride * j' + k - padding``, so that
``a x0 P x1 b`` equals the strided sliding-window convolution of ``a`` with
``b``.

Contraction output order is fixed: free axes of the first operand, in their
original order, then free axes of the second.  This convention is ours, not
mandated by the math, and every caller in the package relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from string import ascii_letters
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AxisOutOfRange,
    DimensionMismatch,
    DuplicateAxis,
    EmptyTensor,
    InvalidDummySpec,
    UnboundAxis,
)

ACTIVATIONS = ("identity", "relu", "tanh")


@dataclass(frozen=True)
class DenseTensor:
    """A row-major multi-dimensional float64 array.

    ``data`` is the flat element buffer; its length always equals the product
    of ``shape``.  Rank 0 (scalar) is allowed with a single element.
    """

    shape: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        shape = tuple(int(d) for d in self.shape)
        if any(d < 1 for d in shape):
            raise ValueError(f"shape entries must be >= 1, got {shape}")
        flat = np.ascontiguousarray(self.data, dtype=np.float64).reshape(-1)
        expected = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if flat.size != expected:
            raise ValueError(
                f"data length {flat.size} does not match shape {shape}"
            )
        flat.flags.writeable = False
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", flat)

    @classmethod
    def from_array(cls, arr) -> "DenseTensor":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape, arr.reshape(-1))

    @property
    def array(self) -> np.ndarray:
        """Read-only ndarray view with the tensor's shape."""
        return self.data.reshape(self.shape)

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return self.data.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class DummySpec:
    """Parameters of a 1-D convolution index pattern.

    ``alpha`` is the input length, ``beta`` the kernel window, ``stride`` and
    ``padding`` the usual convolution parameters.  The output length
    ``alpha_prime`` follows the floor formula; window positions that would
    fall entirely outside the padded input are rejected rather than zero
    filled.
    """

    alpha: int
    beta: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        a, b, s, p = self.alpha, self.beta, self.stride, self.padding
        if a < 1 or b < 1 or s < 1 or p < 0:
            raise InvalidDummySpec(
                f"alpha={a}, beta={b}, stride={s}, padding={p} out of range"
            )
        if a + 2 * p < b:
            raise InvalidDummySpec(
                f"window beta={b} exceeds padded input alpha={a} + 2*{p}"
            )

    @property
    def alpha_prime(self) -> int:
        return (self.alpha + 2 * self.padding - self.beta) // self.stride + 1


def _check_axes(t: DenseTensor, axes: Sequence[int], label: str) -> list[int]:
    axes = [int(ax) for ax in axes]
    for ax in axes:
        if not 0 <= ax < t.rank:
            raise AxisOutOfRange(f"{label}: axis {ax} out of range for rank {t.rank}")
    if len(set(axes)) != len(axes):
        raise DuplicateAxis(f"{label}: repeated axis in {axes}")
    return axes


def contract(
    a: DenseTensor,
    axes_a: Sequence[int],
    b: DenseTensor,
    axes_b: Sequence[int],
) -> DenseTensor:
    """Inner product of ``a`` and ``b`` over paired axes.

    Output axes are the free axes of ``a`` followed by the free axes of
    ``b``, each in original order.
    """
    axes_a = _check_axes(a, axes_a, "first operand")
    axes_b = _check_axes(b, axes_b, "second operand")
    if len(axes_a) != len(axes_b):
        raise DimensionMismatch(
            f"{len(axes_a)} axes paired with {len(axes_b)} axes"
        )
    for ax_a, ax_b in zip(axes_a, axes_b):
        if a.shape[ax_a] != b.shape[ax_b]:
            raise DimensionMismatch(
                f"axis {ax_a} (size {a.shape[ax_a]}) paired with "
                f"axis {ax_b} (size {b.shape[ax_b]})"
            )
    out = np.tensordot(a.array, b.array, axes=(axes_a, axes_b))
    return DenseTensor.from_array(out)


def multi_contract(
    tensors: Sequence[DenseTensor],
    groups: Iterable[Sequence[tuple[int, int]]],
    open_axes: Sequence[tuple[int, int]],
) -> DenseTensor:
    """Contract a network of tensors in one shot.

    ``groups`` lists the summation indices: each group is a set of
    ``(tensor_index, axis)`` pairs that share one index.  ``open_axes`` gives
    the output axes in order.  Every axis of every tensor must appear in
    exactly one group or in ``open_axes``.  The result equals any sequence of
    pairwise :func:`contract` calls realizing the same network; the actual
    contraction order is chosen internally.
    """
    tensors = list(tensors)
    letters: list[dict[int, str]] = [dict() for _ in tensors]
    pool = iter(ascii_letters)

    def assign(ti: int, ax: int, letter: str, dim: int):
        if not 0 <= ti < len(tensors):
            raise AxisOutOfRange(f"tensor index {ti} out of range")
        t = tensors[ti]
        if not 0 <= ax < t.rank:
            raise AxisOutOfRange(f"axis {ax} out of range for rank {t.rank}")
        if ax in letters[ti]:
            raise DuplicateAxis(f"axis {ax} of tensor {ti} bound twice")
        if dim is not None and t.shape[ax] != dim:
            raise DimensionMismatch(
                f"axis {ax} of tensor {ti} has size {t.shape[ax]}, expected {dim}"
            )
        letters[ti][ax] = letter

    for group in groups:
        group = list(group)
        letter = next(pool)
        dim = tensors[group[0][0]].shape[group[0][1]] if group else None
        for ti, ax in group:
            assign(ti, ax, letter, dim)

    out_subscript = []
    for ti, ax in open_axes:
        letter = next(pool)
        assign(ti, ax, letter, None)
        out_subscript.append(letter)

    for ti, t in enumerate(tensors):
        for ax in range(t.rank):
            if ax not in letters[ti]:
                raise UnboundAxis(
                    f"axis {ax} of tensor {ti} is neither contracted nor open"
                )

    operands = ",".join(
        "".join(letters[ti][ax] for ax in range(t.rank))
        for ti, t in enumerate(tensors)
    )
    spec = operands + "->" + "".join(out_subscript)
    # The default path optimizer caps intermediates at the largest operand
    # size, which forces a catastrophic all-at-once contraction on small
    # outputs; allow desk-scale intermediates explicitly.
    out = np.einsum(spec, *(t.array for t in tensors), optimize=("greedy", 1e8))
    return DenseTensor.from_array(out)


def build_dummy(spec: DummySpec) -> DenseTensor:
    """Binary tensor of shape ``[alpha, alpha_prime, beta]``.

    Entry ``(j, j', k)`` is one exactly when ``j = stride*j' + k - padding``.
    """
    j = np.arange(spec.alpha)[:, None, None]
    jp = np.arange(spec.alpha_prime)[None, :, None]
    k = np.arange(spec.beta)[None, None, :]
    pattern = (j == spec.stride * jp + k - spec.padding).astype(np.float64)
    return DenseTensor.from_array(pattern)


def reversal_matrix(r: int) -> DenseTensor:
    """Anti-diagonal permutation matrix of size ``r``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return DenseTensor.from_array(np.fliplr(np.eye(r)))


def transformation_matrix(t: int, epsilon: int) -> DenseTensor:
    """Stride-expansion matrix of shape ``[t, epsilon*(t-1)+1]``.

    Entry ``(i, j)`` is one exactly when ``j = epsilon * i``.  Right
    multiplication spreads a vector out with ``epsilon - 1`` zeros between
    consecutive entries.
    """
    if t < 1 or epsilon < 1:
        raise ValueError("t and epsilon must be >= 1")
    t_tilde = epsilon * (t - 1) + 1
    mat = np.zeros((t, t_tilde))
    mat[np.arange(t), epsilon * np.arange(t)] = 1.0
    return DenseTensor.from_array(mat)


def apply_activation(x: DenseTensor, kind: str) -> DenseTensor:
    """Elementwise activation; shape preserved."""
    return DenseTensor.from_array(_activation(x.array, kind))


def _activation(arr: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return arr
    if kind == "relu":
        return np.maximum(arr, 0.0)
    if kind == "tanh":
        return np.tanh(arr)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def _activation_derivative(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return np.ones_like(pre)
    if kind == "relu":
        return (pre > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - np.tanh(pre) ** 2
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


@dataclass(frozen=True)
class TensorStats:
    mean: float
    variance: float
    saturation_fraction: float


def tensor_stats(x: DenseTensor, saturation_threshold: float = 0.99) -> TensorStats:
    """Population mean/variance and share of elements above the threshold."""
    if x.size == 0:
        raise EmptyTensor("cannot compute statistics of an empty tensor")
    arr = x.data
    return TensorStats(
        mean=float(arr.mean()),
        variance=float(arr.var()),
        saturation_fraction=float((np.abs(arr) > saturation_threshold).mean()),
    )
