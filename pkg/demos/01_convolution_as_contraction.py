"""Convolution expressed as a tensor contraction through a binary pattern
tensor.

A 1-D convolution of a signal ``a`` (length alpha) with a kernel ``b``
(length beta) is exactly the double contraction ``a x P x b`` where P is a
{0,1} tensor of shape [alpha, alpha', beta] with P[j, j', k] = 1 iff
j = stride*j' + k - padding.  This script builds P explicitly, runs the
contraction, and compares it against a plain sliding-window loop.
"""

import numpy as np

from tcinit import DenseTensor, DummySpec, build_dummy, contract


def sliding_window_conv(a, b, stride, padding):
    ap = np.pad(a, padding)
    out_len = (a.size + 2 * padding - b.size) // stride + 1
    return np.array(
        [ap[i * stride : i * stride + b.size] @ b for i in range(out_len)]
    )


def main():
    rng = np.random.default_rng(0)
    for stride, padding in [(1, 0), (1, 1), (2, 1), (3, 2)]:
        spec = DummySpec(alpha=11, beta=3, stride=stride, padding=padding)
        a = rng.standard_normal(spec.alpha)
        b = rng.standard_normal(spec.beta)

        pattern = build_dummy(spec)  # [alpha, alpha', beta]
        # contract the signal axis, then the kernel axis
        partial = contract(DenseTensor.from_array(a), [0], pattern, [0])
        out = contract(partial, [1], DenseTensor.from_array(b), [0]).array

        reference = sliding_window_conv(a, b, stride, padding)
        print(
            f"stride={stride} padding={padding}: "
            f"output length {out.size}, "
            f"max |contraction - loop| = {np.abs(out - reference).max():.2e}"
        )
        assert np.allclose(out, reference, atol=1e-12)

    print("convolution and pattern-tensor contraction agree")


if __name__ == "__main__":
    main()
