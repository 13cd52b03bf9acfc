"""Turn a layer format plus an initialization plan into executable tensors.

A materialized layer holds ``phi`` independent replicas of the weight
vertices (the layer output is their sum), the forward convolution index
patterns, and enough bookkeeping to run the layer forward and to push a
gradient back to the layer input.

Axis conventions (all carry a leading batch axis):

* layer input  — incident edges of the input vertex, declaration order
  (kernel edges contribute their input spatial length);
* layer output — output-channel edges in declaration order, then one output
  spatial axis per kernel edge in declaration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from string import ascii_letters

import numpy as np

from .errors import PlanIncomplete, ShapeMismatch
from .formats import (
    INPUT_CHANNEL,
    KERNEL,
    OUTPUT_CHANNEL,
    RANK,
    LayerFormat,
)
from .graph import InitPlan
from .tensor import DenseTensor, build_dummy, multi_contract, transformation_matrix
from .transform import backward_dummy, build_backward_dummy


@dataclass(frozen=True)
class MaterializedLayer:
    format: LayerFormat
    plan: InitPlan
    replicas: tuple[dict[str, DenseTensor], ...]
    dummies: dict[str, DenseTensor]


def _sample(rng: np.random.Generator, shape, sigma2: float, distribution: str):
    if distribution == "uniform":
        half = np.sqrt(3.0 * sigma2)
        return rng.uniform(-half, half, size=shape)
    return rng.normal(0.0, np.sqrt(sigma2), size=shape)


def materialize(f: LayerFormat, plan: InitPlan, rng) -> MaterializedLayer:
    """Draw all weight tensors and build the convolution patterns.

    ``rng`` is a seed or a numpy Generator.  Each replica's weight for
    vertex ``v`` has the shape of its incident-edge dims in declaration
    order; entries are i.i.d. zero mean with the planned variance.
    """
    rng = np.random.default_rng(rng)
    missing = [vid for vid in f.weight_ids if vid not in plan.variances]
    if missing:
        raise PlanIncomplete(f"plan assigns no variance to vertices {missing}")
    for e in f.edges_of_kind(OUTPUT_CHANNEL):
        if len(e.endpoints) != 1:
            raise ShapeMismatch(
                f"output-channel edge {e.id!r} joins several weight vertices; "
                "execution supports a single endpoint"
            )
    replicas = []
    for _ in range(f.phi):
        weights = {}
        for vid in f.weight_ids:
            shape = f.weight_mode_dims(vid)
            weights[vid] = DenseTensor.from_array(
                _sample(rng, shape, plan.variances[vid], plan.distribution)
            )
        replicas.append(weights)
    dummies = {e.id: build_dummy(e.window) for e in f.kernel_edges}
    return MaterializedLayer(f, plan, tuple(replicas), dummies)


def _axis_maps(f: LayerFormat):
    """Edge-id -> axis position maps for the input and each weight vertex."""
    xid = f.input_vertex.id
    x_axes = {e.id: i for i, e in enumerate(f.edges_of(xid))}
    w_axes = {
        vid: {e.id: i for i, e in enumerate(f.edges_of(vid))}
        for vid in f.weight_ids
    }
    return xid, x_axes, w_axes


def contraction_map(f: LayerFormat):
    """Summation groups and open axes wiring one replica's forward pass.

    Tensor slots: 0 is the batched input, then the weight vertices in
    declaration order, then one convolution pattern per kernel edge.  The
    input's axes are shifted by one for the batch axis, which is the first
    open axis.
    """
    xid, x_axes, w_axes = _axis_maps(f)
    w_slot = {vid: 1 + i for i, vid in enumerate(f.weight_ids)}
    d_slot = {
        e.id: 1 + len(f.weight_ids) + i for i, e in enumerate(f.kernel_edges)
    }

    groups = []
    for e in f.edges:
        if e.kind == INPUT_CHANNEL:
            group = [(0, 1 + x_axes[e.id])]
            group += [
                (w_slot[p], w_axes[p][e.id]) for p in e.endpoints if p != xid
            ]
            groups.append(group)
        elif e.kind == RANK:
            groups.append([(w_slot[p], w_axes[p][e.id]) for p in e.endpoints])
        elif e.kind == KERNEL:
            weight = next(p for p in e.endpoints if p != xid)
            groups.append([(0, 1 + x_axes[e.id]), (d_slot[e.id], 0)])
            groups.append([(d_slot[e.id], 2), (w_slot[weight], w_axes[weight][e.id])])

    open_axes = [(0, 0)]
    for e in f.edges_of_kind(OUTPUT_CHANNEL):
        p = e.endpoints[0]
        open_axes.append((w_slot[p], w_axes[p][e.id]))
    for e in f.kernel_edges:
        open_axes.append((d_slot[e.id], 1))
    return groups, open_axes


def forward_apply(layer: MaterializedLayer, x: DenseTensor) -> DenseTensor:
    """Pre-activation layer output for a batched input.

    ``x`` has shape ``(batch, *input mode dims)``; the result has shape
    ``(batch, *output channel dims, *output spatial dims)`` and sums the
    ``phi`` replica outputs.
    """
    f = layer.format
    expected = f.input_mode_dims()
    if x.shape[1:] != expected:
        raise ShapeMismatch(
            f"input shape {x.shape[1:]} does not match layer input {expected}"
        )
    groups, open_axes = contraction_map(f)
    dummy_list = [layer.dummies[e.id] for e in f.kernel_edges]
    out = None
    for weights in layer.replicas:
        tensors = [x] + [weights[vid] for vid in f.weight_ids] + dummy_list
        part = multi_contract(tensors, groups, open_axes).array
        out = part if out is None else out + part
    return DenseTensor.from_array(out)


def backward_apply(layer: MaterializedLayer, grad: DenseTensor) -> DenseTensor:
    """Gradient of the layer input given the gradient of the layer output.

    ``grad`` uses the layer-output axis convention.  The backward pass runs
    as a convolution: the gradient is stride-expanded, contracted with the
    backward index patterns, and paired with each replica's weights flipped
    along their kernel-window axes.
    """
    f = layer.format
    xid, x_axes, w_axes = _axis_maps(f)
    out_edges = f.edges_of_kind(OUTPUT_CHANNEL)
    kernel_edges = f.kernel_edges
    expected = f.output_mode_dims()
    if grad.shape[1:] != expected:
        raise ShapeMismatch(
            f"gradient shape {grad.shape[1:]} does not match layer output {expected}"
        )

    pool = iter(ascii_letters)
    batch = next(pool)
    edge_letter = {e.id: next(pool) for e in f.edges if e.kind != KERNEL}
    # Per kernel edge: gradient spatial, expanded, input spatial, window.
    kl = {
        e.id: (next(pool), next(pool), next(pool), next(pool))
        for e in kernel_edges
    }

    grad_sub = (
        batch
        + "".join(edge_letter[e.id] for e in out_edges)
        + "".join(kl[e.id][0] for e in kernel_edges)
    )
    fixed_ops = [grad.array]
    fixed_subs = [grad_sub]
    for e in kernel_edges:
        bspec = backward_dummy(e.window)
        g, z, j, q = kl[e.id]
        fixed_ops.append(transformation_matrix(e.window.alpha_prime, e.window.stride).array)
        fixed_subs.append(g + z)
        fixed_ops.append(build_backward_dummy(bspec).array)
        fixed_subs.append(j + z + q)

    out_sub = batch + "".join(
        kl[e.id][2] if e.kind == KERNEL else edge_letter[e.id]
        for e in f.edges_of(xid)
    )

    result = None
    for weights in layer.replicas:
        ops = list(fixed_ops)
        subs = list(fixed_subs)
        for vid in f.weight_ids:
            incident = f.edges_of(vid)
            sub = "".join(
                kl[e.id][3] if e.kind == KERNEL else edge_letter[e.id]
                for e in incident
            )
            flip = tuple(
                i for i, e in enumerate(incident) if e.kind == KERNEL
            )
            arr = weights[vid].array
            if flip:
                arr = np.flip(arr, axis=flip)
            ops.append(arr)
            subs.append(sub)
        spec = ",".join(subs) + "->" + out_sub
        # Same memory-limit override as multi_contract: the default path
        # optimizer refuses intermediates larger than the biggest operand.
        part = np.einsum(spec, *ops, optimize=("greedy", 1e8))
        result = part if result is None else result + part
    return DenseTensor.from_array(result)
