"""Seeded Monte-Carlo propagation through stacks of tensorized layers.

Every randomized entry point takes an explicit master seed; trial ``t``
derives its own stream from ``SeedSequence([seed, t])`` and results are
reduced in trial order, so reports are byte-identical for any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams, ShapeMismatch
from .formats import INPUT_CHANNEL, KERNEL, LayerFormat
from .graph import FAN_IN, InitPlan, edge_product, extract_bg, make_plan
from .network import MaterializedLayer, backward_apply, forward_apply, materialize
from .tensor import DenseTensor, _activation, _activation_derivative

DEFAULT_CHAIN_DIMS = (96, 200, 400, 600, 800, 1000, 800, 600, 400, 200, 100)
SATURATION_THRESHOLD = 0.99


@dataclass(frozen=True)
class LayerSpec:
    format: LayerFormat
    activation: str = "identity"
    mode: str = "graph-in"


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, ...]
    batch: int = 32


@dataclass(frozen=True)
class LayerTrace:
    pre_var: float
    pre_std: float
    post_var: float
    post_std: float
    grad_var: float
    grad_std: float
    saturation: float


@dataclass(frozen=True)
class TraceReport:
    seed: int
    trials: int
    threshold: float
    layers: tuple[LayerTrace, ...]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "threshold": self.threshold,
            "layers": [
                {
                    "layer": i,
                    "pre_var": t.pre_var,
                    "pre_std": t.pre_std,
                    "post_var": t.post_var,
                    "post_std": t.post_std,
                    "grad_var": t.grad_var,
                    "grad_std": t.grad_std,
                    "saturation": t.saturation,
                }
                for i, t in enumerate(self.layers)
            ],
        }


def report_json(report: TraceReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def report_csv(report: TraceReport) -> str:
    lines = ["layer,pre_var,post_var,grad_var,saturation"]
    for i, t in enumerate(report.layers):
        lines.append(
            f"{i},{t.pre_var!r},{t.post_var!r},{t.grad_var!r},{t.saturation!r}"
        )
    return "\n".join(lines) + "\n"


# -- network wiring ---------------------------------------------------------


def _input_perm(f: LayerFormat) -> list[int]:
    """Transpose order taking (batch, channels..., spatial...) to the
    layer's input layout (incident edges of the input vertex in order)."""
    x_edges = f.edges_of(f.input_vertex.id)
    n_c = sum(1 for e in x_edges if e.kind == INPUT_CHANNEL)
    perm = [0]
    ci, ki = 1, 1 + n_c
    for e in x_edges:
        if e.kind == KERNEL:
            perm.append(ki)
            ki += 1
        else:
            perm.append(ci)
            ci += 1
    return perm


def validate_network(net: NetworkSpec) -> None:
    if not net.layers:
        raise InvalidParams("network has no layers")
    if net.batch < 1:
        raise InvalidParams("batch must be >= 1")
    feed = tuple(net.input_shape)
    for i, spec in enumerate(net.layers):
        f = spec.format
        channels = f.in_channel_dims
        alphas = tuple(e.window.alpha for e in f.kernel_edges)
        expected = channels + alphas
        if feed != expected:
            raise ShapeMismatch(
                f"layer {i} expects channel dims {channels} and spatial "
                f"lengths {alphas} but receives {feed}"
            )
        feed = f.output_mode_dims()


def _build_plans(net: NetworkSpec) -> list[InitPlan]:
    return [
        make_plan(spec.format, spec.mode, spec.activation)
        for spec in net.layers
    ]


def _materialize_net(net, plans, seed, trial):
    ss = np.random.SeedSequence([seed, trial])
    kids = ss.spawn(len(net.layers) + 2)
    layers = [
        materialize(spec.format, plans[i], np.random.default_rng(kids[1 + i]))
        for i, spec in enumerate(net.layers)
    ]
    return np.random.default_rng(kids[0]), layers, np.random.default_rng(kids[-1])


def _forward_pass(net: NetworkSpec, layers, x: np.ndarray):
    """Run the stack; returns per-layer (pre, post) arrays in output layout."""
    states = []
    feed = x
    for spec, layer in zip(net.layers, layers):
        feed = feed.transpose(_input_perm(spec.format))
        pre = forward_apply(layer, DenseTensor.from_array(feed)).array
        post = _activation(pre, spec.activation)
        states.append((pre, post))
        feed = post
    return states


def _map_trials(fn, trials: int, workers: int) -> list:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, range(trials)))
    return [fn(t) for t in range(trials)]


def _aggregate(seed, trials, threshold, rows) -> TraceReport:
    """rows: per trial, per layer, (pre_var, post_var, sat, grad_var)."""
    arr = np.asarray(rows)  # [trials, layers, 4]
    mean = arr.mean(axis=0)
    std = arr.std(axis=0)
    layers = tuple(
        LayerTrace(
            pre_var=float(mean[i, 0]),
            pre_std=float(std[i, 0]),
            post_var=float(mean[i, 1]),
            post_std=float(std[i, 1]),
            grad_var=float(mean[i, 3]),
            grad_std=float(std[i, 3]),
            saturation=float(mean[i, 2]),
        )
        for i in range(arr.shape[1])
    )
    return TraceReport(seed, trials, threshold, layers)


def forward_trace(
    net: NetworkSpec,
    seed: int,
    trials: int,
    workers: int = 1,
    threshold: float = SATURATION_THRESHOLD,
) -> TraceReport:
    """Propagate standard-normal inputs; per-layer activation statistics.

    Each trial redraws the input and all weights; reported figures are the
    mean over trials (with trial-to-trial standard deviation) of the
    per-layer pre/post-activation variance and the fraction of
    post-activation magnitudes above the threshold.
    """
    validate_network(net)
    plans = _build_plans(net)

    def one(trial):
        in_rng, layers, _ = _materialize_net(net, plans, seed, trial)
        x = in_rng.standard_normal((net.batch,) + tuple(net.input_shape))
        states = _forward_pass(net, layers, x)
        return [
            (
                float(pre.var()),
                float(post.var()),
                float((np.abs(post) > threshold).mean()),
                0.0,
            )
            for pre, post in states
        ]

    rows = _map_trials(one, trials, workers)
    return _aggregate(seed, trials, threshold, rows)


def backward_trace(
    net: NetworkSpec,
    seed: int,
    trials: int,
    workers: int = 1,
    threshold: float = SATURATION_THRESHOLD,
    grad_var: float = 1.0,
) -> TraceReport:
    """Push a random upstream gradient back through the stack.

    The gradient injected at the network output is i.i.d. normal with
    variance ``grad_var``.  Each layer's ``grad_var`` statistic is the
    variance of the loss gradient at that layer's *input*; activation
    derivatives use the exact forward masks.
    """
    validate_network(net)
    plans = _build_plans(net)

    def one(trial):
        in_rng, layers, grad_rng = _materialize_net(net, plans, seed, trial)
        x = in_rng.standard_normal((net.batch,) + tuple(net.input_shape))
        states = _forward_pass(net, layers, x)
        out_shape = states[-1][1].shape
        g = grad_rng.standard_normal(out_shape) * np.sqrt(grad_var)
        stats = [None] * len(layers)
        for i in range(len(layers) - 1, -1, -1):
            spec, layer = net.layers[i], layers[i]
            pre, post = states[i]
            g = g * _activation_derivative(pre, spec.activation)
            g = backward_apply(layer, DenseTensor.from_array(g)).array
            stats[i] = (
                float(pre.var()),
                float(post.var()),
                float((np.abs(post) > threshold).mean()),
                float(g.var()),
            )
            if i > 0:
                # Input layout of layer i -> output layout of layer i-1.
                g = g.transpose(np.argsort(_input_perm(spec.format)))
        return stats

    rows = _map_trials(one, trials, workers)
    return _aggregate(seed, trials, threshold, rows)


def input_gradient(net: NetworkSpec, layers, x: np.ndarray, upstream: np.ndarray):
    """Exact loss gradient at the network input for loss sum(upstream * a(y)).

    ``layers`` are materialized layers matching ``net``; used by gradient
    verification.
    """
    states = _forward_pass(net, layers, x)
    g = upstream
    for i in range(len(layers) - 1, -1, -1):
        spec = net.layers[i]
        g = g * _activation_derivative(states[i][0], spec.activation)
        g = backward_apply(layers[i], DenseTensor.from_array(g)).array
        if i > 0:
            g = g.transpose(np.argsort(_input_perm(spec.format)))
    return g


# -- single-layer variance check -------------------------------------------


def variance_mc(
    f: LayerFormat,
    plan: InitPlan,
    seed: int,
    trials: int,
    batch: int = 8,
    workers: int = 1,
) -> dict:
    """Measured vs predicted linear output/input variance ratio.

    The prediction is ``phi * prod(sigma^2) * prod(e)`` over the fan-in
    backbone graph; the measurement is taken before any activation, so the
    two agree for every plan mode up to sampling noise.
    """
    bg = extract_bg(f, FAN_IN)
    prod = 1.0
    for vid in f.weight_ids:
        prod *= plan.variances[vid]
    predicted = f.phi * prod * float(edge_product(bg))

    def one(trial):
        ss = np.random.SeedSequence([seed, trial])
        k_in, k_w = ss.spawn(2)
        rng = np.random.default_rng(k_in)
        x = rng.standard_normal((batch,) + f.input_mode_dims())
        layer = materialize(f, plan, np.random.default_rng(k_w))
        out = forward_apply(layer, DenseTensor.from_array(x)).array
        return out.var() / x.var()

    ratios = _map_trials(one, trials, workers)
    return {
        "seed": seed,
        "trials": trials,
        "empirical_ratio": float(np.mean(ratios)),
        "empirical_std": float(np.std(ratios)),
        "predicted_ratio": float(predicted),
    }


# -- matrix chain scale ------------------------------------------------------


def scale_chain(
    seed: int,
    trials: int = 500,
    dims=DEFAULT_CHAIN_DIMS,
    batch: int = 32,
    workers: int = 1,
) -> list[dict]:
    """Per-step variance scale of a chain of standard-normal matrix products.

    Step ``t`` multiplies the running activation by a fresh N(0,1) matrix of
    shape ``(dims[t-1], dims[t])`` and reports
    ``var(out) / (var(in) * sigma^2(W))`` with ``sigma^2(W) = 1``; the
    ground truth is the contracted dimension ``dims[t-1]``.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise InvalidParams("chain needs at least two dims")

    def one(trial):
        rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
        x = rng.standard_normal((batch, dims[0]))
        scales = []
        for a, b in zip(dims, dims[1:]):
            w = rng.standard_normal((a, b))
            out = x @ w
            scales.append(out.var() / x.var())
            x = out
        return scales

    rows = np.asarray(_map_trials(one, trials, workers))
    table = []
    for t in range(len(dims) - 1):
        table.append(
            {
                "step": t + 1,
                "contracted_dim": dims[t],
                "mean": float(rows[:, t].mean()),
                "std": float(rows[:, t].std()),
            }
        )
    return table


# -- distributional propositions ---------------------------------------------


def proposition_checks(seed: int, samples: int = 100_000) -> dict:
    """Monte-Carlo checks of variance additivity and contraction scaling.

    (a) the variance of an elementwise sum of independent zero-mean tensors
    is the sum of their variances; (b) contracting independent zero-mean
    tensors over ``d`` shared dims scales the variance by the product of the
    contracted dims.  Returns measured/expected pairs with pass flags.
    """
    rng = np.random.default_rng(seed)
    checks = []

    def add(name, measured, expected, tolerance):
        ratio = measured / expected if expected else measured
        checks.append(
            {
                "name": name,
                "measured": float(measured),
                "expected": float(expected),
                "ratio": float(ratio),
                "tolerance": tolerance,
                "ok": bool(abs(measured - expected) <= tolerance * abs(expected)),
            }
        )

    # (a) additivity.
    a = rng.standard_normal(samples)
    b = rng.standard_normal(samples)
    add("sum of two unit-variance tensors", (a + b).var(), 2.0, 0.03)
    for case in range(3):
        v = rng.uniform(0.25, 2.0, size=3)
        total = sum(
            rng.normal(0.0, np.sqrt(vi), size=samples) for vi in v
        )
        add(f"sum of three tensors #{case}", total.var(), float(v.sum()), 0.03)

    # (b) fixed contraction case: [4,5,6] x [6,7] over the shared dim 6.
    repeats = max(1, samples // (4 * 5 * 7))
    x = rng.standard_normal((repeats, 4, 5, 6))
    y = rng.normal(0.0, 0.5, size=(repeats, 6, 7))
    z = np.einsum("rabk,rkc->rabc", x, y)
    add("contract [4,5,6] with [6,7] over dim 6", z.var(), 1.0 * 0.25 * 6, 0.05)

    # (b) randomized suite: dims 2-8, contraction order d in {1,2,3}.
    for case in range(6):
        d = int(rng.integers(1, 4))
        shared = tuple(int(rng.integers(2, 9)) for _ in range(d))
        m = int(rng.integers(2, 9))
        n = int(rng.integers(2, 9))
        vx = float(rng.uniform(0.25, 2.0))
        vy = float(rng.uniform(0.25, 2.0))
        repeats = max(1, samples // (m * n))
        x = rng.normal(0.0, np.sqrt(vx), size=(repeats, m) + shared)
        y = rng.normal(0.0, np.sqrt(vy), size=(repeats,) + shared + (n,))
        letters = "ijk"[:d]
        z = np.einsum(f"rm{letters},r{letters}n->rmn", x, y)
        expected = vx * vy * float(np.prod(shared))
        add(
            f"contract over dims {shared} #{case}",
            z.var(),
            expected,
            0.05,
        )

    # zero operand.
    x = rng.standard_normal((100, 6))
    z = x @ np.zeros((6, 4))
    add("contract with a zero tensor", z.var() + 1.0, 1.0, 0.0)

    return {"seed": seed, "samples": samples, "checks": checks,
            "ok": all(c["ok"] for c in checks)}
