"""Property suites: sampled monotonicity and finite-difference gradient checks.

The monotonicity suite drives freshly initialized calibrators of every
supported depth over a jittered input grid and demands strictly increasing
outputs with positive gaps, plus a strictly positive input derivative. The
grid keeps a floor on consecutive input spacing so that the check measures
the model property rather than float64 resolution in deeply ELU-saturated
regions.

A second, rougher sweep scrambles parameters well outside the init
distribution; there the output gap may legitimately round to zero in
saturated tails, so it asserts non-decreasing outputs and a positive
derivative instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .layers import (
    bilinear_pool,
    bilinear_pool_backward,
    elu,
    elu_backward,
    finite_diff_check,
    linear_backward,
    linear_forward,
    relu,
    relu_backward,
)
from .losses import combined_grad, combined_loss, nin_grad, nin_loss, smooth_l1, smooth_l1_grad
from .model import QualityModel, build_model
from .monotone import (
    SUPPORTED_DEPTHS,
    MonotonicTransformer,
    min_effective_weight,
    transformer_init,
)
from .regressor import head_backward, head_forward
from .monotone import EPS_W


@dataclass
class Violation:
    kind: str
    depth: int
    seed: int
    detail: str
    inputs: list[float] = field(default_factory=list)
    outputs: list[float] = field(default_factory=list)


@dataclass
class VerifyReport:
    checked: int = 0
    violations: list[Violation] = field(default_factory=list)
    min_gap: float = float("inf")
    min_grad: float = float("inf")
    min_weight: float = float("inf")

    @property
    def passed(self) -> bool:
        return not self.violations


def jittered_grid(n: int, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted inputs covering [lo, hi] with consecutive spacing >= 0.7 * step."""
    base = np.linspace(lo, hi, n)
    step = (hi - lo) / (n - 1)
    return base + rng.uniform(-0.15, 0.15, size=n) * step


def check_transformer(
    t: MonotonicTransformer,
    inputs: np.ndarray,
    *,
    strict: bool = True,
    depth: int = 0,
    seed: int = 0,
) -> tuple[list[Violation], float, float]:
    """Ordering + derivative checks on sorted inputs; returns (violations, min_gap, min_grad)."""
    out = t.forward(np.asarray(inputs, dtype=np.float64))
    gaps = np.diff(out)
    violations = []
    bad = gaps < 0 if not strict else gaps <= 0
    if np.any(bad):
        i = int(np.argmin(gaps))
        violations.append(
            Violation(
                kind="ordering",
                depth=depth,
                seed=seed,
                detail=f"outputs not {'strictly ' if strict else ''}increasing at index {i}",
                inputs=[float(inputs[i]), float(inputs[i + 1])],
                outputs=[float(out[i]), float(out[i + 1])],
            )
        )
    grads = t.grad_input(np.asarray(inputs, dtype=np.float64))
    if np.any(grads <= 0):
        i = int(np.argmin(grads))
        violations.append(
            Violation(
                kind="gradient",
                depth=depth,
                seed=seed,
                detail=f"input derivative {grads[i]} <= 0",
                inputs=[float(inputs[i])],
                outputs=[float(out[i])],
            )
        )
    min_gap = float(gaps.min()) if gaps.size else float("inf")
    return violations, min_gap, float(grads.min())


def monotonicity_suite(
    n_transformers: int = 1000,
    depths: tuple[int, ...] = SUPPORTED_DEPTHS,
    n_inputs: int = 100,
    lo: float = -5.0,
    hi: float = 5.0,
    seed: int = 0,
) -> VerifyReport:
    """Strict suite over freshly initialized calibrators of each depth."""
    report = VerifyReport()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    for depth in depths:
        for k in range(n_transformers):
            t_seed = int(rng.integers(0, 2**31 - 1))
            t = transformer_init(depth=depth, seed=t_seed)
            inputs = jittered_grid(n_inputs, lo, hi, rng)
            violations, gap, grad = check_transformer(
                t, inputs, strict=True, depth=depth, seed=t_seed
            )
            report.checked += 1
            report.violations.extend(violations)
            report.min_gap = min(report.min_gap, gap)
            report.min_grad = min(report.min_grad, grad)
            report.min_weight = min(report.min_weight, min_effective_weight(t))
    return report


def scramble_transformer(
    t: MonotonicTransformer,
    rng: np.random.Generator,
    theta_range: tuple[float, float] = (-4.0, 2.0),
    bias_range: tuple[float, float] = (-3.0, 3.0),
) -> MonotonicTransformer:
    """Overwrite parameters with draws far outside the init distribution."""
    for layer in t.layers:
        layer.theta.value[...] = rng.uniform(*theta_range, size=layer.theta.shape)
        layer.bias.value[...] = rng.uniform(*bias_range, size=layer.bias.shape)
    return t


def scrambled_suite(
    n_transformers: int = 200,
    depths: tuple[int, ...] = SUPPORTED_DEPTHS,
    n_inputs: int = 100,
    lo: float = -5.0,
    hi: float = 5.0,
    seed: int = 0,
) -> VerifyReport:
    """Any-theta sweep: non-decreasing outputs, strictly positive derivative.

    Deep saturation can tie adjacent outputs at float64 resolution, so the
    strict-gap assertion is reserved for the init-distribution suite.
    """
    report = VerifyReport()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 12]))
    for depth in depths:
        for k in range(n_transformers):
            t_seed = int(rng.integers(0, 2**31 - 1))
            t = transformer_init(depth=depth, seed=t_seed)
            scramble_transformer(t, rng)
            inputs = jittered_grid(n_inputs, lo, hi, rng)
            violations, gap, grad = check_transformer(
                t, inputs, strict=False, depth=depth, seed=t_seed
            )
            report.checked += 1
            report.violations.extend(violations)
            report.min_gap = min(report.min_gap, gap)
            report.min_grad = min(report.min_grad, grad)
            report.min_weight = min(report.min_weight, min_effective_weight(t))
    return report


def model_suite(model: QualityModel, seed: int = 0, n_inputs: int = 200) -> VerifyReport:
    """Checks a trained model: every calibrator strict-monotone with positive weights."""
    report = VerifyReport()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    for ds in sorted(model.transformers):
        t = model.transformers[ds]
        inputs = jittered_grid(n_inputs, -5.0, 5.0, rng)
        violations, gap, grad = check_transformer(t, inputs, strict=True, depth=t.depth)
        for v in violations:
            v.detail = f"dataset {ds}: {v.detail}"
        report.checked += 1
        report.violations.extend(violations)
        report.min_gap = min(report.min_gap, gap)
        report.min_grad = min(report.min_grad, grad)
        w = min_effective_weight(t)
        report.min_weight = min(report.min_weight, w)
        if w < EPS_W:
            report.violations.append(
                Violation(
                    kind="positivity",
                    depth=t.depth,
                    seed=0,
                    detail=f"dataset {ds}: effective weight {w} below floor {EPS_W}",
                )
            )
    return report


# ---------------------------------------------------------------------------
# gradient verification sweep
# ---------------------------------------------------------------------------

@dataclass
class GradSuiteResult:
    cases: int = 0
    max_rel_err: float = 0.0
    worst_case: str = ""

    def absorb(self, label: str, err: float) -> None:
        self.cases += 1
        if err > self.max_rel_err:
            self.max_rel_err = err
            self.worst_case = label


def gradient_suite(seed: int = 0, tolerance: float = 1e-4) -> GradSuiteResult:
    """Finite-difference sweep over every layer, both losses, and a full model.

    Runs > 100 random cases; raises NumericError only on non-finite
    evaluations. Callers decide pass/fail from max_rel_err.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 21]))
    res = GradSuiteResult()

    # linear layers: d loss / d (x, w, b) with loss = sum(out * r)
    for k in range(30):
        n, di, do = rng.integers(1, 6), rng.integers(1, 7), rng.integers(1, 5)
        x = rng.uniform(-2, 2, (n, di))
        w = rng.uniform(-2, 2, (di, do))
        b = rng.uniform(-2, 2, (1, do))
        r = rng.uniform(-1, 1, (n, do))
        gx, gw, gb = linear_backward(x, w, r)
        rep = finite_diff_check(
            lambda ps: float(np.sum(linear_forward(ps[0], ps[1], ps[2]) * r)),
            [x, w, b],
            [gx, gw, gb],
            tolerance=tolerance,
        )
        res.absorb(f"linear[{k}]", rep.max_rel_err)

    # elu / relu on inputs kept away from the kink
    for k in range(25):
        x = rng.uniform(-2, 2, (rng.integers(1, 5), rng.integers(1, 6)))
        x = np.where(np.abs(x) < 1e-3, x + 0.01, x)
        r = rng.uniform(-1, 1, x.shape)
        alpha = float(rng.uniform(0.5, 2.0))
        rep = finite_diff_check(
            lambda ps: float(np.sum(elu(ps[0], alpha) * r)),
            [x],
            [elu_backward(x, r, alpha)],
            tolerance=tolerance,
        )
        res.absorb(f"elu[{k}]", rep.max_rel_err)
        rep = finite_diff_check(
            lambda ps: float(np.sum(relu(ps[0]) * r)),
            [x],
            [relu_backward(x, r)],
            tolerance=tolerance,
        )
        res.absorb(f"relu[{k}]", rep.max_rel_err)

    # bilinear pooling
    for k in range(15):
        f = rng.uniform(-2, 2, (rng.integers(1, 5), rng.integers(1, 7)))
        r = rng.uniform(-1, 1, (f.shape[0], f.shape[0]))
        rep = finite_diff_check(
            lambda ps: float(np.sum(bilinear_pool(ps[0]) * r)),
            [f],
            [bilinear_pool_backward(f, r)],
            tolerance=tolerance,
        )
        res.absorb(f"bilinear[{k}]", rep.max_rel_err)

    # losses, gradients with respect to the prediction vector
    for k in range(15):
        n = int(rng.integers(3, 12))
        qr = rng.uniform(-3, 3, n)
        qm = rng.uniform(0, 10, n)
        qr = np.where(np.abs(np.abs(qr - qm) - 1.0) < 1e-3, qr + 0.01, qr)
        rep = finite_diff_check(
            lambda ps: smooth_l1(ps[0], qm), [qr], [smooth_l1_grad(qr, qm)], tolerance=tolerance
        )
        res.absorb(f"smooth_l1[{k}]", rep.max_rel_err)
        rep = finite_diff_check(
            lambda ps: nin_loss(ps[0], qm), [qr], [nin_grad(qr, qm)], tolerance=tolerance
        )
        res.absorb(f"nin[{k}]", rep.max_rel_err)
        lam = float(rng.uniform(0, 2))
        rep = finite_diff_check(
            lambda ps: combined_loss(ps[0], qm, lam).total,
            [qr],
            [combined_grad(qr, qm, lam)],
            tolerance=tolerance,
        )
        res.absorb(f"combined[{k}]", rep.max_rel_err)

    # full end-to-end loss through head + calibrator on a small model
    for k in range(5):
        err = _end_to_end_case(rng, tolerance)
        res.absorb(f"end_to_end[{k}]", err)

    return res


def _end_to_end_case(rng: np.random.Generator, tolerance: float) -> float:
    model = build_model(
        channels=3,
        dataset_ids=["d0"],
        seed=int(rng.integers(0, 2**31 - 1)),
        cfcl_depth=3,
        cfcl_widths=[1, 4, 4, 1],
        head_h1=8,
        head_h2=6,
    )
    cal = model.transformers["d0"]
    n = 8
    lam = 1.0
    # resample until no sample sits within finite-difference reach of a ReLU,
    # ELU, or smooth-L1 kink (central differences would straddle it)
    for _ in range(20):
        x = rng.uniform(-1.5, 1.5, (n, 9))
        qm = rng.uniform(0, 10, n)
        qp, hc = head_forward(model.head, x)
        qr, cc = cal.forward_cached(qp)
        preacts = [np.abs(hc["z1"]), np.abs(hc["z2"])]
        preacts += [np.abs(z) for z in cc[1:-1:2]]
        kink = min(float(np.min(p)) for p in preacts)
        kink = min(kink, float(np.min(np.abs(np.abs(qr - qm) - 1.0))))
        if kink > 1e-3:
            break
    buffers = model.head.parameters() + cal.parameters()

    def loss_at(params) -> float:
        for buf, p in zip(buffers, params):
            buf.value[...] = p
        qp, _ = head_forward(model.head, x)
        qr, _ = cal.forward_cached(qp)
        return combined_loss(qr, qm, lam).total

    values = [buf.value.copy() for buf in buffers]
    model.zero_grad()
    qp, head_cache = head_forward(model.head, x)
    qr, cal_cache = cal.forward_cached(qp)
    g_qr = combined_grad(qr, qm, lam)
    g_qp = cal.backward(cal_cache, g_qr)
    head_backward(model.head, head_cache, g_qp[:, 0])
    analytic = [buf.grad.copy() for buf in buffers]

    rep = finite_diff_check(loss_at, values, analytic, tolerance=tolerance)
    for buf, p in zip(buffers, values):
        buf.value[...] = p
    if not np.isfinite(rep.max_rel_err):
        raise NumericError("end-to-end gradient check produced a non-finite error")
    return rep.max_rel_err
