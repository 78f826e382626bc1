"""Finite-difference verification of the analytic loss and LPAM gradients."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import cycle, product

import numpy as np

from . import lpam
from .losses import (
    LossWeights,
    compression_loss,
    distillation_loss,
    finite_diff_oracle,
    loss_gradients,
    max_relative_error,
)

LOSS_SHAPES = list(product((4, 8, 16), (3, 8)))
INPUTS = ("dv", "dl_expanded", "r_teacher", "r_student")


@dataclass(frozen=True)
class GradcheckResult:
    loss_max_rel_error: float
    lpam_max_rel_error: float
    max_radial: float  # max |<grad_X L, X>| over inputs and instances
    instances: int

    @property
    def max_rel_error(self) -> float:
        return max(self.loss_max_rel_error, self.lpam_max_rel_error)


def weighted_objective(batches: dict, w: LossWeights) -> float:
    return (w.lambda1 * compression_loss(batches["dv"], batches["dl_expanded"], batches["r_teacher"])
            + w.lambda2 * distillation_loss(batches["r_teacher"], batches["r_student"]))


def loss_instance(rng: np.random.Generator, n: int, d: int):
    batches = {k: rng.normal(size=(n, d)) for k in INPUTS}
    w = LossWeights(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)))
    return batches, w


def check_loss_instance(batches: dict, w: LossWeights, h: float = 1e-5):
    analytic = loss_gradients(*(batches[k] for k in INPUTS), w)
    worst, radial = 0.0, 0.0
    for key in INPUTS:
        def f(x, key=key):
            return weighted_objective({**batches, key: x}, w)

        worst = max(worst, max_relative_error(analytic[key], finite_diff_oracle(f, batches[key], h)))
        radial = max(radial, abs(float(np.sum(analytic[key] * batches[key]))))
    return worst, radial


def lpam_instance(rng: np.random.Generator):
    d = int(rng.integers(2, 7))
    p = lpam.LpamParams.init(d, rng)
    p.ln_v_gain = rng.uniform(0.5, 1.5, d)
    p.ln_l_gain = rng.uniform(0.5, 1.5, d)
    p.ln_v_bias = 0.3 * rng.normal(size=d)
    p.ln_l_bias = 0.3 * rng.normal(size=d)
    dv = rng.normal(size=(int(rng.integers(2, 6)), d))
    dl = rng.normal(size=(int(rng.integers(2, 5)), d))
    probe = rng.normal(size=(dv.shape[0], dl.shape[0]))
    return dv, dl, p, probe


def check_lpam_instance(dv, dl, p: lpam.LpamParams, probe, h: float = 1e-5) -> float:
    """Compare ``backward`` against central differences of ``sum(probe * R)``."""
    _, cache = lpam.forward(dv, dl, p)
    g = lpam.backward(probe, cache)

    def score(dv_, dl_, p_):
        return float(np.sum(probe * lpam.alignment_map(dv_, dl_, p_)))

    worst = max(
        max_relative_error(g.dv, finite_diff_oracle(lambda x: score(x, dl, p), dv, h)),
        max_relative_error(g.dl, finite_diff_oracle(lambda x: score(dv, x, p), dl, h)),
    )
    for name in lpam.PARAM_FIELDS:
        def f(x, name=name):
            q = p.copy()
            setattr(q, name, x)
            return score(dv, dl, q)

        worst = max(worst, max_relative_error(getattr(g, name), finite_diff_oracle(f, getattr(p, name), h)))
    return worst


def run_gradcheck(seed: int = 0, instances: int = 20, h: float = 1e-5) -> GradcheckResult:
    rng = np.random.default_rng(seed)
    loss_err, radial, lpam_err = 0.0, 0.0, 0.0
    shapes = cycle(LOSS_SHAPES)
    for _ in range(instances):
        n, d = next(shapes)
        err, rad = check_loss_instance(*loss_instance(rng, n, d), h=h)
        loss_err, radial = max(loss_err, err), max(radial, rad)
    for _ in range(instances):
        lpam_err = max(lpam_err, check_lpam_instance(*lpam_instance(rng), h=h))
    return GradcheckResult(loss_err, lpam_err, radial, instances)
