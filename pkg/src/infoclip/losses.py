"""Compression and distillation losses at alpha = 2, with analytic gradients.

All losses take raw feature batches (rows = paired samples) and build
trace-normalized linear-kernel Grams internally. With alpha = 2 every
entropy reduces to ``-log2 ||.||_F^2``, which is what makes closed-form
gradients cheap.

Sample pairing for the compression loss: row ``i`` of ``dv`` is a patch
embedding, row ``i`` of ``dl_expanded`` the class embedding paired with that
patch, and row ``i`` of ``r`` the patch's alignment-score row. All three
batches therefore share one sample axis of length ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, InputError
from .measures import gram_from_features, as_features

LN2 = math.log(2.0)


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InputError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class LossBreakdown:
    task: float
    compression: float
    distillation: float
    total: float


def _log2_fro_sq(g: np.ndarray) -> float:
    return math.log2(float(np.einsum("ij,ij->", g, g)))


def _log2_fro_sq_normalized(p: np.ndarray) -> float:
    """``log2 ||P / tr P||_F^2`` without forming the normalized matrix."""
    return _log2_fro_sq(p) - 2.0 * math.log2(float(np.trace(p)))


def _same_n(*batches):
    ns = {b.shape[0] for b in batches}
    if len(ns) != 1:
        raise DimensionError(f"all batches must share the sample count, got {sorted(ns)}")


def compression_loss(dv, dl_expanded, r, include_teacher_entropy: bool = False) -> float:
    """Information-bottleneck term ``S(G_R) - S(G_V, G_L, G_R)``.

    The teacher entropy ``S(G_V, G_L)`` is constant while the teacher is
    frozen and is left out unless ``include_teacher_entropy`` is set, in
    which case the full mutual information ``I(V, L; R)`` is returned.
    """
    dv, dl, r = as_features(dv, "dv"), as_features(dl_expanded, "dl_expanded"), as_features(r, "r")
    _same_n(dv, dl, r)
    gv, gl, gr = gram_from_features(dv), gram_from_features(dl), gram_from_features(r)
    loss = -_log2_fro_sq(gr) + _log2_fro_sq_normalized(gv * gl * gr)
    if include_teacher_entropy:
        loss -= _log2_fro_sq_normalized(gv * gl)
    return loss


def distillation_loss(r_teacher, r_student) -> float:
    """Negative teacher-student mutual information ``-I(R^T; R^S)``."""
    rt, rs = as_features(r_teacher, "r_teacher"), as_features(r_student, "r_student")
    _same_n(rt, rs)
    gt, gs = gram_from_features(rt), gram_from_features(rs)
    # log2||Gt||² + log2||Gs||² is symmetric under swapping, and so is Gt*Gs.
    return _log2_fro_sq(gt) + _log2_fro_sq(gs) - _log2_fro_sq_normalized(gt * gs)


def total_loss(task: float, lc: float, ld: float, w: LossWeights = LossWeights()) -> LossBreakdown:
    for name, v in (("task", task), ("lc", lc), ("ld", ld)):
        if not math.isfinite(v):
            raise InputError(f"{name} loss is not finite: {v}")
    return LossBreakdown(task, lc, ld, task + w.lambda1 * lc + w.lambda2 * ld)


# -- gradients -----------------------------------------------------------


def _d_log2_fro_sq(g: np.ndarray) -> np.ndarray:
    return (2.0 / LN2) * g / float(np.einsum("ij,ij->", g, g))


def _d_log2_fro_sq_normalized(p: np.ndarray) -> np.ndarray:
    out = (2.0 / LN2) * p / float(np.einsum("ij,ij->", p, p))
    out[np.diag_indices_from(out)] -= (2.0 / LN2) / float(np.trace(p))
    return out


def gram_backward(x: np.ndarray, d_gram: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. ``G = X X^T / ||X||_F^2`` back onto ``X``."""
    tr = float(np.einsum("ij,ij->", x, x))
    k = x @ x.T
    sym = 0.5 * (d_gram + d_gram.T)
    dk = sym / tr
    dk[np.diag_indices_from(dk)] -= float(np.einsum("ij,ij->", sym, k)) / (tr * tr)
    return 2.0 * dk @ x


def compression_grads(dv, dl_expanded, r, include_teacher_entropy: bool = False) -> dict:
    """Gradients of :func:`compression_loss` w.r.t. ``dv``, ``dl_expanded`` and ``r``."""
    dv, dl, r = as_features(dv, "dv"), as_features(dl_expanded, "dl_expanded"), as_features(r, "r")
    _same_n(dv, dl, r)
    gv, gl, gr = gram_from_features(dv), gram_from_features(dl), gram_from_features(r)
    dp = _d_log2_fro_sq_normalized(gv * gl * gr)
    d_gv = dp * gl * gr
    d_gl = dp * gv * gr
    d_gr = dp * gv * gl - _d_log2_fro_sq(gr)
    if include_teacher_entropy:
        dq = _d_log2_fro_sq_normalized(gv * gl)
        d_gv -= dq * gl
        d_gl -= dq * gv
    return {
        "dv": gram_backward(dv, d_gv),
        "dl_expanded": gram_backward(dl, d_gl),
        "r": gram_backward(r, d_gr),
    }


def distillation_grads(r_teacher, r_student) -> dict:
    """Gradients of :func:`distillation_loss` w.r.t. both alignment batches."""
    rt, rs = as_features(r_teacher, "r_teacher"), as_features(r_student, "r_student")
    _same_n(rt, rs)
    gt, gs = gram_from_features(rt), gram_from_features(rs)
    dp = _d_log2_fro_sq_normalized(gt * gs)
    return {
        "r_teacher": gram_backward(rt, _d_log2_fro_sq(gt) - dp * gs),
        "r_student": gram_backward(rs, _d_log2_fro_sq(gs) - dp * gt),
    }


def loss_gradients(dv, dl_expanded, r_teacher, r_student, w: LossWeights = LossWeights(),
                   include_teacher_entropy: bool = False) -> dict:
    """Gradient of ``lambda1 * L_c + lambda2 * L_d`` w.r.t. every input batch.

    ``L_c`` is evaluated on ``(dv, dl_expanded, r_teacher)`` and ``L_d`` on
    ``(r_teacher, r_student)``. Returns a dict keyed by input name; each
    array has the shape of its input.
    """
    batches = {
        "dv": as_features(dv, "dv"),
        "dl_expanded": as_features(dl_expanded, "dl_expanded"),
        "r_teacher": as_features(r_teacher, "r_teacher"),
        "r_student": as_features(r_student, "r_student"),
    }
    _same_n(*batches.values())
    out = {k: np.zeros_like(v) for k, v in batches.items()}
    if w.lambda1 != 0.0:
        gc = compression_grads(batches["dv"], batches["dl_expanded"], batches["r_teacher"],
                               include_teacher_entropy)
        out["dv"] += w.lambda1 * gc["dv"]
        out["dl_expanded"] += w.lambda1 * gc["dl_expanded"]
        out["r_teacher"] += w.lambda1 * gc["r"]
    if w.lambda2 != 0.0:
        gd = distillation_grads(batches["r_teacher"], batches["r_student"])
        out["r_teacher"] += w.lambda2 * gd["r_teacher"]
        out["r_student"] += w.lambda2 * gd["r_student"]
    return out


def l2_normalize_rows(x: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    return x / np.maximum(norms, eps)[:, None]


def l2_normalize_rows_backward(x: np.ndarray, upstream: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    norms = np.maximum(np.sqrt(np.einsum("ij,ij->i", x, x)), eps)
    y = x / norms[:, None]
    return (upstream - y * np.einsum("ij,ij->i", upstream, y)[:, None]) / norms[:, None]


# -- verification --------------------------------------------------------


def finite_diff_oracle(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``.

    The step for entry ``x_ij`` is ``h * max(1, |x_ij|)``.
    """
    if not h > 0:
        raise InputError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        step = h * max(1.0, abs(orig))
        x[idx] = orig + step
        f_plus = f(x)
        x[idx] = orig - step
        f_minus = f(x)
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * step)
    return grad


def max_relative_error(analytic, reference) -> float:
    """``max|a - b| / max(max|a|, max|b|)``; 0 when both are identically zero."""
    a, b = np.asarray(analytic), np.asarray(reference)
    scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - b))) / scale
