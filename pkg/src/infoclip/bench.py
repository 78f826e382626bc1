"""Synthetic pixel-text benchmark and a toy teacher-student distillation trainer.

Class prototypes live on the unit sphere; a scene is a grid of patch
embeddings, each a noisy copy of its class prototype. The "teacher" sees
these features as-is and is frozen. The "student" sees them through two
trainable linear adapters. One LPAM parameter set is shared by both
pathways.

Seen/unseen protocol: every scene draws patches from all classes. During
training, patches of unseen classes are kept but marked absent (no task
loss), and only seen class embeddings are scored against; unseen class
prototypes are used only at evaluation time.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import lpam
from .errors import ConvergenceError, DimensionError, InputError
from .losses import (
    LossBreakdown,
    LossWeights,
    compression_loss,
    distillation_loss,
    l2_normalize_rows,
    l2_normalize_rows_backward,
    loss_gradients,
    total_loss,
)
from .measures import EntropySpec, gram_from_features, mutual_information

# Stream tags for seeding independent random streams off one config seed.
_WORLD, _TRAIN, _EVAL, _DIAG, _PAIRS, _INIT = range(6)

ABSENT = -1  # training label of a patch whose class is held out


class DivergenceError(ConvergenceError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    steps: int = 200
    learning_rate: float = 1e-2
    batch_pairs: int = 128
    pairs_per_patch: int = 2
    lambda1: float = 1.0
    lambda2: float = 1.0
    task_weight: float = 1.0
    height: int = 8
    width: int = 8
    num_classes: int = 6
    dim: int = 8
    noise_sigma: float = 0.1
    optimizer: Literal["adam", "sgd"] = "adam"
    unseen_fraction: float = 0.0
    eval_scenes: int = 4
    include_teacher_entropy: bool = False
    alpha: float = 2.0
    method: Literal["eigen", "frobenius"] = "frobenius"
    norm: Literal["trace", "diagonal"] = "trace"

    def __post_init__(self):
        counts = ("height", "width", "num_classes", "dim", "batch_pairs", "pairs_per_patch")
        for name in counts:
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if self.steps < 0 or self.eval_scenes < 0:
            raise InputError("steps and eval_scenes must be non-negative")
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be positive")
        if not 0.0 <= self.unseen_fraction < 1.0:
            raise InputError("unseen_fraction must lie in [0, 1)")
        if self.noise_sigma < 0 or self.task_weight < 0:
            raise InputError("noise_sigma and task_weight must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise InputError(f"unknown optimizer {self.optimizer!r}")
        if self.pairs_per_patch > self.num_seen:
            raise InputError("pairs_per_patch cannot exceed the number of seen classes")
        if self.batch_pairs < 2 * self.pairs_per_patch:
            raise InputError("batch_pairs must cover at least two patches")
        if self.alpha != 2.0 or self.norm != "trace":
            raise InputError("training uses closed-form gradients: alpha must be 2 and norm 'trace'")
        LossWeights(self.lambda1, self.lambda2)
        EntropySpec(self.alpha, self.method)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda1, self.lambda2)

    @property
    def patches(self) -> int:
        return self.height * self.width

    @property
    def num_unseen(self) -> int:
        if self.unseen_fraction == 0.0:
            return 0
        return min(max(1, round(self.unseen_fraction * self.num_classes)), self.num_classes - 1)

    @property
    def num_seen(self) -> int:
        return self.num_classes - self.num_unseen


@dataclass(frozen=True)
class SyntheticScene:
    patch_embeddings: np.ndarray  # (H*W, d), unit rows
    class_embeddings: np.ndarray  # (N_C, d), the prototypes
    labels: np.ndarray  # (H*W,) int
    seen_mask: np.ndarray  # (N_C,) bool


@dataclass
class StudentAdapter:
    a_v: np.ndarray
    a_l: np.ndarray

    @classmethod
    def identity(cls, d: int) -> "StudentAdapter":
        return cls(np.eye(d), np.eye(d))

    def copy(self) -> "StudentAdapter":
        return StudentAdapter(self.a_v.copy(), self.a_l.copy())


@dataclass(frozen=True)
class StepRecord:
    step: int
    losses: LossBreakdown
    mi_ts: float


@dataclass
class TrainReport:
    config: TrainConfig
    records: list[StepRecord]
    initial_mi: float
    final_mi: float
    initial_metrics: dict
    final_metrics: dict
    params: lpam.LpamParams
    adapters: StudentAdapter
    wall_clock: float = 0.0
    adapter_grad_norms: list[float] = field(default_factory=list)


def _rng(cfg: TrainConfig, *tags: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, *tags])


def world(cfg: TrainConfig):
    """Class prototypes and seen mask shared by every scene of a config."""
    if cfg.dim < 2:
        raise DimensionError("embedding dimension must be at least 2")
    rng = _rng(cfg, _WORLD)
    protos = rng.normal(size=(cfg.num_classes, cfg.dim))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)
    seen = np.ones(cfg.num_classes, dtype=bool)
    seen[rng.permutation(cfg.num_classes)[: cfg.num_unseen]] = False
    return protos, seen


def generate_scene(cfg: TrainConfig, seed: int, split: Literal["train", "eval"] = "eval") -> SyntheticScene:
    """Deterministic scene for ``(cfg, seed, split)``.

    Labels are uniform over all classes; ``split`` only selects an
    independent random stream so train and eval scenes never coincide.
    """
    protos, seen = world(cfg)
    rng = np.random.default_rng([cfg.seed, _TRAIN if split == "train" else _EVAL, seed])
    labels = rng.integers(0, cfg.num_classes, size=cfg.patches)
    x = protos[labels] + cfg.noise_sigma * rng.normal(size=(cfg.patches, cfg.dim))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    x = x / np.where(norms > 0, norms, 1.0)
    if cfg.noise_sigma == 0.0:
        x = protos[labels].copy()
    return SyntheticScene(x, protos.copy(), labels, seen.copy())


def task_loss(r, labels, ignore_index: int | None = None):
    """Mean softmax cross-entropy of alignment rows against labels, and its gradient.

    Rows labelled ``ignore_index`` contribute nothing and are excluded
    from the mean.
    """
    r = np.asarray(r, dtype=np.float64)
    labels = np.asarray(labels)
    if r.ndim != 2 or labels.shape != (r.shape[0],):
        raise DimensionError(f"need (patches, classes) scores and one label per patch, got {r.shape}, {labels.shape}")
    keep = np.ones(labels.shape, dtype=bool) if ignore_index is None else labels != ignore_index
    rows = np.flatnonzero(keep)
    lab = labels[rows]
    if lab.size and (lab.min() < 0 or lab.max() >= r.shape[1]):
        raise InputError("label index out of range")
    grad = np.zeros_like(r)
    if rows.size == 0:
        return 0.0, grad
    z = r[rows]
    shifted = z - z.max(axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(rows.size), lab]))
    probs = np.exp(shifted - log_z[:, None])
    probs[np.arange(rows.size), lab] -= 1.0
    grad[rows] = probs / rows.size
    return loss, grad


def sample_pairs(cfg: TrainConfig, rng: np.random.Generator, labels: np.ndarray):
    """Row indices (patch, class) for one loss batch.

    Patches are drawn uniformly with replacement; each contributes its own
    class plus ``pairs_per_patch - 1`` distinct distractors. ``labels`` and
    the returned class indices are positions among the seen classes; an
    absent patch (label ``ABSENT``) gets ``pairs_per_patch`` distinct random
    seen classes.
    """
    k = cfg.pairs_per_patch
    n_patches = cfg.batch_pairs // k
    patches = rng.integers(0, labels.size, size=n_patches)
    classes = np.empty((n_patches, k), dtype=np.intp)
    for i, p in enumerate(patches):
        if labels[p] == ABSENT:
            classes[i] = rng.choice(cfg.num_seen, size=k, replace=False)
        else:
            others = np.delete(np.arange(cfg.num_seen), labels[p])
            classes[i, 0] = labels[p]
            classes[i, 1:] = rng.choice(others, size=k - 1, replace=False)
    return np.repeat(patches, k), classes.ravel()


def _student_inputs(scene_patches, class_emb, adapters: StudentAdapter):
    return scene_patches @ adapters.a_v.T, class_emb @ adapters.a_l.T


def teacher_student_mi(cfg: TrainConfig, params, adapters, scene: SyntheticScene) -> float:
    """I(R^T; R^S) over all patches of a scene, scored against seen classes."""
    cls = scene.class_embeddings[scene.seen_mask]
    rt = lpam.alignment_map(scene.patch_embeddings, cls, params)
    sv, sl = _student_inputs(scene.patch_embeddings, cls, adapters)
    rs = lpam.alignment_map(sv, sl, params)
    spec = EntropySpec(cfg.alpha, cfg.method)
    return mutual_information(
        gram_from_features(l2_normalize_rows(rt)), gram_from_features(l2_normalize_rows(rs)), spec
    )


def segmentation_metrics(pred, labels, num_classes: int, seen_mask=None) -> dict:
    """Accuracy and intersection-over-union from predicted and true labels.

    Classes absent from both prediction and ground truth get IoU NaN and
    are excluded from the means.
    """
    pred, labels = np.asarray(pred).ravel(), np.asarray(labels).ravel()
    seen_mask = np.ones(num_classes, dtype=bool) if seen_mask is None else np.asarray(seen_mask)
    inter = np.bincount(labels[pred == labels], minlength=num_classes).astype(float)
    area_p = np.bincount(pred, minlength=num_classes).astype(float)
    area_t = np.bincount(labels, minlength=num_classes).astype(float)
    union = area_p + area_t - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / union, np.nan)

    def mean(x):
        x = x[~np.isnan(x)]
        return float(x.mean()) if x.size else float("nan")

    def acc(mask):
        sel = mask[labels]
        return float(np.mean(pred[sel] == labels[sel])) if sel.any() else float("nan")

    return {
        "accuracy": float(np.mean(pred == labels)) if labels.size else float("nan"),
        "seen_accuracy": acc(seen_mask),
        "unseen_accuracy": acc(~seen_mask),
        "per_class_iou": iou.tolist(),
        "miou": mean(iou),
        "seen_miou": mean(iou[seen_mask]),
        "unseen_miou": mean(iou[~seen_mask]),
    }


def evaluate(params: lpam.LpamParams, adapters: StudentAdapter, scenes) -> dict:
    """Argmax over all classes of the student alignment rows, pooled over scenes."""
    scenes = list(scenes)
    if not scenes:
        raise InputError("no scenes to evaluate")
    preds, labels = [], []
    for sc in scenes:
        sv, sl = _student_inputs(sc.patch_embeddings, sc.class_embeddings, adapters)
        preds.append(np.argmax(lpam.alignment_map(sv, sl, params), axis=1))
        labels.append(sc.labels)
    return segmentation_metrics(
        np.concatenate(preds), np.concatenate(labels), scenes[0].seen_mask.size, scenes[0].seen_mask
    )


def eval_scenes(cfg: TrainConfig) -> list[SyntheticScene]:
    return [generate_scene(cfg, i, "eval") for i in range(cfg.eval_scenes)]


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        for name in sorted(params):
            g = grads[name]
            m = self.m.get(name, np.zeros_like(g))
            v = self.v.get(name, np.zeros_like(g))
            m = self.b1 * m + (1 - self.b1) * g
            v = self.b2 * v + (1 - self.b2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - self.b1 ** self.t)
            v_hat = v / (1 - self.b2 ** self.t)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params: dict, grads: dict):
        for name in sorted(params):
            params[name] -= self.lr * grads[name]


def _scatter_rows(n_rows: int, idx: np.ndarray, rows: np.ndarray) -> np.ndarray:
    out = np.zeros((n_rows, rows.shape[1]))
    np.add.at(out, idx, rows)
    return out


def train_step(cfg: TrainConfig, params: lpam.LpamParams, adapters: StudentAdapter,
               scene: SyntheticScene, rng: np.random.Generator):
    """Losses and gradients for one step.

    Returns ``(breakdown, lpam_param_grads, adapter_grads)``. The teacher
    pathway receives gradient from ``L_c`` and ``L_d``, and only into the
    shared LPAM parameters. The student pathway receives ``L_task`` and
    ``L_d`` and passes them on to the adapters.
    """
    seen_idx = np.flatnonzero(scene.seen_mask)
    position = np.full(scene.seen_mask.size, ABSENT)
    position[seen_idx] = np.arange(seen_idx.size)
    labels = position[scene.labels]

    dv_t = scene.patch_embeddings
    dl_t = scene.class_embeddings[seen_idx]
    dv_s, dl_s = _student_inputs(dv_t, dl_t, adapters)
    r_t, cache_t = lpam.forward(dv_t, dl_t, params)
    r_s, cache_s = lpam.forward(dv_s, dl_s, params)

    task, d_rs = task_loss(r_s, labels, ignore_index=ABSENT)
    d_rs = cfg.task_weight * d_rs
    d_rt = np.zeros_like(r_t)

    p_idx, c_idx = sample_pairs(cfg, rng, labels)
    rt_rows, rs_rows = r_t[p_idx], r_s[p_idx]
    rt_n, rs_n = l2_normalize_rows(rt_rows), l2_normalize_rows(rs_rows)
    dv_pairs, dl_pairs = dv_t[p_idx], dl_t[c_idx]
    w = cfg.weights
    lc = compression_loss(dv_pairs, dl_pairs, rt_n, cfg.include_teacher_entropy)
    ld = distillation_loss(rt_n, rs_n)
    breakdown = total_loss(cfg.task_weight * task, lc, ld, w)
    if not math.isfinite(breakdown.total):
        raise DivergenceError("training loss became non-finite")

    g = loss_gradients(dv_pairs, dl_pairs, rt_n, rs_n, w, cfg.include_teacher_entropy)
    d_rt += _scatter_rows(r_t.shape[0], p_idx, l2_normalize_rows_backward(rt_rows, g["r_teacher"]))
    d_rs += _scatter_rows(r_s.shape[0], p_idx, l2_normalize_rows_backward(rs_rows, g["r_student"]))

    g_t = lpam.backward(d_rt, cache_t)
    g_s = lpam.backward(d_rs, cache_s)
    shared = g_s.accumulate(g_t).params()
    adapter_grads = {
        "a_v": g_s.dv.T @ dv_t,
        "a_l": g_s.dl.T @ dl_t,
    }
    return breakdown, shared, adapter_grads


def train_distill(cfg: TrainConfig) -> TrainReport:
    """Full objective ``task + lambda1 * L_c + lambda2 * L_d`` on synthetic scenes.

    A fresh training scene is drawn every step. The teacher-student mutual
    information is tracked on one fixed diagnostic scene.
    """
    start = time.perf_counter()
    params = lpam.LpamParams.init(cfg.dim, _rng(cfg, _INIT))
    adapters = StudentAdapter.identity(cfg.dim)
    # Training steps use scene seeds 1..steps; seed 0 is reserved for diagnostics.
    diag = generate_scene(cfg, 0, "train")
    evals = eval_scenes(cfg)
    initial_metrics = evaluate(params, adapters, evals) if evals else {}
    initial_mi = teacher_student_mi(cfg, params, adapters, diag)
    pair_rng = _rng(cfg, _PAIRS)
    opt = _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else _SGD(cfg.learning_rate)

    records: list[StepRecord] = []
    adapter_norms: list[float] = []
    mi = initial_mi
    for step in range(1, cfg.steps + 1):
        scene = generate_scene(cfg, step, "train")
        breakdown, shared, adapter_grads = train_step(cfg, params, adapters, scene, pair_rng)
        records.append(StepRecord(step, breakdown, mi))
        adapter_norms.append(float(max(np.max(np.abs(g)) for g in adapter_grads.values())))
        state = {**params.arrays(), "a_v": adapters.a_v, "a_l": adapters.a_l}
        opt.step(state, {**shared, **adapter_grads})
        mi = teacher_student_mi(cfg, params, adapters, diag)

    return TrainReport(
        config=cfg,
        records=records,
        initial_mi=initial_mi,
        final_mi=mi,
        initial_metrics=initial_metrics,
        final_metrics=evaluate(params, adapters, evals) if evals else {},
        params=params,
        adapters=adapters,
        wall_clock=time.perf_counter() - start,
        adapter_grad_norms=adapter_norms,
    )

