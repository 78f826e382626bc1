"""Matrix-based Renyi entropy, joint entropy and mutual information.

A feature batch is an ``(n, d)`` array with one sample per row. Its Gram
matrix under the linear kernel is normalized to unit trace, and entropies
are functionals of the Gram spectrum, in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from . import tensor
from .errors import DegenerateInputError, DimensionError, InputError, UnsupportedError

Method = Literal["eigen", "frobenius"]
Norm = Literal["trace", "diagonal"]

GRAM_TOL = 1e-10


@dataclass(frozen=True)
class EntropySpec:
    """Order ``alpha`` of the entropy and how it is evaluated.

    ``method="frobenius"`` is the closed form ``-log2 ||G||_F^2`` and is
    only valid for ``alpha == 2``.
    """

    alpha: float = 2.0
    method: Method = "frobenius"

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise UnsupportedError(f"alpha must be a positive finite number, got {self.alpha}")
        if self.alpha == 1.0:
            raise UnsupportedError("alpha = 1 (Shannon limit) is not supported; use e.g. 1.01")
        if self.method not in ("eigen", "frobenius"):
            raise UnsupportedError(f"unknown entropy method {self.method!r}")
        if self.method == "frobenius" and self.alpha != 2.0:
            raise UnsupportedError("the Frobenius fast path requires alpha = 2")


ALPHA2 = EntropySpec(2.0, "frobenius")


def as_features(x, name="features") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D (n, d) array, got shape {x.shape}")
    if x.shape[0] < 2 or x.shape[1] < 1:
        raise DimensionError(f"{name} needs at least 2 samples and 1 feature, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} has non-finite values")
    return x


def gram_from_features(x, norm: Norm = "trace") -> np.ndarray:
    """Normalized linear-kernel Gram matrix of a feature batch.

    ``norm="trace"`` gives ``X X^T / tr(X X^T)``; ``norm="diagonal"`` gives
    ``K_ij / (n sqrt(K_ii K_jj))``. Both have unit trace, but they are
    different matrices and should not be mixed within one computation.
    """
    x = as_features(x)
    k = x @ x.T
    if norm == "trace":
        tr = float(np.einsum("ij,ij->", x, x))
        if not tr > 0.0:
            raise DegenerateInputError("feature batch is all zeros (Gram trace is 0)")
        g = k / tr
    elif norm == "diagonal":
        diag = np.einsum("ij,ij->i", x, x)
        if np.any(diag <= 0.0):
            raise DegenerateInputError(f"zero feature row at index {int(np.argmin(diag))}")
        s = np.sqrt(diag)
        g = k / np.outer(s, s) / x.shape[0]
    else:
        raise UnsupportedError(f"unknown normalization {norm!r}")
    return 0.5 * (g + g.T)


def check_gram(g) -> np.ndarray:
    """Validate shape, symmetry and unit trace of a Gram matrix."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
        raise DimensionError(f"Gram matrix must be square, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InputError("Gram matrix has non-finite entries")
    if tensor.max_asymmetry(g) > GRAM_TOL:
        raise InputError("Gram matrix is not symmetric")
    tr = float(np.trace(g))
    if abs(tr - 1.0) > GRAM_TOL:
        raise InputError(f"Gram matrix must have unit trace, got {tr!r}")
    return g


def renyi_entropy(g, spec: EntropySpec = ALPHA2) -> float:
    """Matrix-based Renyi entropy ``log2(sum lambda_i^alpha) / (1 - alpha)``."""
    g = check_gram(g)
    if spec.method == "frobenius":
        return -math.log2(tensor.frobenius_sq(g))
    lam = np.clip(tensor.sym_eigenvalues(g).eigenvalues, 0.0, None)
    if not np.any(lam > 0.0):
        raise DegenerateInputError("all eigenvalues are zero")
    power_sum = float(np.sum(lam[lam > 0.0] ** spec.alpha))
    return math.log2(power_sum) / (1.0 - spec.alpha)


def hadamard_normalized(gs: Sequence[np.ndarray]) -> np.ndarray:
    """Trace-normalized Hadamard product of one or more Gram matrices."""
    if len(gs) == 0:
        raise DimensionError("need at least one Gram matrix")
    gs = [np.asarray(g, dtype=np.float64) for g in gs]
    prod = gs[0] if len(gs) == 1 else tensor.hadamard(*gs)
    tr = float(np.trace(prod))
    if not tr > 0.0:
        raise DegenerateInputError("Hadamard product has non-positive trace")
    return prod / tr


def joint_entropy(gs: Sequence[np.ndarray], spec: EntropySpec = ALPHA2) -> float:
    return renyi_entropy(hadamard_normalized([check_gram(g) for g in gs]), spec)


def mutual_information(a, b, spec: EntropySpec = ALPHA2) -> float:
    """``S(a) + S(b) - S(a, b)``; symmetric in its arguments."""
    a, b = check_gram(a), check_gram(b)
    if a.shape != b.shape:
        raise DimensionError(f"Gram matrices of different size: {a.shape} vs {b.shape}")
    # a∘b == b∘a bitwise, so the value does not depend on argument order.
    return renyi_entropy(a, spec) + renyi_entropy(b, spec) - joint_entropy([a, b], spec)
