"""Learnable pixel-text alignment module.

Scores every patch embedding against every class embedding with a
scaled dot-product attention term plus a residual similarity term::

    Vn = LN_v(dv),  Ln = LN_l(dl)
    Q = Vn Wq^T,    K = Ln Wk^T
    R = Q K^T / sqrt(d) + Vn Ln^T

There is no softmax. Forward and backward are hand-written; ``forward``
returns a cache that ``backward`` consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionError, InputError

PARAM_FIELDS = ("wq", "wk", "ln_v_gain", "ln_v_bias", "ln_l_gain", "ln_l_bias")


@dataclass
class LpamParams:
    wq: np.ndarray
    wk: np.ndarray
    ln_v_gain: np.ndarray
    ln_v_bias: np.ndarray
    ln_l_gain: np.ndarray
    ln_l_bias: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        for name in PARAM_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        d = self.dim
        if self.wq.shape != (d, d) or self.wk.shape != (d, d):
            raise DimensionError(f"projections must be {d}x{d}")
        for name in PARAM_FIELDS[2:]:
            if getattr(self, name).shape != (d,):
                raise DimensionError(f"{name} must have length {d}")
        if not self.eps > 0:
            raise InputError("LayerNorm eps must be positive")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in PARAM_FIELDS):
            raise InputError("LPAM parameters must be finite")

    @property
    def dim(self) -> int:
        return self.wq.shape[0]

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, eps: float = 1e-5) -> "LpamParams":
        """Projections uniform in [-1/sqrt(d), 1/sqrt(d)]; LayerNorm as identity."""
        bound = 1.0 / np.sqrt(d)
        return cls(
            wq=rng.uniform(-bound, bound, size=(d, d)),
            wk=rng.uniform(-bound, bound, size=(d, d)),
            ln_v_gain=np.ones(d), ln_v_bias=np.zeros(d),
            ln_l_gain=np.ones(d), ln_l_bias=np.zeros(d),
            eps=eps,
        )

    def arrays(self) -> dict:
        return {n: getattr(self, n) for n in PARAM_FIELDS}

    def copy(self) -> "LpamParams":
        return LpamParams(**{n: a.copy() for n, a in self.arrays().items()}, eps=self.eps)

    def to_flat(self) -> np.ndarray:
        """``[eps, wq, wk, ln_v_gain, ln_v_bias, ln_l_gain, ln_l_bias]`` flattened row-major."""
        return np.concatenate([[self.eps], *(getattr(self, n).ravel() for n in PARAM_FIELDS)])

    @classmethod
    def from_flat(cls, flat) -> "LpamParams":
        flat = np.asarray(flat, dtype=np.float64).ravel()
        # length = 1 + 2 d^2 + 4 d
        d = int(round((-4.0 + np.sqrt(16.0 + 8.0 * (flat.size - 1))) / 4.0))
        if d < 1 or 1 + 2 * d * d + 4 * d != flat.size:
            raise DimensionError(f"{flat.size} values is not a valid LPAM parameter record")
        pos = 1
        parts = {}
        for name in PARAM_FIELDS:
            shape = (d, d) if name in ("wq", "wk") else (d,)
            size = int(np.prod(shape))
            parts[name] = flat[pos:pos + size].reshape(shape).copy()
            pos += size
        return cls(**parts, eps=float(flat[0]))


@dataclass
class LpamGrads:
    wq: np.ndarray
    wk: np.ndarray
    ln_v_gain: np.ndarray
    ln_v_bias: np.ndarray
    ln_l_gain: np.ndarray
    ln_l_bias: np.ndarray
    dv: np.ndarray
    dl: np.ndarray

    def params(self) -> dict:
        return {n: getattr(self, n) for n in PARAM_FIELDS}

    def accumulate(self, other: "LpamGrads") -> "LpamGrads":
        """Sum parameter gradients of two calls sharing one parameter set.

        Input gradients are not summed (the calls see different inputs);
        the result keeps ``self``'s.
        """
        summed = {n: getattr(self, n) + getattr(other, n) for n in PARAM_FIELDS}
        return LpamGrads(**summed, dv=self.dv, dl=self.dl)


@dataclass
class _LayerNormCache:
    xhat: np.ndarray
    inv_std: np.ndarray
    gain: np.ndarray


@dataclass
class LpamCache:
    params: LpamParams
    v: _LayerNormCache
    l: _LayerNormCache
    vn: np.ndarray
    ln: np.ndarray
    q: np.ndarray
    k: np.ndarray


def _layer_norm(x, gain, bias, eps):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"LayerNorm input must be 2-D, got shape {x.shape}")
    gain, bias = np.asarray(gain, dtype=np.float64), np.asarray(bias, dtype=np.float64)
    if gain.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
        raise DimensionError(f"gain/bias must have length {x.shape[1]}")
    if not eps > 0:
        raise InputError("eps must be positive")
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    var = np.mean(centered * centered, axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    return xhat * gain + bias, _LayerNormCache(xhat, inv_std, gain)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> np.ndarray:
    """Row-wise LayerNorm with population variance."""
    return _layer_norm(x, gain, bias, eps)[0]


def _layer_norm_backward(dy, cache: _LayerNormCache):
    dgain = np.sum(dy * cache.xhat, axis=0)
    dbias = np.sum(dy, axis=0)
    dxhat = dy * cache.gain
    dx = cache.inv_std * (
        dxhat
        - dxhat.mean(axis=1, keepdims=True)
        - cache.xhat * np.mean(dxhat * cache.xhat, axis=1, keepdims=True)
    )
    return dx, dgain, dbias


def forward(dv, dl, params: LpamParams):
    """Alignment map ``R`` of shape ``(patches, classes)`` and the backward cache."""
    dv, dl = np.asarray(dv, dtype=np.float64), np.asarray(dl, dtype=np.float64)
    d = params.dim
    if dv.ndim != 2 or dl.ndim != 2 or dv.shape[1] != d or dl.shape[1] != d:
        raise DimensionError(
            f"expected (patches, {d}) and (classes, {d}) inputs, got {dv.shape} and {dl.shape}"
        )
    vn, vcache = _layer_norm(dv, params.ln_v_gain, params.ln_v_bias, params.eps)
    ln, lcache = _layer_norm(dl, params.ln_l_gain, params.ln_l_bias, params.eps)
    q = vn @ params.wq.T
    k = ln @ params.wk.T
    r = q @ k.T / np.sqrt(d) + vn @ ln.T
    return r, LpamCache(params, vcache, lcache, vn, ln, q, k)


def alignment_map(dv, dl, params: LpamParams) -> np.ndarray:
    return forward(dv, dl, params)[0]


def backward(upstream, cache: LpamCache) -> LpamGrads:
    """Gradients of a scalar loss given ``upstream = dLoss/dR``."""
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != (cache.vn.shape[0], cache.ln.shape[0]):
        raise DimensionError(f"upstream shape {g.shape} does not match cached R")
    p = cache.params
    scale = 1.0 / np.sqrt(p.dim)
    dq = scale * g @ cache.k
    dk = scale * g.T @ cache.q
    dvn = dq @ p.wq + g @ cache.ln
    dln = dk @ p.wk + g.T @ cache.vn
    dv, dgv, dbv = _layer_norm_backward(dvn, cache.v)
    dl, dgl, dbl = _layer_norm_backward(dln, cache.l)
    return LpamGrads(
        wq=dq.T @ cache.vn, wk=dk.T @ cache.ln,
        ln_v_gain=dgv, ln_v_bias=dbv, ln_l_gain=dgl, ln_l_bias=dbl,
        dv=dv, dl=dl,
    )
